"""Detector plugins and the registry runner.

A plugin declares the artifact kinds it applies to and turns one artifact
into verdicts, calling external services through the ``clients`` handle
where needed. A failure inside one plugin on one artifact is recorded on
that artifact and never aborts the run.
"""

from __future__ import annotations

import io
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import ConfigurationError, InputError
from ..extractor import ArtifactKind
from ..report import ArtifactRecord, DeviousnessReport
from .cross import GridParams, TemplateCrossDetector
from .judges import judge_censored, judge_malicious
from .keywords import KeywordSet, default_close_keywords, default_gambling_keywords, detect_close_keywords, detect_gambling
from .synth import DEFAULT_SCALE_RANGE, cross_symbols, scale_sides, template_bank
from .verdicts import Group, Verdict

log = logging.getLogger(__name__)


def decode_image(payload: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(payload)) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise InputError(f"undecodable image: {exc}") from exc


class DetectorPlugin:
    name = "plugin"
    kinds: tuple = ()

    def __init__(self, enabled=True):
        self.enabled = enabled

    def applies(self, artifact):
        return self.enabled and ArtifactKind(artifact.kind) in self.kinds

    def run(self, artifact, clients) -> list:
        raise NotImplementedError


class CrossDeceptionPlugin(DetectorPlugin):
    """Close-button symbols baked into ad images.

    Without an explicit detector, a template detector is built per image
    size from the bundled symbols at every side in ``scale_range``.
    """

    name = "cross"
    kinds = (ArtifactKind.IMAGE,)

    def __init__(self, detector=None, params: GridParams = GridParams(), scale_range=DEFAULT_SCALE_RANGE, enabled=True):
        super().__init__(enabled)
        self.detector = detector
        self.params = params
        self.scale_range = scale_range
        self._symbols = None
        self._by_shape = {}

    def _detector_for(self, shape):
        if self.detector is not None:
            return self.detector
        if shape not in self._by_shape:
            if self._symbols is None:
                self._symbols = cross_symbols()
            sides = scale_sides(self.scale_range, shape)
            self._by_shape[shape] = TemplateCrossDetector(template_bank(self._symbols, sides), self.params)
        return self._by_shape[shape]

    def run(self, artifact, clients):
        image = decode_image(artifact.payload_bytes)
        detector = self._detector_for(image.shape[:2])
        boxes = detector.detect(image)
        evidence = {"boxes": [[b.x, b.y, b.w, b.h, round(b.confidence, 4)] for b in boxes]}
        return [Verdict(bool(boxes), Group.CLICK_DECEPTIVE, (), evidence, getattr(detector, "name", self.name))]


class CloseTextPlugin(DetectorPlugin):
    name = "close-text"
    kinds = (ArtifactKind.IMAGE,)

    def __init__(self, keywords=None, enabled=True):
        super().__init__(enabled)
        self.keywords = KeywordSet(keywords if keywords is not None else default_close_keywords())

    def run(self, artifact, clients):
        ocr = clients.ocr.extract(artifact.payload_bytes)
        return [detect_close_keywords(ocr.texts, self.keywords)]


class GamblingPlugin(DetectorPlugin):
    name = "gambling-text"
    kinds = (ArtifactKind.IMAGE,)

    def __init__(self, keywords=None, enabled=True):
        super().__init__(enabled)
        self.keywords = KeywordSet(keywords if keywords is not None else default_gambling_keywords())

    def run(self, artifact, clients):
        ocr = clients.ocr.extract(artifact.payload_bytes)
        return [detect_gambling(ocr.texts, self.keywords)]


class CensoredImagePlugin(DetectorPlugin):
    name = "censored-image"
    kinds = (ArtifactKind.IMAGE,)

    def __init__(self, threshold=4, enabled=True):
        super().__init__(enabled)
        self.threshold = threshold

    def run(self, artifact, clients):
        result = clients.vision.classify(artifact.payload_bytes)
        return [judge_censored(result.likelihoods, self.threshold)]


class MaliciousArtifactPlugin(DetectorPlugin):
    name = "av-scan"
    kinds = (ArtifactKind.SCRIPT, ArtifactKind.REDIRECT_CHAIN, ArtifactKind.DOWNLOADED_APP)

    def __init__(self, threshold=3, enabled=True):
        super().__init__(enabled)
        self.threshold = threshold

    def run(self, artifact, clients):
        scan = clients.scanner.scan(artifact.payload_bytes)
        return [judge_malicious(scan, artifact.kind, self.threshold)]


def default_registry(close_keywords=None, gambling_keywords=None, cross_detector=None, params=GridParams(), disabled=()):
    """Ordered plugin list; names in ``disabled`` are switched off."""
    registry = [
        CrossDeceptionPlugin(cross_detector, params),
        CloseTextPlugin(close_keywords),
        GamblingPlugin(gambling_keywords),
        CensoredImagePlugin(),
        MaliciousArtifactPlugin(),
    ]
    unknown = set(disabled) - {p.name for p in registry}
    if unknown:
        raise ConfigurationError(f"unknown detector names: {sorted(unknown)}")
    for plugin in registry:
        if plugin.name in disabled:
            plugin.enabled = False
    return registry


def _run_one(artifact, registry, clients):
    record = ArtifactRecord.for_artifact(artifact)
    for plugin in registry:
        if not plugin.applies(artifact):
            continue
        try:
            record.verdicts.extend(plugin.run(artifact, clients))
        except Exception as exc:  # recorded per artifact, never fatal
            log.warning("detector %s failed on %s: %s", plugin.name, record.hash[:12], exc)
            record.errors.append({"detector": plugin.name, "error": type(exc).__name__, "message": str(exc)})
    return record


def run_detectors(artifacts, registry, clients, app_id="", workers=1) -> DeviousnessReport:
    """Route every artifact to its applicable plugins; results keep input order."""
    if not registry:
        raise ConfigurationError("detector registry is empty")
    artifacts = list(artifacts)
    if workers > 1 and len(artifacts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda a: _run_one(a, registry, clients), artifacts))
    else:
        records = [_run_one(a, registry, clients) for a in artifacts]
    return DeviousnessReport(app_id=app_id, artifacts=records)
