"""Clients for the external scanner, vision and OCR services.

Every client is keyed by the SHA-256 of the submitted payload, caches
results for its lifetime, retries transport failures with exponential
backoff and raises typed errors. Mock clients answer from fixture tables
and share the same caching and retry machinery, so the whole pipeline can
run offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field

import requests

from .errors import InputError, RateLimitError, ServiceError, ValidationError

log = logging.getLogger(__name__)

VISION_CATEGORIES = ("porn", "violence", "medical")

# Likelihood names used by common safe-search style APIs, mapped to 1..5.
_LIKELIHOOD_NAMES = {
    "VERY_UNLIKELY": 1,
    "UNLIKELY": 2,
    "POSSIBLE": 3,
    "LIKELY": 4,
    "VERY_LIKELY": 5,
}
_VISION_ALIASES = {"adult": "porn", "porn": "porn", "violence": "violence", "medical": "medical"}


def content_hash(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class ScanResult:
    artifact_hash: str
    engines: tuple = ()
    scanned_at: float = 0.0

    def __post_init__(self):
        names = [name for name, _ in self.engines]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate engine names in scan result")

    @property
    def positive_engines(self):
        return [name for name, flagged in self.engines if flagged]

    @property
    def positives(self):
        return len(self.positive_engines)


@dataclass(frozen=True)
class VisionResult:
    likelihoods: dict = field(default_factory=dict)

    def __getitem__(self, category):
        return self.likelihoods[category]


@dataclass(frozen=True)
class OcrToken:
    text: str
    box: tuple | None = None


@dataclass(frozen=True)
class OcrResult:
    tokens: tuple = ()

    @property
    def texts(self):
        return [t.text for t in self.tokens]


class TransientError(Exception):
    """Transport failure worth retrying."""


class ServiceClient:
    """Cache, retry and concurrency-cap machinery shared by all clients."""

    service = "service"

    def __init__(self, max_attempts=3, backoff=1.0, max_concurrency=4, sleep=time.sleep, clock=time.time):
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.sleep = sleep
        self.clock = clock
        self.transport_calls = 0
        self._cache = {}
        self._lock = threading.Lock()
        self._key_locks = {}
        self._slots = threading.BoundedSemaphore(max_concurrency)

    def _request(self, digest, payload):
        raise NotImplementedError

    def _parse(self, digest, doc):
        raise NotImplementedError

    def _key_lock(self, digest):
        with self._lock:
            return self._key_locks.setdefault(digest, threading.Lock())

    def call(self, payload: bytes):
        if not payload:
            raise InputError(f"{self.service}: empty payload")
        digest = content_hash(payload)
        with self._key_lock(digest):
            with self._lock:
                if digest in self._cache:
                    return self._cache[digest]
            result = self._parse(digest, self._with_retry(digest, payload))
            with self._lock:
                self._cache[digest] = result
            return result

    def _with_retry(self, digest, payload):
        delay = self.backoff
        for attempt in range(1, self.max_attempts + 1):
            try:
                with self._slots:
                    with self._lock:
                        self.transport_calls += 1
                    return self._request(digest, payload)
            except TransientError as exc:
                if attempt == self.max_attempts:
                    raise ServiceError(f"{self.service} unavailable after {attempt} attempts: {exc}") from exc
                log.info("%s attempt %d failed (%s), retrying in %.1fs", self.service, attempt, exc, delay)
                self.sleep(delay)
                delay *= 2


# -- response parsing ---------------------------------------------------------------


def parse_scan_doc(digest, doc, scanned_at=0.0) -> ScanResult:
    """Accepts ``{engines: {name: bool}}``, ``{positives, total}`` or a
    ``data.attributes.last_analysis_results`` per-engine table."""
    if "data" in doc:
        results = doc["data"].get("attributes", {}).get("last_analysis_results", {})
        engines = tuple(
            (name, (res or {}).get("category") in ("malicious", "suspicious")) for name, res in sorted(results.items())
        )
    elif "engines" in doc:
        raw = doc["engines"]
        items = raw.items() if isinstance(raw, dict) else raw
        engines = tuple((str(name), bool(flag)) for name, flag in items)
    elif "positives" in doc:
        positives = int(doc["positives"])
        total = int(doc.get("total", max(positives, 60)))
        if not 0 <= positives <= total:
            raise ValidationError(f"positives {positives} outside 0..{total}")
        engines = tuple((f"engine-{i + 1:02d}", i < positives) for i in range(total))
    else:
        raise ValidationError("scan response lists no engine verdicts")
    return ScanResult(digest, engines, scanned_at)


def parse_vision_doc(doc) -> VisionResult:
    table = doc.get("safeSearchAnnotation", doc)
    out = {}
    for key, value in table.items():
        category = _VISION_ALIASES.get(key.lower())
        if category is None:
            continue
        if isinstance(value, str):
            value = _LIKELIHOOD_NAMES.get(value.upper(), 0)
        if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 5:
            raise ValidationError(f"vision likelihood for {key!r} outside 1..5: {value!r}")
        out[category] = value
    for category in VISION_CATEGORIES:
        out.setdefault(category, 1)
    return VisionResult({c: out[c] for c in VISION_CATEGORIES})


def parse_ocr_doc(doc) -> OcrResult:
    tokens = []
    for tok in doc.get("tokens", []):
        if isinstance(tok, str):
            tokens.append(OcrToken(tok))
        else:
            box = tok.get("box")
            tokens.append(OcrToken(str(tok["text"]), tuple(box) if box is not None else None))
    return OcrResult(tuple(tokens))


class ScannerClient(ServiceClient):
    service = "scanner"

    def _parse(self, digest, doc):
        return parse_scan_doc(digest, doc, self.clock())

    def scan(self, payload) -> ScanResult:
        return self.call(payload)


class VisionClient(ServiceClient):
    service = "vision"

    def _parse(self, digest, doc):
        return parse_vision_doc(doc)

    def classify(self, image) -> VisionResult:
        return self.call(image)


class OcrClient(ServiceClient):
    service = "ocr"

    def _parse(self, digest, doc):
        return parse_ocr_doc(doc)

    def extract(self, image) -> OcrResult:
        return self.call(image)


def scan_artifact(client: ScannerClient, payload) -> ScanResult:
    return client.scan(payload)


def classify_image(client: VisionClient, image) -> VisionResult:
    return client.classify(image)


def extract_text(client: OcrClient, image) -> OcrResult:
    return client.extract(image)


# -- HTTPS transports ------------------------------------------------------------


class _HttpMixin:
    def _setup_http(self, base_url, api_key, timeout, session):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()
        self.session.headers["Authorization"] = f"Bearer {api_key}"

    def _send(self, method, path, **kwargs):
        try:
            resp = self.session.request(method, f"{self.base_url}{path}", timeout=self.timeout, **kwargs)
        except requests.RequestException as exc:
            raise TransientError(str(exc)) from exc
        if resp.status_code == 429:
            retry_after = resp.headers.get("Retry-After")
            raise RateLimitError(
                f"{self.service} rate limited", float(retry_after) if retry_after else None
            )
        if resp.status_code >= 500:
            raise TransientError(f"HTTP {resp.status_code}")
        return resp

    def _json(self, resp):
        if resp.status_code >= 400:
            raise ServiceError(f"{self.service} answered HTTP {resp.status_code}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ValidationError(f"{self.service} returned non-JSON body") from exc


class HttpScannerClient(_HttpMixin, ScannerClient):
    """Hash lookup first, upload on a miss."""

    def __init__(self, base_url, api_key, timeout=30, session=None, **kwargs):
        super().__init__(**kwargs)
        self._setup_http(base_url, api_key, timeout, session)

    def _request(self, digest, payload):
        resp = self._send("GET", f"/files/{digest}")
        if resp.status_code == 404:
            resp = self._send("POST", "/files", files={"file": (digest, payload)})
        return self._json(resp)


class HttpVisionClient(_HttpMixin, VisionClient):
    def __init__(self, base_url, api_key, timeout=30, session=None, **kwargs):
        super().__init__(**kwargs)
        self._setup_http(base_url, api_key, timeout, session)

    def _request(self, digest, payload):
        return self._json(self._send("POST", "/images:classify", data=payload, headers={"X-Content-Hash": digest}))


class HttpOcrClient(_HttpMixin, OcrClient):
    def __init__(self, base_url, api_key, timeout=30, session=None, **kwargs):
        super().__init__(**kwargs)
        self._setup_http(base_url, api_key, timeout, session)

    def _request(self, digest, payload):
        return self._json(self._send("POST", "/images:text", data=payload, headers={"X-Content-Hash": digest}))


# -- mocks -------------------------------------------------------------------------


class _MockMixin:
    default_doc: dict = {}

    def _setup_mock(self, table):
        self.table = dict(table or {})

    def _request(self, digest, payload):
        return self.table.get(digest, self.default_doc)


class MockScannerClient(_MockMixin, ScannerClient):
    default_doc = {"engines": {}}

    def __init__(self, table=None, **kwargs):
        kwargs.setdefault("clock", lambda: 0.0)
        super().__init__(**kwargs)
        self._setup_mock(table)


class MockVisionClient(_MockMixin, VisionClient):
    default_doc = {c: 1 for c in VISION_CATEGORIES}

    def __init__(self, table=None, **kwargs):
        super().__init__(**kwargs)
        self._setup_mock(table)


class MockOcrClient(_MockMixin, OcrClient):
    default_doc = {"tokens": []}

    def __init__(self, table=None, **kwargs):
        super().__init__(**kwargs)
        self._setup_mock(table)


@dataclass
class Clients:
    scanner: ScannerClient
    vision: VisionClient
    ocr: OcrClient


def load_fixture_table(path):
    """Mock fixture document: ``{"scanner": {hash: doc}, "vision": {...}, "ocr": {...}}``."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read mock fixtures {path}: {exc}") from exc
    return {k: doc.get(k, {}) for k in ("scanner", "vision", "ocr")}


def mock_clients(fixtures=None) -> Clients:
    fixtures = fixtures or {}
    return Clients(
        MockScannerClient(fixtures.get("scanner")),
        MockVisionClient(fixtures.get("vision")),
        MockOcrClient(fixtures.get("ocr")),
    )


_DEFAULT_URLS = {
    "scanner": "https://scanner.invalid/api",
    "vision": "https://vision.invalid/api",
    "ocr": "https://ocr.invalid/api",
}


def make_clients(env=None, fixtures=None) -> Clients:
    """Real clients where an API key is configured, mocks elsewhere.

    Keys come from SCANNER_API_KEY, VISION_API_KEY and OCR_API_KEY; base
    URLs from the matching ``*_API_URL`` variables.
    """
    env = os.environ if env is None else env
    fixtures = fixtures or {}
    built = {}
    for service, http_cls, mock_cls in (
        ("scanner", HttpScannerClient, MockScannerClient),
        ("vision", HttpVisionClient, MockVisionClient),
        ("ocr", HttpOcrClient, MockOcrClient),
    ):
        prefix = service.upper()
        key = env.get(f"{prefix}_API_KEY")
        if key:
            built[service] = http_cls(env.get(f"{prefix}_API_URL", _DEFAULT_URLS[service]), key)
        else:
            log.warning("%s_API_KEY not set; %s client runs in mock mode", prefix, service)
            built[service] = mock_cls(fixtures.get(service))
    return Clients(**built)
