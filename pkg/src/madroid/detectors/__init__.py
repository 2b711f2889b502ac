"""Devious ad content detectors.

The plugin registry lives in :mod:`madroid.detectors.plugins`; it is not
re-exported here because it depends on :mod:`madroid.report`.
"""

from .boxes import DetectionBox, GroundTruthBox, iou, nms
from .cross import GridParams, TemplateCrossDetector, correlation_map, detect_cross
from .judges import judge_censored, judge_malicious
from .keywords import KeywordSet, detect_close_keywords, detect_gambling, tokenize
from .synth import embed_cross, generate_corpus, make_ad_image, parse_voc, voc_annotation
from .verdicts import CensoredKind, Group, Verdict

__all__ = [
    "CensoredKind",
    "DetectionBox",
    "GridParams",
    "GroundTruthBox",
    "Group",
    "KeywordSet",
    "TemplateCrossDetector",
    "Verdict",
    "correlation_map",
    "detect_close_keywords",
    "detect_cross",
    "detect_gambling",
    "embed_cross",
    "generate_corpus",
    "iou",
    "judge_censored",
    "judge_malicious",
    "make_ad_image",
    "nms",
    "parse_voc",
    "tokenize",
    "voc_annotation",
]
