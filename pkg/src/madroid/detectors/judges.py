"""Threshold adapters turning external service scores into verdicts."""

from __future__ import annotations

from ..errors import InputError
from ..extractor import ArtifactKind
from .verdicts import CensoredKind, Group, Verdict

CENSORED_THRESHOLD = 4
MALICIOUS_THRESHOLD = 3

_CATEGORIES = {
    "porn": CensoredKind.PORN,
    "adult": CensoredKind.PORN,
    "violence": CensoredKind.VIOLENCE,
    "medical": CensoredKind.MEDICAL,
}

_KIND_GROUP = {
    ArtifactKind.SCRIPT: Group.MALICIOUS_SCRIPT,
    ArtifactKind.REDIRECT_CHAIN: Group.MALICIOUS_LINK,
    ArtifactKind.STORE_DEEP_LINK: Group.MALICIOUS_LINK,
    ArtifactKind.DOWNLOADED_APP: Group.MALICIOUS_APP,
}


def judge_censored(likelihoods, threshold=CENSORED_THRESHOLD) -> Verdict:
    """Censored for every category scored at or above ``threshold`` (1..5 scale)."""
    raw = dict(likelihoods.items() if hasattr(likelihoods, "items") else likelihoods)
    flagged = []
    for name, value in raw.items():
        if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 5:
            raise InputError(f"likelihood for {name!r} must be an integer in 1..5, got {value!r}")
        kind = _CATEGORIES.get(name.lower())
        if kind is not None and value >= threshold and kind not in flagged:
            flagged.append(kind)
    flagged.sort(key=list(CensoredKind).index)
    return Verdict(bool(flagged), Group.CENSORED, tuple(flagged), {"likelihoods": raw}, "censored-image")


def judge_malicious(scan, kind=ArtifactKind.DOWNLOADED_APP, threshold=MALICIOUS_THRESHOLD) -> Verdict:
    """Malicious when at least ``threshold`` engines flag the artifact."""
    group = _KIND_GROUP.get(ArtifactKind(kind), Group.MALICIOUS_APP)
    positives = scan.positive_engines
    evidence = {"positives": len(positives), "total": len(scan.engines), "engines": positives}
    return Verdict(len(positives) >= threshold, group, (), evidence, "av-scan")
