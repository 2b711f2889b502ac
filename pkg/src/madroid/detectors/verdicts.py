from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Group(str, Enum):
    CLICK_DECEPTIVE = "ClickDeceptive"
    CENSORED = "Censored"
    MALICIOUS_SCRIPT = "MaliciousScript"
    MALICIOUS_LINK = "MaliciousLink"
    MALICIOUS_APP = "MaliciousApp"


class CensoredKind(str, Enum):
    PORN = "Porn"
    VIOLENCE = "Violence"
    MEDICAL = "Medical"
    GAMBLING = "Gambling"


@dataclass(frozen=True)
class Verdict:
    devious: bool
    group: Group
    subkinds: tuple = ()
    evidence: dict = field(default_factory=dict)
    detector: str = ""

    def to_dict(self):
        return {
            "detector": self.detector,
            "devious": self.devious,
            "group": self.group.value,
            "subkinds": [s.value if isinstance(s, Enum) else s for s in self.subkinds],
            "evidence": self.evidence,
        }
