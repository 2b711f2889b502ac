"""Library/host fixpoint over hook records and per-message traffic labels.

The mapping starts from seed ad libraries and/or seed ad hosts and grows
in alternating half-passes: a host pass adds every domain requested by a
known ad library, a library pass adds every package that requested a known
ad host. The build stops once a full pass (both halves) adds nothing.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from .domains import SuffixRules, default_rules, host_label, registrable_domain
from .errors import InputError
from .traffic import HookRecord, HttpMessage

log = logging.getLogger(__name__)

FRAMEWORK_PREFIXES = ("android.", "java.", "javax.", "dalvik.")
DEFAULT_MAX_ITERATIONS = 50


@dataclass(frozen=True)
class SeedConfig:
    seed_libs: frozenset = frozenset()
    seed_hosts: frozenset = frozenset()
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        object.__setattr__(self, "seed_libs", frozenset(self.seed_libs))
        object.__setattr__(self, "seed_hosts", frozenset(self.seed_hosts))
        if self.max_iterations < 1:
            raise InputError("max_iterations must be positive")


@dataclass
class PkgDomainMapping:
    ad_libs: set = field(default_factory=set)
    ad_hosts: set = field(default_factory=set)
    edges: set = field(default_factory=set)
    # element -> half-pass index that added it; 0 marks a seed
    lib_provenance: dict = field(default_factory=dict)
    host_provenance: dict = field(default_factory=dict)
    converged: bool = True
    iterations: int = 0
    history: list = field(default_factory=list)
    unattributed: int = 0

    def nodes(self):
        return {("lib", p) for p in self.ad_libs} | {("host", h) for h in self.ad_hosts}

    def provenance(self, element, kind="host"):
        table = self.host_provenance if kind == "host" else self.lib_provenance
        k = table[element]
        return "seed" if k == 0 else f"propagated({k})"

    def to_dict(self):
        return {
            "ad_libs": sorted(self.ad_libs),
            "ad_hosts": sorted(self.ad_hosts),
            "edges": sorted([p, h] for p, h in self.edges),
            "provenance": {
                "libs": {k: self.provenance(k, "lib") for k in sorted(self.ad_libs)},
                "hosts": {k: self.provenance(k, "host") for k in sorted(self.ad_hosts)},
            },
            "converged": self.converged,
            "iterations": self.iterations,
            "history": [list(h) for h in self.history],
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        def parse_tag(tag):
            if tag == "seed":
                return 0
            if tag.startswith("propagated(") and tag.endswith(")"):
                return int(tag[len("propagated("):-1])
            raise InputError(f"bad provenance tag {tag!r}")

        prov = doc.get("provenance", {})
        return cls(
            ad_libs=set(doc["ad_libs"]),
            ad_hosts=set(doc["ad_hosts"]),
            edges={(p, h) for p, h in doc.get("edges", [])},
            lib_provenance={k: parse_tag(v) for k, v in prov.get("libs", {}).items()},
            host_provenance={k: parse_tag(v) for k, v in prov.get("hosts", {}).items()},
            converged=bool(doc.get("converged", True)),
            iterations=int(doc.get("iterations", 0)),
            history=[tuple(h) for h in doc.get("history", [])],
        )

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


class Label(str, Enum):
    AD_LOAD = "AdLoad"
    AD_CLICK = "AdClick"
    NON_AD = "NonAd"


@dataclass(frozen=True)
class TrafficLabel:
    label: Label
    reason: str = ""


# -- package attribution ----------------------------------------------------


def frame_package(frame):
    """Package part of a ``pkg.Class.method`` frame, cut to 3 segments."""
    segments = frame.split(".")
    package = segments[:-2] if len(segments) > 2 else segments[:1]
    return ".".join(package[:3])


def _lib_match(frame, known_libs):
    # longest dot-segment prefix of the frame that is a known lib
    segments = frame.split(".")
    for n in range(len(segments), 0, -1):
        candidate = ".".join(segments[:n])
        if candidate in known_libs:
            return candidate
    return None


def _is_framework(frame, framework_prefixes):
    return frame.startswith(tuple(framework_prefixes))


def attribute_package(record: HookRecord, known_libs, framework_prefixes=FRAMEWORK_PREFIXES):
    """Package that initiated the request in ``record``, or None.

    The innermost frame matching a known library wins; otherwise the
    innermost non-framework frame's package. Framework frames are never
    attributed, so a framework-only stack yields None.
    """
    app_frames = [f for f in record.stack if not _is_framework(f, framework_prefixes)]
    if not app_frames:
        return None
    for frame in app_frames:
        lib = _lib_match(frame, known_libs)
        if lib is not None:
            return lib
    return frame_package(app_frames[0])


# -- fixpoint ---------------------------------------------------------------


@dataclass
class _Prepared:
    frames: tuple
    fallback: str
    host: str


def _prepare(records, rules, framework_prefixes):
    prepared = []
    dropped = 0
    for rec in records:
        frames = tuple(f for f in rec.stack if not _is_framework(f, framework_prefixes))
        if not frames:
            dropped += 1
            continue
        prepared.append(_Prepared(frames, frame_package(frames[0]), registrable_domain(rec.url, rules)))
    return prepared, dropped


def _attribute(item: _Prepared, libs):
    for frame in item.frames:
        lib = _lib_match(frame, libs)
        if lib is not None:
            return lib, True
    return item.fallback, False


def build_mapping(
    records,
    seeds: SeedConfig,
    rules: SuffixRules | None = None,
    framework_prefixes=FRAMEWORK_PREFIXES,
):
    """Grow the library/host mapping to its fixpoint.

    Returns ``(mapping, iterations)`` where ``iterations`` counts the
    half-passes that added at least one element. Hitting
    ``seeds.max_iterations`` leaves ``mapping.converged`` False.
    """
    rules = rules or default_rules()
    prepared, dropped = _prepare(records, rules, framework_prefixes)

    libs = {s.strip() for s in seeds.seed_libs if s.strip()}
    hosts = {host_label(s.strip(), rules) for s in seeds.seed_hosts if s.strip()}
    mapping = PkgDomainMapping(
        lib_provenance=dict.fromkeys(libs, 0),
        host_provenance=dict.fromkeys(hosts, 0),
        unattributed=dropped,
    )
    history = [(len(libs), len(hosts))]
    iterations = 0
    idle_halves = 0
    expand_hosts = True
    converged = True

    while idle_halves < 2:
        if expand_hosts:
            new = {it.host for it in prepared if _attribute(it, libs)[1]} - hosts
        else:
            new = {_attribute(it, libs)[0] for it in prepared if it.host in hosts} - libs
        if new:
            if iterations >= seeds.max_iterations:
                converged = False
                break
            iterations += 1
            target, prov = (hosts, mapping.host_provenance) if expand_hosts else (libs, mapping.lib_provenance)
            target |= new
            for element in new:
                prov[element] = iterations
            history.append((len(libs), len(hosts)))
            idle_halves = 0
        else:
            idle_halves += 1
        expand_hosts = not expand_hosts

    mapping.ad_libs = libs
    mapping.ad_hosts = hosts
    mapping.edges = {(_attribute(it, libs)[0], it.host) for it in prepared}
    mapping.converged = converged
    mapping.iterations = iterations
    mapping.history = history
    if not converged:
        log.warning("mapping did not converge within %d half-passes", seeds.max_iterations)
    return mapping, iterations


def classify_message(msg: HttpMessage, mapping: PkgDomainMapping, click_chains=(), rules=None) -> TrafficLabel:
    """Label one message as ad-click, ad-load or non-ad.

    ``click_chains`` is a set of message ids on reconstructed click chains,
    or a dict mapping such ids to a chain name used as the reason.
    """
    if msg.id in click_chains:
        chain = click_chains[msg.id] if isinstance(click_chains, dict) else msg.id
        return TrafficLabel(Label.AD_CLICK, f"chain:{chain}")
    domain = registrable_domain(msg.url, rules)
    if domain in mapping.ad_hosts:
        return TrafficLabel(Label.AD_LOAD, f"host:{domain}")
    return TrafficLabel(Label.NON_AD, f"host:{domain}")


# -- seed files -------------------------------------------------------------


def parse_seed_lines(lines):
    out = []
    for line in lines:
        entry = line.split("#", 1)[0].strip()
        if entry:
            out.append(entry)
    return out


def load_seed_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_seed_lines(fh)
    except OSError as exc:
        raise InputError(f"cannot read seed file {path}: {exc}") from exc


def _bundled(name):
    text = resources.files("madroid").joinpath(f"data/{name}").read_text(encoding="utf-8")
    return parse_seed_lines(text.splitlines())


def default_seed_libs():
    return _bundled("ad_libraries.txt")


def default_seed_hosts():
    return _bundled("ad_hosts.txt")


def load_mapping(path) -> PkgDomainMapping:
    try:
        with open(path, encoding="utf-8") as fh:
            return PkgDomainMapping.loads(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot load mapping {path}: {exc}") from exc
