"""Per-app deviousness reports and corpus-level aggregation.

A report document has two parts: a ``header`` holding run metadata that
changes between runs (timestamp, exit code) and a canonical ``body`` that
is byte-identical for identical inputs.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal

from .extractor import ArtifactKind
from .detectors.verdicts import Group

DEFAULT_TOP_N = 5
REPORT_VERSION = 1


def percent(count, total) -> float:
    """``count / total`` as a percentage, one decimal, rounded half-up."""
    if total <= 0:
        return 0.0
    value = Decimal(count) * 100 / Decimal(total)
    return float(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


@dataclass
class ArtifactRecord:
    kind: ArtifactKind
    hash: str
    host: str
    origin: str = ""
    source_message_ids: tuple = ()
    verdicts: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @classmethod
    def for_artifact(cls, artifact):
        return cls(
            ArtifactKind(artifact.kind),
            artifact.content_hash,
            artifact.host,
            artifact.origin,
            tuple(artifact.source_message_ids),
        )

    @property
    def devious(self):
        return any(v.devious for v in self.verdicts)

    @property
    def devious_groups(self):
        """Groups with at least one devious verdict, in enum order."""
        hit = {v.group for v in self.verdicts if v.devious}
        return [g for g in Group if g in hit]

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "hash": self.hash,
            "host": self.host,
            "origin": self.origin,
            "source_message_ids": list(self.source_message_ids),
            "devious": self.devious,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "errors": list(self.errors),
        }


@dataclass
class DeviousnessReport:
    app_id: str = ""
    artifacts: list = field(default_factory=list)
    mapping: dict = field(default_factory=dict)
    traffic: dict = field(default_factory=dict)
    chains: list = field(default_factory=list)
    plan: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    exit_code: int = 0
    generated_at: str = ""

    @property
    def error_count(self):
        return sum(len(a.errors) for a in self.artifacts)

    def counters(self):
        """Totals and devious counts per content type."""
        out = {k.value: {"total": 0, "devious": 0} for k in ArtifactKind}
        for art in self.artifacts:
            row = out[art.kind.value]
            row["total"] += 1
            row["devious"] += int(art.devious)
        return out

    def group_counts(self):
        counts = Counter()
        for art in self.artifacts:
            counts.update(g.value for g in art.devious_groups)
        return {g.value: counts[g.value] for g in Group}

    def host_tallies(self):
        """Devious artifacts per group per ad host; each group sums to its count."""
        out = {g.value: Counter() for g in Group}
        for art in self.artifacts:
            for g in art.devious_groups:
                out[g.value][art.host] += 1
        return out

    def origin_tallies(self):
        """Origin domains of link and app artifacts, per content type."""
        out = {}
        for art in self.artifacts:
            if art.origin:
                out.setdefault(art.kind.value, Counter())[art.origin] += 1
        return out

    def devious_origin_tallies(self):
        out = {}
        for art in self.artifacts:
            if art.origin:
                for g in art.devious_groups:
                    out.setdefault(g.value, Counter())[art.origin] += 1
        return out

    def body(self):
        return {
            "app_id": self.app_id,
            "inputs": self.inputs,
            "mapping": self.mapping,
            "traffic": self.traffic,
            "chains": self.chains,
            "plan": self.plan,
            "counters": self.counters(),
            "groups": self.group_counts(),
            "hosts": {g: dict(sorted(c.items())) for g, c in self.host_tallies().items() if c},
            "origins": {k: dict(sorted(c.items())) for k, c in sorted(self.origin_tallies().items())},
            "devious_origins": {g: dict(sorted(c.items())) for g, c in sorted(self.devious_origin_tallies().items())},
            "artifacts": [a.to_dict() for a in self.artifacts],
            "errors": self.error_count,
        }

    def body_json(self) -> str:
        return canonical_json(self.body())

    def to_dict(self):
        stamp = self.generated_at or datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        return {
            "header": {"version": REPORT_VERSION, "generated_at": stamp, "exit_code": self.exit_code},
            "body": self.body(),
        }

    def dumps(self) -> str:
        return canonical_json(self.to_dict())

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


def render_report_table(report: DeviousnessReport) -> str:
    lines = [f"app: {report.app_id or '-'}  exit: {report.exit_code}"]
    m = report.mapping
    if m:
        lines.append(
            f"mapping: {m.get('ad_libs', 0)} libs, {m.get('ad_hosts', 0)} hosts, "
            f"{m.get('iterations', 0)} iterations, converged={m.get('converged')}"
        )
    t = report.traffic.get("counts", {})
    if t:
        lines.append("traffic: " + ", ".join(f"{k}={v}" for k, v in t.items()))
    lines.append(f"{'content type':<16}{'total':>8}{'devious':>9}")
    for kind, row in report.counters().items():
        lines.append(f"{kind:<16}{row['total']:>8}{row['devious']:>9}")
    for art in report.artifacts:
        if art.devious:
            groups = ",".join(g.value for g in art.devious_groups)
            lines.append(f"  devious {art.kind.value} {art.hash[:12]} host={art.host} [{groups}]")
    if report.error_count:
        lines.append(f"detector errors: {report.error_count}")
    return "\n".join(lines) + "\n"


# -- corpus aggregation ---------------------------------------------------------------


def _ranked(counter, total, top_n):
    rows = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    return [[name, count, percent(count, total)] for name, count in rows]


@dataclass
class CorpusSummary:
    apps: int = 0
    counters: dict = field(default_factory=lambda: {k.value: Counter() for k in ArtifactKind})
    groups: Counter = field(default_factory=Counter)
    hosts: dict = field(default_factory=dict)
    origins: dict = field(default_factory=dict)
    devious_origins: dict = field(default_factory=dict)
    errors: int = 0
    top_n: int = DEFAULT_TOP_N

    def add(self, report: DeviousnessReport):
        self.apps += 1
        for kind, row in report.counters().items():
            self.counters[kind].update(row)
        self.groups.update(report.group_counts())
        for target, source in (
            (self.hosts, report.host_tallies()),
            (self.origins, report.origin_tallies()),
            (self.devious_origins, report.devious_origin_tallies()),
        ):
            for key, counter in source.items():
                if counter:
                    target.setdefault(key, Counter()).update(counter)
        self.errors += report.error_count
        return self

    def merge(self, other: "CorpusSummary") -> "CorpusSummary":
        out = CorpusSummary(top_n=self.top_n)
        for part in (self, other):
            out.apps += part.apps
            out.errors += part.errors
            for kind, row in part.counters.items():
                out.counters.setdefault(kind, Counter()).update(row)
            out.groups.update(part.groups)
            for target, source in (
                (out.hosts, part.hosts),
                (out.origins, part.origins),
                (out.devious_origins, part.devious_origins),
            ):
                for key, counter in source.items():
                    target.setdefault(key, Counter()).update(counter)
        return out

    def _normal(self):
        # Counter equality ignores zero entries only from 3.10 on; normalise explicitly.
        def strip(c):
            return {k: v for k, v in c.items() if v}

        return (
            self.apps,
            {k: strip(v) for k, v in self.counters.items()},
            strip(self.groups),
            {k: strip(v) for k, v in self.hosts.items() if strip(v)},
            {k: strip(v) for k, v in self.origins.items() if strip(v)},
            {k: strip(v) for k, v in self.devious_origins.items() if strip(v)},
            self.errors,
        )

    def __eq__(self, other):
        return isinstance(other, CorpusSummary) and self._normal() == other._normal()

    def top_hosts(self, group, top_n=None):
        """Rows ``[host, count, percent]`` ranked by count, ties by name."""
        top_n = self.top_n if top_n is None else top_n
        g = Group(group).value
        return _ranked(self.hosts.get(g, Counter()), self.groups.get(g, 0), top_n)

    def top_origins(self, key, top_n=None):
        top_n = self.top_n if top_n is None else top_n
        table = self.origins.get(key) or self.devious_origins.get(key) or Counter()
        return _ranked(table, sum(table.values()), top_n)

    def to_dict(self, top_n=None):
        top_n = self.top_n if top_n is None else top_n
        return {
            "apps": self.apps,
            "errors": self.errors,
            "counters": {
                k: {"total": self.counters[k]["total"], "devious": self.counters[k]["devious"]}
                for k in sorted(self.counters)
            },
            "groups": {g.value: self.groups.get(g.value, 0) for g in Group},
            "top_hosts": {g.value: self.top_hosts(g, top_n) for g in Group},
            "top_origins": {
                k: _ranked(c, sum(c.values()), top_n) for k, c in sorted(self.origins.items())
            },
            "top_devious_origins": {
                k: _ranked(c, sum(c.values()), top_n) for k, c in sorted(self.devious_origins.items())
            },
        }

    def dumps(self, top_n=None):
        return canonical_json(self.to_dict(top_n))


def aggregate(reports, top_n=DEFAULT_TOP_N) -> CorpusSummary:
    """Corpus totals over ``reports``; ``top_n`` applies when rendering."""
    summary = CorpusSummary(top_n=top_n)
    for report in reports:
        summary.add(report)
    return summary


def render_summary_table(summary: CorpusSummary, top_n=None) -> str:
    top_n = summary.top_n if top_n is None else top_n
    lines = [f"apps: {summary.apps}  detector errors: {summary.errors}"]
    lines.append(f"{'content type':<16}{'total':>8}{'devious':>9}")
    for kind in sorted(summary.counters):
        row = summary.counters[kind]
        lines.append(f"{kind:<16}{row['total']:>8}{row['devious']:>9}")
    for g in Group:
        rows = summary.top_hosts(g, top_n)
        if not rows:
            continue
        lines.append(f"top hosts, {g.value} ({summary.groups.get(g.value, 0)}):")
        for host, count, pct in rows:
            lines.append(f"  {host:<32}{count:>7}{pct:>7.1f}%")
    for key in sorted(summary.origins):
        lines.append(f"top origins, {key}:")
        for name, count, pct in _ranked(summary.origins[key], sum(summary.origins[key].values()), top_n):
            lines.append(f"  {name:<32}{count:>7}{pct:>7.1f}%")
    return "\n".join(lines) + "\n"
