"""End-to-end analysis of one app bundle.

Stages: parse, mapping, classify, chains, extract, integrity, detect,
report. Input problems surface as :class:`StageError` naming the stage;
non-convergence and detector failures still produce a report, with the
exit code recording what went wrong.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .clients import Clients, load_fixture_table, make_clients
from .detectors.cross import GridParams
from .detectors.external import ExternalDetector
from .detectors.keywords import load_keyword_file
from .detectors.plugins import default_registry, run_detectors
from .detectors.synth import DEFAULT_SCALE_RANGE
from .domains import SuffixRules, default_rules, registrable_domain
from .errors import (
    EXIT_DETECTOR_FAILURE,
    EXIT_INPUT,
    EXIT_INTERNAL,
    EXIT_NONCONVERGED,
    EXIT_OK,
    ConfigurationError,
    InputError,
    MadroidError,
    NotFoundError,
    StageError,
)
from .explorer import DEFAULT_SCREEN, ExplorationPlan, graph_from_dict, plan_exploration, plan_trees
from .extractor import (
    DEFAULT_WINDOW_MS,
    chain_artifacts,
    extract_click_bindings,
    extract_load_artifacts,
    reconstruct_redirect_chain,
    write_artifact_store,
)
from .hookmap import Label, SeedConfig, build_mapping, classify_message, default_seed_hosts, default_seed_libs
from .report import DeviousnessReport
from .traffic import load_capture, load_hook_log, view_tree_from_dict

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    window_ms: int = DEFAULT_WINDOW_MS
    screen: tuple = DEFAULT_SCREEN
    max_depth: int | None = 5
    max_steps_per_state: int | None = 30
    grid: GridParams = GridParams()
    scale_range: tuple = DEFAULT_SCALE_RANGE
    close_keywords: tuple | None = None
    gambling_keywords: tuple | None = None
    suffix_rules: str | None = None
    disabled_detectors: tuple = ()
    external_detector: tuple | None = None
    detector_workers: int = 1
    top_n: int = 5
    max_iterations: int = 50
    mock_fixtures: str | None = None

    def __post_init__(self):
        if self.window_ms <= 0:
            raise ConfigurationError("window_ms must be positive")
        if len(self.screen) != 2 or min(self.screen) <= 0:
            raise ConfigurationError("screen must be two positive integers")
        lo, hi = self.scale_range
        if not 0 < lo <= hi < 1:
            raise ConfigurationError("scale_range must satisfy 0 < lo <= hi < 1")
        if self.top_n < 1 or self.detector_workers < 1 or self.max_iterations < 1:
            raise ConfigurationError("top_n, detector_workers and max_iterations must be positive")

    def rules(self):
        return SuffixRules.from_file(self.suffix_rules) if self.suffix_rules else default_rules()


_CONFIG_KEYS = {f for f in PipelineConfig.__dataclass_fields__}


def config_from_dict(doc, base_dir=None) -> PipelineConfig:
    """Config document: keys of :class:`PipelineConfig`; keyword keys may be paths."""
    if not isinstance(doc, dict):
        raise ConfigurationError("config document must be an object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")

    def resolve(path):
        return path if base_dir is None or os.path.isabs(path) else os.path.join(base_dir, path)

    kw = dict(doc)
    try:
        if "grid" in kw:
            kw["grid"] = GridParams(**kw["grid"])
        for key in ("close_keywords", "gambling_keywords"):
            value = kw.get(key)
            if isinstance(value, str):
                kw[key] = tuple(load_keyword_file(resolve(value)))
            elif value is not None:
                kw[key] = tuple(value)
        for key in ("suffix_rules", "mock_fixtures"):
            if kw.get(key):
                kw[key] = resolve(kw[key])
        for key in ("screen", "scale_range", "disabled_detectors", "external_detector"):
            if kw.get(key) is not None:
                kw[key] = tuple(kw[key])
        return PipelineConfig(**kw)
    except (TypeError, ValueError, InputError) as exc:
        raise ConfigurationError(f"invalid config: {exc}") from exc


def load_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc, os.path.dirname(os.path.abspath(path)))


def default_seeds(max_iterations=50) -> SeedConfig:
    return SeedConfig(default_seed_libs(), default_seed_hosts(), max_iterations)


def build_registry(config: PipelineConfig):
    detector = ExternalDetector(list(config.external_detector)) if config.external_detector else None
    return default_registry(
        close_keywords=config.close_keywords,
        gambling_keywords=config.gambling_keywords,
        cross_detector=detector,
        params=config.grid,
        disabled=config.disabled_detectors,
    )


def load_ui_plan(view_tree_paths, config: PipelineConfig) -> ExplorationPlan:
    """Plan over view-tree dumps; a document with ``states`` is a UI-state graph."""
    trees = []
    kwargs = dict(max_depth=config.max_depth, max_steps_per_state=config.max_steps_per_state)
    for path in view_tree_paths:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read view tree {path}: {exc}") from exc
        if isinstance(doc, dict) and "states" in doc:
            if len(view_tree_paths) != 1:
                raise InputError("a UI-state graph must be the only view-tree input")
            graph = graph_from_dict(doc, os.path.dirname(os.path.abspath(path)))
            return plan_exploration(graph, config.screen, **kwargs)
        trees.append(view_tree_from_dict(doc))
    return plan_trees(trees, config.screen, **kwargs)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (InputError, ConfigurationError) as exc:
        raise StageError(name, exc, EXIT_INPUT) from exc
    except MadroidError as exc:
        raise StageError(name, exc, EXIT_INTERNAL) from exc


def _reconstruct_chains(capture, labels, window_ms):
    chains = []
    unresolved = []
    seen = set()
    for msg in capture.messages:
        if labels[msg.id].label != Label.AD_LOAD:
            continue
        for url in extract_click_bindings(msg):
            if url in seen:
                continue
            seen.add(url)
            try:
                chain = reconstruct_redirect_chain(capture, url, window_ms)
            except NotFoundError:
                unresolved.append({"message_id": msg.id, "url": url})
                continue
            chains.append((f"chain{len(chains) + 1}", msg, url, chain))
    return chains, unresolved


def _check_integrity(capture, artifacts):
    known = capture.by_id()
    for art in artifacts:
        missing = [m for m in art.source_message_ids if m not in known]
        if missing:
            raise StageError("integrity", f"artifact {art.content_hash[:12]} cites unknown messages {missing}", EXIT_INTERNAL)


def run_pipeline(
    capture_path,
    hook_path,
    view_tree_paths=(),
    seeds: SeedConfig | None = None,
    config: PipelineConfig | None = None,
    clients: Clients | None = None,
    out_dir=None,
    app_id=None,
    registry=None,
) -> DeviousnessReport:
    config = config or PipelineConfig()
    seeds = seeds or default_seeds(config.max_iterations)
    rules = _stage("config", config.rules)
    if clients is None:
        fixtures = _stage("config", load_fixture_table, config.mock_fixtures) if config.mock_fixtures else None
        clients = make_clients(fixtures=fixtures)
    registry = registry if registry is not None else _stage("config", build_registry, config)

    capture = _stage("parse", load_capture, capture_path, app_id)
    records, hook_skipped = _stage("parse", load_hook_log, hook_path)
    view_tree_paths = list(view_tree_paths or ())
    plan = _stage("parse", load_ui_plan, view_tree_paths, config) if view_tree_paths else None

    mapping, _ = _stage("mapping", build_mapping, records, seeds, rules)

    labels = {m.id: _stage("classify", classify_message, m, mapping, rules=rules) for m in capture.messages}
    chains, unresolved = _stage("chains", _reconstruct_chains, capture, labels, config.window_ms)
    on_chain = {}
    for name, _, _, chain in chains:
        for mid in chain.message_ids:
            if mid is not None:
                on_chain.setdefault(mid, name)
    labels = {m.id: classify_message(m, mapping, on_chain, rules) for m in capture.messages}

    stats = {}
    artifacts = _stage("extract", extract_load_artifacts, capture, labels, stats)
    for name, binding, url, chain in chains:
        artifacts.extend(
            _stage("extract", chain_artifacts, chain, capture, binding.id, registrable_domain(binding.url, rules))
        )
    _check_integrity(capture, artifacts)

    report = run_detectors(artifacts, registry, clients, capture.app_id, workers=config.detector_workers)

    counts = {lab.value: 0 for lab in Label}
    for lab in labels.values():
        counts[lab.label.value] += 1
    report.inputs = {
        "capture": os.path.basename(os.fspath(capture_path)),
        "hook_log": os.path.basename(os.fspath(hook_path)),
        "view_trees": [os.path.basename(os.fspath(p)) for p in view_tree_paths],
        "capture_skipped": capture.skipped,
        "hook_skipped": hook_skipped,
    }
    report.mapping = {
        "ad_libs": len(mapping.ad_libs),
        "ad_hosts": len(mapping.ad_hosts),
        "iterations": mapping.iterations,
        "converged": mapping.converged,
        "history": [list(h) for h in mapping.history],
        "unattributed": mapping.unattributed,
        "propagated_libs": sorted(k for k, v in mapping.lib_provenance.items() if v),
        "propagated_hosts": sorted(k for k, v in mapping.host_provenance.items() if v),
    }
    report.traffic = {
        "messages": len(capture),
        "counts": counts,
        "labels": {mid: {"label": lab.label.value, "reason": lab.reason} for mid, lab in labels.items()},
        "bodyless_ad_loads": stats.get("bodyless", 0),
        "unresolved_bindings": unresolved,
    }
    report.chains = [
        {
            "name": name,
            "binding_message_id": binding.id,
            "click_url": url,
            "outcome": chain.outcome.value,
            "hops": [{"message_id": h.message_id, "url": h.url, "status": h.status} for h in chain.hops],
        }
        for name, binding, url, chain in chains
    ]
    if plan is not None:
        report.plan = {"steps": len(plan), "states": len({s.state_id for s in plan.steps})}

    if not mapping.converged:
        report.exit_code = EXIT_NONCONVERGED
    elif report.error_count:
        report.exit_code = EXIT_DETECTOR_FAILURE
    else:
        report.exit_code = EXIT_OK
    report.generated_at = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_artifact_store(artifacts, os.path.join(out_dir, "artifacts"))
        with open(os.path.join(out_dir, "mapping.json"), "w", encoding="utf-8") as fh:
            fh.write(mapping.dumps())
        if plan is not None:
            with open(os.path.join(out_dir, "plan.json"), "w", encoding="utf-8") as fh:
                fh.write(plan.dumps())
        report.write(os.path.join(out_dir, "report.json"))
    return report


@dataclass
class Bundle:
    """One app's inputs inside a corpus directory."""

    app_id: str
    capture: str
    hook_log: str
    view_trees: list = field(default_factory=list)


def discover_bundles(corpus_dir):
    """Each subdirectory with ``capture.jsonl`` and ``hooks.jsonl`` is a bundle;
    ``*.tree.json`` or ``ui_graph.json`` files supply view trees."""
    bundles = []
    try:
        entries = sorted(os.listdir(corpus_dir))
    except OSError as exc:
        raise InputError(f"cannot list corpus {corpus_dir}: {exc}") from exc
    for name in entries:
        path = os.path.join(corpus_dir, name)
        capture = os.path.join(path, "capture.jsonl")
        hooks = os.path.join(path, "hooks.jsonl")
        if not (os.path.isfile(capture) and os.path.isfile(hooks)):
            continue
        graph = os.path.join(path, "ui_graph.json")
        if os.path.isfile(graph):
            trees = [graph]
        else:
            trees = sorted(os.path.join(path, f) for f in os.listdir(path) if f.endswith(".tree.json"))
        bundles.append(Bundle(name, capture, hooks, trees))
    return bundles
