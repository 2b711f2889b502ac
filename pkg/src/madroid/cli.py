"""Command line: ``madroid {analyze,corpus,mapping,plan}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .clients import load_fixture_table, make_clients
from .detectors.keywords import load_keyword_file
from .errors import (
    EXIT_INPUT,
    EXIT_INTERNAL,
    EXIT_NONCONVERGED,
    EXIT_OK,
    ConfigurationError,
    InputError,
    MadroidError,
    StageError,
)
from .hookmap import SeedConfig, build_mapping, default_seed_hosts, default_seed_libs, load_seed_file
from .pipeline import PipelineConfig, discover_bundles, load_config, load_ui_plan, run_pipeline
from .report import aggregate, canonical_json, render_report_table, render_summary_table
from .traffic import load_hook_log

log = logging.getLogger("madroid")


def _common(parser):
    g = parser.add_argument_group("global options")
    g.add_argument("--config", help="JSON config file (default: $MADROID_CONFIG)")
    g.add_argument("--seed-libs", help="ad-library seed file, one package prefix per line")
    g.add_argument("--seed-hosts", help="ad-host seed file, one domain per line")
    g.add_argument("--max-iterations", type=int, help="half-pass cap for the mapping fixpoint")
    g.add_argument("--suffix-rules", help="public suffix list file")
    g.add_argument("--close-keywords", help="close-word list, one per line")
    g.add_argument("--gambling-keywords", help="gambling keyword list, one per line")
    g.add_argument("--mock-fixtures", help="mock service fixture table (JSON)")
    g.add_argument("--out", help="output directory")
    g.add_argument("--format", choices=("json", "table"), default="table", help="stdout rendering")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    _common(common)
    parser = argparse.ArgumentParser(prog="madroid", description="Offline ad traffic and devious ad content analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="run the full pipeline on one app bundle")
    p.add_argument("capture", help="capture log (JSON lines)")
    p.add_argument("hooks", help="hook log (JSON lines)")
    p.add_argument("--view-tree", action="append", default=[], help="view-tree dump or UI-state graph; repeatable")
    p.add_argument("--app-id", help="app package name")

    p = sub.add_parser("corpus", parents=[common], help="analyze every bundle under a directory")
    p.add_argument("directory")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--top-n", type=int, help="rows per ranking (default 5)")

    p = sub.add_parser("mapping", parents=[common], help="build or inspect the library/host mapping")
    p.add_argument("hooks", help="hook log (JSON lines)")
    p.add_argument("--provenance", action="store_true", help="list every element with its provenance")

    p = sub.add_parser("plan", parents=[common], help="ad-first exploration plan from view trees")
    p.add_argument("trees", nargs="+", help="view-tree dumps, or one UI-state graph")
    p.add_argument("--screen", default=None, help="WIDTHxHEIGHT (default 1080x1920)")
    return parser


def _config(args) -> PipelineConfig:
    path = args.config or os.environ.get("MADROID_CONFIG")
    config = load_config(path) if path else PipelineConfig()
    overrides = {}
    if args.suffix_rules:
        overrides["suffix_rules"] = args.suffix_rules
    if args.mock_fixtures:
        overrides["mock_fixtures"] = args.mock_fixtures
    if args.max_iterations:
        overrides["max_iterations"] = args.max_iterations
    if args.close_keywords:
        overrides["close_keywords"] = tuple(load_keyword_file(args.close_keywords))
    if args.gambling_keywords:
        overrides["gambling_keywords"] = tuple(load_keyword_file(args.gambling_keywords))
    if getattr(args, "top_n", None):
        overrides["top_n"] = args.top_n
    if getattr(args, "screen", None):
        try:
            w, h = (int(v) for v in args.screen.lower().split("x"))
        except ValueError as exc:
            raise ConfigurationError(f"bad --screen {args.screen!r}, expected WIDTHxHEIGHT") from exc
        overrides["screen"] = (w, h)
    return dataclasses.replace(config, **overrides) if overrides else config


def _seeds(args, config) -> SeedConfig:
    libs = load_seed_file(args.seed_libs) if args.seed_libs else default_seed_libs()
    hosts = load_seed_file(args.seed_hosts) if args.seed_hosts else default_seed_hosts()
    return SeedConfig(libs, hosts, config.max_iterations)


def _clients(config):
    fixtures = load_fixture_table(config.mock_fixtures) if config.mock_fixtures else None
    return make_clients(fixtures=fixtures)


def _write_out(args, name, text):
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_analyze(args, config):
    report = run_pipeline(
        args.capture,
        args.hooks,
        args.view_tree,
        seeds=_seeds(args, config),
        config=config,
        clients=_clients(config),
        out_dir=args.out,
        app_id=args.app_id,
    )
    sys.stdout.write(report.dumps() if args.format == "json" else render_report_table(report))
    return report.exit_code


def cmd_corpus(args, config):
    bundles = discover_bundles(args.directory)
    if not bundles:
        raise StageError("parse", f"no app bundles under {args.directory}", EXIT_INPUT)
    seeds = _seeds(args, config)
    clients = _clients(config)

    def one(bundle):
        out = os.path.join(args.out, bundle.app_id) if args.out else None
        try:
            return bundle, run_pipeline(
                bundle.capture, bundle.hook_log, bundle.view_trees, seeds, config, clients, out, bundle.app_id
            ), None
        except StageError as exc:
            log.error("%s: %s", bundle.app_id, exc)
            return bundle, None, exc

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        results = list(pool.map(one, bundles))
    reports = [r for _, r, _ in results if r is not None]
    summary = aggregate(reports, config.top_n)
    failures = {b.app_id: str(e) for b, _, e in results if e is not None}
    doc = summary.to_dict()
    doc["failed_bundles"] = failures
    text = canonical_json(doc)
    _write_out(args, "summary.json", text)
    if args.format == "json":
        sys.stdout.write(text)
    else:
        sys.stdout.write(render_summary_table(summary))
        for app, err in sorted(failures.items()):
            sys.stdout.write(f"failed: {app}: {err}\n")
    codes = [r.exit_code for r in reports] + [e.exit_code for _, _, e in results if e is not None]
    return max(codes, default=EXIT_OK)


def cmd_mapping(args, config):
    records, skipped = load_hook_log(args.hooks)
    mapping, iterations = build_mapping(records, _seeds(args, config), config.rules())
    _write_out(args, "mapping.json", mapping.dumps())
    if args.format == "json":
        sys.stdout.write(mapping.dumps())
    else:
        lines = [
            f"hook records: {len(records)} (skipped {skipped}, unattributed {mapping.unattributed})",
            f"ad libraries: {len(mapping.ad_libs)}  ad hosts: {len(mapping.ad_hosts)}",
            f"iterations: {iterations}  converged: {mapping.converged}",
            "history: " + " ".join(f"{a}/{b}" for a, b in mapping.history),
        ]
        if args.provenance:
            lines += [f"lib  {p}  {mapping.provenance(p, 'lib')}" for p in sorted(mapping.ad_libs)]
            lines += [f"host {h}  {mapping.provenance(h, 'host')}" for h in sorted(mapping.ad_hosts)]
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if mapping.converged else EXIT_NONCONVERGED


def cmd_plan(args, config):
    plan = load_ui_plan(args.trees, config)
    _write_out(args, "plan.json", plan.dumps())
    if args.format == "json":
        sys.stdout.write(plan.dumps())
    else:
        for i, step in enumerate(plan.steps, 1):
            sys.stdout.write(f"{i:>4}  {step.state_id:<12} {step.node_id:<24} {step.score:.2f}\n")
    return EXIT_OK


_COMMANDS = {"analyze": cmd_analyze, "corpus": cmd_corpus, "mapping": cmd_mapping, "plan": cmd_plan}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _config(args)
        return _COMMANDS[args.command](args, config)
    except StageError as exc:
        print(f"error: {exc.stage} stage: {exc.cause}", file=sys.stderr)
        return exc.exit_code
    except MadroidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT if isinstance(exc, (InputError, ConfigurationError)) else EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
