"""Command-line surface.

Commands: ``extract`` (pcaps -> feature CSV), ``rank`` (one ranking),
``select`` (the elimination loop), ``compare`` (the loop once per
ranking method). Machine-readable output goes to stdout, prose to
stderr. Exit codes: 0 success, 1 computation failure, 2 usage or input
failure.

Configuration precedence is flags > config file > defaults; the config
file is flat ``key=value`` text (keys: seed, folds, classifier,
n_estimators, policy, min_active, accuracy_source, idle_timeout,
test_csv). The root seed falls back to the CORRNET_SEED environment
variable, then 0.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass

from . import __version__
from .classifiers import ClassifierSpec, KINDS
from .dataset import FeatureMatrix, ClassLabel, concat, load_csv, save_csv, format_cell
from .errors import (ClassifierError, CorrnetError, DatasetError, PcapError,
                     SelectionAbort, SelectionError, StatsError)
from .features import compute_features
from .flows import OpenReason, assemble_flows
from .pcap import CaptureStats, read_pcap
from .ranking import METHODS, ff_ranking, ranking
from .selection import POLICIES, result_to_json, select_features, trace_rows

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_USAGE = 2

_METHOD_ALIASES = {m.lower(): m for m in METHODS}


@dataclass
class RunConfig:
    seed: int = 0
    folds: int = 10
    classifier: str = "tree"
    n_estimators: int = 10
    policy: str = "exhaustive"
    min_active: int = 1
    accuracy_source: str = "cv"
    idle_timeout: float = 600.0
    test_csv: str | None = None

    def validate(self) -> None:
        if self.classifier not in KINDS:
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.accuracy_source not in ("cv", "holdout"):
            raise ValueError(f"unknown accuracy source {self.accuracy_source!r}")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.min_active < 1:
            raise ValueError("min-active must be at least 1")
        if self.n_estimators < 1:
            raise ValueError("n-estimators must be at least 1")
        if self.idle_timeout <= 0:
            raise ValueError("idle-timeout must be positive")
        if self.accuracy_source == "holdout" and not self.test_csv:
            raise ValueError("holdout accuracy source needs --test-csv")

    def spec(self) -> ClassifierSpec:
        return ClassifierSpec(kind=self.classifier, n_estimators=self.n_estimators)


_CONFIG_CASTS = {
    "seed": int, "folds": int, "n_estimators": int, "min_active": int,
    "idle_timeout": float, "classifier": str, "policy": str,
    "accuracy_source": str, "test_csv": str,
}


def read_config_file(path: str) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_CASTS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _CONFIG_CASTS[key](value.strip())
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if os.environ.get("CORRNET_SEED"):
        cfg.seed = int(os.environ["CORRNET_SEED"])
    if getattr(args, "config", None):
        for key, value in read_config_file(args.config).items():
            setattr(cfg, key, value)
    overrides = {
        "seed": "seed", "folds": "folds", "classifier": "classifier",
        "n_estimators": "n_estimators", "policy": "policy",
        "min_active": "min_active", "accuracy_source": "accuracy_source",
        "idle_timeout": "idle_timeout", "test_csv": "test_csv",
    }
    for attr, key in overrides.items():
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _out_stream(path: str | None):
    return open(path, "w", encoding="utf-8", newline="") if path else sys.stdout


def _close_out(fh):
    if fh is not sys.stdout:
        fh.close()


def cmd_extract(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    label = ClassLabel.parse(args.label)
    for path in args.pcaps:
        if not os.path.isfile(path):
            print(f"error: no such capture file: {path}", file=sys.stderr)
            return EXIT_USAGE
    vectors = []
    total = CaptureStats()
    flow_count = 0
    for file_idx, path in enumerate(args.pcaps):
        stats = CaptureStats()
        packets = list(read_pcap(path, stats))
        flows = assemble_flows(packets, cfg.idle_timeout)
        if args.require_syn:
            flows = [f for f in flows if f.open_reason is OpenReason.SYN]
        stem = os.path.splitext(os.path.basename(path))[0]
        for seq, flow in enumerate(flows):
            vec = compute_features(flow, flow_id=f"{stem}-{file_idx:02d}-{seq:05d}")
            vec.label = label
            vectors.append(vec)
        flow_count += len(flows)
        total.packets_total += stats.packets_total
        total.tcp_packets += stats.tcp_packets
        total.skipped_non_tcp += stats.skipped_non_tcp
        total.dropped_fragments += stats.dropped_fragments
    matrix = FeatureMatrix.from_vectors(vectors) if vectors else FeatureMatrix.from_rows(
        tuple(f"F{i}" for i in range(1, 17)), [], [], [])
    out = _out_stream(args.out)
    try:
        save_csv(matrix, out)
    finally:
        _close_out(out)
    print(f"extracted {flow_count} flows from {total.tcp_packets} TCP packets "
          f"({total.skipped_non_tcp} non-TCP skipped, "
          f"{total.dropped_fragments} fragments dropped)", file=sys.stderr)
    return EXIT_OK


def _load_matrix(path: str) -> FeatureMatrix:
    if not os.path.isfile(path):
        raise DatasetError(f"no such file: {path}")
    return load_csv(path)


def _parse_method(text: str) -> str:
    try:
        return _METHOD_ALIASES[text.lower()]
    except KeyError:
        raise ValueError(
            f"unknown method {text!r}; choose from {', '.join(METHODS)}") from None


def cmd_rank(args: argparse.Namespace) -> int:
    matrix = _load_matrix(args.csv)
    method = _parse_method(args.method)
    ranked = ranking(matrix, method)
    out = _out_stream(args.out)
    try:
        if args.format == "json":
            out.write(json.dumps({
                "method": ranked.method,
                "entries": [{"rank": pos, "feature": fid, "score": score}
                            for pos, (fid, score) in enumerate(ranked.entries, start=1)],
            }, indent=2) + "\n")
        else:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["rank", "feature", "score"])
            for pos, (fid, score) in enumerate(ranked.entries, start=1):
                writer.writerow([pos, fid, format_cell(score)])
    finally:
        _close_out(out)
    return EXIT_OK


def cmd_select(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    matrix = _load_matrix(args.csv)
    test_matrix = _load_matrix(cfg.test_csv) if cfg.accuracy_source == "holdout" else None
    method = _parse_method(args.method)
    fc = ranking(matrix, method)
    result = select_features(
        matrix, fc=fc, spec=cfg.spec(), policy=cfg.policy,
        min_active=cfg.min_active, k=cfg.folds, seed=cfg.seed,
        accuracy_source=cfg.accuracy_source, test_matrix=test_matrix)
    out = _out_stream(args.out)
    try:
        if args.format == "csv":
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["step", "pair", "victim", "features", "accuracy"])
            writer.writerows(trace_rows(result.trace))
            print(f"best subset: {', '.join(result.best_subset)} "
                  f"(accuracy {result.best_accuracy:.6f})", file=sys.stderr)
        else:
            out.write(result_to_json(result, extra={
                "method": method, "classifier": cfg.classifier, "seed": cfg.seed,
                "folds": cfg.folds, "policy": cfg.policy,
                "accuracy_source": cfg.accuracy_source,
            }) + "\n")
    finally:
        _close_out(out)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    matrix = _load_matrix(args.csv)
    if matrix.n_rows == 0:
        print("error: input CSV has no rows", file=sys.stderr)
        return EXIT_USAGE
    test_matrix = _load_matrix(cfg.test_csv) if cfg.accuracy_source == "holdout" else None
    ff = ff_ranking(matrix)  # pair scores are label-free; share across methods
    rows = []
    failures = 0
    for method in METHODS:
        try:
            fc = ranking(matrix, method)
            result = select_features(
                matrix, fc=fc, ff=ff, spec=cfg.spec(), policy=cfg.policy,
                min_active=cfg.min_active, k=cfg.folds, seed=cfg.seed,
                accuracy_source=cfg.accuracy_source, test_matrix=test_matrix)
            rows.append((method, result.best_subset, result.best_accuracy))
        except CorrnetError as exc:
            failures += 1
            print(f"{method}: failed: {exc}", file=sys.stderr)
    out = _out_stream(args.out)
    try:
        if args.format == "json":
            out.write(json.dumps({
                "results": [{"method": m, "features": list(f), "accuracy": a}
                            for m, f, a in rows]}, indent=2) + "\n")
        else:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["method", "features", "accuracy"])
            for m, feats, acc in rows:
                writer.writerow([m, ";".join(feats), format_cell(acc)])
    finally:
        _close_out(out)
    return EXIT_OK if rows else EXIT_COMPUTE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrnet",
        description="TCP flow feature extraction, ranking and selection "
                    "for benign/malware traffic classification")
    parser.add_argument("--version", action="version", version=f"corrnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="root seed (default: CORRNET_SEED or 0)")

    p = sub.add_parser("extract", help="extract per-flow features from pcaps to CSV")
    p.add_argument("pcaps", nargs="+", help="pcap/pcapng capture files")
    p.add_argument("--label", required=True, choices=["normal", "malware"],
                   help="class label for every flow in these captures")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--idle-timeout", dest="idle_timeout", type=float,
                   help="flow expiry gap in seconds (default 600)")
    p.add_argument("--require-syn", action="store_true",
                   help="drop flows whose first packet is not a SYN")
    add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("rank", help="rank features by one method")
    p.add_argument("csv")
    p.add_argument("--method", default="crRelevance",
                   help=f"one of: {', '.join(METHODS)} (default crRelevance)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    add_common(p)
    p.set_defaults(func=cmd_rank)

    def add_select_opts(p):
        p.add_argument("--classifier", choices=list(KINDS), help="default tree")
        p.add_argument("--n-estimators", dest="n_estimators", type=int,
                       help="ensemble size (default 10)")
        p.add_argument("--policy", choices=list(POLICIES), help="default exhaustive")
        p.add_argument("--min-active", dest="min_active", type=int,
                       help="stop once this many features remain (default 1)")
        p.add_argument("--folds", type=int, help="cross-validation folds (default 10)")
        p.add_argument("--accuracy-source", dest="accuracy_source",
                       choices=["cv", "holdout"], help="default cv")
        p.add_argument("--test-csv", dest="test_csv",
                       help="held-out matrix for --accuracy-source holdout")
        p.add_argument("--out")
        add_common(p)

    p = sub.add_parser("select", help="run the elimination loop")
    p.add_argument("csv")
    p.add_argument("--method", default="crRelevance",
                   help="feature-class ranking method (default crRelevance)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    add_select_opts(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("compare", help="run selection once per ranking method")
    p.add_argument("csv")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    add_select_opts(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except SelectionAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("partial trace:", file=sys.stderr)
        for row in trace_rows(exc.trace):
            print(",".join(row), file=sys.stderr)
        return EXIT_COMPUTE
    except (StatsError, ClassifierError, SelectionError, PcapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
