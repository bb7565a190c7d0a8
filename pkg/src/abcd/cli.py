"""Command-line entry point: ``abcd generate | run | bench``.

Every long flag can also be set through an environment variable named
``ABCD_<FLAG>`` (upper case, dashes as underscores), e.g. ``ABCD_DELTA=0.01``.
Command-line values win over the environment.

Exit codes: 0 success, 1 usage error, 2 data error, 3 partial bench failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Iterator, List, Optional

import numpy as np

from abcd.bench import run_grid, write_metrics_csv
from abcd.detector import ABCD, DetectorConfig
from abcd.exceptions import DomainError
from abcd.generators import (
    CHANGE_EVERY,
    GENERATORS,
    DriftSchedule,
    StreamWithTruth,
    gen_hsphere,
    gen_led,
    gen_normal,
    gen_rbf,
    load_stream,
    save_stream,
)
from abcd.models import ModelConfig, save_model

ENV_PREFIX = "ABCD_"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _apply_env(parser: argparse.ArgumentParser) -> None:
    for action in parser._actions:
        longs = [s for s in action.option_strings if s.startswith("--")]
        if not longs:
            continue
        key = ENV_PREFIX + longs[0][2:].upper().replace("-", "_")
        if key not in os.environ:
            continue
        raw = os.environ[key]
        if isinstance(action, argparse._StoreTrueAction):
            action.default = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(action, argparse._StoreFalseAction):
            action.default = raw.lower() not in ("1", "true", "yes", "on")
        elif action.type is not None:
            action.default = action.type(raw)
        else:
            action.default = raw
        action.required = False


def _optional_int(s: str) -> Optional[int]:
    return None if s.lower() in ("", "none") else int(s)


# ---------------------------------------------------------------------------
# generate


def generate_stream(
    gen: str,
    d: int = 24,
    dstar: int = 8,
    length: int = 10000,
    seed: int = 0,
    change_every: int = CHANGE_EVERY,
    interval: int = 1,
    shift: float = 0.3,
    centroids: int = 5,
) -> StreamWithTruth:
    """Build a stream of exactly ``length`` rows with a change every ``change_every``."""
    if gen not in GENERATORS:
        raise UsageError(f"unknown generator {gen!r}; choose from {', '.join(GENERATORS)}")
    n_concepts = max(1, math.ceil(length / change_every))
    sched = DriftSchedule(interval=interval)
    if gen == "hsphere":
        s = gen_hsphere(d, dstar, n_concepts, change_every, sched, seed)
    elif gen in ("normal-m", "normal-v"):
        kind = "mean" if gen == "normal-m" else "variance"
        s = gen_normal(d, dstar, kind, [shift] * (n_concepts - 1), change_every, sched, seed)
    elif gen == "led":
        s = gen_led(n_concepts, change_every, None, sched, seed)
    else:
        s = gen_rbf(d, centroids, change_every, n_concepts, sched, seed)
    return s.head(length)


def cmd_generate(args) -> int:
    try:
        stream = generate_stream(
            args.gen, args.d, args.dstar, args.len, args.seed, args.change_every, args.interval,
            args.shift, args.centroids,
        )  # fmt: skip
    except DomainError as exc:
        raise UsageError(str(exc))
    try:
        csv_path, json_path = save_stream(stream, args.out)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(f"wrote {csv_path} ({len(stream)} x {stream.d}) and {json_path}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# run


def _parse_row(line: str, fmt: str) -> List[float]:
    if fmt == "jsonl":
        vals = json.loads(line)
        if not isinstance(vals, list):
            raise ValueError("JSONL row must be a flat array")
    else:
        vals = line.split(",")
    return [float(v) for v in vals]


def read_rows(fh, fmt: str, strict: bool) -> Iterator[np.ndarray]:
    """Yield observations; malformed rows are skipped with a warning unless ``strict``."""
    header_pending = fmt == "csv"
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        if header_pending:
            header_pending = False
            continue
        try:
            row = np.array(_parse_row(line, fmt))
        except (ValueError, json.JSONDecodeError) as exc:
            if strict:
                raise DomainError(f"line {lineno}: malformed row ({exc})")
            print(f"warning: skipping malformed line {lineno}", file=sys.stderr)
            continue
        yield row


def _detect_format(path: str, fmt: str) -> str:
    if fmt != "auto":
        return fmt
    return "jsonl" if path.endswith((".jsonl", ".ndjson")) else "csv"


def detector_config_from_args(args) -> DetectorConfig:
    model = ModelConfig(
        kind=args.model, eta=args.eta, epochs=args.epochs, learning_rate=args.lr, seed=args.seed,
        rbf_gamma=args.rbf_gamma,
    )  # fmt: skip
    return DetectorConfig(
        delta=args.delta, tau=args.tau, n_min=args.nmin, k_max=args.kmax, n_max=args.nmax,
        M=args.bound_m, model=model, normalize=args.normalize,
    )  # fmt: skip


def cmd_run(args) -> int:
    try:
        config = detector_config_from_args(args)
    except DomainError as exc:
        raise UsageError(str(exc))
    fmt = _detect_format(args.input, args.format)
    try:
        fh = sys.stdin if args.input == "-" else open(args.input)
    except OSError as exc:
        print(f"error: cannot read input: {exc}", file=sys.stderr)
        return EXIT_DATA
    det = ABCD(config)
    out = sys.stdout
    n_obs = n_reports = 0
    busy = 0.0
    try:
        for x in read_rows(fh, fmt, args.strict):
            if det.d is None:
                dp = config.model.bottleneck(x.shape[0])
                print(
                    f"abcd run: model={config.model.kind} d={x.shape[0]} bottleneck={dp} "
                    f"delta={config.delta} tau={config.tau} n_min={config.n_min} k_max={config.k_max}",
                    file=sys.stderr,
                )
            elif x.shape[0] != det.d:
                print(f"error: dimension changed from {det.d} to {x.shape[0]} at row {n_obs + 1}", file=sys.stderr)
                return EXIT_DATA
            t0 = time.perf_counter()
            report = det.process(x)
            busy += time.perf_counter() - t0
            n_obs += 1
            if report is not None:
                n_reports += 1
                out.write(json.dumps(report.to_dict()) + "\n")
                out.flush()
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        if fh is not sys.stdin:
            fh.close()
    if args.checkpoint and det.model is not None:
        save_model(det.model, args.checkpoint)
    latency = busy / n_obs * 1e3 if n_obs else 0.0
    print(f"observations={n_obs} reports={n_reports} mean_latency_ms={latency:.4f}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench

GRID_KEYS = {
    "model": ("model", "kind"),
    "eta": ("model", "eta"),
    "epochs": ("model", "epochs"),
    "lr": ("model", "learning_rate"),
    "model_seed": ("model", "seed"),
    "delta": ("det", "delta"),
    "tau": ("det", "tau"),
    "nmin": ("det", "n_min"),
    "kmax": ("det", "k_max"),
    "nmax": ("det", "n_max"),
    "bound_m": ("det", "M"),
}


def expand_grid(grid) -> List[dict]:
    """A grid is a dict of lists (cartesian product) or a list of such dicts/points."""
    if isinstance(grid, list):
        return [p for s in grid for p in expand_grid(s)]
    for k in grid:
        if k not in GRID_KEYS:
            raise DomainError(f"unknown grid key {k!r}")
    keys = sorted(grid)
    vals = [v if isinstance(v, list) else [v] for v in (grid[k] for k in keys)]
    return [dict(zip(keys, combo)) for combo in itertools.product(*vals)]


def build_config(point: dict) -> DetectorConfig:
    model_kw, det_kw = {}, {}
    for k, v in point.items():
        where, name = GRID_KEYS[k]
        (model_kw if where == "model" else det_kw)[name] = v
    return DetectorConfig(model=ModelConfig(**model_kw), **det_kw)


def load_manifest(path) -> tuple:
    """Resolve every stream in the manifest, failing before any cell runs."""
    base = Path(path).parent
    with open(path) as fh:
        manifest = json.load(fh)
    if "streams" not in manifest or "grid" not in manifest:
        raise DomainError("manifest needs 'streams' and 'grid'")
    streams, ids = [], []
    for i, entry in enumerate(manifest["streams"]):
        sid = str(entry.get("id", f"s{i}"))
        if "csv" in entry:
            csv_path, truth_path = base / entry["csv"], base / entry.get("truth", "")
            if "truth" not in entry or not csv_path.exists() or not truth_path.exists():
                raise DomainError(f"stream {sid}: missing csv or truth file")
            streams.append(load_stream(csv_path, truth_path))
        elif "generator" in entry:
            kw = {k: entry[k] for k in entry if k not in ("id", "generator")}
            kw.setdefault("length", kw.pop("len", 10000))
            try:
                streams.append(generate_stream(entry["generator"], **kw))
            except (TypeError, UsageError) as exc:
                raise DomainError(f"stream {sid}: {exc}")
        else:
            raise DomainError(f"stream {sid}: needs 'csv'+'truth' or 'generator'")
        ids.append(sid)
    points = expand_grid(manifest["grid"])
    if not streams or not points:
        raise DomainError("manifest lists no streams or no configs")
    return streams, ids, points


def cmd_bench(args) -> int:
    try:
        streams, ids, points = load_manifest(args.manifest)
    except (OSError, DomainError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    configs, bad = [], []
    for p in points:
        try:
            configs.append(build_config(p))
        except (DomainError, TypeError) as exc:
            bad.append((p, str(exc)))
    rows = run_grid(streams, configs, ids, jobs=args.jobs) if configs else []
    failures = [
        {"stream_id": r.stream_id, "fingerprint": r.fingerprint, "error": r.error} for r in rows if r.failed
    ]
    failures += [{"stream_id": sid, "point": p, "error": e} for sid in ids for p, e in bad]
    if args.out == "-":
        write_metrics_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            write_metrics_csv(rows, fh)
    for f in failures:
        print(f"failed cell: {json.dumps(f)}", file=sys.stderr)
    if failures and args.failures:
        with open(args.failures, "w") as fh:
            json.dump(failures, fh, indent=2)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="abcd", description="Adaptive Bernstein change detection for high-dimensional streams.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic stream and its truth sidecar")
    g.add_argument("--gen", required=True, help=f"one of {', '.join(GENERATORS)}")
    g.add_argument("--d", type=int, default=24)
    g.add_argument("--dstar", type=int, default=8)
    g.add_argument("--len", type=int, default=10000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--change-every", type=int, default=CHANGE_EVERY)
    g.add_argument("--interval", type=int, default=1, help="drift width; 1 = abrupt")
    g.add_argument("--shift", type=float, default=0.3, help="mean shift (normal-m) or std scale (normal-v)")
    g.add_argument("--centroids", type=int, default=5, help="rbf centroid count")
    g.add_argument("--out", required=True, help="output prefix; writes PREFIX.csv and PREFIX.json")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="detect changes in a CSV/JSONL stream")
    r.add_argument("input", nargs="?", default="-", help="file path or - for stdin")
    r.add_argument("--format", choices=("auto", "csv", "jsonl"), default="auto")
    r.add_argument("--model", choices=("pca", "kpca", "autoencoder"), default="pca")
    r.add_argument("--eta", type=float, default=0.5)
    r.add_argument("--epochs", type=int, default=50)
    r.add_argument("--lr", type=float, default=1e-3)
    r.add_argument("--rbf-gamma", type=float, default=None)
    r.add_argument("--delta", type=float, default=0.05)
    r.add_argument("--tau", type=float, default=2.5)
    r.add_argument("--nmin", type=int, default=100)
    r.add_argument("--kmax", type=int, default=20)
    r.add_argument("--nmax", type=_optional_int, default=None)
    r.add_argument("--bound-m", type=float, default=0.1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--strict", action="store_true", help="abort on malformed rows instead of skipping")
    r.add_argument("--normalize", action="store_true", help="min-max scale with bounds from each warm-up sample")
    r.add_argument("--checkpoint", default=None, help="write the final model to this JSON file")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run a detector grid over a stream manifest")
    b.add_argument("--manifest", required=True)
    b.add_argument("--out", default="-", help="metrics CSV path or - for stdout")
    b.add_argument("--failures", default=None, help="write failed cells to this JSON file")
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    for sp in (g, r, b):
        _apply_env(sp)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
