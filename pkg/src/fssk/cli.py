"""Command-line interface: ``fssk {gen,run,mask-stats,oracle}``.

Exit codes: 0 success, 1 validation/configuration error, 2 I/O or format
error, 3 oracle failure.
"""

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import fst, oracles
from .attention import STRATEGIES
from .episode import (MANIFEST, SyntheticConfig, generate_synthetic_episode,
                      load_episode, make_weights, run_pipeline, save_episode)
from .errors import ConfigError, FormatError, FsskError
from .metrics import (DEFAULT_EPSILON, EpisodeRecord, aggregate, iou,
                      prior_cross_entropy, summaries_to_csv)
from .pmgm import DEFAULT_DELTA

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_ORACLE = 0, 1, 2, 3
MASK_STATS_FIELDS = ("strategy", "block", "mean_ratio_pct", "max_ratio_pct",
                     "mean_masked_cells", "mean_masked_columns", "episodes", "skipped")


@dataclass(frozen=True)
class RunConfig:
    delta: float = DEFAULT_DELTA
    strategy: str = "none"
    blocks: int = 5
    cab: int = 4
    seed: int = 0
    epsilon: float = DEFAULT_EPSILON


def parse_size(text):
    try:
        c, h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like CxHxW, got {text!r}")
    return c, h, w


def _workers():
    try:
        return max(1, int(os.environ.get("FSSK_THREADS", "1")))
    except ValueError:
        return 1


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------- gen

def cmd_gen(args):
    if args.n < 1:
        raise ConfigError(f"--n must be >= 1, got {args.n}")
    c, h, w = args.size
    cfg = SyntheticConfig(seed=args.seed, c=c, h=h, w=w, noise=args.noise,
                          cam_fidelity=args.cam_fidelity, distractor=args.distractor,
                          k=args.shots, query_mask=not args.no_query_mask)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(args.n):
        name = f"episode_{i:04d}"
        save_episode(generate_synthetic_episode(cfg, i), out / name)
        names.append(name)
    (out / "index.json").write_text(_dump_json({"config": asdict(cfg), "episodes": names}))
    print(f"wrote {args.n} episodes to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------- run

def _expand_paths(paths):
    found = []
    for p in map(Path, paths):
        if (p / MANIFEST).is_file():
            found.append(p)
        elif p.is_dir():
            subs = sorted(d for d in p.iterdir() if (d / MANIFEST).is_file())
            if not subs:
                raise FormatError(f"{p}: no episode manifest found")
            found.extend(subs)
        else:
            raise FileNotFoundError(f"episode path not found: {p}")
    names = [p.name for p in found]
    if len(set(names)) != len(names):
        raise ConfigError("episode directory names must be unique")
    return found


def _run_one(path, cfg, weights, out):
    ep = load_episode(path)
    res = run_pipeline(ep, weights, cfg.strategy, cfg.delta)
    d = out / path.name
    d.mkdir(parents=True, exist_ok=True)
    fst.save(d / "prior.fst", res.prior)
    fst.save(d / "fused_query.fst", res.fused_query)
    fst.save(d / "fused_support.fst", res.fused_support)
    fst.save(d / "decoder_output.fst", res.decoder_output)
    entry = {"name": path.name, "class_id": ep.class_id, "k": ep.k,
             "masking": [r.to_dict() for r in res.reports],
             "warnings": [f"block {r.block_index}: cyctr would mask every column; skipped"
                          for r in res.reports if r.skipped],
             "metrics": None}
    record = None
    if ep.query_mask is not None:
        pred = res.prior[0] >= 0.5
        record = EpisodeRecord.from_masks(ep.class_id, pred, ep.query_mask, res.prior,
                                          cfg.epsilon)
        entry["metrics"] = {"prior_ce": prior_cross_entropy(res.prior, ep.query_mask,
                                                            cfg.epsilon),
                            "iou": iou(pred, ep.query_mask)}
    return entry, record


def cmd_run(args):
    cfg = RunConfig(delta=args.delta, strategy=args.strategy, blocks=args.blocks,
                    cab=args.cab, seed=args.seed, epsilon=args.epsilon)
    paths = _expand_paths(args.episodes)
    first = load_episode(paths[0])
    weights = make_weights(cfg.seed, first.shape[0], cfg.blocks, cfg.cab)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        results = list(pool.map(lambda p: _run_one(p, cfg, weights, out), paths))
    entries = [e for e, _ in results]
    records = [r for _, r in results if r is not None]
    summary = aggregate(records) if records else None
    report = {"config": asdict(cfg), "episodes": entries,
              "summary": summary.to_dict() if summary else None}
    (out / "report.json").write_text(_dump_json(report))
    if summary:
        (out / "metrics.csv").write_text(summaries_to_csv({0: summary}))
    print(f"processed {len(entries)} episodes -> {out / 'report.json'}")
    return EXIT_OK


# --------------------------------------------------------------- mask-stats

def mask_stats(seed, n, size, blocks=5, cab=4, distractor=True, weight_seed=0):
    """Per-(strategy, block) masking statistics over ``n`` synthetic episodes."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    c, h, w = size
    gen = SyntheticConfig(seed=seed, c=c, h=h, w=w, distractor=distractor)
    weights = make_weights(weight_seed, c, blocks, cab)
    stats = {}
    for i in range(n):
        ep = generate_synthetic_episode(gen, i)
        for strategy in ("cyctr", "dicm"):
            for r in run_pipeline(ep, weights, strategy).reports:
                stats.setdefault((strategy, r.block_index), []).append(r)
    rows = []
    for (strategy, block), reps in sorted(stats.items()):
        ratios = [r.ratio for r in reps]
        rows.append({
            "strategy": strategy,
            "block": block,
            "mean_ratio_pct": 100.0 * float(np.mean(ratios)),
            "max_ratio_pct": 100.0 * float(np.max(ratios)),
            "mean_masked_cells": float(np.mean([r.masked_cells for r in reps])),
            "mean_masked_columns": float(np.mean([r.masked_columns for r in reps])),
            "episodes": len(reps),
            "skipped": sum(r.skipped for r in reps),
        })
    return rows, stats


def cmd_mask_stats(args):
    rows, _ = mask_stats(args.seed, args.n, args.size, args.blocks, args.cab,
                         args.distractor, args.weight_seed)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=MASK_STATS_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# ------------------------------------------------------------------- oracle

def cmd_oracle(args):
    results = oracles.run_suites(seed=args.seed, cases=args.cases)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name:<26} cases={r.cases:<4} "
              f"max_abs_diff={r.max_abs_diff:.3e} tol={r.tolerance:.0e}")
    failed = [r for r in results if not r.passed]
    if args.out:
        Path(args.out).write_text(_dump_json({"seed": args.seed, "cases": args.cases,
                                              "suites": [r.to_dict() for r in results]}))
    for r in failed:
        print(json.dumps({"suite": r.name, "failure": r.failure}, sort_keys=True),
              file=sys.stderr)
    return EXIT_ORACLE if failed else EXIT_OK


# ------------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(prog="fssk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write seeded synthetic episodes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--size", type=parse_size, default=(16, 8, 8), metavar="CxHxW")
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--cam-fidelity", type=float, default=1.0)
    p.add_argument("--distractor", action="store_true")
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--no-query-mask", action="store_true",
                   help="omit query masks (inference-mode episodes)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run the pipeline over episode directories")
    p.add_argument("episodes", nargs="+")
    p.add_argument("--seed", type=int, default=0, help="weight initialization seed")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--strategy", choices=STRATEGIES, default="none")
    p.add_argument("--blocks", type=int, default=5, help="decoder blocks")
    p.add_argument("--cab", type=int, default=4, help="cross-attention blocks")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("mask-stats", help="masking ratio per strategy and block (CSV)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight-seed", type=int, default=0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--size", type=parse_size, default=(64, 30, 30), metavar="CxHxW")
    p.add_argument("--blocks", type=int, default=5)
    p.add_argument("--cab", type=int, default=4)
    p.add_argument("--distractor", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mask_stats)

    p = sub.add_parser("oracle", help="compare kernels against brute-force oracles")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (FsskError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
