"""Command line entry point ``bcmortar``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from .coupling import METHODS
from .experiments import (ExperimentConfig, condition_report, experiment1, experiment2,
                          gen_test_meshes, verify_report)
from .mesh import write_mesh

COLUMNS = ["experiment", "method", "degree", "level", "h_or_nu", "value", "norm"]

# exp1 and exp2 accept these CGS iteration counts for the BC systems
BC_ITERATION_LIMIT = 15


def _methods(text):
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"methods must be a comma list from {','.join(METHODS)}")
    return methods


def _write_csv(path, rows):
    fh = open(path, "w", newline="", encoding="ascii") if path else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    finally:
        if path:
            fh.close()


def _iterations_ok(iterations):
    worst = max(iterations.get("bc", []), default=0)
    if worst > BC_ITERATION_LIMIT:
        logging.error("BC solver needed %d CGS iterations (limit %d)", worst, BC_ITERATION_LIMIT)
        return False
    return True


def cmd_verify(args):
    rows = verify_report(args.level)
    print(f"{'check':32s} {'value':>12s} {'limit':>9s} status")
    for row in rows:
        print(f"{row.check:32s} {row.value:12.3e} {row.limit:9.1e} {row.status}")
    failed = [r for r in rows if r.hard and not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks ok")
    return 1 if failed else 0


def cmd_exp1(args):
    cfg = ExperimentConfig("exp1", args.methods, args.degree, level=args.level, steps=args.steps)
    series, iterations = experiment1(cfg)
    rows = []
    ok = True
    for method, errs in series.items():
        if np.any(np.diff(errs) < -1e-10):
            logging.error("err_nu of %s is not monotone", method)
            ok = False
        for nu, e in enumerate(errs):
            rows.append(dict(experiment="exp1", method=method, degree=cfg.degree, level=cfg.level,
                             h_or_nu=nu, value=float(e), norm="L2"))
    _write_csv(args.out, rows)
    return 0 if ok and _iterations_ok(iterations) else 1


def cmd_exp2(args):
    cfg = ExperimentConfig("exp2", args.methods, args.degree, max_level=args.max_level)
    records, rates, iterations = experiment2(cfg)
    rows = [dict(experiment="exp2", method=r.method, degree=r.degree, level=r.level,
                 h_or_nu=r.h, value=r.value, norm=r.norm) for r in records]
    _write_csv(args.out, rows)
    for (method, norm), p in sorted(rates.items()):
        print(f"rate {method:9s} {norm:3s} p = {p:.3f}", file=sys.stderr)
    ok = True
    for method in cfg.methods:
        values = [r.value for r in records if r.method == method and r.norm == "L2"]
        if any(b >= a for a, b in zip(values, values[1:])):
            logging.error("L2 error of %s does not decrease with the level", method)
            ok = False
    return 0 if ok and _iterations_ok(iterations) else 1


def cmd_cond(args):
    rows = [dict(experiment="cond", method=r["method"], degree=r["degree"], level=r["level"],
                 h_or_nu=r["facets"], value=r["kappa"], norm="kappa")
            for r in condition_report(args.max_level)]
    _write_csv(args.out, rows)
    ok = True
    for r in (0, 1):
        k = [row["value"] for row in rows if row["method"] == "bc" and row["degree"] == r]
        if not all(np.isfinite(k)) or max(k) > 2 * min(k):
            logging.error("BC condition numbers for r=%d vary by more than 2x: %s", r, k)
            ok = False
    return 0 if ok else 1


def cmd_mesh(args):
    mi, mj = gen_test_meshes(args.level)
    mesh = mi if args.which == "i" else mj
    if args.out:
        write_mesh(mesh, args.out)
    else:
        # write_mesh wants a path; stdout gets the same layout without edge comments
        print(mesh.n_nodes, 0, mesh.n_facets)
        for x, y in mesh.node_coords:
            print(repr(float(x)), repr(float(y)))
        for a, b, c in mesh.facets:
            print(a, b, c)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="bcmortar", description=(
        "Structure-preserving coupling of nonconforming triangle meshes with "
        "Buffa-Christiansen multipliers."))
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("verify", help="run the invariant checks")
    s.add_argument("--level", type=int, default=1)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("exp1", help="repeated round trips at a fixed level")
    s.add_argument("--degree", type=int, choices=(0, 1), required=True)
    s.add_argument("--methods", type=_methods, default=METHODS)
    s.add_argument("--level", type=int, default=2)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--out")
    s.set_defaults(func=cmd_exp1)

    s = sub.add_parser("exp2", help="one round trip per refinement level")
    s.add_argument("--degree", type=int, choices=(0, 1), required=True)
    s.add_argument("--methods", type=_methods, default=METHODS)
    s.add_argument("--max-level", type=int, default=4)
    s.add_argument("--out")
    s.set_defaults(func=cmd_exp2)

    s = sub.add_parser("cond", help="condition numbers of the target mass matrices")
    s.add_argument("--max-level", type=int, default=3)
    s.add_argument("--out")
    s.set_defaults(func=cmd_cond)

    s = sub.add_parser("mesh", help="write one of the test meshes")
    s.add_argument("--level", type=int, default=0)
    s.add_argument("--which", choices=("i", "j"), required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_mesh)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"bcmortar: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
