"""Command-line interface: ``outage-lab <command> ...``.

SNR flags on the surface are in dB and converted with 10^(dB/10); the
``mi`` command takes linear SNR values since it probes I_X directly.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys

from outage_lab import exponents as ex
from outage_lab import spec as specmod
from outage_lab.constellation import (
    MiTable,
    awgn_mutual_information,
    build_constellation,
    build_mi_table,
)
from outage_lab.errors import BudgetExceeded, OutageLabError, SpecError
from outage_lab.rotation import build_rotation, load_rotation, verify_full_diversity
from outage_lab.sim import check_coverage, estimates_csv, summary_csv, sweep

EXIT_OK, EXIT_SPEC, EXIT_VERIFY, EXIT_BUDGET = 0, 2, 3, 4


def _float_or_inf(text):
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def _write(path, text):
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_mi(args):
    c = build_constellation(args.kind, args.M)
    if args.table:
        t = build_mi_table(c, args.s_min, args.s_max, args.n_points, args.n_noise, args.seed)
        _write(args.out, t.to_json() + "\n")
        return EXIT_OK
    if not args.s:
        raise SpecError("give at least one --s value or --table")
    rows = [("s", "mi", "stderr")]
    for s in args.s:
        mi, se = awgn_mutual_information(c, s, args.n_noise, args.seed)
        rows.append((repr(s), repr(mi), repr(se)))
    _write(args.out, "".join(",".join(r) + "\n" for r in rows))
    return EXIT_OK


def _query(args, ratio=None):
    R = args.R if ratio is None else ratio * args.M
    return ex.ExponentQuery(args.B, args.m, R, args.M, args.de, args.dpeak, args.N)


def _closed_form(q):
    return ex.outage_exponent_thm1(q) if q.N == 1 else ex.outage_exponent_thm2(q)


def _oracle(q):
    return ex.oracle_exponent(q) if q.N == 1 else ex.oracle_exponent_rotated(q)


def cmd_exponent(args):
    if args.N > 1 and args.dpeak != math.inf:
        raise SpecError("rotated exponent defined for unconstrained peak only")
    if args.staircase:
        step = args.step
        k = round(1 / step)
        ratios = [i / k for i in range(1, k + 1)]
        rows = []
        for r in ratios:
            q = _query(args, r)
            res = _closed_form(q)
            row = [repr(r), ex._fmt(res.d), res.case_label]
            if args.oracle:
                orc = _oracle(q)
                row += [ex._fmt(orc.d), str(abs(orc.d - res.d) <= 1e-9 or orc.d == res.d)]
            rows.append(row)
        head = ["R_over_M", "d", "case_label"] + (["d_oracle", "agree"] if args.oracle else [])
        text = "".join(",".join(map(str, r)) + "\n" for r in [head] + rows)
        _write(args.out, text)
        if args.oracle and any(r[-1] == "False" for r in rows):
            return EXIT_VERIFY
        return EXIT_OK
    if args.R is None:
        raise SpecError("--R is required unless --staircase is given")
    q = _query(args)
    res = _closed_form(q)
    rec = res.to_record(q)
    code = EXIT_OK
    if args.oracle:
        orc = _oracle(q)
        agree = abs(orc.d - res.d) <= 1e-9 or orc.d == res.d
        rec["oracle"] = {"d": ex._fmt(orc.d), "agree": agree, "argmin": orc.argmin}
        code = EXIT_OK if agree else EXIT_VERIFY
    _write(args.out, json.dumps(rec) + "\n")
    return code


def _load_mi_table(doc, cfg):
    path = doc.get("mi_table")
    if not path or cfg.N != 1:
        return None
    try:
        t = MiTable.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise SpecError(f"cannot read MI table {path}: {exc}") from None
    try:
        check_coverage(t, cfg.constellation)
    except OutageLabError as exc:
        raise SpecError(f"missing MI table coverage: {exc}") from None
    return t


def _run_specs(docs, threads, summary_path):
    cfgs, tables = [], []
    for doc in docs:
        cfg = specmod.to_config(doc)
        cfgs.append(cfg)
        tables.append(_load_mi_table(doc, cfg))
    rows = []
    for doc, cfg, table in zip(docs, cfgs, tables):
        row = sweep([cfg], mi_table=table, workers=threads)[0]
        row["config"] = len(rows)
        rows.append(row)
        out = doc.get("output", {}).get("estimates_csv")
        if out:
            _write(out, estimates_csv(row["estimates"]))
    text = summary_csv(rows)
    _write(summary_path, text)
    if any(isinstance(r["error"], str) and "budget" in r["error"].lower() for r in rows):
        return EXIT_BUDGET
    return EXIT_OK


def cmd_simulate(args):
    doc = specmod.load(args.spec)
    summary = args.summary or doc.get("output", {}).get("summary_csv")
    return _run_specs([doc], args.threads, summary)


def cmd_sweep(args):
    doc = specmod.load(args.specs)
    if isinstance(doc, list):
        doc = {"specs": doc}
    items = doc.get("specs", [])
    docs = [specmod.load(x) if isinstance(x, str) else x for x in items]
    return _run_specs(docs, args.threads, args.summary or doc.get("summary_csv"))


def cmd_rotation_verify(args):
    c = build_constellation(args.kind, args.M)
    U = load_rotation(args.matrix) if args.matrix else build_rotation(args.family, args.N)
    rep = verify_full_diversity(U, c)
    rep["witness"] = None if rep["witness"] is None else [[z.real, z.imag] for z in rep["witness"]]
    rep["N"] = int(U.shape[0])
    rep["constellation"] = c.to_dict()
    _write(args.out, json.dumps(rep) + "\n")
    return EXIT_OK if rep["ok"] else EXIT_VERIFY


def build_parser():
    p = argparse.ArgumentParser(prog="outage-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mi", help="discrete-input AWGN mutual information")
    m.add_argument("--kind", required=True, type=str.upper, choices=["PSK", "QAM"])
    m.add_argument("--M", required=True, type=int)
    m.add_argument("--s", type=float, action="append", help="linear SNR; repeatable")
    m.add_argument("--table", action="store_true", help="build a cached MI table")
    m.add_argument("--s-min", type=float, default=1e-3)
    m.add_argument("--s-max", type=float, default=1e6)
    m.add_argument("--n-points", type=int, default=64)
    m.add_argument("--n-noise", type=int, default=200_000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out")
    m.set_defaults(func=cmd_mi)

    e = sub.add_parser("exponent", help="outage exponents")
    e.add_argument("--B", required=True, type=int)
    e.add_argument("--m", type=int, default=1)
    e.add_argument("--R", type=float)
    e.add_argument("--M", required=True, type=int)
    e.add_argument("--de", type=float, default=0.0)
    e.add_argument("--dpeak", type=_float_or_inf, default=math.inf)
    e.add_argument("--N", type=int, default=1)
    e.add_argument("--oracle", action="store_true", help="cross-check with the LP oracle")
    e.add_argument("--staircase", action="store_true", help="emit d against R/M as CSV")
    e.add_argument("--step", type=float, default=0.01, help="R/M step of the staircase")
    e.add_argument("--out")
    e.set_defaults(func=cmd_exponent)

    s = sub.add_parser("simulate", help="Monte Carlo outage for one spec")
    s.add_argument("spec")
    s.add_argument("--threads", type=int)
    s.add_argument("--summary")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="Monte Carlo outage for a list of specs")
    w.add_argument("specs")
    w.add_argument("--threads", type=int)
    w.add_argument("--summary")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("rotation-verify", help="exhaustive full-diversity check")
    r.add_argument("--N", type=int, default=2)
    r.add_argument("--family", default="cyclotomic", choices=["identity", "cyclotomic"])
    r.add_argument("--matrix", help="JSON file of row-major [re, im] pairs")
    r.add_argument("--kind", type=str.upper, default="PSK", choices=["PSK", "QAM"])
    r.add_argument("--M", type=int, default=2)
    r.add_argument("--out")
    r.set_defaults(func=cmd_rotation_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (SpecError, OutageLabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
