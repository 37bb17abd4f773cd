"""Command-line driver: family | plan | budget | simulate | estimate | run | verify.

Files use 1-based qubit numbers; setting ids are 0-based positions in the
plan.  Every flag may also come from a JSON file given with --config (keys are
flag names with dashes replaced by underscores); explicit flags win.
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import backend, budget, estimate, hash_family, schedule
from .errors import InvalidArgument, MissingData, QOTError

log = logging.getLogger("qot")

DEFAULTS = {
    "k": 2,
    "construction": "binary",
    "delta": 0.05,
    "family_delta": 0.05,
    "family_seed": 0,
    "eps": None,
    "shots": None,
    "cycle": 0.25,
    "flip": 0.0,
    "fixture": "random:0",
    "workers": os.cpu_count() or 1,
    "workdir": "qot-run",
    "oracle_seeds": 5,
}


class _Stage:
    """Tags errors with the pipeline stage that raised them."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, QOTError) and not hasattr(exc, "stage"):
            exc.stage = self.name
        return False


def parse_fixture(spec: str, n: int):
    """random[:seed] | ghz | zero | dimer[:bell|:mixed|:werner:p]"""
    parts = spec.lower().split(":")
    kind = parts[0]
    if kind == "random":
        return backend.random_state(n, int(parts[1]) if len(parts) > 1 else 0)
    if kind == "ghz":
        return backend.ghz_state(n)
    if kind == "zero":
        return backend.zero_state(n)
    if kind == "dimer":
        sub = parts[1] if len(parts) > 1 else "bell"
        if sub == "bell":
            pair = backend.BELL
        elif sub == "mixed":
            pair = backend.MAX_MIXED_2
        elif sub == "werner" and len(parts) > 2:
            pair = backend.werner(float(parts[2]))
        else:
            raise InvalidArgument(f"unknown dimer pair state {sub!r}")
        return backend.dimer_chain(n, pair)
    raise InvalidArgument(f"unknown fixture {spec!r}")


def _read(path):
    try:
        return Path(path).read_text()
    except FileNotFoundError as exc:
        raise MissingData(f"file not found: {path}") from exc


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def _load_json(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"{what} is not valid JSON: {exc}") from exc


def load_family(path) -> hash_family.PerfectHashFamily:
    return hash_family.PerfectHashFamily.from_dict(_load_json(_read(path), "family file"))


def load_plan(path) -> schedule.MeasurementPlan:
    return schedule.MeasurementPlan.from_dict(_load_json(_read(path), "plan file"))


def load_counts(path, n=None) -> backend.CountsTable:
    return backend.CountsTable.loads(_read(path), n)


def build_family(args) -> hash_family.PerfectHashFamily:
    if args.construction == "binary":
        if args.k != 2:
            raise InvalidArgument("the binary construction only covers k=2")
        return hash_family.binary_family(args.n)
    if args.construction == "random":
        return hash_family.random_family(args.n, args.k, args.family_delta, args.family_seed)
    raise InvalidArgument(f"unknown construction {args.construction!r}")


def resolve_shots(args, n, k) -> int:
    if args.shots is not None:
        return int(args.shots)
    if args.eps is None:
        raise InvalidArgument("give --shots, or --eps (with --delta) to derive it")
    return budget.shots_required(args.eps, args.delta, n, k)


def rdm_lines(rdms) -> str:
    return "".join(json.dumps(r.to_record()) + "\n" for r in rdms.values())


def cmd_family(args):
    with _Stage("family"):
        fam = build_family(args)
        _write(args.out, fam.dumps())
        log.info("family: %d functions (%s)", len(fam), fam.construction)


def cmd_plan(args):
    with _Stage("plan"):
        fam = load_family(args.family) if args.family else build_family(args)
        plan = schedule.build_plan(fam, resolve_shots(args, fam.n, fam.k))
        _write(args.out, plan.dumps())
        log.info("plan: %d settings x %d shots = %d rounds", len(plan), plan.shots, plan.total_rounds)


def cmd_budget(args):
    with _Stage("budget"):
        eps = args.eps if args.eps is not None else 0.05
        rows = [
            budget.campaign(args.n, args.k, eps, args.delta, args.cycle, "qot", args.shots),
            budget.campaign(args.n, args.k, eps, args.delta, args.cycle, "naive", args.naive_shots),
        ]
        if args.json:
            _write(args.out, json.dumps([b.to_dict() for b in rows]))
            return
        print(budget.format_table(rows))
        print(f"qubit pairs characterised: C({args.n},2) = {math.comb(args.n, 2):,}")
        if args.out:
            _write(args.out, json.dumps([b.to_dict() for b in rows]))


def cmd_simulate(args):
    with _Stage("simulate"):
        if args.seed is None:
            raise InvalidArgument("simulate requires --seed")
        plan = load_plan(args.plan)
        state = parse_fixture(args.fixture, plan.n)
        counts = backend.sample(state, plan, args.seed, flip=args.flip, workers=args.workers)
        _write(args.out, counts.dumps())


def cmd_estimate(args):
    with _Stage("estimate"):
        plan = load_plan(args.plan)
        fam = load_family(args.family) if args.family else None
        counts = load_counts(args.counts, plan.n)
        counts.check_against(plan)
        k = args.k if args.k is not None else plan.k
        rdms = estimate.reconstruct_all(
            counts, plan, fam, k, pooling=args.pooling, psd_projection=args.psd, workers=args.workers
        )
        _write(args.out, rdm_lines(rdms))
        log.info("estimate: %d reduced density matrices", len(rdms))


def cmd_run(args):
    if args.seed is None:
        raise InvalidArgument("run requires --seed")
    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    with _Stage("family"):
        fam = build_family(args)
        (work / "family.json").write_text(fam.dumps())
    with _Stage("plan"):
        plan = schedule.build_plan(fam, resolve_shots(args, fam.n, fam.k))
        (work / "plan.json").write_text(plan.dumps())
    with _Stage("simulate"):
        state = parse_fixture(args.fixture, fam.n)
        counts = backend.sample(state, plan, args.seed, flip=args.flip, workers=args.workers)
        (work / "counts.jsonl").write_text(counts.dumps())
    with _Stage("estimate"):
        rdms = estimate.reconstruct_all(
            counts, plan, fam, fam.k, pooling=args.pooling, psd_projection=args.psd, workers=args.workers
        )
        (work / "rdms.jsonl").write_text(rdm_lines(rdms))
    summary = {
        "n": fam.n, "k": fam.k, "functions": len(fam), "settings": len(plan),
        "shots": plan.shots, "rounds": plan.total_rounds, "rdms": len(rdms),
    }
    if args.eps is not None:
        summary["eps"] = args.eps
        summary["max_coeff_error"] = max_coefficient_error(state, rdms)
    print(json.dumps(summary))


def max_coefficient_error(state, rdms) -> float:
    worst = 0.0
    for subset, rdm in rdms.items():
        for label, value in rdm.pauli_coeffs.items():
            if set(label) == {"I"}:
                continue
            sup = [j for j, c in enumerate(label) if c != "I"]
            exact = backend.exact_expectation(state, [subset[j] for j in sup], [label[j] for j in sup])
            worst = max(worst, abs(value - exact))
    return worst


def cmd_verify(args):
    with _Stage("verify"):
        ok = True
        if args.family:
            fam = load_family(args.family)
            t0 = time.perf_counter()
            bad = hash_family.verify_perfect(fam, workers=args.workers)
            dt = time.perf_counter() - t0
            if bad is None:
                print(f"family: perfect ({math.comb(fam.n, fam.k):,} subsets, {dt:.2f}s)")
            else:
                ok = False
                print(f"family: NOT perfect, first uncovered subset {[q + 1 for q in bad]}")
        if args.oracle_n:
            n, k = args.oracle_n, args.k
            fam = hash_family.binary_family(n) if k == 2 else hash_family.random_family(n, k, 0.05, 0)
            if k != 2 and hash_family.verify_perfect(fam) is not None:
                raise InvalidArgument("oracle sweep family is not perfect; pick another n")
            plan = schedule.build_plan(fam, 1)
            worst = 0.0
            for seed in range(args.oracle_seeds):
                state = backend.random_state(n, seed)
                data = backend.ExactData(state, plan)
                for s in itertools.combinations(range(n), k):
                    rdm = estimate.reconstruct_rdm(s, data, plan, fam)
                    worst = max(worst, float(np.linalg.norm(rdm.matrix - backend.exact_rdm(state, s))))
            passed = worst < 1e-10
            ok &= passed
            print(f"oracle: n={n} k={k} seeds={args.oracle_seeds} max Frobenius error {worst:.2e} "
                  f"[{'PASS' if passed else 'FAIL'}]")
        if not ok:
            return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of default flag values")
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qot", description="Overlapping tomography toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(func=fn)
        return sp

    def family_flags(sp):
        sp.add_argument("--n", type=int)
        sp.add_argument("--k", type=int)
        sp.add_argument("--construction", choices=["binary", "random"])
        sp.add_argument("--family-delta", type=float)
        sp.add_argument("--family-seed", type=int)

    def shot_flags(sp):
        sp.add_argument("--shots", type=int, help="shots per setting (M)")
        sp.add_argument("--eps", type=float)
        sp.add_argument("--delta", type=float)

    sp = add("family", cmd_family, "build a perfect hash family")
    family_flags(sp)
    sp.add_argument("--out")

    sp = add("plan", cmd_plan, "compile a measurement plan")
    family_flags(sp)
    shot_flags(sp)
    sp.add_argument("--family")
    sp.add_argument("--out")

    sp = add("budget", cmd_budget, "shot and wall-clock budget")
    sp.add_argument("--n", type=int)
    sp.add_argument("--k", type=int)
    shot_flags(sp)
    sp.add_argument("--naive-shots", type=int)
    sp.add_argument("--cycle", type=float, help="seconds per measurement round")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--out")

    sp = add("simulate", cmd_simulate, "sample a fixture state against a plan")
    sp.add_argument("--plan")
    sp.add_argument("--fixture")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--flip", type=float, help="per-bit readout flip probability")
    sp.add_argument("--out")

    sp = add("estimate", cmd_estimate, "reconstruct reduced density matrices")
    sp.add_argument("--plan")
    sp.add_argument("--counts")
    sp.add_argument("--family")
    sp.add_argument("--k", type=int)
    sp.add_argument("--pooling", action="store_true", default=None)
    sp.add_argument("--psd", action="store_true", default=None)
    sp.add_argument("--out")

    sp = add("run", cmd_run, "family -> plan -> simulate -> estimate")
    family_flags(sp)
    shot_flags(sp)
    sp.add_argument("--fixture")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--flip", type=float)
    sp.add_argument("--pooling", action="store_true", default=None)
    sp.add_argument("--psd", action="store_true", default=None)
    sp.add_argument("--workdir")

    sp = add("verify", cmd_verify, "check family perfection and the exact-mode oracle")
    sp.add_argument("--family")
    sp.add_argument("--oracle-n", type=int)
    sp.add_argument("--oracle-seeds", type=int)
    sp.add_argument("--k", type=int)
    return p


_REQUIRED = {
    "family": ["n"], "plan": [], "budget": ["n"], "simulate": ["plan", "fixture", "out"],
    "estimate": ["plan", "counts"], "run": ["n"], "verify": [],
}


def _resolve(args):
    config = {}
    if args.config:
        config = _load_json(_read(args.config), "config file")
        if not isinstance(config, dict):
            raise InvalidArgument("config file must hold a JSON object")
    for key, value in vars(args).items():
        if value is None:
            if key in config:
                setattr(args, key, config[key])
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])
            elif key in ("pooling", "psd", "json"):
                setattr(args, key, False)
    missing = [k for k in _REQUIRED[args.command] if getattr(args, k, None) is None]
    if missing:
        raise InvalidArgument("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _resolve(args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args) or 0
    except QOTError as exc:
        stage = getattr(exc, "stage", args.command)
        sid = getattr(exc, "setting_id", None)
        extra = f" (setting_id={sid})" if sid is not None else ""
        print(f"qot {stage}: error: {exc}{extra}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
