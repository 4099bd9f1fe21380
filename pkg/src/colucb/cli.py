"""``colucb`` command line: simulate, analyze, schedule, lowerbound, selftest.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal assertion.
The output directory is ``--out``, else ``$COLUCB_OUTPUT_DIR``, else ``./colucb_out``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import analysis as an
from .core import AlgoConfig, ModelError, StructureError, members
from .files import (FormatError, load_instance, load_structure, load_structure_or_instance, read_json,
                    resolve_instance, save_instance, write_json)
from .flow import burn_in_schedule, compute_t0, t0_fraction
from .lowerbound import minimax_family, perturb_second_best, theorem4_adversary
from .lp import LpNumericalError
from .subsets import EnumerationCapError, SubsetTables

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
OUTPUT_ENV = "COLUCB_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:  # pragma: no cover
        return "unknown"


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "colucb_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return x
    if isinstance(x, np.integer):
        return int(x)
    return x


def _manifest(out: Path, command: str, resolved: dict, outputs: list[str]) -> None:
    write_json(out / "manifest.json", _jsonable({
        "tool": "colucb", "version": _version(), "command": command,
        "resolved": resolved, "outputs": sorted(outputs),
    }))


# ------------------------------------------------------------------ simulate


def cmd_simulate(args) -> int:
    from .sim import (ExperimentConfig, compare, default_jobs, render_svg, run_experiment, write_curves_csv,
                      write_per_seed_csv, write_summary_csv)

    doc = read_json(args.config)
    if doc.get("format") != "colucb.experiment" or doc.get("version") != 1:
        raise FormatError(f"{args.config}: expected a version 1 colucb.experiment file")
    instance, inst_path = resolve_instance(doc.get("instance"), os.path.dirname(os.path.abspath(args.config)))
    cfg = ExperimentConfig(
        instance=instance,
        policies=tuple(args.policies or doc.get("policies", ["ColUCB", "IndependentUCB"])),
        horizon=int(args.horizon or doc.get("horizon", 10_000)),
        num_seeds=int(args.seeds or doc.get("num_seeds", 20)),
        base_seed=int(doc.get("base_seed", 0) if args.base_seed is None else args.base_seed),
        const_scale=float(args.const_scale or doc.get("const_scale", 1.0)),
        coupled=bool(args.coupled or doc.get("coupled", False)),
        default_arm=doc.get("default_arm", "empirical_best"),
        jobs=int(args.jobs or default_jobs()),
        instance_path=inst_path,
    )
    report = run_experiment(cfg)
    out = _out_dir(args)
    outputs = ["report.json", "summary.csv", "curves.csv", "per_seed.csv"]
    body = report.to_dict()
    if len(cfg.policies) >= 2 and cfg.num_seeds >= 2:
        base = cfg.policies[-1]
        body["comparisons"] = {}
        for p in cfg.policies[:-1]:
            d, z = compare(report, p, base)
            body["comparisons"][f"{p}-{base}"] = {"delta": d, "z": z}
    write_json(out / "report.json", _jsonable(body))
    write_summary_csv(report, out / "summary.csv")
    write_curves_csv(report, out / "curves.csv")
    write_per_seed_csv(report, out / "per_seed.csv")
    if not args.no_svg:
        (out / "regret.svg").write_text(render_svg(report, reproducible=args.reproducible))
        outputs.append("regret.svg")
    resolved = cfg.resolved()
    resolved.update(config_path=os.path.abspath(args.config), reproducible=args.reproducible)
    _manifest(out, "simulate", resolved, outputs)
    for name, s in report.summaries.items():
        se = "NA" if s.stderr is None else f"{s.stderr:.6g}"
        print(f"{name}: mean collaborative regret {s.mean:.6g} (stderr {se})")
    return EXIT_OK


# ------------------------------------------------------------------ analyze


def _profile(structure, S, T):
    p = an.sharing_profile(structure, S, T)
    return {"subset": members(S), "h1": p.h1, "h2_minus": p.h2_minus, "h2_plus": p.h2_plus,
            "ht_minus": p.ht_minus, "ht_plus": p.ht_plus}


def analyze_report(structure, instance, T: float, force: bool, C1: float, alpha: float,
                   const_scale: float = 1.0, grid: int = 16) -> dict:
    tab = SubsetTables(structure, force)
    minus, s_minus = an.bar_ht(structure, T, "-", tables=tab)
    plus, s_plus = an.bar_ht(structure, T, "+", tables=tab)
    cfg = AlgoConfig.for_structure(structure, int(T), const_scale)
    t0 = t0_fraction(structure)
    eps_grid = [2.0 ** -k for k in range(grid)]
    rep = {
        "num_arms": structure.num_arms,
        "num_groups": structure.num_groups,
        "horizon": T,
        "t0": {"exact": str(t0), "lp_value": compute_t0(structure)},
        "burnin_pulls": cfg.burnin_pulls,
        "t_min": math.ceil(cfg.burnin_pulls * t0),
        "bar_ht_minus": {"value": minus, "argmin": _profile(structure, s_minus, T)},
        "bar_ht_plus": {"value": plus, "argmin": _profile(structure, s_plus, T)},
        "theorem2_envelope": list(an.theorem2_envelope(structure, T, force=force)),
        "phi": [{"eps": e, "phi": an.phi(structure, e, tables=tab)} for e in eps_grid],
        "sufficient_improvement_alpha1": an.sufficient_improvement(structure, T, 1.0, force=force),
    }
    if instance is not None:
        F = an.Functionals(instance)
        bps = [float(b) for b in instance.gap_values() if b > 0]
        rep["instance"] = {
            "sigma": F.sigma,
            "breakpoints": bps,
            "contention_star": [{"eps": b, "arms": members(an.contention_star(instance, b))} for b in bps],
            "curves": [{"eps": e, "M": F.M(e), "T": F.T_of(e), "R": F.R_of(e)} for e in eps_grid],
            "eps_T": an.eps_T(instance, None, T, functionals=F),
            "eps_star": an.eps_star(instance, T),
            "condition_1": {"C1": C1, "alpha": alpha, "holds": an.condition_check(instance, C1, alpha)},
        }
    return rep


def cmd_analyze(args) -> int:
    structure, instance = load_structure_or_instance(args.path)
    rep = analyze_report(structure, instance, args.horizon, args.force, args.c1, args.alpha, args.const_scale)
    out = _out_dir(args)
    write_json(out / "analysis.json", _jsonable(rep))
    _manifest(out, "analyze", {"path": os.path.abspath(args.path), "horizon": args.horizon, "force": args.force,
                               "C1": args.c1, "alpha": args.alpha, "const_scale": args.const_scale},
              ["analysis.json"])
    print(json.dumps(_jsonable(rep), indent=2))
    return EXIT_OK


# ------------------------------------------------------------------ schedule


def cmd_schedule(args) -> int:
    structure = load_structure(args.path)
    sched = burn_in_schedule(structure, args.n0)
    out = _out_dir(args)
    with open(out / "schedule.csv", "w") as fh:
        fh.write("round,group,arm\n")
        for r, row in enumerate(sched.pulls):
            for g, a in enumerate(row):
                fh.write(f"{r},{g},{a}\n")
    _manifest(out, "schedule", {"path": os.path.abspath(args.path), "n0": args.n0, "t0": str(sched.t0),
                                "t_min": sched.length}, ["schedule.csv"])
    print(f"t0 = {sched.t0}")
    print(f"t_min = {sched.length}")
    return EXIT_OK


# ------------------------------------------------------------------ lowerbound


def _mask(items) -> int:
    m = 0
    for i in items:
        m |= 1 << int(i)
    return m


def cmd_lowerbound(args) -> int:
    out = _out_dir(args)
    resolved = {"generator": args.generator, "path": os.path.abspath(args.path)}
    written = []
    if args.generator == "perturb":
        base = load_instance(args.path)
        inst = perturb_second_best(base, args.arm, args.group, args.eps, args.sign, clamped=args.clamped)
        name = f"perturbed_{'plus' if args.sign == '+' else 'minus'}.json"
        save_instance(out / name, inst)
        written.append(name)
        resolved.update(arm=args.arm, group=args.group, eps=args.eps, sign=args.sign, clamped=args.clamped)
    elif args.generator == "minimax":
        structure = load_structure(args.path)
        if args.subset is not None:
            S = _mask(args.subset)
            cover = _mask(args.cover) if args.cover is not None else an.h2_plus_cover(structure, S)[1]
        else:
            _, S = an.bar_ht(structure, args.horizon, "+", force=args.force)
            cover = an.h2_plus_cover(structure, S)[1]
        inst = minimax_family(structure, S, cover, kind=args.kind)
        save_instance(out / "minimax.json", inst)
        written.append("minimax.json")
        resolved.update(subset=members(S), cover_groups=members(cover), kind=args.kind, horizon=args.horizon)
    else:
        base = load_instance(args.path)
        pair = theorem4_adversary(base, args.horizon, pilot_seeds=args.pilot_seeds, const_scale=args.const_scale)
        save_instance(out / "adversary_plus.json", pair.plus)
        save_instance(out / "adversary_minus.json", pair.minus)
        written += ["adversary_plus.json", "adversary_minus.json"]
        resolved.update(horizon=args.horizon, pilot_seeds=args.pilot_seeds, const_scale=args.const_scale,
                        z_T=pair.z_T, target_arm=pair.spec_plus.target_arm, group=pair.spec_plus.group,
                        anchor=pair.spec_plus.anchor, pilot_rounds=pair.pilot_rounds)
    _manifest(out, "lowerbound", resolved, written)
    for w in written:
        print(out / w)
    return EXIT_OK


# ------------------------------------------------------------------ selftest


def cmd_selftest(args) -> int:
    from .selftest import run_suites

    return EXIT_OK if run_suites(pivot_tol=args.lp_pivot_tol) else EXIT_INTERNAL


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="colucb", description="Grouped bandit lab: Col-UCB simulation and analysis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./colucb_out)")

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment file")
    s.add_argument("config")
    s.add_argument("--seeds", type=int)
    s.add_argument("--horizon", type=int)
    s.add_argument("--base-seed", type=int)
    s.add_argument("--const-scale", type=float)
    s.add_argument("--policies", nargs="+")
    s.add_argument("--coupled", action="store_true", help="share the reward stream across policies")
    s.add_argument("--jobs", type=int, help="worker processes (default: available cores)")
    s.add_argument("--reproducible", action="store_true", help="omit the timestamp from the SVG")
    s.add_argument("--no-svg", action="store_true")
    common(s)
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="sharing quantities and instance functionals")
    a.add_argument("path", help="structure or instance file")
    a.add_argument("--horizon", type=float, default=1000.0)
    a.add_argument("--force", action="store_true", help="allow subset enumeration above the arm cap")
    a.add_argument("--c1", type=float, default=1.0)
    a.add_argument("--alpha", type=float, default=1.0)
    a.add_argument("--const-scale", type=float, default=1.0)
    common(a)
    a.set_defaults(func=cmd_analyze)

    sc = sub.add_parser("schedule", help="burn-in schedule from max-flow")
    sc.add_argument("path", help="structure or instance file")
    sc.add_argument("--n0", type=int, required=True)
    common(sc)
    sc.set_defaults(func=cmd_schedule)

    lb = sub.add_parser("lowerbound", help="write adversarial instances")
    lb.add_argument("generator", choices=("perturb", "minimax", "adversary"))
    lb.add_argument("path", help="base instance (perturb, adversary) or structure (minimax)")
    lb.add_argument("--arm", type=int)
    lb.add_argument("--group", type=int)
    lb.add_argument("--eps", type=float)
    lb.add_argument("--sign", choices=("+", "-"), default="+")
    lb.add_argument("--clamped", action="store_true", help="use min(eps, 1/4)")
    lb.add_argument("--subset", type=int, nargs="+", help="arms of S (minimax)")
    lb.add_argument("--cover", type=int, nargs="+", help="cover groups (minimax)")
    lb.add_argument("--kind", choices=("gaussian", "bernoulli"), default="gaussian")
    lb.add_argument("--horizon", type=int, default=1000)
    lb.add_argument("--pilot-seeds", type=int, default=20)
    lb.add_argument("--const-scale", type=float, default=1.0)
    lb.add_argument("--force", action="store_true")
    common(lb)
    lb.set_defaults(func=cmd_lowerbound)

    st = sub.add_parser("selftest", help="run the oracle suites")
    st.add_argument("--lp-pivot-tol", type=float, default=1e-10, help="test hook: simplex pivot tolerance")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "lowerbound" and args.generator == "perturb":
            if args.arm is None or args.group is None or args.eps is None:
                raise UsageError("perturb needs --arm, --group and --eps")
        return args.func(args)
    except UsageError as exc:
        print(f"colucb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, FormatError, StructureError, ModelError, EnumerationCapError, ValueError) as exc:
        print(f"colucb: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AssertionError, LpNumericalError, RuntimeError) as exc:
        print(f"colucb: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
