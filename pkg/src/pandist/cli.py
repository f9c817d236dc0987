"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 solver limit.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .evaluation import out_of_sample_evaluate, solve_approach
from .instance import InputError, validate_instance
from .io import (ExperimentConfig, breakdown_csv, builtin_path, format_money, load_config,
                 load_instance, prepare_experiment, run_experiment, save_results, save_scenarios,
                 write_json, read_json)
from .milp import NODE_LIMIT, SolverLimitError
from .model import BuildError
from .scenarios import AmbiguityError
from .formulations import build_deterministic, build_dro_milp, build_extensive_smip

EXIT_OK, EXIT_INPUT, EXIT_LIMIT = 0, 1, 2


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else load_config(builtin_path("us_phase1_desk.json"))
    over = {
        "instance": args.instance, "phase": args.phase, "in_count": args.in_count,
        "in_seed": args.in_seed, "out_count": args.out_count, "out_seed": args.out_seed,
        "scarcity": args.scarcity, "dc_policy": args.dc_policy, "penalty_case": args.penalty_case,
        "mean_slack": args.mean_slack, "second_lo": args.second_lo, "second_hi": args.second_hi,
        "node_limit": args.node_limit, "gap_tol": args.gap_tol, "scale": args.scale,
    }
    if getattr(args, "approach", None):
        over["approaches"] = [args.approach]
    return cfg.replace(**over)


def _common(p):
    p.add_argument("--config", help="experiment config JSON (default: packaged desk config)")
    p.add_argument("--instance", help="instance file or builtin:<name>")
    p.add_argument("--phase")
    p.add_argument("--scale", type=float)
    p.add_argument("--in-count", type=int)
    p.add_argument("--in-seed", type=int)
    p.add_argument("--out-count", type=int)
    p.add_argument("--out-seed", type=int)
    p.add_argument("--scarcity", type=float)
    p.add_argument("--dc-policy", choices=["default", "best_case", "most_restrictive"])
    p.add_argument("--penalty-case", choices=["i", "ii", "iii"])
    p.add_argument("--mean-slack", type=float, help="mean slack factor")
    p.add_argument("--second-lo", type=float, help="second-moment lower factor")
    p.add_argument("--second-hi", type=float, help="second-moment upper factor")
    p.add_argument("--node-limit", type=int)
    p.add_argument("--gap-tol", type=float)


def _model_for(prep, approach):
    if approach == "dt":
        return build_deterministic(prep.instance, prep.nominal.mean)
    if approach == "sp":
        return build_extensive_smip(prep.instance, prep.scenarios_in)
    return build_dro_milp(prep.instance, prep.ambiguity)


def cmd_validate(args):
    inst = load_instance(args.instance_file)
    report = validate_instance(inst)
    if report.ok:
        I, J, T = inst.shape
        print(f"ok: {I} DC sites, {J} demand sites, {T} periods")
        return EXIT_OK
    for v in report.violations:
        print(f"{v.field}: {v.message}")
    return EXIT_INPUT


def cmd_sample(args):
    cfg = _config(args)
    prep = prepare_experiment(cfg)
    sc = prep.scenarios_in if args.which == "in" else prep.scenarios_out
    save_scenarios(sc, args.out)
    print(f"wrote {sc.n_scenarios} scenarios to {args.out}")
    return EXIT_OK


def _check_limit(plan):
    if plan.solution.status == NODE_LIMIT:
        print(f"node limit reached: objective {plan.objective:.6g}, bound {plan.solution.bound:.6g}",
              file=sys.stderr)
        return EXIT_LIMIT
    return EXIT_OK


def cmd_solve(args):
    cfg = _config(args)
    prep = prepare_experiment(cfg)
    plan = solve_approach(prep.instance, args.approach, prep.scenarios_in, prep.ambiguity,
                          prep.nominal.mean, node_limit=cfg.node_limit, gap_tol=cfg.gap_tol,
                          lp_method=cfg.lp_method)
    out = {"approach": plan.approach, "status": plan.solution.status, "objective": plan.objective,
           "bound": plan.solution.bound, "nodes": plan.solution.nodes,
           "dc_sites": [s.id for s in prep.instance.dc_sites],
           "x": plan.x.tolist(), "h": plan.h.tolist()}
    if args.out:
        write_json(out, args.out)
    print(f"{plan.approach}: objective {format_money(plan.objective)} ({plan.solution.status}), "
          f"{plan.open_dcs} DCs open")
    return _check_limit(plan)


def cmd_evaluate(args):
    cfg = _config(args)
    prep = prepare_experiment(cfg)
    data = read_json(args.plan)
    try:
        x = np.asarray(data["x"], dtype=float)
        h = np.asarray(data["h"], dtype=float)
    except (KeyError, TypeError, ValueError):
        raise InputError(f"{args.plan}: plan file needs numeric 'x' and 'h' fields") from None
    ev = out_of_sample_evaluate(prep.instance, x, h, prep.scenarios_out, method=cfg.lp_method)
    name = data.get("approach", "plan")
    if args.out:
        save_results(ev, args.out, name)
    sys.stdout.write(breakdown_csv([(name, ev)]))
    return EXIT_OK


def cmd_compare(args):
    cfg = _config(args)
    res = run_experiment(cfg, args.out)
    sys.stdout.write(breakdown_csv(res.comparison))
    if args.out:
        save_results(res.comparison, Path(args.out) / "results.json")
    codes = [_check_limit(r.plan) for r in res.comparison.rows]
    return max(codes)


def cmd_export_lp(args):
    cfg = _config(args)
    prep = prepare_experiment(cfg)
    model = _model_for(prep, args.approach)
    text = model.to_lp()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {model.n_vars} variables, {model.n_rows} constraints to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pandist", description="facility location and distribution "
                                 "planning: deterministic, stochastic and robust models")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("instance_file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample", help="write in- or out-of-sample scenarios")
    _common(p)
    p.add_argument("--which", choices=["in", "out"], default="in")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("solve", help="solve one approach and write its first-stage plan")
    _common(p)
    p.add_argument("--approach", choices=["dt", "sp", "dro"], required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="evaluate a plan file out of sample")
    _common(p)
    p.add_argument("--plan", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run the configured approaches and write CSV reports")
    _common(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-lp", help="write a model in LP format")
    _common(p)
    p.add_argument("--approach", choices=["dt", "sp", "dro"], required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_lp)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, AmbiguityError, BuildError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SolverLimitError as e:
        print(f"solver limit: {e}", file=sys.stderr)
        return EXIT_LIMIT


if __name__ == "__main__":
    sys.exit(main())
