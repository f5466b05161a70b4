"""Command-line entry point.

    empirw predict    --config cfg.json [--out DIR]
    empirw simulate   --config cfg.json --out DIR [--seed N]
    empirw experiment --config cfg.json --out DIR [--seed N] [--threads N]
    empirw clt        --config cfg.json --out DIR [--seed N]
    empirw validate   [--suite NAME] [--out DIR] [--seed N]

Config is JSON; the schema is documented in the README.  Experiment runs emit
`results.csv` (model, bernstein, c, t, replicas, stat, mean, stderr) and
`report.json`; exit status is 0 on success / all-pass and 1 on failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from . import harness
from .bernstein_subordinator import bernstein_from_config
from .empirical_measures import empirical_from_path, measure_to_csv
from .path_simulator import simulate_subordinated
from .predictions import RegimeError, eta, regime
from .rng import seed_sequence
from .spectral_models import model_from_id


def _load_config(path: str) -> dict:
    with open(path) as fp:
        return json.load(fp)


def _apply_overrides(cfg: dict, args) -> dict:
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        cfg["threads"] = args.threads
    return cfg


def cmd_predict(args) -> int:
    cfg = _load_config(args.config)
    model_cfg = dict(cfg.get("model", {"id": "circle"}))
    model = model_from_id(model_cfg.pop("id"), **model_cfg)
    B = bernstein_from_config(cfg.get("bernstein", {"kind": "identity"}))
    p = int(cfg.get("ot", {}).get("p", 1))
    q = int(cfg.get("ot", {}).get("q", 1))
    reg = regime(model, B.alpha_lower, p, q)
    row = {
        "model": model.kind,
        "bernstein": B.label(),
        "c": model.drift[0] if model.drift else 0.0,
        "q_alpha": float(reg.q_alpha) if reg.q_alpha != math.inf else "inf",
        "gamma": float(reg.gamma),
        "w2_regime": reg.w2_law,
        "moment_regime": reg.moment_law,
    }
    if reg.w2_law == "t_inv":
        try:
            const = eta(model, B)
            row.update(N=const.truncation, eta=const.value, tail_bound=const.tail_bound)
        except (RegimeError, Exception) as exc:  # noqa: BLE001 - reported, not fatal
            row.update(N=None, eta=None, tail_bound=None, eta_error=str(exc))
    else:
        row.update(N=None, eta=None, tail_bound=None)
    cols = ["model", "bernstein", "c", "N", "eta", "tail_bound", "q_alpha", "gamma",
            "w2_regime", "moment_regime"]
    print("\t".join(cols))
    print("\t".join(str(row.get(c)) for c in cols))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        harness.write_report_json(row, os.path.join(args.out, "predictions.json"))
    return 0


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    exp = harness.config_from_dict(cfg)
    t = exp.horizons[-1]
    path = simulate_subordinated(exp.model, exp.bernstein, t, exp.step_for(t),
                                 harness._parse_init(exp.init), seed_sequence(exp.seed, 0, 0),
                                 substep=exp.substep)
    os.makedirs(args.out, exist_ok=True)
    out = os.path.join(args.out, "measure.csv")
    with open(out, "w", newline="") as fp:
        measure_to_csv(empirical_from_path(path), fp)
    print(f"wrote {out} ({path.states.shape[0]} observations, horizon {t:g})")
    return 0


def cmd_experiment(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    exp = harness.config_from_dict(cfg)
    report = harness.run_experiment(exp)
    os.makedirs(args.out, exist_ok=True)
    harness.write_results_csv(report, os.path.join(args.out, "results.csv"))
    harness.write_report_json(report.to_dict(), os.path.join(args.out, "report.json"))
    for row in report.rows:
        if row["stat"] == "t_w2sq":
            print(f"t={row['t']:<8g} t*E[W2^2]={row['mean']:.5f} +- {row['stderr']:.5f}")
    if report.eta_prediction:
        print(f"predicted eta = {report.eta_prediction['value']:.6f} "
              f"(tail {report.eta_prediction['tail_bound']:.2e})")
    if "w2sq" in report.fits:
        f = report.fits["w2sq"]
        print(f"fitted decay law: {f.law} (gamma_hat={f.gamma_hat:.3f}, margin={f.margin:.1f})")
    return 0


def cmd_clt(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    exp = harness.config_from_dict(cfg)
    mode_index = int(cfg.get("clt", {}).get("mode", 1))
    report = harness.clt_experiment(exp, mode_index)
    os.makedirs(args.out, exist_ok=True)
    harness.write_report_json(report, os.path.join(args.out, "clt_report.json"))
    for row in report["rows"]:
        print(f"t={row['t']:<8g} sqrt(t) E|mu_t(phi)| = {row['sqrt_t_abs_mu']:.5f} "
              f"+- {row['stderr']:.5f} (limit {row['predicted_limit']:.5f})")
    return 0


def cmd_validate(args) -> int:
    ledger = harness.validate(args.suite, seed=args.seed if args.seed is not None else 20260809)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        harness.write_report_json(ledger, os.path.join(args.out, "validate.json"))
    for name, entry in ledger.items():
        if name == "passed":
            continue
        print(f"{name:<8} {'PASS' if entry['passed'] else 'FAIL'}")
    print(f"overall  {'PASS' if ledger['passed'] else 'FAIL'}")
    return 0 if ledger["passed"] else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="empirw",
                                     description="Wasserstein convergence of empirical measures: "
                                                 "simulation, exact OT, and spectral predictions")
    sub = parser.add_subparsers(dest="command", required=True)

    p_pred = sub.add_parser("predict", help="limit constants and rate regimes for a config")
    p_pred.add_argument("--config", required=True)
    p_pred.add_argument("--out")
    p_pred.set_defaults(func=cmd_predict)

    p_sim = sub.add_parser("simulate", help="one subordinated path, empirical measure to CSV")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--seed", type=int)
    p_sim.set_defaults(func=cmd_simulate)

    p_exp = sub.add_parser("experiment", help="Monte-Carlo rate experiment")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--out", required=True)
    p_exp.add_argument("--seed", type=int)
    p_exp.add_argument("--threads", type=int)
    p_exp.set_defaults(func=cmd_experiment)

    p_clt = sub.add_parser("clt", help="central-limit scale experiment")
    p_clt.add_argument("--config", required=True)
    p_clt.add_argument("--out", required=True)
    p_clt.add_argument("--seed", type=int)
    p_clt.set_defaults(func=cmd_clt)

    p_val = sub.add_parser("validate", help="run the invariant suites")
    p_val.add_argument("--suite", default="default")
    p_val.add_argument("--out")
    p_val.add_argument("--seed", type=int)
    p_val.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
