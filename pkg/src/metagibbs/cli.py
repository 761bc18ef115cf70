"""Command-line entry point: ``metagibbs <subcommand> ...``.

Exit codes: 0 on success, 2 on a configuration error, 3 when a statistical
acceptance check fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import bounds as B
from .bernstein_lab import curvature_sweep, meta_bernstein_study
from .config import ExperimentConfig, load_config, load_toml
from .environments import DiscreteEnvironment
from .errors import ConfigError, DomainError, FitUnavailable
from .experiments import (
    CSV_COLUMNS,
    SE_MARGIN,
    format_csv,
    open_question_probe,
    rates_from_result,
    run_isolation_vs_meta,
    to_json,
)
from .numerics import RandomStream

EXIT_OK, EXIT_CONFIG, EXIT_STAT = 0, 2, 3

PROPOSITIONS = ("thm1", "cor1", "thm3", "concurrent", "discrete", "gaussian", "mixture", "mixture-unknownK")


def _out_dir(cfg: ExperimentConfig, override):
    d = Path(override or cfg.output.dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _emit(path: Path, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    res = run_isolation_vs_meta(cfg, args.seed)
    rows = res.rows()
    out = _out_dir(cfg, args.out)
    stem = f"{cfg.name}-seed{res.seed}"
    if "csv" in cfg.output.formats:
        _emit(out / f"{stem}.csv", format_csv(rows, CSV_COLUMNS))
    if "json" in cfg.output.formats:
        _emit(out / f"{stem}.json", to_json(rows))
    print(format_csv(rows, CSV_COLUMNS), end="")
    flagged = [r for r in rows if r["meta_excess"] < -SE_MARGIN * r["meta_se"]]
    if not res.bounds_ok or flagged:
        print("statistical check failed: a bound lies below its estimate by more than 3 SE "
              "or an excess estimate is significantly negative", file=sys.stderr)
        return EXIT_STAT
    return EXIT_OK


def cmd_rates(args) -> int:
    cfg = load_config(args.config)
    res = run_isolation_vs_meta(cfg, args.seed)
    reports = {}
    for col in ("meta", "iso"):
        try:
            reports[col] = rates_from_result(res, col)
        except FitUnavailable as e:
            print(f"{col}: {e}", file=sys.stderr)
    rows = []
    for col, per_n in reports.items():
        for n, rep in per_n.items():
            rows.append({"setting": cfg.name, "seed": res.seed, "column": col, "n": n, "points": len(rep.points),
                         "slope": rep.slope, "intercept": rep.intercept, "r2": rep.r2})
    out = _out_dir(cfg, args.out)
    stem = f"{cfg.name}-seed{res.seed}-rates"
    if "csv" in cfg.output.formats:
        _emit(out / f"{stem}.csv", format_csv(rows))
    payload = {col: {str(n): rep._asdict() for n, rep in per_n.items()} for col, per_n in reports.items()}
    if "json" in cfg.output.formats:
        _emit(out / f"{stem}.json", to_json(payload))
    print(to_json(payload))
    return EXIT_OK


def _bound_params(doc: dict) -> tuple[B.BoundParams, dict]:
    names = {f.name for f in fields(B.BoundParams)}
    extra_keys = {"empirical", "inner", "rates", "K_grid"}
    unknown = sorted(set(doc) - names - extra_keys)
    if unknown:
        raise ConfigError(f"params: unknown key(s) {', '.join(unknown)}")
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in doc.items() if k in names}
    try:
        return B.BoundParams(**kw), {k: doc[k] for k in extra_keys if k in doc}
    except (TypeError, DomainError) as e:
        raise ConfigError(f"params: {e}") from None


def cmd_bound(args) -> int:
    p, extra = _bound_params(load_toml(args.params))
    prop = args.proposition

    def need(key):
        if key not in extra:
            raise ConfigError(f"params: proposition {prop!r} needs '{key}'")
        return extra[key]

    try:
        if prop == "thm1":
            rep = B.isolation_bound(p, float(need("empirical")))
        elif prop == "thm3":
            rep = B.meta_learning_bound(p, float(need("inner")))
        elif prop == "cor1":
            rep = B.prior_mass_bound(p)
        elif prop == "concurrent":
            rates = need("rates")
            rep = B.concurrent_priors_bound(rates, p.M if p.M > 1 else len(rates), p.beta, p.T)
        elif prop == "discrete":
            rep = B.discrete_meta_bound(p.m_star, p.M, p.alpha, p.beta, p.n, p.T)
        elif prop == "gaussian":
            rep = B.gaussian_meta_bound(p)
        elif prop == "mixture":
            rep = B.mixture_meta_bound(p, known_K=True)
        else:
            rep = B.mixture_meta_bound(p, known_K=False, K_grid=extra.get("K_grid"))
    except DomainError as e:
        raise ConfigError(f"params: {e}") from None
    print(json.dumps(rep.as_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_verify_bernstein(args) -> int:
    cfg = load_config(args.config)
    env = cfg.environment
    if not isinstance(env, DiscreteEnvironment):
        raise ConfigError("verify-bernstein needs a discrete environment")
    bc = cfg.bernstein
    if bc is None:
        raise ConfigError("verify-bernstein needs a [bernstein] section")
    n, a = cfg.sweep.n[0], cfg.algorithm
    curv = {str(C): curvature_sweep(C, bc.lemma_pairs, RandomStream(0, "curvature").child(C)) for C in (0.5, 1.0, 2.0)}
    study = meta_bernstein_study(env, a.alpha, n, a.C, bc.candidates, bc.tested, bc.reps, bc.seeds, cfg.name)
    rows = [{"seed": seed, "candidate": est.candidate, "reference": est.reference, "lhs": est.lhs, "rhs": est.rhs,
             "se_lhs": est.se_lhs, "se_rhs": est.se_rhs, "reps": est.reps, "c_used": est.c_used,
             "passed": int(est.passed),
             "sensitivity_passed": "" if est.sensitivity_passed is None else int(est.sensitivity_passed)}
            for seed, est in study]
    passes, total = sum(est.passed for _, est in study), len(study)
    print(format_csv(rows), end="")
    rate = passes / total
    summary = {"pass_rate": rate, "curvature_violations": curv}
    print(json.dumps(summary, sort_keys=True))
    if rate < bc.min_pass_rate or any(v > 0 for v in curv.values()):
        return EXIT_STAT
    return EXIT_OK


def cmd_probe(args) -> int:
    cfg = load_config(args.config)
    rows = open_question_probe(cfg, args.seed, variational=args.variational)
    print(format_csv(rows), end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _emit(out / f"{cfg.name}-probe.csv", format_csv(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="metagibbs", description="Meta-learned Gibbs priors: simulations and bounds.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="meta versus isolation excess risk over the sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("rates", help="fit log-log slopes over the T grid")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rates)
    p = sub.add_parser("bound", help="evaluate a closed-form bound")
    p.add_argument("--proposition", required=True, choices=PROPOSITIONS)
    p.add_argument("--params", required=True)
    p.set_defaults(func=cmd_bound)
    p = sub.add_parser("verify-bernstein", help="curvature inequality and meta-level Bernstein checks")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_verify_bernstein)
    p = sub.add_parser("probe-open-question", help="Gibbs versus point-mass hyper-posteriors")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--variational", choices=("dirac", "full"), default="dirac")
    p.add_argument("--out")
    p.set_defaults(func=cmd_probe)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
