"""Command-line interface.

``strongwalk <subcommand>`` with subcommands walk | market | price | hedge |
smooth | fk | study. Global flags: --config (JSON), --out, --format
(csv|json), --seed-list. Exit codes: 0 success, 2 configuration error,
3 numerical-guard trip.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import fk as fkmod
from . import mollify
from .errors import ConfigError, NumericalGuardError, StrongWalkError
from .hedging import pathwise_hedge, replicate
from .market import (MarketParams, asset_path, build_level, exp_reference,
                     rn_log_limit_gap, rn_process)
from .pricing import (BSMClosedForm, Claim, call_closed_binomial,
                      price_explicit, price_surface, put_price)
from .study import StudyConfig, run_study
from .walk import NestedWalks, refinement_check, sup_distance


# ── report rendering ────────────────────────────────────────────────

def _render_csv(report: dict) -> str:
    lines = []
    for key in sorted(report.get("scalars", {})):
        lines.append(f"# {key} = {report['scalars'][key]!r}")
    for section in report.get("sections", []):
        lines.append(f"# section: {section['name']}")
        lines.append(",".join(section["columns"]))
        for row in section["rows"]:
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                                  for v in row))
    return "\n".join(lines) + "\n"


def _render_json(report: dict) -> str:
    payload = {"scalars": report.get("scalars", {}), "sections": {}}
    for section in report.get("sections", []):
        payload["sections"][section["name"]] = [
            dict(zip(section["columns"], row)) for row in section["rows"]
        ]
    return json.dumps(payload, indent=2, sort_keys=True, default=float)


def _emit(report: dict, args) -> None:
    fmt = getattr(args, "emit", None) or args.format
    text = _render_csv(report) if fmt == "csv" else _render_json(report)
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


# ── shared helpers ──────────────────────────────────────────────────

def _load_config(args) -> dict:
    if not args.config:
        return {}
    try:
        with open(args.config) as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc


def _market_params(args, config: dict) -> MarketParams:
    block = config.get("market", {})

    def pick(name, default=None):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        if name in block:
            return block[name]
        if default is not None:
            return default
        raise ConfigError(f"missing market parameter --{name}")

    try:
        return MarketParams(mu=float(pick("mu", 0.05)),
                            sigma=float(pick("sigma", 0.2)),
                            r=float(pick("r", 0.05)),
                            s0=float(pick("s0", 100.0)),
                            horizon=pick("T", 1))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _seed_list(args, fallback) -> list[int]:
    if args.seed_list:
        try:
            return [int(s) for s in args.seed_list.split(",") if s.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --seed-list: {exc}") from exc
    return list(fallback)


def _parse_catalog_function(spec: dict, time_dependent: bool = False):
    """Function catalog for problem files: constant | linear |
    mollified-put | custom-table."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"bad function spec {spec!r}")
    kind = spec["kind"]
    if kind == "constant":
        value = float(spec["value"])
        fn = lambda x: np.full(np.shape(x), value)  # noqa: E731
    elif kind == "linear":
        coef = float(spec["coef"])
        fn = lambda x: coef * np.asarray(x, dtype=np.float64)  # noqa: E731
    elif kind == "mollified-put":
        smoothed = mollify.smooth_put(int(spec["n"]), float(spec["strike"]))
        fn = smoothed.value
    elif kind == "custom-table":
        xs = np.asarray(spec["x"], dtype=np.float64)
        ys = np.asarray(spec["y"], dtype=np.float64)
        if xs.size != ys.size or xs.size < 2:
            raise ConfigError("custom-table needs matching x/y arrays")
        fn = lambda x: np.interp(np.asarray(x, dtype=np.float64),  # noqa
                                 xs, ys)
    else:
        raise ConfigError(f"unknown function kind {kind!r}")
    if time_dependent:
        return lambda t, x: fn(x)
    return fn


def _claim_from_args(args, config: dict) -> Claim:
    kind = args.claim
    if kind == "call":
        return Claim.call(args.K)
    if kind == "put":
        return Claim.put(args.K)
    spec = config.get("claim", {}).get("payoff")
    if spec is None:
        raise ConfigError(
            "custom claims need --config with a claim.payoff catalog entry")
    return Claim.custom(_parse_catalog_function(spec))


# ── subcommands ─────────────────────────────────────────────────────

def cmd_walk(args) -> None:
    levels = args.levels
    if levels < 1:
        raise ConfigError("--levels must be at least 1")
    family = NestedWalks(args.seed)
    horizon = args.horizon
    top = family.path(levels, horizon)
    k_checks = [min(4 ** m, args.k_max) for m in range(levels)]
    for m in range(levels):
        family.level_with_stops(m + 1, k_checks[m])
    paths = [family.path(m, horizon) for m in range(levels + 1)]

    sections = []
    value_rows = []
    for m in range(levels + 1):
        path = paths[m]
        times = path.lattice_times()
        values = path.lattice_values()
        for k in range(path.n_steps + 1):
            value_rows.append([m, k, float(times[k]), float(values[k])])
    sections.append({"name": "lattice_values",
                     "columns": ["m", "k", "t", "value"],
                     "rows": value_rows})

    refine_rows = []
    for m in range(levels):
        rep = refinement_check(paths[m], paths[m + 1], k_checks[m])
        refine_rows.append([m, m + 1, rep.checked, int(rep.ok),
                            rep.max_deviation,
                            -1 if rep.first_mismatch is None
                            else rep.first_mismatch,
                            rep.time_lag_max, rep.time_lag_mean])
    sections.append({"name": "refinement",
                     "columns": ["m", "m_next", "checked", "ok",
                                 "max_deviation", "first_mismatch",
                                 "time_lag_max", "time_lag_mean"],
                     "rows": refine_rows})

    sup_rows = [[m, levels, sup_distance(paths[m], top, horizon)]
                for m in range(levels)]
    sections.append({"name": "sup_distance",
                     "columns": ["m", "m_ref", "sup"],
                     "rows": sup_rows})
    _emit({"scalars": {"seed": args.seed, "horizon": float(horizon)},
           "sections": sections}, args)


def cmd_market(args) -> None:
    config = _load_config(args)
    params = _market_params(args, config)
    level = build_level(params, args.m)
    family = NestedWalks(args.seed)
    path = family.path(args.m, params.horizon)
    asset = asset_path(level, path)

    constants = {
        "m": level.m, "dt": level.dt, "dx": level.dx,
        "gross_rate": level.gross_rate, "up": level.up, "down": level.down,
        "q_up": level.q_up, "q_down": level.q_down,
        "n_steps": level.n_steps,
    }
    times = path.lattice_times()
    reference = exp_reference(params, path, times)
    values = asset.values()
    bond = np.exp(np.arange(level.n_steps + 1) * level.log_gross)
    path_rows = [[k, float(times[k]), float(values[k]), float(reference[k]),
                  float(bond[k])] for k in range(level.n_steps + 1)]
    process = rn_process(level, path)
    diag = {
        "rn_terminal": process.terminal(),
        "rn_log_limit_gap": rn_log_limit_gap(level, path),
        "asset_vs_reference_sup": float(np.max(np.abs(values - reference))),
    }
    _emit({"scalars": {**constants, **diag},
           "sections": [{"name": "path",
                         "columns": ["k", "t", "asset", "reference", "bond"],
                         "rows": path_rows}]}, args)


def cmd_price(args) -> None:
    config = _load_config(args)
    params = _market_params(args, config)
    level = build_level(params, args.m)
    claim = _claim_from_args(args, config)
    x = args.x if args.x is not None else params.s0
    k = level.step_floor(args.t)
    scalars = {"m": args.m, "k": k, "t": args.t, "x": x,
               "price_explicit": price_explicit(level, claim, k, x)}
    if claim.kind == "call":
        scalars["price_closed_binomial"] = call_closed_binomial(
            level, claim.strike, k, x)
    elif claim.kind == "put":
        scalars["price_closed_binomial"] = put_price(level, claim.strike,
                                                     k, x)
    if args.compare_bsm and claim.kind in ("call", "put"):
        closed = BSMClosedForm(params)
        fn = closed.call if claim.kind == "call" else closed.put
        scalars["price_bsm"] = fn(args.t, x, claim.strike)
        scalars["gap_vs_bsm"] = abs(scalars["price_explicit"]
                                    - scalars["price_bsm"])
    sections = []
    if not args.no_surface:
        surface = price_surface(level, claim)
        rows = []
        for kk in range(level.n_steps + 1):
            prices = surface.node_prices(kk)
            vals = surface.rows[kk]
            rows.extend([[kk, i, float(prices[i]), float(vals[i])]
                         for i in range(kk + 1)])
        sections.append({"name": "surface",
                         "columns": ["k", "i", "node_price", "value"],
                         "rows": rows})
    _emit({"scalars": scalars, "sections": sections}, args)


def cmd_hedge(args) -> None:
    config = _load_config(args)
    params = _market_params(args, config)
    level = build_level(params, args.m)
    claim = _claim_from_args(args, config)
    surface = price_surface(level, claim)
    portfolio = replicate(surface)
    seeds = _seed_list(args, range(args.seed, args.seed + args.paths))

    ledger_rows = []
    summary_rows = []
    terminal_errors = []
    for seed in seeds:
        family = NestedWalks(seed)
        asset = asset_path(level, family.path(args.m, params.horizon))
        ledger = pathwise_hedge(portfolio, asset, claim)
        terminal_errors.append(ledger.terminal_error)
        summary_rows.append([seed, ledger.terminal_value, ledger.payoff,
                             ledger.terminal_error,
                             float(ledger.self_financing_residuals.max()
                                   if ledger.self_financing_residuals.size
                                   else 0.0)])
        if args.ledgers:
            for k in range(ledger.steps.size):
                ledger_rows.append([
                    seed, k, float(ledger.asset_positions[k]),
                    float(ledger.bond_positions[k]),
                    float(ledger.portfolio_values[k]),
                    float(ledger.asset_prices[k])])
    sections = [{"name": "summary",
                 "columns": ["seed", "terminal_value", "payoff",
                             "terminal_error", "max_self_financing_residual"],
                 "rows": summary_rows}]
    if args.ledgers:
        sections.append({"name": "ledgers",
                         "columns": ["seed", "k", "asset_position",
                                     "bond_position", "value", "price"],
                         "rows": ledger_rows})
    _emit({"scalars": {
        "root_price": surface.root,
        "max_terminal_error": max(terminal_errors),
        "mean_terminal_error": float(np.mean(terminal_errors)),
    }, "sections": sections}, args)


def cmd_smooth(args) -> None:
    config = _load_config(args)
    params = _market_params(args, config)
    level = build_level(params, args.m)
    strike, n = args.K, args.n
    smoothed = mollify.smooth_put(n, strike)
    c = mollify.bump_constant()

    grid = np.linspace(strike - 2.0 / n, strike + 2.0 / n, 41)
    sample_rows = [[float(s), float(smoothed.value(s)),
                    float(smoothed.slope(s)), float(smoothed.curvature(s))]
                   for s in grid]
    compare_rows = []
    for x in (0.9 * strike, strike, 1.1 * strike):
        raw = price_explicit(level, Claim.put(strike), 0, x)
        smooth_price = mollify.smoothed_put_price(level, n, strike, 0, x)
        raw_delta = mollify.put_delta_lattice(level, strike, 0, x)
        smooth_delta = mollify.smoothed_delta(level, n, strike, 0, x)
        band_prob = mollify.strike_band_probability(level, strike, 1.0 / n,
                                                    0, x)
        compare_rows.append([float(x), raw, smooth_price,
                             abs(raw - smooth_price), raw_delta,
                             smooth_delta, abs(raw_delta - smooth_delta),
                             band_prob])
    _emit({"scalars": {"bump_constant": c, "n": n, "strike": strike,
                       "max_curvature": smoothed.max_curvature},
           "sections": [
               {"name": "payoff_samples",
                "columns": ["s", "value", "slope", "curvature"],
                "rows": sample_rows},
               {"name": "price_delta_comparison",
                "columns": ["x", "put", "smoothed_put", "price_gap",
                            "put_delta", "smoothed_delta", "delta_gap",
                            "band_probability"],
                "rows": compare_rows},
           ]}, args)


def _forward_problem_from_file(args) -> fkmod.FKForwardProblem:
    if not args.problem:
        raise ConfigError("--mode forward needs --problem FILE")
    try:
        with open(args.problem) as handle:
            spec = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read problem file: {exc}") from exc
    try:
        return fkmod.FKForwardProblem(
            mu=_parse_catalog_function(spec["mu"]),
            sigma=_parse_catalog_function(spec["sigma"]),
            rate=_parse_catalog_function(spec["rate"]),
            payoff=_parse_catalog_function(spec["payoff"]),
            m=int(spec["m"]))
    except KeyError as exc:
        raise ConfigError(f"problem file missing field {exc}") from exc


def _backward_problem_from_file(args) -> fkmod.FKBackwardProblem:
    try:
        with open(args.problem) as handle:
            spec = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read problem file: {exc}") from exc
    try:
        return fkmod.FKBackwardProblem(
            mu=_parse_catalog_function(spec["mu"], time_dependent=True),
            sigma=_parse_catalog_function(spec["sigma"], time_dependent=True),
            rho=_parse_catalog_function(spec["rho"], time_dependent=True),
            payoff=_parse_catalog_function(spec["payoff"]),
            step_up=float(spec["step_up"]),
            step_down=float(spec["step_down"]),
            p_up=float(spec["p_up"]),
            p_down=float(spec["p_down"]),
            m=int(spec["m"]),
            n_steps=int(spec["n_steps"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad problem file: {exc}") from exc


def cmd_fk(args) -> None:
    config = _load_config(args)
    scalars = {"mode": args.mode, "k": args.k, "x": args.x}
    if args.mode == "forward":
        problem = _forward_problem_from_file(args)
        value = fkmod.fk_forward_solve(problem, args.k, args.x,
                                       tree_cap=args.tree_cap,
                                       mc_samples=args.mc_samples,
                                       seed=args.seed)
    elif args.mode == "backward":
        if args.problem:
            problem = _backward_problem_from_file(args)
        else:
            params = _market_params(args, config)
            level = build_level(params, args.m)
            problem = fkmod.fk_bs_specialize(level,
                                             _claim_from_args(args, config))
        value = fkmod.fk_backward_solve(problem, args.k, args.x,
                                        tree_cap=args.tree_cap,
                                        mc_samples=args.mc_samples,
                                        seed=args.seed)
    elif args.mode == "residual":
        params = _market_params(args, config)
        level = build_level(params, args.m)
        claim = mollify.smooth_put(args.smooth_n, args.K).claim()
        resid = fkmod.bs_residual(level, claim, max(args.k, 1), args.x)
        _emit({"scalars": {**scalars, "residual": resid}, "sections": []},
              args)
        return
    else:
        raise ConfigError(f"unknown fk mode {args.mode!r}")
    scalars.update({"value": value.value, "strategy": value.strategy})
    if value.std_error is not None:
        scalars["std_error"] = value.std_error
    _emit({"scalars": scalars, "sections": []}, args)


def cmd_study(args) -> None:
    config = _load_config(args)
    if config:
        study_config = StudyConfig.from_dict(config)
    else:
        study_config = StudyConfig(params=MarketParams(
            mu=0.05, sigma=0.2, r=0.05, s0=100.0, horizon=1))
    if args.seed_list:
        study_config.seeds = tuple(_seed_list(args, study_config.seeds))
    study_config.validate()
    report = run_study(study_config)
    fmt = getattr(args, "emit", None) or args.format
    text = report.render(fmt)
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


# ── parser ──────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strongwalk",
        description="Pathwise discrete Black-Scholes toolkit on nested "
                    "twist-and-shrink random walks")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="write output to this path")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--seed-list", help="comma-separated seeds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("walk", help="walk construction diagnostics")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--k-max", type=int, default=256)
    p.add_argument("--emit", choices=("csv", "json"))
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("market", help="level constants and one asset path")
    for flag in ("--mu", "--sigma", "--r", "--s0"):
        p.add_argument(flag, type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--emit", choices=("csv", "json"))
    p.set_defaults(func=cmd_market)

    p = sub.add_parser("price", help="lattice prices and surface dump")
    p.add_argument("--claim", choices=("call", "put", "custom"),
                   default="call")
    p.add_argument("--K", type=float, default=100.0)
    for flag in ("--mu", "--sigma", "--r", "--s0"):
        p.add_argument(flag, type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--x", type=float)
    p.add_argument("--compare-bsm", action="store_true")
    p.add_argument("--no-surface", action="store_true")
    p.add_argument("--emit", choices=("csv", "json"))
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("hedge", help="pathwise replication backtests")
    p.add_argument("--claim", choices=("call", "put", "custom"),
                   default="call")
    p.add_argument("--K", type=float, default=100.0)
    for flag in ("--mu", "--sigma", "--r", "--s0"):
        p.add_argument(flag, type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--paths", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--ledgers", action="store_true",
                   help="emit full per-step ledgers")
    p.add_argument("--emit", choices=("csv", "json"))
    p.set_defaults(func=cmd_hedge)

    p = sub.add_parser("smooth", help="mollified put diagnostics")
    p.add_argument("--K", type=float, default=100.0)
    p.add_argument("--n", type=int, default=8)
    for flag in ("--mu", "--sigma", "--r", "--s0"):
        p.add_argument(flag, type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--emit", choices=("csv", "json"))
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("fk", help="discrete Feynman-Kac solvers")
    p.add_argument("--mode", choices=("forward", "backward", "residual"),
                   required=True)
    p.add_argument("--problem", help="JSON problem-spec file")
    p.add_argument("--claim", choices=("call", "put", "custom"),
                   default="call")
    p.add_argument("--K", type=float, default=100.0)
    for flag in ("--mu", "--sigma", "--r", "--s0"):
        p.add_argument(flag, type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--x", type=float, default=100.0)
    p.add_argument("--smooth-n", type=int, default=8)
    p.add_argument("--tree-cap", type=int, default=fkmod.DEFAULT_TREE_CAP)
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--emit", choices=("csv", "json"))
    p.set_defaults(func=cmd_fk)

    p = sub.add_parser("study", help="convergence study across levels/seeds")
    p.add_argument("--emit", choices=("csv", "json"))
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return 3
    except StrongWalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
