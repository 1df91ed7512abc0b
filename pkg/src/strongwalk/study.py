"""Convergence studies across levels and seeds, with rate fitting.

A study sweeps (level, seed) cells, records one error value per metric,
aggregates across seeds by median (sup statistics are heavy-tailed), and
fits log2(error) against the level by least squares. Reports are
deterministic: byte-identical output for identical configurations.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalGuardError
from .fk import bs_residual
from .hedging import delta_gap_path
from .market import (MarketParams, asset_path, build_level,
                     coarseness_threshold, exp_reference)
from .mollify import smooth_put
from .pricing import BSMClosedForm, Claim, call_closed_binomial
from .walk import NestedWalks, sup_distance

HARD_LEVEL_CAP = 12


@dataclass
class StudyConfig:
    """Everything a convergence study needs, JSON-round-trippable."""

    params: MarketParams
    claim_kind: str = "call"
    strike: float = 100.0
    m_lo: int = 4
    m_hi: int = 8
    seeds: tuple = tuple(range(1, 21))
    m_ref: int = 12
    delta_frac: float = 0.1
    grid_points: int = 19
    smooth_n: int = 8
    tree_cap: int = 22
    mc_samples: int = 1 << 16
    out_format: str = "csv"

    def validate(self) -> None:
        if self.claim_kind not in ("call", "put"):
            raise ConfigError(
                f"claim kind {self.claim_kind!r}: studies support call/put")
        if self.strike <= 0:
            raise ConfigError("strike must be positive")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if self.m_hi < self.m_lo:
            raise ConfigError(
                f"level range [{self.m_lo}, {self.m_hi}] is empty")
        if self.m_hi > HARD_LEVEL_CAP:
            raise ConfigError(
                f"m_hi {self.m_hi} exceeds the hard cap {HARD_LEVEL_CAP}")
        threshold = coarseness_threshold(self.params)
        if self.m_lo <= threshold:
            raise ConfigError(
                f"m_lo {self.m_lo} not above the validity threshold "
                f"{threshold:.6g} for these parameters")
        if self.m_ref <= self.m_hi:
            raise ConfigError(
                f"reference level {self.m_ref} must exceed m_hi {self.m_hi}")
        if not 0.0 < self.delta_frac < 1.0:
            raise ConfigError("delta_frac must be in (0, 1)")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be at least 2")
        if self.out_format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.out_format!r}")

    @property
    def claim(self) -> Claim:
        return (Claim.call(self.strike) if self.claim_kind == "call"
                else Claim.put(self.strike))

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        data = dict(data)
        try:
            market = data.pop("market")
            params = MarketParams(
                mu=market["mu"], sigma=market["sigma"], r=market["r"],
                s0=market["s0"], horizon=market["horizon"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad or missing market block: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"bad market parameters: {exc}") from exc
        claim = data.pop("claim", {})
        known = {
            "m_lo": int, "m_hi": int, "m_ref": int, "delta_frac": float,
            "grid_points": int, "smooth_n": int, "tree_cap": int,
            "mc_samples": int, "out_format": str,
        }
        kwargs = {}
        for key, conv in known.items():
            if key in data:
                kwargs[key] = conv(data.pop(key))
        if "seeds" in data:
            kwargs["seeds"] = tuple(int(s) for s in data.pop("seeds"))
        if data:
            raise ConfigError(f"unknown config fields: {sorted(data)}")
        cfg = cls(params=params,
                  claim_kind=claim.get("kind", "call"),
                  strike=float(claim.get("strike", 100.0)),
                  **kwargs)
        cfg.validate()
        return cfg


@dataclass
class RateFit:
    """Least-squares fit of log2(error) against the level index."""

    points: list
    slope: float
    intercept: float
    residual: float


def fit_rate(points) -> RateFit:
    """OLS of log2(error) on m; needs >= 4 points with positive errors."""
    points = [(int(m), float(e)) for m, e in points]
    if len(points) < 4:
        raise ValueError(f"rate fit needs at least 4 points, got "
                         f"{len(points)}")
    if any(e <= 0.0 for _, e in points):
        raise NumericalGuardError(
            "rate fit requires strictly positive errors (cannot take log)")
    ms = np.array([m for m, _ in points], dtype=np.float64)
    logs = np.log2([e for _, e in points])
    slope, intercept = np.polyfit(ms, logs, 1)
    resid = float(np.sqrt(np.mean((logs - (slope * ms + intercept)) ** 2)))
    return RateFit(points, float(slope), float(intercept), resid)


@dataclass
class StudyReport:
    """Raw (m, seed, metric, value) cells plus per-metric rate fits."""

    name: str
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("study,m,seed,metric,value\n")
        for row in sorted(self.rows,
                          key=lambda r: (r["metric"], r["m"], r["seed"])):
            buf.write(f"{self.name},{row['m']},{row['seed']},"
                      f"{row['metric']},{row['value']!r}\n")
        buf.write("fit_metric,slope,intercept,fit_residual\n")
        for metric in sorted(self.fits):
            fit = self.fits[metric]
            if fit is None:
                buf.write(f"{metric},,,\n")
            else:
                buf.write(f"{metric},{fit.slope!r},{fit.intercept!r},"
                          f"{fit.residual!r}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        fits = {
            metric: None if fit is None else {
                "points": fit.points, "slope": fit.slope,
                "intercept": fit.intercept, "residual": fit.residual,
            }
            for metric, fit in self.fits.items()
        }
        payload = {"study": self.name,
                   "rows": sorted(self.rows, key=lambda r: (
                       r["metric"], r["m"], r["seed"])),
                   "fits": fits}
        return json.dumps(payload, indent=2, sort_keys=True)

    def render(self, out_format: str) -> str:
        return self.to_csv() if out_format == "csv" else self.to_json()


def _fk_residual_max(config: StudyConfig, level) -> float:
    claim = smooth_put(config.smooth_n, config.strike).claim()
    horizon = config.params.horizon_float
    worst = 0.0
    for t_frac in (0.25, 0.5, 0.75):
        k = level.step_floor(t_frac * horizon)
        if k < 1:
            continue
        for x in np.linspace(0.98 * config.strike, 1.02 * config.strike, 17):
            worst = max(worst, abs(bs_residual(level, claim, k, float(x))))
    return worst


def run_study(config: StudyConfig) -> StudyReport:
    """Per-level, per-seed error cells for the five standard metrics.

    walk_sup and asset_sup measure the walk and asset against their
    reference-level proxies; price_gap and fk_residual are deterministic
    per level (replicated across seed rows for a uniform schema);
    delta_gap compares holdings with the closed-form delta along each
    seeded path.
    """
    config.validate()
    params = config.params
    horizon = params.horizon_float
    closed = BSMClosedForm(params)
    claim = config.claim
    report = StudyReport(name=f"{config.claim_kind}-study")
    levels = {m: build_level(params, m)
              for m in range(config.m_lo, config.m_hi + 1)}

    price_ref = (closed.call(0.0, params.s0, config.strike)
                 if config.claim_kind == "call"
                 else closed.put(0.0, params.s0, config.strike))
    per_level_const = {}
    for m, level in levels.items():
        lattice = call_closed_binomial(level, config.strike, 0, params.s0)
        if config.claim_kind == "put":
            lattice = lattice - params.s0 + level.discount(
                level.n_steps) * config.strike
        per_level_const[m] = {
            "price_gap": abs(lattice - price_ref),
            "fk_residual": _fk_residual_max(config, level),
        }

    t_grid = np.linspace(0.0, (1.0 - config.delta_frac) * horizon,
                         config.grid_points)
    cells = {metric: {m: [] for m in levels}
             for metric in ("walk_sup", "asset_sup", "delta_gap")}
    for seed in config.seeds:
        family = NestedWalks(seed)
        ref_path = family.path(config.m_ref, horizon)
        for m, level in levels.items():
            path = family.path(m, horizon)
            walk_sup = sup_distance(ref_path, path, horizon)
            times = path.lattice_times()
            proxy = exp_reference(params, ref_path, times)
            asset = asset_path(level, path)
            asset_sup = float(np.max(np.abs(asset.values() - proxy)))
            delta_gap = delta_gap_path(level, claim, asset, t_grid)
            for metric, value in (("walk_sup", walk_sup),
                                  ("asset_sup", asset_sup),
                                  ("delta_gap", delta_gap)):
                cells[metric][m].append(value)
                report.rows.append({"m": m, "seed": seed, "metric": metric,
                                    "value": value})
            for metric in ("price_gap", "fk_residual"):
                report.rows.append({"m": m, "seed": seed, "metric": metric,
                                    "value": per_level_const[m][metric]})

    fit_input = {metric: [(m, float(np.median(vals)))
                          for m, vals in sorted(per_m.items())]
                 for metric, per_m in cells.items()}
    for metric in ("price_gap", "fk_residual"):
        fit_input[metric] = [(m, per_level_const[m][metric])
                             for m in sorted(levels)]
    for metric, points in sorted(fit_input.items()):
        if len(points) >= 4:
            report.fits[metric] = fit_rate(points)
        else:
            report.fits[metric] = None
    return report
