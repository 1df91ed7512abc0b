"""Exact replicating portfolios on the lattice and lattice greeks.

Every node gets asset/bond holdings solving the two-scenario system for the
next step's values; rolling them forward along any realized path reproduces
the value surface and hits the payoff at maturity to rounding error. The
derivative representation prices g^(j) with the j-th moment weights and is
compared, never conflated, with the difference-quotient holdings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market import AssetPath, MarketLevel
from .pricing import (BSMClosedForm, Claim, PriceSurface, _weights,
                      call_closed_binomial, node_prices, price_explicit,
                      put_price)


class PortfolioSurface:
    """Asset/bond holdings per node: rows k = 0..N-1, node i = 0..k."""

    def __init__(self, surface: PriceSurface, asset_rows, bond_rows):
        self.surface = surface
        self.level = surface.level
        self.asset_rows = asset_rows
        self.bond_rows = bond_rows

    def holdings(self, k: int, i: int) -> tuple[float, float]:
        return float(self.asset_rows[k][i]), float(self.bond_rows[k][i])


def replicate(surface: PriceSurface) -> PortfolioSurface:
    """Per-node holdings from the unique two-scenario linear system.

    asset = (V_up - V_down) / ((up - down) x); the bond position finances
    the rest at the next step's bond price. Solvability needs up > down,
    which level validity guarantees.
    """
    level = surface.level
    spread = level.up - level.down
    asset_rows, bond_rows = [], []
    for k in range(level.n_steps):
        prices = node_prices(level, k)
        assert np.all(prices > 0.0)
        nxt = surface.rows[k + 1]
        a = (nxt[1:] - nxt[:-1]) / (spread * prices)
        b = level.discount(k + 1) * (nxt[1:] - a * level.up * prices)
        asset_rows.append(a)
        bond_rows.append(b)
    return PortfolioSurface(surface, asset_rows, bond_rows)


@dataclass
class HedgeLedger:
    """Step-by-step record of one hedge along one realized path.

    Positions are kept at full precision (frictionless market, no
    rounding). ``self_financing_residuals[k]`` is the value mismatch at the
    k-th rebalance; ``terminal_error`` compares the final portfolio value
    with the payoff.
    """

    steps: np.ndarray
    asset_positions: np.ndarray
    bond_positions: np.ndarray
    portfolio_values: np.ndarray
    asset_prices: np.ndarray
    self_financing_residuals: np.ndarray
    terminal_value: float
    payoff: float

    @property
    def terminal_error(self) -> float:
        scale = max(1.0, abs(self.payoff))
        return abs(self.terminal_value - self.payoff) / scale


def pathwise_hedge(portfolio: PortfolioSurface, path: AssetPath,
                   claim: Claim) -> HedgeLedger:
    """Roll the replicating portfolio forward along one realized path."""
    level = portfolio.level
    if path.level.m != level.m:
        raise ValueError("asset path level does not match the portfolio")
    n = level.n_steps
    ups = path.up_counts
    prices = path.values()
    a = np.empty(n)
    b = np.empty(n)
    for k in range(n):
        a[k], b[k] = portfolio.holdings(k, int(ups[k]))
    bond = np.exp(np.arange(n + 1) * level.log_gross)
    # value carried into step k+1 by the step-k portfolio
    carried = a * prices[1:] + b * bond[1:]
    values = np.empty(n + 1)
    values[0] = a[0] * prices[0] + b[0] * bond[0]
    values[1:] = carried
    # rebalance mismatch: new holdings must cost exactly the carried value
    resid = np.abs(a[1:] * prices[1:-1] + b[1:] * bond[1:-1] - carried[:-1])
    scale = np.maximum(1.0, np.abs(carried[:-1]))
    payoff = float(claim.payoff(np.asarray(prices[-1])))
    return HedgeLedger(
        steps=np.arange(n),
        asset_positions=a,
        bond_positions=b,
        portfolio_values=values,
        asset_prices=prices,
        self_financing_residuals=resid / scale,
        terminal_value=float(carried[-1]),
        payoff=payoff,
    )


def lattice_derivative(level: MarketLevel, claim: Claim, order: int, k: int,
                       x: float) -> float:
    """j-th price derivative in x via the payoff-derivative representation.

    Weights each terminal g^(j)(s_i) by (s_i/x)^j under the risk-neutral
    binomial law; order 0 reduces to the explicit price sum.
    """
    if order == 0:
        return price_explicit(level, claim, k, x)
    deriv = claim.derivative(order)
    n = level.n_steps - k
    if n == 0:
        return float(deriv(np.asarray(x)))
    i = np.arange(n + 1)
    log_ratio = i * level.log_up + (n - i) * level.log_down
    prices = np.exp(math.log(x) + log_ratio)
    terms = np.asarray(deriv(prices), dtype=np.float64) * np.exp(
        order * log_ratio)
    return level.discount(n) * float(np.dot(_weights(n, level.q_up), terms))


def hedge_ratio(level: MarketLevel, claim: Claim, k: int, x: float) -> float:
    """Asset holding at (step k, price x) from the value difference quotient."""
    if claim.kind == "call":
        def value(step, price):
            return call_closed_binomial(level, claim.strike, step, price)
    elif claim.kind == "put":
        def value(step, price):
            return put_price(level, claim.strike, step, price)
    else:
        def value(step, price):
            return price_explicit(level, claim, step, price)
    up_val = value(k + 1, x * level.up)
    down_val = value(k + 1, x * level.down)
    return (up_val - down_val) / ((level.up - level.down) * x)


def portfolio_vs_delta(level: MarketLevel, claim: Claim, k: int,
                       x: float) -> float:
    """|holding - next-step lattice delta|; O(x 2^-m) for C^2 payoffs."""
    return abs(hedge_ratio(level, claim, k, x)
               - lattice_derivative(level, claim, 1, k + 1, x))


def bond_position(level: MarketLevel, claim: Claim, k: int,
                  x: float) -> float:
    """Bond holding at (step k, price x) financing the asset position."""
    if claim.kind == "call":
        up_val = call_closed_binomial(level, claim.strike, k + 1,
                                      x * level.up)
    elif claim.kind == "put":
        up_val = put_price(level, claim.strike, k + 1, x * level.up)
    else:
        up_val = price_explicit(level, claim, k + 1, x * level.up)
    a = hedge_ratio(level, claim, k, x)
    return level.discount(k + 1) * (up_val - a * level.up * x)


def convergence_to_continuous(params, claim: Claim, seeds, m_range,
                              t_grid) -> list[dict]:
    """Per-level medians of the holdings' distance to the continuous ones.

    For each seed the asset/bond holdings are evaluated along the realized
    path on the time grid and compared with the closed-form targets
    (call delta and its bond counterpart, put via parity); the medians
    should trend down in m.
    """
    from .market import asset_path, build_level
    from .walk import NestedWalks

    if claim.kind not in ("call", "put"):
        raise ValueError("continuous targets exist for call/put claims")
    closed = BSMClosedForm(params)
    horizon = params.horizon_float
    disc_total = math.exp(-params.r * horizon)
    rows = []
    for m in m_range:
        level = build_level(params, m)
        a_gaps, b_gaps = [], []
        for seed in seeds:
            asset = asset_path(level, NestedWalks(seed).path(m, horizon))
            values = asset.values()
            worst_a, worst_b = 0.0, 0.0
            for t in np.asarray(t_grid, dtype=np.float64):
                k = level.step_floor(float(t))
                if k >= level.n_steps:
                    continue
                x = float(values[k])
                a = hedge_ratio(level, claim, k, x)
                b = bond_position(level, claim, k, x)
                u = horizon - float(t)
                d_minus = float(closed.d_minus(u, x, claim.strike))
                if claim.kind == "call":
                    a_target = closed.call_delta(float(t), x, claim.strike)
                    b_target = -claim.strike * disc_total * closed.phi(
                        d_minus)
                else:
                    a_target = closed.put_delta(float(t), x, claim.strike)
                    b_target = claim.strike * disc_total * closed.phi(
                        -d_minus)
                worst_a = max(worst_a, abs(a - a_target))
                worst_b = max(worst_b, abs(b - b_target))
            a_gaps.append(worst_a)
            b_gaps.append(worst_b)
        rows.append({"m": int(m),
                     "asset_gap_median": float(np.median(a_gaps)),
                     "bond_gap_median": float(np.median(b_gaps))})
    return rows


def delta_gap_path(level: MarketLevel, claim: Claim, asset: AssetPath,
                   t_grid) -> float:
    """Sup over a time grid of |lattice holding - continuous delta|.

    The holding is evaluated along the realized asset path; the continuous
    delta is the closed-form call delta (put via parity) at the same price.
    """
    closed = BSMClosedForm(level.params)
    if claim.kind not in ("call", "put"):
        raise ValueError("continuous delta reference needs a call or put")
    worst = 0.0
    values = asset.values()
    for t in np.asarray(t_grid, dtype=np.float64):
        k = level.step_floor(float(t))
        if k >= level.n_steps:
            continue
        x = float(values[k])
        a = hedge_ratio(level, claim, k, x)
        if claim.kind == "call":
            target = closed.call_delta(float(t), x, claim.strike)
        else:
            target = closed.put_delta(float(t), x, claim.strike)
        worst = max(worst, abs(a - target))
    return worst
