"""Mollified put payoffs and the smoothed pricing/hedging scheme.

The kinked put payoff is convolved with the compactly supported bump
psi(u) = c * exp(-1/(1-u^2)) on (-1,1); the smoothing index n confines the
change to the band |s - K| < 1/n and caps the payoff error at 1/(2n).
Smoothed prices and deltas then admit the differentiable-claim machinery,
with the error controlled by the exact lattice probability of ending in
the band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, stats

from .errors import NumericalGuardError
from .hedging import hedge_ratio, lattice_derivative
from .market import MarketLevel
from .pricing import Claim, price_explicit

QUAD_TOL = 1e-12


class Bump:
    """Normalized smooth bump on (-1, 1) with all derivatives vanishing
    at the endpoints."""

    def __init__(self):
        raw, _ = integrate.quad(self._unnormalized, -1.0, 1.0,
                                epsabs=QUAD_TOL, epsrel=QUAD_TOL)
        self.c = 1.0 / raw

    @staticmethod
    def _unnormalized(u: float) -> float:
        if abs(u) >= 1.0:
            return 0.0
        return math.exp(-1.0 / (1.0 - u * u))

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        ui = u[inside]
        out[inside] = self.c * np.exp(-1.0 / (1.0 - ui * ui))
        return out if out.ndim else float(out)

    def deriv(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        ui = u[inside]
        denom = 1.0 - ui * ui
        out[inside] = self.c * np.exp(-1.0 / denom) * (-2.0 * ui
                                                       / (denom * denom))
        return out if out.ndim else float(out)

    def integral(self, lo: float, hi: float = 1.0) -> float:
        """Adaptive quadrature of the bump over [lo, hi] within (-1, 1)."""
        lo, hi = max(lo, -1.0), min(hi, 1.0)
        if lo >= hi:
            return 0.0
        val, _ = integrate.quad(lambda u: self.c * self._unnormalized(u),
                                lo, hi, epsabs=QUAD_TOL, epsrel=QUAD_TOL)
        return val


@lru_cache(maxsize=1)
def _shared_bump() -> Bump:
    return Bump()


def bump_constant() -> float:
    """Normalization constant of the bump (about 2.25228)."""
    return _shared_bump().c


@dataclass(frozen=True)
class SmoothedPut:
    """Put payoff convolved with the width-1/n bump.

    Piecewise: the intact put below K - 1/n, zero above K + 1/n, and a
    quadrature-evaluated blend on the band. Exposes derivatives up to
    third order (closed forms on the band) for the differentiable-claim
    machinery.
    """

    n: int
    strike: float
    bump: Bump

    def _band_value(self, w: float) -> float:
        # (1/n) * integral_w^1 (v - w) psi(v) dv
        val, _ = integrate.quad(
            lambda v: (v - w) * self.bump.c * Bump._unnormalized(v),
            w, 1.0, epsabs=QUAD_TOL, epsrel=QUAD_TOL)
        return val / self.n

    def value(self, s):
        s = np.asarray(s, dtype=np.float64)
        w = self.n * (s - self.strike)
        out = np.where(w <= -1.0, self.strike - s, 0.0)
        band = np.abs(w) < 1.0
        if np.any(band):
            out[band] = [self._band_value(float(wi)) for wi in w[band]]
        return out if out.ndim else float(out)

    def slope(self, s):
        s = np.asarray(s, dtype=np.float64)
        w = self.n * (s - self.strike)
        out = np.where(w <= -1.0, -1.0, 0.0)
        band = np.abs(w) < 1.0
        if np.any(band):
            # clamp quadrature rounding so -1 <= slope <= 0 holds exactly
            out[band] = [-min(1.0, self.bump.integral(float(wi)))
                         for wi in w[band]]
        return out if out.ndim else float(out)

    def curvature(self, s):
        s = np.asarray(s, dtype=np.float64)
        w = self.n * (s - self.strike)
        out = np.zeros_like(w)
        band = np.abs(w) < 1.0
        out[band] = self.n * np.asarray(self.bump(w[band]))
        return out if out.ndim else float(out)

    def third(self, s):
        s = np.asarray(s, dtype=np.float64)
        w = self.n * (s - self.strike)
        out = np.zeros_like(w)
        band = np.abs(w) < 1.0
        out[band] = self.n ** 2 * np.asarray(self.bump.deriv(w[band]))
        return out if out.ndim else float(out)

    def claim(self) -> Claim:
        return Claim.custom(self.value, self.slope, self.curvature,
                            self.third)

    @property
    def max_curvature(self) -> float:
        """sup g_n'' = n * c / e, attained at the strike."""
        return self.n * self.bump.c / math.e


def smooth_put(n: int, strike: float) -> SmoothedPut:
    if n < 1:
        raise ValueError("smoothing index must be a positive integer")
    if strike <= 0:
        raise ValueError("strike must be positive")
    return SmoothedPut(int(n), float(strike), _shared_bump())


def smoothed_put_price(level: MarketLevel, n: int, strike: float, k: int,
                       x: float) -> float:
    """Lattice price of the mollified put payoff."""
    return price_explicit(level, smooth_put(n, strike).claim(), k, x)


def smoothed_delta(level: MarketLevel, n: int, strike: float, k: int,
                   x: float) -> float:
    """First x-derivative of the smoothed put price."""
    return lattice_derivative(level, smooth_put(n, strike).claim(), 1, k, x)


def put_delta_lattice(level: MarketLevel, strike: float, k: int,
                      x: float) -> float:
    """Raw put lattice delta (slope -1/2 at the kink)."""
    return lattice_derivative(level, Claim.put(strike), 1, k, x)


def strike_band_probability(level: MarketLevel, strike: float, band: float,
                            k: int, x: float) -> float:
    """Exact risk-neutral probability that S(T) lands within ``band`` of
    the strike, starting from price x at step k."""
    n = level.n_steps - k
    if n == 0:
        return 1.0 if abs(x - strike) <= band else 0.0
    spread = level.log_up - level.log_down
    hi_edge = strike + band
    lo_edge = strike - band
    i_hi = math.floor((math.log(hi_edge / x) - n * level.log_down) / spread)
    if lo_edge <= 0.0:
        i_lo = 0
    else:
        i_lo = math.ceil((math.log(lo_edge / x) - n * level.log_down)
                         / spread)
    i_lo, i_hi = max(i_lo, 0), min(i_hi, n)
    if i_lo > i_hi:
        return 0.0
    upper = stats.binom.cdf(i_hi, n, level.q_up)
    lower = stats.binom.cdf(i_lo - 1, n, level.q_up) if i_lo > 0 else 0.0
    return float(upper - lower)


def smoothing_index(m: int) -> int:
    """Smoothing schedule n = ceil(2^(2m/3)) balancing band width against
    curvature growth."""
    return math.ceil(2.0 ** (2.0 * m / 3.0))


def european_hedge_schedule(level: MarketLevel, strike: float,
                            times=(0.0,), x_values=None,
                            smoothing_slack: float = 1.0) -> list[dict]:
    """Smoothed-delta hedging gaps for the put under the n = ceil(2^{2m/3})
    schedule.

    At each sampled (time, price) the exact holding is compared with the
    smoothed delta one step later; under the schedule the gap decays like
    2^(-m/3). Rejects levels where the smoothing band is too wide relative
    to the strike.
    """
    n = smoothing_index(level.m)
    if (1.0 / n + smoothing_slack * level.dx) / strike > 0.5:
        raise NumericalGuardError(
            f"band condition fails at level {level.m}: smoothing width "
            f"1/{n} too coarse for strike {strike}")
    if x_values is None:
        x_values = (strike,)
    put = Claim.put(strike)
    smoothed = smooth_put(n, strike).claim()
    rows = []
    for t in times:
        k = level.step_floor(float(t))
        if k >= level.n_steps:
            continue
        for x in x_values:
            a = hedge_ratio(level, put, k, float(x))
            d = lattice_derivative(level, smoothed, 1, k + 1, float(x))
            rows.append({"m": level.m, "n": n, "k": k, "x": float(x),
                         "holding": a, "smoothed_delta": d,
                         "gap": abs(a - d)})
    return rows


def smoothed_call(level: MarketLevel, n: int, strike: float, k: int,
                  x: float) -> tuple[float, float]:
    """Smoothed call price and delta via parity with the smoothed put."""
    disc = level.discount(level.n_steps - k)
    price = smoothed_put_price(level, n, strike, k, x) + x - disc * strike
    delta = smoothed_delta(level, n, strike, k, x) + 1.0
    return price, delta
