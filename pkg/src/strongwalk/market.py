"""Level-m discrete market: asset and bond recursions, risk-neutral step
probabilities, the measure-change process, and the drifted martingale walk.

One market level fixes the grid (dt = 4^-m, dx = 2^-m) and the per-step
factors; paths are then driven by a twist-and-shrink walk of the same level.
Asset and measure-change processes accumulate in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import LevelTooCoarseError, NonDyadicError
from .walk import WalkPath, dyadic_steps


def _as_dyadic(value) -> Fraction:
    frac = Fraction(value)
    den = frac.denominator
    if den & (den - 1):
        raise NonDyadicError(
            f"maturity {value!r} is not a dyadic rational; refusing to round")
    return frac


@dataclass(frozen=True)
class MarketParams:
    """Model constants: drift, volatility, riskless rate, spot, maturity.

    The maturity must be an exact dyadic rational; it is validated here and
    must additionally be a multiple of 4^-m for every level built from it.
    """

    mu: float
    sigma: float
    r: float
    s0: float
    horizon: Fraction

    def __init__(self, mu, sigma, r, s0, horizon):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if r <= 0:
            raise ValueError("riskless rate must be positive")
        if s0 <= 0:
            raise ValueError("initial price must be positive")
        horizon = _as_dyadic(horizon)
        if horizon <= 0:
            raise ValueError("maturity must be positive")
        object.__setattr__(self, "mu", float(mu))
        object.__setattr__(self, "sigma", float(sigma))
        object.__setattr__(self, "r", float(r))
        object.__setattr__(self, "s0", float(s0))
        object.__setattr__(self, "horizon", horizon)

    @property
    def horizon_float(self) -> float:
        return float(self.horizon)


@dataclass(frozen=True)
class MarketLevel:
    """Grid constants of one market level.

    ``gross_rate``/``up``/``down`` are the one-step bond and asset growth
    factors; ``q_up`` is the up probability that makes the discounted asset
    a one-step martingale.
    """

    params: MarketParams
    m: int
    dt: float
    dx: float
    gross_rate: float
    up: float
    down: float
    q_up: float
    q_down: float
    n_steps: int

    @property
    def log_up(self) -> float:
        return math.log(self.up)

    @property
    def log_down(self) -> float:
        return math.log(self.down)

    @property
    def log_gross(self) -> float:
        return math.log1p(self.params.r * self.dt)

    def discount(self, steps: int) -> float:
        """gross_rate**(-steps), stable for large step counts."""
        return math.exp(-steps * self.log_gross)

    def step_floor(self, t: float) -> int:
        """Lattice step containing time t (floor convention)."""
        return min(int(math.floor(t / self.dt)), self.n_steps)


def coarseness_threshold(params: MarketParams) -> float:
    """Smallest admissible level: log2(|r - mu| / sigma), -inf when r == mu."""
    gap = abs(params.r - params.mu)
    if gap == 0.0:
        return -math.inf
    return math.log2(gap / params.sigma)


def build_level(params: MarketParams, m: int) -> MarketLevel:
    """Construct the level-m market; rejects levels that break validity.

    A level is valid when the up probability lies strictly inside (0,1)
    (m must exceed log2(|r-mu|/sigma)) and the down factor stays positive,
    so node prices cannot hit zero.
    """
    if m < 0 or m != int(m):
        raise ValueError("level must be a nonnegative integer")
    m = int(m)
    dt = math.ldexp(1.0, -2 * m)
    dx = math.ldexp(1.0, -m)
    theta = (params.r - params.mu) / params.sigma
    q_up = 0.5 + 0.5 * theta * dx
    down = 1.0 - params.sigma * dx + params.mu * dt
    if not 0.0 < q_up < 1.0:
        raise LevelTooCoarseError(
            f"level {m} has up-probability {q_up}; need m > "
            f"{coarseness_threshold(params):.6g}")
    if down <= 0.0:
        raise LevelTooCoarseError(
            f"level {m} has nonpositive down factor {down}")
    return MarketLevel(
        params=params,
        m=m,
        dt=dt,
        dx=dx,
        gross_rate=1.0 + params.r * dt,
        up=1.0 + params.sigma * dx + params.mu * dt,
        down=down,
        q_up=q_up,
        q_down=1.0 - q_up,
        n_steps=dyadic_steps(params.horizon, m),
    )


def bond_price(level: MarketLevel, k: int) -> float:
    """Bond value after k steps: (1 + r*dt)**k."""
    if not 0 <= k <= level.n_steps:
        raise ValueError(f"step {k} outside 0..{level.n_steps}")
    return math.exp(k * level.log_gross)


def bond_gap(level: MarketLevel, t: float) -> float:
    """Diagnostic |e^{rt} - bond(floor(t/dt))|; decays like 4^-m."""
    k = int(math.floor(t / level.dt))
    return abs(math.exp(level.params.r * t) - math.exp(k * level.log_gross))


def exp_reference(params: MarketParams, path: WalkPath, t):
    """Exponential reference price s0 * exp((mu - sigma^2/2) t + sigma B(t)).

    This is the exact solution driven by the same walk; the recursion-built
    asset stays within O(2^-m) of it.
    """
    drift = params.mu - 0.5 * params.sigma ** 2
    return params.s0 * np.exp(drift * np.asarray(t, dtype=np.float64)
                              + params.sigma * np.asarray(path(t)))


def _up_count_prefix(path: WalkPath, n_steps: int) -> np.ndarray:
    inc = path.level.increments[:n_steps]
    ups = np.empty(n_steps + 1, dtype=np.int64)
    ups[0] = 0
    np.cumsum(inc == 1, out=ups[1:])
    return ups


class AssetPath:
    """Realized asset prices S(t_k), k = 0..N, along one walk.

    ``values`` multiplies the exact step factors so every one-step ratio is
    up or down to rounding; ``log_values`` gives the drift-free log-space
    view (exponent counts times log-factors) used by the diagnostics.
    """

    def __init__(self, level: MarketLevel, path: WalkPath, s0=None):
        if path.m != level.m:
            raise ValueError(
                f"walk level {path.m} does not match market level {level.m}")
        if path.n_steps < level.n_steps:
            raise ValueError("walk path shorter than the market horizon")
        self.level = level
        self.walk = path
        self.s0 = level.params.s0 if s0 is None else float(s0)
        self.up_counts = _up_count_prefix(path, level.n_steps)
        self._values = None

    @property
    def n_steps(self) -> int:
        return self.level.n_steps

    def log_values(self) -> np.ndarray:
        lvl = self.level
        k = np.arange(lvl.n_steps + 1)
        i = self.up_counts
        return math.log(self.s0) + i * lvl.log_up + (k - i) * lvl.log_down

    def values(self) -> np.ndarray:
        # product of exact step factors: keeps every one-step ratio within
        # 2 ulps of up/down, which log-space reconstruction cannot do
        if self._values is None:
            lvl = self.level
            inc = self.walk.level.increments[: lvl.n_steps]
            factors = np.where(inc == 1, lvl.up, lvl.down)
            vals = np.empty(lvl.n_steps + 1)
            vals[0] = self.s0
            vals[1:] = self.s0 * np.cumprod(factors)
            self._values = vals
        return self._values

    def value(self, k: int) -> float:
        return float(self.values()[k])


def asset_path(level: MarketLevel, path: WalkPath, s0=None) -> AssetPath:
    """Asset recursion S(t_{k+1}) = S(t_k) * (up or down) along the walk."""
    return AssetPath(level, path, s0)


class RNProcess:
    """Measure-change process: (2 q_up)^{#up} * (2 q_down)^{#down}.

    A positive unit-mean martingale under fair coins; reweighting paths by
    its terminal value turns the fair-coin measure into the risk-neutral
    one. Accumulated in log space.
    """

    def __init__(self, level: MarketLevel, up_counts: np.ndarray):
        self.level = level
        self.up_counts = up_counts

    def log_values(self) -> np.ndarray:
        lvl = self.level
        k = np.arange(lvl.n_steps + 1)
        i = self.up_counts
        return i * math.log(2.0 * lvl.q_up) + (k - i) * math.log(
            2.0 * lvl.q_down)

    def values(self) -> np.ndarray:
        return np.exp(self.log_values())

    def terminal(self) -> float:
        return float(np.exp(self.log_values()[-1]))


def rn_process(level: MarketLevel, walk) -> RNProcess:
    """Measure-change process along a walk path (or raw +-1 increments)."""
    if isinstance(walk, WalkPath):
        ups = _up_count_prefix(walk, level.n_steps)
    else:
        inc = np.asarray(walk)[: level.n_steps]
        if inc.size < level.n_steps:
            raise ValueError("increment sequence shorter than the horizon")
        ups = np.empty(level.n_steps + 1, dtype=np.int64)
        ups[0] = 0
        np.cumsum(inc == 1, out=ups[1:])
    return RNProcess(level, ups)


def drifted_walk(level: MarketLevel, path: WalkPath, t):
    """B(t) + ((mu - r)/sigma) t: the walk that is a risk-neutral martingale."""
    params = level.params
    theta = (params.mu - params.r) / params.sigma
    return np.asarray(path(t)) + theta * np.asarray(t, dtype=np.float64)


def rn_log_limit_gap(level: MarketLevel, path: WalkPath) -> float:
    """Distance of log Lambda(T) from its continuous-model limit.

    The limit is theta*B(T) - theta^2 T/2 with theta = (r - mu)/sigma;
    the gap decays like 2^-m on a fixed walk family.
    """
    params = level.params
    theta = (params.r - params.mu) / params.sigma
    horizon = float(level.n_steps * level.dt)
    proc = rn_process(level, path)
    target = theta * path(horizon) - 0.5 * theta ** 2 * horizon
    return abs(float(proc.log_values()[-1]) - target)
