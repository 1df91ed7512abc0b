"""Nested twist-and-shrink random walks.

A seeded coin matrix drives a family of +-1 walks, one per level m. Level m
runs on a time grid of step 4^-m (squeezed into space steps 2^-m); each
level's bridges are sign-flipped so that, after shrinking, level m+1 retraces
the values of level m in the same order. All walk arithmetic is exact integer
arithmetic; floating point enters only when a path is evaluated in real time.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import CapExceededError, InsufficientDataError, NonDyadicError

DEFAULT_ROW_CAP = 1 << 26

_MASK64 = (1 << 64) - 1


class CoinMatrix:
    """Lazily grown matrix of independent +-1 coin tosses.

    Entry (row m, column k) is a pure function of ``(seed, m, k)``: rows are
    keyed by a per-row Philox key and generated counter-aligned, so any
    prefix is reproducible without stored state and extending a row never
    changes earlier entries. Already-returned prefixes are never mutated,
    so concurrent reads are safe; extension is serialized by a lock.
    """

    def __init__(self, seed: int, row_cap: int = DEFAULT_ROW_CAP):
        self.seed = int(seed)
        self.row_cap = int(row_cap)
        self._rows: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def _key(self, row: int) -> np.ndarray:
        ss = np.random.SeedSequence(entropy=[self.seed & _MASK64, row])
        return ss.generate_state(2, np.uint64)

    def _generate(self, row: int, lo: int, hi: int) -> np.ndarray:
        # lo must be a multiple of 4: Philox emits 4 words per counter block.
        key = self._key(row)
        out = np.empty(hi - lo, dtype=np.int8)
        chunk = 1 << 22
        for start in range(lo, hi, chunk):
            stop = min(start + chunk, hi)
            bg = np.random.Philox(
                counter=np.array([start // 4, 0, 0, 0], dtype=np.uint64),
                key=key)
            words = bg.random_raw(stop - start)
            out[start - lo:stop - lo] = (
                (words >> np.uint64(63)).astype(np.int8) << 1) - 1
        return out

    def row(self, m: int, n: int) -> np.ndarray:
        """First ``n`` coins of row ``m`` (do not mutate the result)."""
        if n < 0:
            raise ValueError("coin count must be nonnegative")
        if n > self.row_cap:
            raise CapExceededError(
                f"row {m} needs {n} coins, cap is {self.row_cap}")
        if n == 0:
            return np.empty(0, dtype=np.int8)
        buf = self._rows.get(m)
        if buf is None or n > buf.size:
            with self._lock:
                buf = self._rows.get(m)
                have = 0 if buf is None else buf.size
                if n > have:
                    target = max(n, 2 * have, 1024)
                    target = min(-(-target // 4) * 4, self.row_cap)
                    fresh = self._generate(m, have, target)
                    buf = fresh if buf is None else np.concatenate(
                        [buf, fresh])
                    self._rows[m] = buf
        return buf[:n]


def generate_coins(seed: int, m: int, n: int) -> np.ndarray:
    """First ``n`` coin tosses of row ``m`` for this seed."""
    return CoinMatrix(seed).row(m, n).copy()


def _bridge_ends(increments: np.ndarray) -> np.ndarray:
    """Times at which the walk has moved a net 2 from its previous stop.

    The running sum is even exactly at even times, so these are the even
    times where the sum changed since the previous even time.
    """
    pair_sums = increments[: 2 * (increments.size // 2)].reshape(-1, 2).sum(
        axis=1, dtype=np.int32)
    sums_even = np.cumsum(pair_sums, dtype=np.int32)
    moved = np.nonzero(np.diff(sums_even, prepend=np.int32(0)))[0]
    return (2 * (moved + 1)).astype(np.int64)


@dataclass
class WalkLevel:
    """One level of the family: twisted increments plus derived arrays."""

    m: int
    increments: np.ndarray       # int8, +-1
    partial_sums: np.ndarray     # int32, leading 0, length n+1
    stopping_times: np.ndarray   # int64 bridge end times of this level

    @classmethod
    def from_increments(cls, m, increments, stopping_times=None):
        increments = np.ascontiguousarray(increments, dtype=np.int8)
        if increments.size and not np.all(np.abs(increments) == 1):
            raise ValueError("walk increments must be +-1")
        sums = np.empty(increments.size + 1, dtype=np.int32)
        sums[0] = 0
        np.cumsum(increments, dtype=np.int32, out=sums[1:])
        if stopping_times is None:
            stopping_times = _bridge_ends(increments)
        return cls(m, increments, sums, np.asarray(stopping_times,
                                                   dtype=np.int64))

    @property
    def n_steps(self) -> int:
        return self.increments.size


def stopping_times(walk: WalkLevel, count: int | None = None) -> np.ndarray:
    """Bridge end times T(1), T(2), ... of the walk.

    T(k+1) is the first time after T(k) at which the walk is a net distance
    2 from its value at T(k). Raises when ``count`` stops are requested but
    the walk data ends mid-bridge before producing them.
    """
    stops = _bridge_ends(walk.increments)
    if count is not None:
        if stops.size < count:
            raise InsufficientDataError(
                f"walk has {stops.size} complete stops, {count} requested; "
                "extend the walk and retry")
        stops = stops[:count]
    return stops


def twist(prev: WalkLevel, raw_coins: np.ndarray,
          bridges: int | None = None) -> WalkLevel:
    """Build level m from level m-1 and the raw coins of row m.

    Bridge k of the raw walk is negated as a block whenever its net move
    disagrees with increment k of ``prev``; afterwards the new walk, sampled
    at its stopping times, retraces ``2 * prev.partial_sums``.
    """
    want = prev.increments
    if bridges is not None:
        if want.size < bridges:
            raise InsufficientDataError(
                f"previous level has {want.size} increments, "
                f"{bridges} bridges requested")
        want = want[:bridges]
    twisted, stops = kernels.twist_scan(raw_coins, want)
    if bridges is not None and stops.size < bridges:
        raise InsufficientDataError(
            f"raw coins complete only {stops.size} bridges, "
            f"{bridges} requested; extend the coin row and retry")
    return WalkLevel.from_increments(prev.m + 1, twisted, stops)


def dyadic_steps(horizon, m: int) -> int:
    """Number of level-m lattice steps in [0, horizon].

    ``horizon`` must be a positive multiple of 4^-m; anything else is
    rejected rather than rounded.
    """
    frac = Fraction(horizon) * (1 << (2 * m))
    if frac <= 0 or frac.denominator != 1:
        raise NonDyadicError(
            f"horizon {horizon} is not a positive multiple of 4^-{m}")
    return int(frac)


class WalkPath:
    """Piecewise-linear path  t -> 2^-m * S(t * 4^m)  on [0, horizon].

    Values at lattice times k * 4^-m are exact scalings of the integer walk;
    between lattice times the path is affine.
    """

    def __init__(self, level: WalkLevel, horizon):
        self.level = level
        self.m = level.m
        self.n_steps = dyadic_steps(horizon, level.m)
        if level.partial_sums.size < self.n_steps + 1:
            raise InsufficientDataError(
                f"level {level.m} walk has {level.n_steps} steps, "
                f"horizon needs {self.n_steps}")
        self.horizon = float(horizon)
        self.values = level.partial_sums[: self.n_steps + 1]
        self.scale = math.ldexp(1.0, -level.m)

    def lattice_times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * math.ldexp(1.0, -2 * self.m)

    def lattice_values(self) -> np.ndarray:
        return self.scale * self.values.astype(np.float64)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=np.float64)
        if np.any(t_arr < 0.0) or np.any(t_arr > self.horizon):
            raise ValueError(f"time outside [0, {self.horizon}]")
        u = t_arr * math.ldexp(1.0, 2 * self.m)
        idx = np.minimum(np.floor(u).astype(np.int64), self.n_steps)
        frac = u - idx
        base = self.values[idx].astype(np.float64)
        step = self.values[np.minimum(idx + 1, self.n_steps)] - base
        out = self.scale * (base + frac * step)
        return float(out) if np.ndim(t) == 0 else out


def shrink(walk: WalkLevel, horizon) -> WalkPath:
    """Squeeze a walk level into real time/space: step 4^-m in t, 2^-m in x."""
    return WalkPath(walk, horizon)


@dataclass
class RefinementReport:
    """Outcome of an integer-exact refinement comparison between levels."""

    ok: bool
    checked: int
    max_deviation: int
    first_mismatch: int | None
    time_lag_max: float
    time_lag_mean: float


def refinement_check(path_m: WalkPath, path_m1: WalkPath,
                     k_max: int) -> RefinementReport:
    """Verify that the finer path retraces the coarser one (exactly).

    Compares, in integer arithmetic, the finer walk at its stopping times
    against twice the coarser walk, for k = 0..k_max. Also reports the time
    lag between the two grids (never asserted to vanish).
    """
    if path_m1.m != path_m.m + 1:
        raise ValueError("paths must be consecutive levels of one family")
    stops = path_m1.level.stopping_times
    if stops.size < k_max:
        raise InsufficientDataError(
            f"finer level has {stops.size} stopping times, need {k_max}")
    stops = stops[:k_max]
    if path_m1.level.partial_sums.size <= (stops[-1] if k_max else 0):
        raise InsufficientDataError("finer walk shorter than its stops")
    if path_m.level.partial_sums.size < k_max + 1:
        raise InsufficientDataError("coarser walk too short")
    fine_vals = path_m1.level.partial_sums[np.concatenate(
        [[0], stops])].astype(np.int64)
    coarse_vals = path_m.level.partial_sums[: k_max + 1].astype(np.int64)
    dev = fine_vals - 2 * coarse_vals
    bad = np.nonzero(dev)[0]
    lags = (np.concatenate([[0], stops]) * math.ldexp(1.0, -2 * path_m1.m)
            - np.arange(k_max + 1) * math.ldexp(1.0, -2 * path_m.m))
    return RefinementReport(
        ok=bad.size == 0,
        checked=k_max + 1,
        max_deviation=int(np.max(np.abs(dev))) if dev.size else 0,
        first_mismatch=int(bad[0]) if bad.size else None,
        time_lag_max=float(np.max(np.abs(lags))),
        time_lag_mean=float(np.mean(lags)),
    )


def sup_distance(f, g, horizon, mesh: int = 1024) -> float:
    """Sup of |f - g| over [0, horizon].

    Evaluates on a ``mesh``-point grid refined with both paths' lattice
    times; for piecewise-linear paths the sup is attained at a breakpoint,
    so this is exact for walk paths. Dyadic walk-path pairs take a fused
    integer fast path that never materializes the fine grid.
    """
    if mesh < 2:
        raise ValueError("mesh must be at least 2")
    grid = np.linspace(0.0, float(horizon), mesh)
    if isinstance(f, WalkPath) and isinstance(g, WalkPath):
        fine, coarse = (f, g) if f.m >= g.m else (g, f)
        try:
            n_fine = dyadic_steps(horizon, fine.m)
            n_coarse = dyadic_steps(horizon, coarse.m)
        except NonDyadicError:
            n_fine = None
        if n_fine is not None and fine.n_steps >= n_fine \
                and coarse.n_steps >= n_coarse:
            best = kernels.sup_diff_nested(
                fine.values[: n_fine + 1], coarse.values[: n_coarse + 1],
                2 * (fine.m - coarse.m), fine.scale, coarse.scale)
            mesh_best = float(np.max(np.abs(f(grid) - g(grid))))
            return max(best, mesh_best)
    ts = [grid]
    for path in (f, g):
        times = getattr(path, "lattice_times", None)
        if times is not None:
            ts.append(times())
    ts = np.unique(np.concatenate(ts))
    ts = ts[(ts >= 0.0) & (ts <= float(horizon))]
    return float(np.max(np.abs(np.asarray(f(ts)) - np.asarray(g(ts)))))


class NestedWalks:
    """Lazily built nested family of twist-and-shrink walks for one seed.

    Levels are constructed bottom-up on demand: asking level m for n steps
    extends the raw coin row m until the bridge covering step n completes,
    recursively ensures level m-1 has one increment per bridge, then twists.
    Extending never changes values already produced.
    """

    def __init__(self, seed, row_cap: int = DEFAULT_ROW_CAP):
        self.coins = seed if isinstance(seed, CoinMatrix) \
            else CoinMatrix(seed, row_cap)
        self._levels: list[WalkLevel | None] = []

    def level(self, m: int, min_steps: int) -> WalkLevel:
        if m < 0:
            raise ValueError("level must be nonnegative")
        self._ensure(m, min_steps)
        return self._levels[m]

    def level_with_stops(self, m: int, min_stops: int) -> WalkLevel:
        """Like ``level`` but guarantees at least ``min_stops`` complete
        bridges (a bridge takes 4 steps on average, so this usually costs
        about ``4 * min_stops`` steps)."""
        need = 4 * min_stops + 64
        while True:
            lvl = self.level(m, need)
            if lvl.stopping_times.size >= min_stops:
                return lvl
            need = 2 * need

    def path(self, m: int, horizon) -> WalkPath:
        n = dyadic_steps(horizon, m)
        return shrink(self.level(m, n), horizon)

    def _ensure(self, m: int, n_steps: int) -> None:
        while len(self._levels) <= m:
            self._levels.append(None)
        cur = self._levels[m]
        if cur is not None and cur.n_steps >= n_steps:
            return
        if m == 0:
            self._levels[0] = WalkLevel.from_increments(
                0, self.coins.row(0, n_steps))
            return
        cap = self.coins.row_cap
        length = min(n_steps + 256, cap)
        while True:
            raw = self.coins.row(m, length)
            ends = _bridge_ends(raw)
            pos = int(np.searchsorted(ends, n_steps, side="left"))
            if pos < ends.size:
                break
            if length >= cap:
                raise CapExceededError(
                    f"row {m} hit the {cap}-coin cap before covering "
                    f"{n_steps} steps")
            length = min(2 * length, cap)
        n_bridges = pos + 1
        self._ensure(m - 1, n_bridges)
        prev = self._levels[m - 1]
        self._levels[m] = twist(prev, raw[: ends[pos]], bridges=n_bridges)
