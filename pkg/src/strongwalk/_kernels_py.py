"""Pure numpy implementations of the hot kernels.

Same contracts as the compiled versions in ``_fastkern``; see ``kernels``
for the dispatch.
"""

import numpy as np


def twist_scan(raw, desired):
    """Flip bridges of a raw +-1 walk to follow the coarser walk.

    ``raw`` are the +-1 increments of one walk row, ``desired`` the +-1
    increments the bridges must reproduce (doubled): bridge k must sum to
    ``2*desired[k]``. A bridge ends each time the running sum moves a net
    distance 2 from the previous bridge end.

    Returns ``(twisted, stops)`` covering the first
    ``K = min(#complete bridges, len(desired))`` bridges: ``twisted`` are
    the (possibly negated) increments up to ``stops[-1]`` and ``stops[k-1]``
    is the end time of bridge k. Both empty when K == 0.
    """
    raw = np.ascontiguousarray(raw, dtype=np.int8)
    desired = np.ascontiguousarray(desired, dtype=np.int8)
    # The running sum is even exactly at even times, so bridge ends are the
    # even times where the sum differs from its previous even-time value.
    pair_sums = raw[: 2 * (raw.size // 2)].reshape(-1, 2).sum(
        axis=1, dtype=np.int32)
    sums_even = np.cumsum(pair_sums, dtype=np.int32)
    jumps = np.diff(sums_even, prepend=np.int32(0))   # in {-2, 0, +2}
    moved = np.nonzero(jumps)[0]
    k = min(moved.size, desired.size)
    if k == 0:
        return np.empty(0, dtype=np.int8), np.empty(0, dtype=np.int64)
    moved = moved[:k]
    stops = 2 * (moved + 1)
    signs = (jumps[moved] // 2).astype(np.int8)
    mult = np.where(signs == desired[:k], np.int8(1), np.int8(-1))
    lengths = np.diff(stops, prepend=0)
    twisted = raw[: stops[-1]] * np.repeat(mult, lengths)
    return twisted, stops.astype(np.int64)


def lattice_step_back(next_values, q_up, inv_gross):
    """One backward-induction step on a recombining binomial lattice.

    ``next_values[i]`` is the value at the node with i up-moves; the parent
    row is the discounted one-step expectation.
    """
    next_values = np.asarray(next_values, dtype=np.float64)
    return inv_gross * (q_up * next_values[1:]
                        + (1.0 - q_up) * next_values[:-1])


def sup_diff_nested(fine, coarse, gap2, scale_fine, scale_coarse):
    """Max deviation between two piecewise-linear dyadic-lattice paths.

    ``fine``/``coarse`` are integer lattice values; one coarse step spans
    ``2**gap2`` fine steps. Returns
    ``max_j |scale_fine*fine[j] - scale_coarse*interp(coarse)(j / 2**gap2)|``
    over j = 0 .. len(fine)-1; since both paths are piecewise linear with
    breakpoints on the fine lattice, this is the true sup over the
    common time interval.
    """
    fine = np.asarray(fine)
    coarse = np.asarray(coarse)
    n_fine = fine.size - 1
    span = 1 << gap2
    needed = ((n_fine - 1) >> gap2) + 2 if n_fine >= 1 else 1
    if coarse.size < needed:
        raise ValueError("coarse path too short for the fine path length")
    end_idx = n_fine >> gap2
    end_rem = n_fine & (span - 1)
    end_val = float(coarse[end_idx])
    if end_rem:
        end_val += (end_rem / span) * (float(coarse[end_idx + 1]) - end_val)
    best = abs(scale_fine * float(fine[n_fine]) - scale_coarse * end_val)
    # whole coarse blocks: reshape instead of per-point index arithmetic
    n_blocks = n_fine >> gap2
    frac = np.arange(span, dtype=np.float64) / span
    rows_per_chunk = max(1, (1 << 22) >> gap2)
    for lo in range(0, n_blocks, rows_per_chunk):
        hi = min(lo + rows_per_chunk, n_blocks)
        blocks = fine[lo * span: hi * span].reshape(hi - lo, span) \
            .astype(np.float64)
        base = coarse[lo:hi].astype(np.float64)[:, None]
        step = np.diff(coarse[lo: hi + 1]).astype(np.float64)[:, None]
        dev = np.abs(scale_fine * blocks
                     - scale_coarse * (base + frac * step))
        best = max(best, float(dev.max()))
    # trailing partial block, if the fine path ends mid-span
    tail_lo = n_blocks * span
    if tail_lo < n_fine:
        j = np.arange(tail_lo, n_fine, dtype=np.int64)
        part = (j & (span - 1)).astype(np.float64) / span
        base = float(coarse[n_blocks])
        step = float(coarse[n_blocks + 1]) - base
        dev = np.abs(scale_fine * fine[tail_lo:n_fine].astype(np.float64)
                     - scale_coarse * (base + part * step))
        best = max(best, float(dev.max()))
    return best
