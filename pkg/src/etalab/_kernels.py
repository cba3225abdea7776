"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

Trip collections are passed around in flattened form: `flat` holds the
segment ids of every trip back to back and `offsets` (length n_trips + 1)
marks the slice boundaries, so trip n occupies flat[offsets[n]:offsets[n+1]].

Set ETALAB_NO_NUMBA=1 to force the numpy fallback; `BACKEND` reports which
implementation is active.  Both backends accumulate in a fixed order so
results are bit-identical regardless of thread count.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "HAS_NUMBA",
    "traversal_counts",
    "subset_traversal_counts",
    "route_pair_counts",
    "accumulate_information",
    "trip_quadratic_sums",
]

_disabled = os.environ.get("ETALAB_NO_NUMBA", "").strip() not in ("", "0")
if _disabled:
    HAS_NUMBA = False
else:
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


def _as_flat(flat, offsets):
    return (np.ascontiguousarray(flat, dtype=np.int64),
            np.ascontiguousarray(offsets, dtype=np.int64))


# ---------------------------------------------------------------------------
# pure numpy implementations


def _traversal_counts_np(flat, offsets, n_segments):
    return np.bincount(flat, minlength=n_segments).astype(np.int64)


def _gather_indices(offsets, members):
    """Flat-array indices covering the trips listed in members, in order."""
    starts = offsets[members]
    lens = offsets[members + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    shift = np.concatenate(([0], np.cumsum(lens)[:-1]))
    return np.repeat(starts - shift, lens) + np.arange(total, dtype=np.int64)


def _subset_traversal_counts_np(flat, offsets, members, n_segments):
    idx = _gather_indices(offsets, members)
    return np.bincount(flat[idx], minlength=n_segments).astype(np.int64)


def _route_pair_counts_np(flat, offsets, y, n_segments):
    n_trips = offsets.shape[0] - 1
    k = y.shape[0]
    lookup = np.full(n_segments, -1, dtype=np.int64)
    lookup[y] = np.arange(k)
    pos = lookup[flat]
    hit = pos >= 0
    trip_of = np.repeat(np.arange(n_trips, dtype=np.int64), np.diff(offsets))
    member = np.zeros((n_trips, k), dtype=np.float64)
    member[trip_of[hit], pos[hit]] = 1.0
    return (member.T @ member).astype(np.int64)


def _accumulate_information_np(flat, offsets, sigma):
    n = sigma.shape[0]
    w = np.zeros((n, n))
    lens = np.diff(offsets)
    order = np.arange(lens.shape[0])
    for length in np.unique(lens):
        trips = order[lens == length]
        ids = np.empty((trips.shape[0], length), dtype=np.int64)
        for row, t in enumerate(trips):
            ids[row] = flat[offsets[t]:offsets[t] + length]
        blocks = sigma[ids[:, :, None], ids[:, None, :]]
        invs = np.linalg.inv(blocks)
        for row in range(trips.shape[0]):
            np.add.at(w, (ids[row][:, None], ids[row][None, :]), invs[row])
    return w


def _trip_quadratic_sums_np(flat, offsets, sigma):
    n_trips = offsets.shape[0] - 1
    out = np.zeros(n_trips)
    lens = np.diff(offsets)
    order = np.arange(n_trips)
    for length in np.unique(lens):
        trips = order[lens == length]
        ids = np.empty((trips.shape[0], length), dtype=np.int64)
        for row, t in enumerate(trips):
            ids[row] = flat[offsets[t]:offsets[t] + length]
        out[trips] = sigma[ids[:, :, None], ids[:, None, :]].sum(axis=(1, 2))
    return out


# ---------------------------------------------------------------------------
# numba implementations

if HAS_NUMBA:

    @njit(cache=True)
    def _traversal_counts_nb(flat, offsets, n_segments):
        out = np.zeros(n_segments, dtype=np.int64)
        for i in range(flat.shape[0]):
            out[flat[i]] += 1
        return out

    @njit(cache=True)
    def _subset_traversal_counts_nb(flat, offsets, members, n_segments):
        out = np.zeros(n_segments, dtype=np.int64)
        for m in range(members.shape[0]):
            t = members[m]
            for i in range(offsets[t], offsets[t + 1]):
                out[flat[i]] += 1
        return out

    @njit(cache=True)
    def _route_pair_counts_nb(flat, offsets, y, n_segments):
        k = y.shape[0]
        lookup = np.full(n_segments, -1, dtype=np.int64)
        for i in range(k):
            lookup[y[i]] = i
        pair = np.zeros((k, k), dtype=np.int64)
        local = np.empty(k, dtype=np.int64)
        for t in range(offsets.shape[0] - 1):
            m = 0
            for i in range(offsets[t], offsets[t + 1]):
                p = lookup[flat[i]]
                if p >= 0:
                    local[m] = p
                    m += 1
            for a in range(m):
                for b in range(m):
                    pair[local[a], local[b]] += 1
        return pair

    @njit(cache=True)
    def _accumulate_information_nb(flat, offsets, sigma):
        n = sigma.shape[0]
        w = np.zeros((n, n))
        for t in range(offsets.shape[0] - 1):
            lo, hi = offsets[t], offsets[t + 1]
            k = hi - lo
            block = np.empty((k, k))
            for a in range(k):
                for b in range(k):
                    block[a, b] = sigma[flat[lo + a], flat[lo + b]]
            inv = np.linalg.inv(block)
            for a in range(k):
                for b in range(k):
                    w[flat[lo + a], flat[lo + b]] += inv[a, b]
        return w

    @njit(cache=True)
    def _trip_quadratic_sums_nb(flat, offsets, sigma):
        n_trips = offsets.shape[0] - 1
        out = np.zeros(n_trips)
        for t in range(n_trips):
            acc = 0.0
            for a in range(offsets[t], offsets[t + 1]):
                for b in range(offsets[t], offsets[t + 1]):
                    acc += sigma[flat[a], flat[b]]
            out[t] = acc
        return out


# ---------------------------------------------------------------------------
# public dispatchers


def traversal_counts(flat, offsets, n_segments: int) -> np.ndarray:
    """N_s for every segment: how many trips' routes traverse it."""
    flat, offsets = _as_flat(flat, offsets)
    if HAS_NUMBA:
        return _traversal_counts_nb(flat, offsets, n_segments)
    return _traversal_counts_np(flat, offsets, n_segments)


def subset_traversal_counts(flat, offsets, members, n_segments: int) -> np.ndarray:
    """Traversal counts restricted to the trips listed in members."""
    flat, offsets = _as_flat(flat, offsets)
    members = np.ascontiguousarray(members, dtype=np.int64)
    if members.shape[0] == 0:
        return np.zeros(n_segments, dtype=np.int64)
    if HAS_NUMBA:
        return _subset_traversal_counts_nb(flat, offsets, members, n_segments)
    return _subset_traversal_counts_np(flat, offsets, members, n_segments)


def route_pair_counts(flat, offsets, y, n_segments: int) -> np.ndarray:
    """Joint traversal counts N_{s and t} for all segment pairs of a route y.

    Entry (i, j) counts trips whose route contains both y[i] and y[j]; the
    diagonal reproduces the plain traversal counts of y's segments.
    """
    flat, offsets = _as_flat(flat, offsets)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if y.shape[0] == 0:
        return np.zeros((0, 0), dtype=np.int64)
    if HAS_NUMBA:
        return _route_pair_counts_nb(flat, offsets, y, n_segments)
    return _route_pair_counts_np(flat, offsets, y, n_segments)


def accumulate_information(flat, offsets, sigma) -> np.ndarray:
    """Sum of scattered per-trip block precisions, the estimator information matrix.

    For each trip with route ids r, adds inv(sigma[r, r]) into the (r, r)
    positions of a dense S x S accumulator.
    """
    flat, offsets = _as_flat(flat, offsets)
    sigma = np.ascontiguousarray(sigma, dtype=np.float64)
    if HAS_NUMBA:
        return _accumulate_information_nb(flat, offsets, sigma)
    return _accumulate_information_np(flat, offsets, sigma)


def trip_quadratic_sums(flat, offsets, sigma) -> np.ndarray:
    """Per-trip total covariance mass: sum of sigma over the route's id pairs."""
    flat, offsets = _as_flat(flat, offsets)
    sigma = np.ascontiguousarray(sigma, dtype=np.float64)
    if HAS_NUMBA:
        return _trip_quadratic_sums_nb(flat, offsets, sigma)
    return _trip_quadratic_sums_np(flat, offsets, sigma)
