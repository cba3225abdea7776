"""Trip generation: origin-destination law, route law, and trip datasets.

A trip is a simple directed route (a contiguous segment path) plus, when
synthesized, one observed travel time per traversed segment.  Datasets keep
routes in flattened arrays so counting kernels can scan them quickly, and
expose the traversal counters the estimators are built from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .covariance import CovarianceModel
from .network import RoadNetwork

__all__ = [
    "PriorSpec",
    "Route",
    "ODLaw",
    "sample_route",
    "sample_routes",
    "synthesize_times",
    "TripDataset",
    "NeighborhoodKind",
    "NeighborhoodSpec",
    "Neighborhood",
    "resolve_neighborhood",
]

_RESAMPLE_CAP = 10 ** 6


@dataclass(frozen=True)
class PriorSpec:
    """Independent segment-time prior: theta_s ~ Normal(mu, tau2)."""

    mu: float
    tau2: float

    def __post_init__(self) -> None:
        if self.tau2 <= 0:
            raise ValueError("prior variance tau2 must be positive")


@dataclass(frozen=True)
class Route:
    """A simple directed path through the network."""

    segment_ids: tuple[int, ...]
    origin: tuple[int, int]
    destination: tuple[int, int]

    @classmethod
    def from_segments(cls, network: RoadNetwork, segment_ids: Sequence[int]) -> "Route":
        ids = tuple(int(i) for i in segment_ids)
        if not ids:
            raise ValueError("a route needs at least one segment")
        segs = [network.segment(i) for i in ids]
        for a, b in zip(segs, segs[1:]):
            if a.head != b.tail:
                raise ValueError(f"route breaks at {a.head} -> {b.tail}")
        if len(set(ids)) != len(ids):
            raise ValueError("route repeats a segment")
        return cls(ids, segs[0].tail, segs[-1].head)

    @classmethod
    def from_vertices(cls, network: RoadNetwork, vertices: Sequence[tuple[int, int]]) -> "Route":
        return cls.from_segments(network, network.path_segments(vertices))

    def __len__(self) -> int:
        return len(self.segment_ids)


class ODLaw:
    """Origin-destination sampling law on a p-grid.

    All four endpoint coordinates are iid beta-binomial(p, alpha, alpha)
    draws, which concentrates trips near the grid edges for alpha < 1 and is
    uniform at alpha = 1.  Draws with origin equal to destination are
    rejected and resampled.
    """

    def __init__(self, p: int, alpha: float):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        if p < 1:
            raise ValueError("grid size p must be at least 1")
        self.p = int(p)
        self.alpha = float(alpha)
        self._dist = stats.betabinom(self.p, self.alpha, self.alpha)

    def pmf(self, k) -> np.ndarray | float:
        return self._dist.pmf(k)

    def pmf_vector(self) -> np.ndarray:
        return self._dist.pmf(np.arange(self.p + 1))

    def sample_od(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, 4) array of [oi, oj, di, dj] rows with origin != destination."""
        out = np.empty((size, 4), dtype=np.int64)
        need = np.arange(size)
        drawn = 0
        while need.size:
            drawn += need.size
            if drawn > _RESAMPLE_CAP:
                raise RuntimeError("origin-destination rejection sampling exceeded cap")
            block = self._dist.rvs(size=(need.size, 4), random_state=rng)
            out[need] = block
            same = (out[need, 0] == out[need, 2]) & (out[need, 1] == out[need, 3])
            need = need[same]
        return out


def _route_between(network: RoadNetwork, origin, destination, vertical_first: bool) -> Route:
    oi, oj = origin
    di, dj = destination
    verts = [(oi, oj)]
    legs = ((di, oj), (di, dj)) if vertical_first else ((oi, dj), (di, dj))
    for ti, tj in legs:
        ci, cj = verts[-1]
        while (ci, cj) != (ti, tj):
            if ci != ti:
                ci += 1 if ti > ci else -1
            else:
                cj += 1 if tj > cj else -1
            verts.append((ci, cj))
    return Route.from_vertices(network, verts)


def sample_route(law: ODLaw, network: RoadNetwork, rng: np.random.Generator) -> Route:
    """Draw one trip route: endpoints from the OD law, then a shortest path.

    Endpoints sharing a row or column give the unique straight route.
    Otherwise the two single-turn L-shaped shortest routes are equally
    likely, chosen by an explicit coin flip.
    """
    return sample_routes(law, network, rng, 1)[0]


def sample_routes(law: ODLaw, network: RoadNetwork, rng: np.random.Generator,
                  n: int) -> list[Route]:
    od = law.sample_od(rng, n)
    coins = rng.integers(0, 2, size=n)
    routes = []
    for row, coin in zip(od, coins):
        origin = (int(row[0]), int(row[1]))
        dest = (int(row[2]), int(row[3]))
        aligned = origin[0] == dest[0] or origin[1] == dest[1]
        vertical_first = bool(coin) if not aligned else True
        routes.append(_route_between(network, origin, dest, vertical_first))
    return routes


class TripDataset:
    """Historical trips over one network, with counters for the estimators."""

    def __init__(self, network: RoadNetwork, routes: Sequence[Route],
                 times: Sequence[np.ndarray] | None = None,
                 theta: np.ndarray | None = None):
        self.network = network
        self.routes = tuple(routes)
        if times is not None:
            times = [np.asarray(t, dtype=np.float64) for t in times]
            if len(times) != len(self.routes):
                raise ValueError("need one time vector per trip")
            for t, r in zip(times, self.routes):
                if t.shape != (len(r),):
                    raise ValueError("time vector length must match route length")
        self.times = times
        self.theta = None if theta is None else np.asarray(theta, dtype=np.float64)

    @property
    def n_trips(self) -> int:
        return len(self.routes)

    @cached_property
    def _flat_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        lens = np.fromiter((len(r) for r in self.routes), dtype=np.int64,
                           count=len(self.routes))
        offsets = np.zeros(len(self.routes) + 1, dtype=np.int64)
        np.cumsum(lens, out=offsets[1:])
        flat = np.empty(int(offsets[-1]), dtype=np.int64)
        for i, r in enumerate(self.routes):
            flat[offsets[i]:offsets[i + 1]] = r.segment_ids
        return flat, offsets

    @property
    def flat(self) -> np.ndarray:
        return self._flat_offsets[0]

    @property
    def offsets(self) -> np.ndarray:
        return self._flat_offsets[1]

    @cached_property
    def n_s(self) -> np.ndarray:
        """Traversal count N_s for every segment."""
        flat, offsets = self._flat_offsets
        return _kernels.traversal_counts(flat, offsets, self.network.n_segments)

    @cached_property
    def od_array(self) -> np.ndarray:
        out = np.empty((self.n_trips, 4), dtype=np.int64)
        for i, r in enumerate(self.routes):
            out[i] = (*r.origin, *r.destination)
        return out

    @cached_property
    def _od_index(self) -> dict[tuple[int, int, int, int], np.ndarray]:
        idx: dict[tuple[int, int, int, int], list[int]] = {}
        for i, r in enumerate(self.routes):
            idx.setdefault((*r.origin, *r.destination), []).append(i)
        return {k: np.asarray(v, dtype=np.int64) for k, v in idx.items()}

    @cached_property
    def _route_index(self) -> dict[tuple[int, ...], np.ndarray]:
        idx: dict[tuple[int, ...], list[int]] = {}
        for i, r in enumerate(self.routes):
            idx.setdefault(r.segment_ids, []).append(i)
        return {k: np.asarray(v, dtype=np.int64) for k, v in idx.items()}

    @cached_property
    def _containing(self) -> dict[int, np.ndarray]:
        idx: dict[int, list[int]] = {}
        for i, r in enumerate(self.routes):
            for s in r.segment_ids:
                idx.setdefault(s, []).append(i)
        return {k: np.asarray(v, dtype=np.int64) for k, v in idx.items()}

    def trips_containing(self, seg_id: int) -> np.ndarray:
        """Sorted ids of trips whose route traverses the segment."""
        return self._containing.get(int(seg_id), np.empty(0, dtype=np.int64))

    def trips_containing_all(self, seg_ids: Sequence[int]) -> np.ndarray:
        """Sorted ids of trips whose route traverses every listed segment."""
        ids = list(seg_ids)
        if not ids:
            return np.arange(self.n_trips, dtype=np.int64)
        members = self.trips_containing(ids[0])
        for s in ids[1:]:
            if members.size == 0:
                break
            members = np.intersect1d(members, self.trips_containing(s),
                                     assume_unique=True)
        return members

    def n_subset(self, seg_ids: Sequence[int]) -> int:
        """Joint traversal count: trips containing every listed segment."""
        return int(self.trips_containing_all(seg_ids).size)

    def pair_counts(self, y: Sequence[int], members: np.ndarray | None = None) -> np.ndarray:
        """Matrix of joint traversal counts over the segments of one route.

        With `members`, only the listed trips are counted.
        """
        flat, offsets = self._flat_offsets
        if members is not None:
            members = np.asarray(members, dtype=np.int64)
            starts = offsets[members]
            lens = offsets[members + 1] - starts
            sub_offsets = np.zeros(members.size + 1, dtype=np.int64)
            np.cumsum(lens, out=sub_offsets[1:])
            sub_flat = np.empty(int(sub_offsets[-1]), dtype=np.int64)
            for i, (st, ln) in enumerate(zip(starts, lens)):
                sub_flat[sub_offsets[i]:sub_offsets[i + 1]] = flat[st:st + ln]
            flat, offsets = sub_flat, sub_offsets
        return _kernels.route_pair_counts(flat, offsets, np.asarray(y, dtype=np.int64),
                                          self.network.n_segments)

    def subset_counts(self, members: np.ndarray) -> np.ndarray:
        """Per-segment traversal counts restricted to the listed trips."""
        flat, offsets = self._flat_offsets
        return _kernels.subset_traversal_counts(flat, offsets, members,
                                                self.network.n_segments)

    def quadratic_sums(self, cov: CovarianceModel) -> np.ndarray:
        """Per-trip sums of covariance entries over the route's segment pairs."""
        flat, offsets = self._flat_offsets
        return _kernels.trip_quadratic_sums(flat, offsets, cov.sigma)

    def segment_time_sums(self, center: float = 0.0) -> np.ndarray:
        """Per-segment sums of observed (optionally centered) travel times."""
        if self.times is None:
            raise ValueError("dataset has no observed times")
        flat, offsets = self._flat_offsets
        values = np.concatenate(self.times) if self.times else np.empty(0)
        out = np.zeros(self.network.n_segments)
        np.add.at(out, flat, values - center)
        return out

    # -- serialization: one JSON object per line, {"route": [...], "times": [...]}

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for i, r in enumerate(self.routes):
                rec: dict = {"route": list(r.segment_ids)}
                if self.times is not None:
                    rec["times"] = [float(v) for v in self.times[i]]
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def from_jsonl(cls, network: RoadNetwork, path) -> "TripDataset":
        routes, times = [], []
        any_times = False
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                routes.append(Route.from_segments(network, rec["route"]))
                if "times" in rec:
                    any_times = True
                    times.append(np.asarray(rec["times"], dtype=np.float64))
                else:
                    times.append(None)
        if any_times and any(t is None for t in times):
            raise ValueError("either every trip or no trip may carry times")
        return cls(network, routes, times if any_times else None)

    def __repr__(self) -> str:
        timed = "timed" if self.times is not None else "routes-only"
        return f"TripDataset(p={self.network.p}, trips={self.n_trips}, {timed})"


def synthesize_times(network: RoadNetwork, routes: Sequence[Route],
                     cov: CovarianceModel, prior: PriorSpec,
                     rng: np.random.Generator) -> TripDataset:
    """Generate observed times: one latent theta draw, then per-trip noise.

    theta_s ~ Normal(mu, tau2) independently per segment, drawn once for the
    whole dataset; each trip observes theta over its route plus a correlated
    Gaussian vector with covariance equal to the route's sigma block.
    """
    n = network.n_segments
    theta = prior.mu + np.sqrt(prior.tau2) * rng.standard_normal(n)
    factors: dict[tuple[int, ...], np.ndarray] = {}
    times = []
    for r in routes:
        ids = np.asarray(r.segment_ids, dtype=np.intp)
        f = factors.get(r.segment_ids)
        if f is None:
            block = cov.sigma[np.ix_(ids, ids)]
            evals, evecs = np.linalg.eigh(block)
            f = evecs * np.sqrt(np.clip(evals, 0.0, None))
            factors[r.segment_ids] = f
        eps = f @ rng.standard_normal(len(ids))
        times.append(theta[ids] + eps)
    return TripDataset(network, routes, times, theta=theta)


# ---------------------------------------------------------------------------
# neighborhoods


class NeighborhoodKind:
    EXACT_ROUTE = "exact_route"
    OD_EXACT = "od_exact"
    OD_BALL = "od_ball"
    OD_BALL_GROWING = "od_ball_growing"

    ALL = (EXACT_ROUTE, OD_EXACT, OD_BALL, OD_BALL_GROWING)


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Which historical trips count as similar to a predicting route.

    * exact_route: identical segment sequence.
    * od_exact: identical origin and destination.
    * od_ball: pooled endpoint slack, L1(o, o') + L1(d, d') <= 2 * radius.
    * od_ball_growing: per-endpoint slack, L1(o, o') <= c and L1(d, d') <= c
      with c = ceil(fraction * p); the radius scales with the grid.
    """

    kind: str
    radius: int = 0
    fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in NeighborhoodKind.ALL:
            raise ValueError(f"unknown neighborhood kind {self.kind!r}")
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        if not (0 <= self.fraction <= 1):
            raise ValueError("fraction must lie in [0, 1]")

    @classmethod
    def exact_route(cls) -> "NeighborhoodSpec":
        return cls(NeighborhoodKind.EXACT_ROUTE)

    @classmethod
    def od_exact(cls) -> "NeighborhoodSpec":
        return cls(NeighborhoodKind.OD_EXACT)

    @classmethod
    def od_ball(cls, radius: int) -> "NeighborhoodSpec":
        return cls(NeighborhoodKind.OD_BALL, radius=radius)

    @classmethod
    def od_ball_growing(cls, fraction: float = 0.1) -> "NeighborhoodSpec":
        return cls(NeighborhoodKind.OD_BALL_GROWING, fraction=fraction)


@dataclass(frozen=True)
class Neighborhood:
    """Resolved neighborhood: the member trip ids for one predicting route."""

    spec: NeighborhoodSpec
    route: Route
    members: np.ndarray

    @property
    def size(self) -> int:
        return int(self.members.size)


def resolve_neighborhood(ds: TripDataset, y: Route, spec: NeighborhoodSpec) -> Neighborhood:
    """Find the historical trips a route-level estimator may pool for y.

    An empty neighborhood is a valid outcome, not an error; the estimator
    then falls back to the prior.
    """
    if spec.kind == NeighborhoodKind.EXACT_ROUTE:
        members = ds._route_index.get(y.segment_ids, np.empty(0, dtype=np.int64))
        return Neighborhood(spec, y, members)
    key = np.asarray((*y.origin, *y.destination), dtype=np.int64)
    if spec.kind == NeighborhoodKind.OD_EXACT:
        members = ds._od_index.get(tuple(int(v) for v in key), np.empty(0, dtype=np.int64))
        return Neighborhood(spec, y, members)
    od = ds.od_array
    d_o = np.abs(od[:, 0] - key[0]) + np.abs(od[:, 1] - key[1])
    d_d = np.abs(od[:, 2] - key[2]) + np.abs(od[:, 3] - key[3])
    if spec.kind == NeighborhoodKind.OD_BALL:
        mask = d_o + d_d <= 2 * spec.radius
    else:
        c = int(np.ceil(spec.fraction * ds.network.p))
        mask = (d_o <= c) & (d_d <= c)
    return Neighborhood(spec, y, np.flatnonzero(mask).astype(np.int64))
