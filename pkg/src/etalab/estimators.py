"""Travel-time estimators: per-segment, grouped-segment, whole-route, Bayes.

Every estimator here is affine in the observed trip times.  Predictions are
returned with their full affine representation (one coefficient vector per
historical trip, plus an intercept), which is what the Monte Carlo risk
checker consumes; the point prediction is evaluated on top when the dataset
carries observed times.

Shrinkage weights phi map a support count n to [0, 1] and always satisfy
phi(0) = 0, so estimators with no support fall back to the prior mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from . import _kernels
from .covariance import CovarianceModel
from .trips import Neighborhood, PriorSpec, Route, TripDataset

__all__ = [
    "WeightRule",
    "Prediction",
    "predict_segment",
    "predict_gseg",
    "predict_route",
    "predict_bayes_optimal",
    "optimal_seg_weights",
    "optimal_gseg_weights",
    "optimal_route_weight",
    "validate_partition",
    "PosteriorModel",
]


@dataclass(frozen=True)
class WeightRule:
    """A named shrinkage rule phi(n).

    * ratio(lam): phi(n) = n / (n + lam).
    * threshold(c): phi(n) = 1 when n >= max(c, 1), else 0.
    * indep_optimal: the weight that would be exactly optimal if segment
      times were uncorrelated, n * k * tau2 / (n * k * tau2 + noise) with k
      the group size and noise the covariance mass of the group's block.
    """

    kind: str
    lam: float = 1.0
    c: int = 1

    RATIO = "ratio"
    THRESHOLD = "threshold"
    INDEP_OPTIMAL = "indep_optimal"

    @classmethod
    def ratio(cls, lam: float = 1.0) -> "WeightRule":
        if lam <= 0:
            raise ValueError("ratio rule needs lam > 0")
        return cls(cls.RATIO, lam=lam)

    @classmethod
    def threshold(cls, c: int = 1) -> "WeightRule":
        return cls(cls.THRESHOLD, c=c)

    @classmethod
    def indep_optimal(cls) -> "WeightRule":
        return cls(cls.INDEP_OPTIMAL)

    def value(self, n: int, group_size: int = 1, noise: float | None = None,
              tau2: float | None = None) -> float:
        if n <= 0:
            return 0.0
        if self.kind == self.RATIO:
            return n / (n + self.lam)
        if self.kind == self.THRESHOLD:
            return 1.0 if n >= max(self.c, 1) else 0.0
        if self.kind == self.INDEP_OPTIMAL:
            if noise is None or tau2 is None:
                raise ValueError("indep_optimal weights need a covariance and prior")
            signal = n * group_size * tau2
            return signal / (signal + noise)
        raise ValueError(f"unknown weight rule {self.kind!r}")


@dataclass
class Prediction:
    """An affine prediction: intercept + sum_n coefficients[n] . times[n]."""

    estimator: str
    route: tuple[int, ...]
    intercept: float
    coefficients: tuple[np.ndarray, ...]
    value: float | None = None
    detail: dict = field(default_factory=dict)

    def evaluate(self, times: Sequence[np.ndarray]) -> float:
        acc = self.intercept
        for c, t in zip(self.coefficients, times):
            if c.size:
                acc += float(c @ t)
        return acc

    def coefficient_sum(self) -> float:
        return float(sum(c.sum() for c in self.coefficients))

    def explain(self) -> dict:
        """JSON-ready breakdown: intercept plus per-trip nonzero coefficients."""
        trips = []
        for n, c in enumerate(self.coefficients):
            if np.any(c != 0.0):
                trips.append({"trip": n, "coefficients": [float(v) for v in c]})
        return {
            "estimator": self.estimator,
            "route": list(self.route),
            "intercept": self.intercept,
            "value": self.value,
            "trips": trips,
            **{k: v for k, v in self.detail.items() if _jsonable(v)},
        }


def _jsonable(v) -> bool:
    return isinstance(v, (int, float, str, bool, list, dict, type(None)))


def _zero_coefficients(ds: TripDataset) -> list[np.ndarray]:
    return [np.zeros(len(r)) for r in ds.routes]


def _finish(pred: Prediction, ds: TripDataset) -> Prediction:
    if ds.times is not None:
        pred.value = pred.evaluate(ds.times)
    return pred


def _route_ids(y) -> tuple[int, ...]:
    if isinstance(y, Route):
        return y.segment_ids
    return tuple(int(s) for s in y)


def validate_partition(y, partition: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    """Check that partition blocks are contiguous sub-paths tiling the route."""
    ids = _route_ids(y)
    blocks = [tuple(int(s) for s in b) for b in partition]
    for b in blocks:
        if not b:
            raise ValueError("empty partition block")
    pos = {s: i for i, s in enumerate(ids)}
    try:
        blocks_sorted = sorted(blocks, key=lambda b: pos[b[0]])
    except KeyError as e:
        raise ValueError(f"partition uses segment {e.args[0]} outside the route") from None
    tiled = tuple(s for b in blocks_sorted for s in b)
    if tiled != ids:
        raise ValueError("partition blocks must tile the route as contiguous sub-paths")
    return blocks


def _resolve_weights(ds: TripDataset, blocks: list[tuple[int, ...]],
                     counts: np.ndarray, rule, prior: PriorSpec,
                     cov: CovarianceModel | None) -> np.ndarray:
    if isinstance(rule, WeightRule):
        phis = np.empty(len(blocks))
        for i, b in enumerate(blocks):
            noise = None
            if rule.kind == WeightRule.INDEP_OPTIMAL:
                if cov is None:
                    raise ValueError("indep_optimal weights need a covariance")
                noise = cov.pair_sum(b, b)
            phis[i] = rule.value(int(counts[i]), group_size=len(b), noise=noise,
                                 tau2=prior.tau2)
        return phis
    phis = np.asarray(rule, dtype=np.float64)
    if phis.shape != (len(blocks),):
        raise ValueError("need one weight per partition block")
    # no-support blocks cannot use data regardless of the requested weight
    return np.where(counts > 0, phis, 0.0)


def predict_gseg(ds: TripDataset, y, partition: Sequence[Sequence[int]], rule,
                 prior: PriorSpec, cov: CovarianceModel | None = None) -> Prediction:
    """Grouped-segment estimator: one shrunk group-total per partition block.

    Each block S pools the trips whose route covers all of S, shrinking the
    average observed block total toward its prior mean |S| * mu.  `rule` is a
    WeightRule or an explicit per-block weight array.
    """
    ids = _route_ids(y)
    blocks = validate_partition(ids, partition)
    members = [ds.trips_containing_all(b) for b in blocks]
    counts = np.asarray([m.size for m in members], dtype=np.int64)
    phis = _resolve_weights(ds, blocks, counts, rule, prior, cov)
    coefs = _zero_coefficients(ds)
    value = float(len(ids)) * prior.mu
    intercept = value
    for b, mem, n_b, phi in zip(blocks, members, counts, phis):
        if n_b == 0 or phi == 0.0:
            continue
        w = phi / float(n_b)
        bset = set(b)
        for n in mem:
            r = ds.routes[n]
            for pos, s in enumerate(r.segment_ids):
                if s in bset:
                    coefs[n][pos] += w
        intercept -= w * n_b * len(b) * prior.mu
    pred = Prediction("gseg", ids, intercept, tuple(coefs),
                      detail={"weights": [float(v) for v in phis],
                              "counts": [int(v) for v in counts],
                              "blocks": [list(b) for b in blocks]})
    return _finish(pred, ds)


def predict_segment(ds: TripDataset, y, rule, prior: PriorSpec,
                    cov: CovarianceModel | None = None) -> Prediction:
    """Per-segment estimator: the singleton-partition grouped estimator."""
    ids = _route_ids(y)
    pred = predict_gseg(ds, ids, [(s,) for s in ids], rule, prior, cov=cov)
    pred.estimator = "segment"
    return pred


def predict_route(ds: TripDataset, y, nbhd: Neighborhood, rule,
                  prior: PriorSpec) -> Prediction:
    """Whole-route estimator: shrunk average of neighbor trips' raw totals.

    With weight phi on a neighborhood of M trips, predicts
    (1 - phi) * |y| * mu + phi * (average total time over the neighborhood).
    `rule` is a WeightRule on M or an explicit phi value.
    """
    ids = _route_ids(y)
    m = nbhd.size
    if isinstance(rule, WeightRule):
        phi = rule.value(m)
    else:
        phi = float(rule) if m > 0 else 0.0
    coefs = _zero_coefficients(ds)
    intercept = (1.0 - phi) * len(ids) * prior.mu
    if m > 0 and phi != 0.0:
        w = phi / float(m)
        for n in nbhd.members:
            coefs[n][:] = w
    pred = Prediction("route", ids, intercept, tuple(coefs),
                      detail={"weight": float(phi), "neighborhood_size": int(m),
                              "neighborhood": nbhd.spec.kind})
    return _finish(pred, ds)


# ---------------------------------------------------------------------------
# optimal shrinkage weights


def optimal_gseg_weights(ds: TripDataset, y, partition: Sequence[Sequence[int]],
                         cov: CovarianceModel, prior: PriorSpec) -> np.ndarray:
    """Risk-minimizing per-block weights for the grouped-segment estimator.

    Solves the normal equations coupling blocks through their joint support
    counts and covariance cross sums.  Blocks with no support are pinned to
    weight zero and dropped from the system.
    """
    ids = _route_ids(y)
    blocks = validate_partition(ids, partition)
    members = [ds.trips_containing_all(b) for b in blocks]
    counts = np.asarray([m.size for m in members], dtype=np.float64)
    k = len(blocks)
    phis = np.zeros(k)
    live = [i for i in range(k) if counts[i] > 0]
    if not live:
        return phis
    a = np.zeros((len(live), len(live)))
    b_vec = np.zeros(len(live))
    for ii, i in enumerate(live):
        size_i = float(len(blocks[i]))
        b_vec[ii] = size_i * prior.tau2
        a[ii, ii] += size_i * prior.tau2
        for jj, j in enumerate(live):
            joint = float(np.intersect1d(members[i], members[j],
                                         assume_unique=True).size)
            if joint == 0.0:
                continue
            a[ii, jj] += joint / (counts[i] * counts[j]) * cov.pair_sum(blocks[i], blocks[j])
    try:
        sol = scipy.linalg.solve(a, b_vec, assume_a="sym")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
        sol, *_ = np.linalg.lstsq(a, b_vec, rcond=None)
    phis[live] = sol
    return phis


def optimal_seg_weights(ds: TripDataset, y, cov: CovarianceModel,
                        prior: PriorSpec) -> np.ndarray:
    """Risk-minimizing per-segment weights (singleton partition)."""
    ids = _route_ids(y)
    return optimal_gseg_weights(ds, ids, [(s,) for s in ids], cov, prior)


def optimal_route_weight(ds: TripDataset, y, nbhd: Neighborhood,
                         cov: CovarianceModel, prior: PriorSpec,
                         q_all: np.ndarray | None = None) -> float:
    """Risk-minimizing shrinkage weight for the whole-route estimator.

    q_all optionally supplies precomputed per-trip covariance masses (from
    TripDataset.quadratic_sums) to avoid recomputation across many routes.
    """
    ids = _route_ids(y)
    m = nbhd.size
    if m == 0:
        return 0.0
    n_delta = ds.subset_counts(nbhd.members)
    if q_all is None:
        q_sum = float(ds.quadratic_sums(cov)[nbhd.members].sum())
    else:
        q_sum = float(q_all[nbhd.members].sum())
    lens = ds.offsets[nbhd.members + 1] - ds.offsets[nbhd.members]
    ybar = float(lens.mean())
    idx = np.asarray(ids, dtype=np.intp)
    num = float(n_delta[idx].sum()) * prior.tau2
    den = (float((n_delta.astype(np.float64) ** 2).sum()) * prior.tau2 / m
           + q_sum / m
           + m * (prior.mu * (ybar - len(ids))) ** 2)
    if den == 0.0:
        return 0.0
    return num / den


# ---------------------------------------------------------------------------
# Bayes-optimal affine estimator


class PosteriorModel:
    """Gaussian-model posterior machinery shared across predicting routes.

    Accumulates the information matrix W once (the expensive part), factors
    Q = W + I / tau2, and then serves per-route weight vectors, predictions,
    and exact risks with cheap triangular solves.
    """

    def __init__(self, ds: TripDataset, cov: CovarianceModel, prior: PriorSpec):
        self.ds = ds
        self.cov = cov
        self.prior = prior
        flat, offsets = ds.flat, ds.offsets
        n = ds.network.n_segments
        self.w = _kernels.accumulate_information(flat, offsets, cov.sigma)
        q = self.w + np.eye(n) / prior.tau2
        self._cho = scipy.linalg.cho_factor(q, lower=True, check_finite=False)

    def weight_vector(self, y) -> np.ndarray:
        """g solving (W + I / tau2) g = indicator(y)."""
        ids = _route_ids(y)
        e_y = np.zeros(self.ds.network.n_segments)
        e_y[list(ids)] = 1.0
        return scipy.linalg.cho_solve(self._cho, e_y, check_finite=False)

    def risk_terms(self, y) -> tuple[float, float]:
        """(variance, squared bias) of the Bayes-optimal prediction for y."""
        g = self.weight_vector(y)
        variance = float(g @ (self.w @ g))
        bias2 = float(g @ g) / self.prior.tau2
        return variance, bias2

    def predict(self, y) -> Prediction:
        ids = _route_ids(y)
        g = self.weight_vector(ids)
        coefs = []
        for r in self.ds.routes:
            ridx = np.asarray(r.segment_ids, dtype=np.intp)
            block = self.cov.sigma[np.ix_(ridx, ridx)]
            coefs.append(np.linalg.solve(block, g[ridx]))
        coef_sum = float(sum(c.sum() for c in coefs))
        intercept = self.prior.mu * (len(ids) - coef_sum)
        variance, bias2 = self.risk_terms(ids)
        pred = Prediction("bayes_optimal", ids, intercept, tuple(coefs),
                          detail={"variance": variance, "bias2": bias2,
                                  "risk": variance + bias2})
        return _finish(pred, self.ds)


def predict_bayes_optimal(ds: TripDataset, y, cov: CovarianceModel,
                          prior: PriorSpec) -> Prediction:
    """Posterior-mean route prediction under the Gaussian working model."""
    return PosteriorModel(ds, cov, prior).predict(y)
