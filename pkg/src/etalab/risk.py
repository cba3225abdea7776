"""Exact and Monte Carlo risk evaluation for route travel-time estimators.

Risk is mean squared prediction error for the total time of a fixed route y,
averaged over the segment-time prior and the observation noise.  The
grouped-segment and whole-route estimators admit closed forms in the
traversal counters and covariance sums; the Bayes-optimal risk comes from
the posterior machinery; a Gaussian information bound caps everything from
below.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .covariance import CovarianceModel
from .estimators import (PosteriorModel, Prediction, WeightRule, _route_ids,
                         optimal_route_weight, optimal_seg_weights,
                         validate_partition)
from .trips import Neighborhood, PriorSpec, TripDataset

__all__ = [
    "RiskReport",
    "MCRisk",
    "risk_gseg",
    "risk_seg",
    "risk_route",
    "risk_optimal",
    "lower_bound",
    "mc_risk",
    "check_nb_condition",
    "dominance_audit",
]


@dataclass(frozen=True)
class RiskReport:
    """Variance / squared-bias decomposition of one estimator's exact risk."""

    estimator: str
    route: tuple[int, ...]
    variance: float
    bias2: float
    breakdown: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.variance + self.bias2

    def as_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "route": list(self.route),
            "variance": self.variance,
            "bias2": self.bias2,
            "total": self.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def _resolve_block_weights(rule, counts: np.ndarray, blocks, cov: CovarianceModel,
                           prior: PriorSpec) -> np.ndarray:
    if isinstance(rule, WeightRule):
        phis = np.empty(len(blocks))
        for i, b in enumerate(blocks):
            noise = cov.pair_sum(b, b) if rule.kind == WeightRule.INDEP_OPTIMAL else None
            phis[i] = rule.value(int(counts[i]), group_size=len(b), noise=noise,
                                 tau2=prior.tau2)
        return phis
    phis = np.asarray(rule, dtype=np.float64)
    if phis.shape != (len(blocks),):
        raise ValueError("need one weight per partition block")
    return np.where(counts > 0, phis, 0.0)


def risk_gseg(ds: TripDataset, y, partition: Sequence[Sequence[int]], rule,
              cov: CovarianceModel, prior: PriorSpec) -> RiskReport:
    """Exact risk of the grouped-segment estimator.

    variance couples blocks through joint support counts and covariance
    cross sums; each block also contributes (1 - phi)^2 * |S| * tau2 of
    shrinkage bias.  Blocks with no support always carry weight zero.
    """
    ids = _route_ids(y)
    blocks = validate_partition(ids, partition)
    members = [ds.trips_containing_all(b) for b in blocks]
    counts = np.asarray([m.size for m in members], dtype=np.float64)
    phis = _resolve_block_weights(rule, counts, blocks, cov, prior)
    variance = 0.0
    for i in range(len(blocks)):
        if phis[i] == 0.0 or counts[i] == 0:
            continue
        for j in range(len(blocks)):
            if phis[j] == 0.0 or counts[j] == 0:
                continue
            joint = float(np.intersect1d(members[i], members[j],
                                         assume_unique=True).size)
            if joint == 0.0:
                continue
            variance += (joint / (counts[i] * counts[j])) * phis[i] * phis[j] \
                * cov.pair_sum(blocks[i], blocks[j])
    bias2 = float(sum((1.0 - phis[i]) ** 2 * len(blocks[i]) * prior.tau2
                      for i in range(len(blocks))))
    return RiskReport("gseg", ids, variance, bias2,
                      breakdown={"weights": phis.tolist(),
                                 "counts": counts.astype(int).tolist()})


def risk_seg(ds: TripDataset, y, rule, cov: CovarianceModel,
             prior: PriorSpec, pair: np.ndarray | None = None) -> RiskReport:
    """Exact risk of the per-segment estimator (singleton partition).

    Uses the joint traversal-count kernel rather than per-block set
    intersections, so it stays cheap when called for many routes.  `pair`
    optionally supplies precomputed joint counts for y.
    """
    ids = _route_ids(y)
    if pair is None:
        pair = ds.pair_counts(ids)
    counts = np.diag(pair).astype(np.float64)
    blocks = [(s,) for s in ids]
    phis = _resolve_block_weights(rule, counts, blocks, cov, prior)
    idx = np.asarray(ids, dtype=np.intp)
    sig = cov.sigma[np.ix_(idx, idx)]
    safe = np.where(counts > 0, counts, 1.0)
    ratio = phis / safe
    variance = float(ratio @ (pair * sig) @ ratio)
    bias2 = float(((1.0 - phis) ** 2).sum() * prior.tau2)
    return RiskReport("segment", ids, variance, bias2,
                      breakdown={"weights": phis.tolist(),
                                 "counts": counts.astype(int).tolist()})


def risk_route(ds: TripDataset, y, nbhd: Neighborhood, phi: float,
               cov: CovarianceModel, prior: PriorSpec,
               q_all: np.ndarray | None = None) -> RiskReport:
    """Exact risk of the whole-route estimator at shrinkage weight phi.

    Breakdown terms: noise variance of the pooled average, squared bias from
    neighbor-length mismatch, prior mass leaked onto segments outside y, and
    prior mass not recovered on y itself.  An empty neighborhood forces
    phi = 0 and the report reduces to the prior risk |y| * tau2.
    """
    ids = _route_ids(y)
    m = nbhd.size
    if m == 0:
        phi = 0.0
    if phi == 0.0:
        bias_on = float(len(ids)) * prior.tau2
        return RiskReport("route", ids, 0.0, bias_on,
                          breakdown={"weight": 0.0, "neighborhood_size": int(m),
                                     "bias_length": 0.0, "bias_off_route": 0.0,
                                     "bias_on_route": bias_on})
    n_delta = ds.subset_counts(nbhd.members).astype(np.float64)
    if q_all is None:
        q_sum = float(ds.quadratic_sums(cov)[nbhd.members].sum())
    else:
        q_sum = float(q_all[nbhd.members].sum())
    lens = ds.offsets[nbhd.members + 1] - ds.offsets[nbhd.members]
    ybar = float(lens.mean())
    idx = np.asarray(ids, dtype=np.intp)
    variance = (phi / m) ** 2 * q_sum
    bias_length = (phi * (ybar - len(ids)) * prior.mu) ** 2
    scaled = phi * n_delta / m
    on_route = scaled[idx]
    bias_off = float((scaled ** 2).sum() - (on_route ** 2).sum()) * prior.tau2
    bias_on = float(((1.0 - on_route) ** 2).sum()) * prior.tau2
    bias2 = bias_length + bias_off + bias_on
    return RiskReport("route", ids, variance, bias2,
                      breakdown={"weight": float(phi), "neighborhood_size": int(m),
                                 "bias_length": bias_length,
                                 "bias_off_route": bias_off,
                                 "bias_on_route": bias_on})


def risk_optimal(ds: TripDataset, y, cov: CovarianceModel, prior: PriorSpec,
                 model: PosteriorModel | None = None) -> RiskReport:
    """Exact risk of the Bayes-optimal affine estimator."""
    ids = _route_ids(y)
    if model is None:
        model = PosteriorModel(ds, cov, prior)
    variance, bias2 = model.risk_terms(ids)
    return RiskReport("bayes_optimal", ids, variance, bias2)


def lower_bound(ds: TripDataset, y, cov: CovarianceModel, prior: PriorSpec,
                pair: np.ndarray | None = None) -> float:
    """Gaussian information lower bound on the risk of any estimator for y.

    |y|^2 over the observed plus prior information about the route total,
    using the full-network precision matrix.  With no data it equals the
    prior risk |y| * tau2.
    """
    ids = _route_ids(y)
    if pair is None:
        pair = ds.pair_counts(ids)
    idx = np.asarray(ids, dtype=np.intp)
    psi = cov.precision[np.ix_(idx, idx)]
    info = float((pair * psi).sum()) + len(ids) / prior.tau2
    return len(ids) ** 2 / info


@dataclass(frozen=True)
class MCRisk:
    mean: float
    se: float
    replicates: int


def mc_risk(pred: Prediction, ds: TripDataset, cov: CovarianceModel,
            prior: PriorSpec, replicates: int = 10 ** 5,
            seed: int | np.random.Generator = 0,
            batch_size: int = 20000) -> MCRisk:
    """Monte Carlo risk of an affine prediction, with a standard error.

    Each replicate redraws the latent segment times and every trip's noise
    while keeping the historical routes fixed, then scores the squared error
    of the affine rule against the fresh route total.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ids = list(pred.route)
    active = [n for n, c in enumerate(pred.coefficients) if np.any(c != 0.0)]
    # net effect on the latent times: scattered coefficients minus the target
    used = sorted(set(ids).union(*[set(ds.routes[n].segment_ids) for n in active])
                  if active else set(ids))
    seg_pos = {s: i for i, s in enumerate(used)}
    d = np.zeros(len(used))
    for n in active:
        for pos, s in enumerate(ds.routes[n].segment_ids):
            d[seg_pos[s]] += pred.coefficients[n][pos]
    for s in ids:
        d[seg_pos[s]] -= 1.0
    # fold each trip's noise through its covariance factor once
    w_parts = []
    for n in active:
        ridx = np.asarray(ds.routes[n].segment_ids, dtype=np.intp)
        block = cov.sigma[np.ix_(ridx, ridx)]
        evals, evecs = np.linalg.eigh(block)
        factor = evecs * np.sqrt(np.clip(evals, 0.0, None))
        w_parts.append(factor.T @ pred.coefficients[n])
    w_flat = np.concatenate(w_parts) if w_parts else np.zeros(0)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < replicates:
        b = min(batch_size, replicates - done)
        theta = prior.mu + np.sqrt(prior.tau2) * rng.standard_normal((b, len(used)))
        err = pred.intercept + theta @ d
        if w_flat.size:
            err = err + rng.standard_normal((b, w_flat.size)) @ w_flat
        sq = err ** 2
        total += float(sq.sum())
        total_sq += float((sq ** 2).sum())
        done += b
    mean = total / replicates
    var = max(total_sq / replicates - mean ** 2, 0.0)
    se = float(np.sqrt(var / replicates))
    return MCRisk(mean, se, replicates)


def check_nb_condition(ds: TripDataset, y, nbhd: Neighborhood) -> bool:
    """Neighborhood-balance condition behind the segment-vs-route comparison.

    For all segment pairs s, t of y the joint counts must satisfy
    N_{s,t} * N^d_s * N^d_t <= N^d_{s,t} * N_s * N_t, where the d quantities
    count only neighborhood members.  Exact-route neighborhoods satisfy it
    automatically.
    """
    ids = _route_ids(y)
    pair_all = ds.pair_counts(ids)
    pair_delta = ds.pair_counts(ids, members=nbhd.members)
    n_all = np.diag(pair_all)
    n_delta = np.diag(pair_delta)
    lhs = pair_all * np.outer(n_delta, n_delta)
    rhs = pair_delta * np.outer(n_all, n_all)
    return bool(np.all(lhs <= rhs))


def dominance_audit(ds: TripDataset, y, nbhd: Neighborhood, cov: CovarianceModel,
                    prior: PriorSpec) -> dict:
    """Compare optimally weighted segment and route estimators on one route.

    Under an elementwise-nonnegative covariance block and the neighborhood
    balance condition the segment estimator cannot lose; outside those
    conditions a reversal is possible and is reported, not raised.
    """
    ids = _route_ids(y)
    phis = optimal_seg_weights(ds, ids, cov, prior)
    seg = risk_seg(ds, ids, phis, cov, prior)
    phi_r = optimal_route_weight(ds, ids, nbhd, cov, prior)
    route = risk_route(ds, ids, nbhd, phi_r, cov, prior)
    idx = np.asarray(ids, dtype=np.intp)
    block = cov.sigma[np.ix_(idx, idx)]
    nonneg = bool(np.all(block >= 0.0))
    condition = check_nb_condition(ds, ids, nbhd)
    dominated = seg.total <= route.total + 1e-12
    out = {
        "segment_risk": seg.total,
        "route_risk": route.total,
        "segment_weights": phis.tolist(),
        "route_weight": phi_r,
        "nonneg_covariance_block": nonneg,
        "nb_condition": condition,
        "segment_dominates": dominated,
    }
    if nonneg and condition and not dominated:
        out["note"] = "unexpected reversal: conditions hold but the segment estimator lost"
    elif not dominated:
        out["note"] = "reversal consistent with violated conditions"
    return out
