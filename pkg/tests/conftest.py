"""Shared fixtures: random small problem instances and the acceptance registry.

Acceptance tests call ``record_acceptance`` so the final pytest summary ends
with one PASS/FAIL line per criterion, whatever order the tests ran in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from etalab.covariance import CovarianceModel, FeatureLaw, diffusion_covariance, gram_covariance
from etalab.network import AdjacencyRule, RoadNetwork, build_grid, segment_graph
from etalab.trips import ODLaw, PriorSpec, Route, TripDataset, sample_routes, synthesize_times

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(num: int, ok: bool, detail: str) -> bool:
    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


# ---------------------------------------------------------------------------
# random small fixtures


@dataclass
class Fixture:
    net: RoadNetwork
    cov: CovarianceModel
    prior: PriorSpec
    ds: TripDataset
    y: Route
    rng: np.random.Generator


_GRIDS: dict[int, RoadNetwork] = {}


def _grid(p: int) -> RoadNetwork:
    if p not in _GRIDS:
        _GRIDS[p] = build_grid(p)
    return _GRIDS[p]


def random_fixture(seed: int, cov_kind: str = "gram", p: int | None = None,
                   n_trips: int | None = None, alpha: float | None = None,
                   mu: float | None = None, tau2: float | None = None,
                   with_times: bool = False) -> Fixture:
    """A small grid problem with sampled history and one predicting route.

    cov_kind picks the covariance family:
    * "gram": nonnegative-feature Gram matrix, elementwise >= 0.
    * "diffusion": diffusion kernel on the unweighted segment graph.
    * "diag": independent segments with heterogeneous variances.
    """
    rng = np.random.default_rng(seed)
    p = int(p if p is not None else rng.integers(2, 5))
    n_trips = int(n_trips if n_trips is not None else rng.integers(1, 21))
    alpha = float(alpha if alpha is not None else rng.uniform(0.4, 1.5))
    mu = float(mu if mu is not None else rng.uniform(-1.0, 2.0))
    tau2 = float(tau2 if tau2 is not None else rng.uniform(0.2, 2.0))
    net = _grid(p)
    if cov_kind == "gram":
        cov = gram_covariance(net.n_segments, m=int(rng.integers(3, 12)),
                              law=FeatureLaw.UNIF_0_1, seed=rng)
    elif cov_kind == "diffusion":
        graph = segment_graph(net, rule=AdjacencyRule.SHARE_ANY_ENDPOINT)
        cov = diffusion_covariance(graph, u=float(rng.uniform(0.3, 1.5)),
                                   v=float(rng.uniform(0.2, 1.5)),
                                   white=float(rng.uniform(0.0, 0.5)))
    elif cov_kind == "diag":
        diag = rng.uniform(0.3, 2.5, size=net.n_segments)
        cov = CovarianceModel(np.diag(diag), meta={"kind": "diag"})
    else:
        raise ValueError(f"unknown cov_kind {cov_kind!r}")
    law = ODLaw(p, alpha)
    routes = sample_routes(law, net, rng, n_trips)
    prior = PriorSpec(mu=mu, tau2=tau2)
    if with_times:
        ds = synthesize_times(net, routes, cov, prior, rng)
    else:
        ds = TripDataset(net, routes)
    y = sample_routes(law, net, rng, 1)[0]
    return Fixture(net, cov, prior, ds, y, rng)


@pytest.fixture(scope="session")
def grid3() -> RoadNetwork:
    return _grid(3)
