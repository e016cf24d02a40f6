"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import datetime

import numpy as np
import pytest

from gnarlib.geo_graph import GeoPoint, Graph
from gnarlib.panel import TimeSeriesPanel

EPOCH = datetime.date(2020, 1, 6)


def weekly_dates(T: int, start: datetime.date = EPOCH) -> tuple:
    return tuple(start + datetime.timedelta(days=7 * k) for k in range(T))


def make_panel(values, labels=None, start: datetime.date = EPOCH) -> TimeSeriesPanel:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n, T = values.shape
    labels = tuple(labels) if labels else tuple(f"n{i:02d}" for i in range(n))
    return TimeSeriesPanel(labels=labels, dates=weekly_dates(T, start), values=values)


def ring_graph(n: int) -> Graph:
    labels = tuple(f"n{i:02d}" for i in range(n))
    edges = frozenset((i, (i + 1) % n) if i < (i + 1) % n else ((i + 1) % n, i)
                      for i in range(n))
    return Graph(labels=labels, edges=edges)


def path_graph(n: int) -> Graph:
    labels = tuple(f"n{i:02d}" for i in range(n))
    return Graph(labels=labels, edges=frozenset((i, i + 1) for i in range(n - 1)))


def star_graph(n_leaves: int) -> Graph:
    labels = tuple(["c"] + [f"l{i}" for i in range(n_leaves)])
    return Graph(labels=labels, edges=frozenset((0, i + 1) for i in range(n_leaves)))


def random_connected_graph(n: int, rng: np.random.Generator,
                           extra_edges: int = 2) -> Graph:
    """Random spanning tree plus a few extra edges; always connected."""
    labels = tuple(f"n{i:02d}" for i in range(n))
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a = int(order[k])
        b = int(order[int(rng.integers(0, k))])
        edges.add((min(a, b), max(a, b)))
    for _ in range(extra_edges):
        a, b = (int(v) for v in rng.choice(n, size=2, replace=False))
        edges.add((min(a, b), max(a, b)))
    return Graph(labels=labels, edges=frozenset(edges))


def random_points(n: int, rng: np.random.Generator,
                  lat0: float = 52.0, lon0: float = -8.0,
                  spread: float = 2.0) -> list[GeoPoint]:
    """Random point cloud near a reference location; a.s. general position."""
    return [GeoPoint(node_id=f"p{i:03d}",
                     lat_deg=float(lat0 + spread * rng.uniform(-1, 1)),
                     lon_deg=float(lon0 + spread * rng.uniform(-1, 1)))
            for i in range(n)]


@pytest.fixture(scope="session")
def irish_towns():
    from gnarlib.datasets import irish_county_towns

    return irish_county_towns()


@pytest.fixture(scope="session")
def queen_graph():
    from gnarlib.datasets import irish_queen_graph

    return irish_queen_graph()
