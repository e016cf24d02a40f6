"""Shipped example data: the 26 Irish counties.

Coordinates are curated county-town locations (decimal degrees, WGS84-ish
town centres / council seats) with 2016 census county populations; the
contiguity file lists counties sharing a land border.  Intended for demos
and structural tests; the loaders return ready-made domain objects.
"""

from __future__ import annotations

from importlib import resources

from .geo_graph import GeoPoint, Graph, build_from_edgelist, read_edgelist_csv, read_points_csv

IRISH_HUBS = ("Cork", "Dublin", "Galway", "Limerick", "Waterford")


def _data_path(name: str):
    return resources.files(__package__).joinpath("data", name)


def irish_county_towns_path() -> str:
    return str(_data_path("irish_county_towns.csv"))


def irish_queen_edges_path() -> str:
    return str(_data_path("irish_queen_edges.csv"))


def irish_county_towns() -> list[GeoPoint]:
    """The 26 county towns, sorted by county name."""
    with _data_path("irish_county_towns.csv").open() as fh:
        return read_points_csv(fh)


def irish_queen_graph() -> Graph:
    """Shared-border contiguity over the 26 counties."""
    points = irish_county_towns()
    with _data_path("irish_queen_edges.csv").open() as fh:
        edges = read_edgelist_csv(fh)
    return build_from_edgelist([p.node_id for p in points], edges)
