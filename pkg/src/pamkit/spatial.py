"""Call-density surfaces over a recorder array by inverse distance weighting."""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedCsv, NoSites, UnknownSource


@dataclass(frozen=True)
class RecorderSite:
    name: str
    x_m: float
    y_m: float
    call_count: int = 0


@dataclass(frozen=True)
class GridSpec:
    x0: float
    y0: float
    cell_m: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.cell_m <= 0 or self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs a positive cell size and at least one cell")

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.cell_m * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.cell_m * np.arange(self.ny)

    @classmethod
    def covering(cls, sites, cell_m: float, margin_m: float = 0.0) -> "GridSpec":
        """Smallest grid of ``cell_m`` spacing covering every site plus a margin."""
        xs = [s.x_m for s in sites]
        ys = [s.y_m for s in sites]
        if not xs:
            raise NoSites("no recorder sites")
        x0, y0 = min(xs) - margin_m, min(ys) - margin_m
        nx = int(np.ceil((max(xs) + margin_m - x0) / cell_m - 1e-9)) + 1
        ny = int(np.ceil((max(ys) + margin_m - y0) / cell_m - 1e-9)) + 1
        return cls(x0, y0, cell_m, nx, ny)


@dataclass(frozen=True, eq=False)
class DensityGrid:
    spec: GridSpec
    values: np.ndarray  # [nx, ny]
    sites: tuple = ()


def idw_values(site_xy, counts, points_xy, power: float = 2.0) -> np.ndarray:
    """IDW estimate at each point; points coinciding with a site take its value."""
    site_xy = np.asarray(site_xy, dtype=np.float64).reshape(-1, 2)
    z = np.asarray(counts, dtype=np.float64)
    pts = np.asarray(points_xy, dtype=np.float64).reshape(-1, 2)
    d = np.hypot(pts[:, None, 0] - site_xy[None, :, 0], pts[:, None, 1] - site_xy[None, :, 1])
    hit = d == 0.0
    # scale by the nearest nonzero distance so weights stay in (0, 1] and cannot overflow
    nearest = np.where(hit, np.inf, d).min(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        w = np.where(hit, 0.0, (d / nearest) ** -power)
        # clip absorbs rounding so the convex-combination bounds hold exactly
        out = np.clip((w @ z) / w.sum(axis=1), z.min(), z.max())
    rows = np.flatnonzero(hit.any(axis=1))
    out[rows] = z[np.argmax(hit[rows], axis=1)]
    return out


def idw_interpolate(sites, grid: GridSpec, power: float = 2.0) -> DensityGrid:
    sites = tuple(sites)
    if not sites:
        raise NoSites("IDW needs at least one site")
    if power <= 0:
        raise ValueError("IDW power must be positive")
    gx, gy = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    values = idw_values([(s.x_m, s.y_m) for s in sites], [s.call_count for s in sites],
                        np.column_stack([gx.ravel(), gy.ravel()]), power)
    return DensityGrid(grid, values.reshape(grid.nx, grid.ny), sites)


def counts_from_events(events, site_of_source: dict, sites) -> list:
    """Attach per-site event counts to ``sites``; sites without events get 0."""
    tally = Counter()
    for ev in events:
        site = site_of_source.get(ev.source)
        if site is None:
            site = site_of_source.get(Path(ev.source).name, site_of_source.get(Path(ev.source).stem))
        if site is None:
            raise UnknownSource(f"event source {ev.source!r} maps to no recorder site")
        tally[site] += 1
    names = {s.name for s in sites}
    unknown = set(tally) - names
    if unknown:
        raise UnknownSource(f"sources map to undefined sites {sorted(unknown)}")
    return [RecorderSite(s.name, s.x_m, s.y_m, tally.get(s.name, 0)) for s in sites]


def read_sites_csv(path) -> list:
    sites = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"name", "x_m", "y_m"} <= set(reader.fieldnames or []):
            raise MalformedCsv(path, 1, "expected columns name,x_m,y_m")
        for row in reader:
            try:
                count = int(row["call_count"]) if row.get("call_count") else 0
                sites.append(RecorderSite(row["name"], float(row["x_m"]), float(row["y_m"]), count))
            except (TypeError, ValueError) as exc:
                raise MalformedCsv(path, reader.line_num, str(exc)) from exc
    names = [s.name for s in sites]
    if len(set(names)) != len(names):
        raise MalformedCsv(path, 1, "site names must be unique")
    return sites


def read_site_map_csv(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"source", "site"} <= set(reader.fieldnames or []):
            raise MalformedCsv(path, 1, "expected columns source,site")
        return {row["source"]: row["site"] for row in reader}


def write_grid_csv(grid: DensityGrid, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["x", "y", "value"])
    for i, x in enumerate(grid.spec.xs):
        for j, y in enumerate(grid.spec.ys):
            writer.writerow([f"{x:.3f}", f"{y:.3f}", repr(float(grid.values[i, j]))])
