"""Step-like branches of ``arg x`` cut along a spiral, and their L1 distance.

Both constructions return ``theta`` with ``theta = arg x (mod 2 pi)`` whose
only jumps (of height 2 pi) sit on the spiral.  Heights are ``theta / 2 pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .levelset import Grid, ScalarField
from .spiral_ode import SpiralPolyline, SpiralState
from .wulff import WulffShape

TWO_PI = 2.0 * math.pi


@dataclass
class HeightField:
    """Heights on the unpadded grid; NaN off the active set."""

    values: np.ndarray
    t: float
    source: str


@dataclass
class RegionStack:
    """Half-plane data of the wedges ``R_j = {x.N_{j+1} < s_{j+1}, x.N_j >= s_j}``."""

    normals: np.ndarray   # (k+1, 2): N_j for j = 0..k
    support: np.ndarray   # (k+1,):   s_j = y_j . N_j

    def contains(self, j: int, x: np.ndarray) -> np.ndarray:
        return ((x @ self.normals[j + 1] < self.support[j + 1])
                & (x @ self.normals[j] >= self.support[j]))


def region_stack(state: SpiralState, poly: SpiralPolyline, shape: WulffShape) -> RegionStack:
    k = state.k
    idx = np.arange(k + 1) % shape.count
    normals = shape.normals[idx]
    # poly.points runs y_k, ..., y_0
    y = poly.points[::-1]
    return RegionStack(normals, np.einsum("ij,ij->i", y, normals))


def _principal_window(x: np.ndarray, lower: float) -> np.ndarray:
    return lower + np.mod(np.arctan2(x[..., 1], x[..., 0]) - lower, TWO_PI)


def theta_D(state: SpiralState, poly: SpiralPolyline, shape: WulffShape, x) -> np.ndarray:
    """Branch of ``arg x`` cut exactly along the discrete spiral.

    Start from the branch cut along the ray through the newest facet, in the
    window fixed by the rotation number, then step down by 2 pi on every wedge
    ``R_j``.
    """
    x = np.asarray(x, dtype=float)
    if np.any((x[..., 0] == 0) & (x[..., 1] == 0)):
        raise ValueError("theta_D is undefined at the origin")
    k = state.k
    n, kbar = divmod(k, shape.count)
    lower = shape.phi[kbar] + TWO_PI * n - math.pi / 2
    theta = _principal_window(x, lower)
    regions = region_stack(state, poly, shape)
    for j in range(k - 1, -1, -1):
        theta = theta - TWO_PI * regions.contains(j, x)
    return theta


def theta_D_partial(state, poly, shape, x, upto: int) -> np.ndarray:
    """``Theta_{k, k-upto}``: only the wedges ``R_{k-1}, ..., R_{k-upto}`` removed."""
    x = np.asarray(x, dtype=float)
    k = state.k
    n, kbar = divmod(k, shape.count)
    theta = _principal_window(x, shape.phi[kbar] + TWO_PI * n - math.pi / 2)
    regions = region_stack(state, poly, shape)
    for j in range(k - 1, k - 1 - upto, -1):
        theta = theta - TWO_PI * regions.contains(j, x)
    return theta


def _grid_points(grid: Grid) -> np.ndarray:
    x, y = grid.coords
    return np.stack([x, y], axis=-1)


def h_D_field(state: SpiralState, poly: SpiralPolyline, shape: WulffShape,
              grid: Grid) -> HeightField:
    mask = grid.mask
    pts = _grid_points(grid)
    out = np.full(mask.shape, np.nan)
    out[mask] = theta_D(state, poly, shape, pts[mask]) / TWO_PI
    return HeightField(out, state.t, "discrete")


def theta_L(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Branch ``u + ((arg x - u) mod 2 pi)``: it lives in ``[u, u + 2 pi)``.

    Same half-open convention as the discrete branch; points on the level-set
    spiral get the lower value ``u``.
    """
    return u + np.mod(np.arctan2(x[..., 1], x[..., 0]) - u, TWO_PI)


def h_L_field(field: ScalarField, grid: Grid) -> HeightField:
    mask = grid.mask
    pts = _grid_points(grid)
    out = np.full(mask.shape, np.nan)
    out[mask] = theta_L(field.values[mask], pts[mask]) / TWO_PI
    return HeightField(out, field.t, "levelset")


def area_difference(a: HeightField, b: HeightField, grid: Grid) -> float:
    """Normalised L1 distance: mean of ``|a - b|`` over active nodes.

    Each node stands for one ``dx^2`` cell in both numerator and ``|W|``.
    """
    if a.values.shape != b.values.shape or a.values.shape != grid.mask.shape:
        raise ValueError("height fields live on different grids")
    mask = grid.mask
    if np.isnan(a.values[mask]).any() or np.isnan(b.values[mask]).any():
        raise ValueError("height field mask differs from the grid mask")
    cell = grid.cfg.dx ** 2
    diff = np.abs(a.values[mask] - b.values[mask]).sum() * cell
    return float(diff / (mask.sum() * cell))


def diff_series(ode_traj, snapshots, shape: WulffShape, grid: Grid, atol: float = 1e-12):
    """``[(t, D(t)), ...]`` pairing ODE samples with level-set snapshots."""
    if len(ode_traj) != len(snapshots):
        raise ValueError(f"{len(ode_traj)} ODE samples vs {len(snapshots)} level-set samples")
    rows = []
    for (state, poly), snap in zip(ode_traj, snapshots):
        if abs(state.t - snap.t) > atol:
            raise ValueError(f"sample times differ: {state.t} vs {snap.t}")
        hd = h_D_field(state, poly, shape, grid)
        hl = h_L_field(snap, grid)
        rows.append((snap.t, area_difference(hd, hl, grid)))
    return rows
