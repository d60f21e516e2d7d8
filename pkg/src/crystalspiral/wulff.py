"""Polygonal support functions, crystalline energy densities and Wulff polygons.

A support function is ``gamma_o(p) = max_j m_j . p`` with
``m_j = eta_j (cos psi_j, sin psi_j)``; its Wulff polygon is ``{gamma_o <= 1}``.
The dual density ``gamma(p) = max_j n_j . p`` is built from the vertices of
that polygon, which is what :func:`dual` computes through the half-angle
construction (and what the tests cross-check by intersecting lines directly).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TOL = 1e-10
TWO_PI = 2.0 * math.pi


class AssumptionError(ValueError):
    """A structural assumption on the anisotropy is violated."""

    def __init__(self, assumption: str, index: int, detail: str = ""):
        self.assumption = assumption
        self.index = index
        msg = f"assumption ({assumption}) fails at index {index}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


def _as_vectors(vectors) -> np.ndarray:
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (N, 2) array of vectors, got shape {arr.shape}")
    return arr


def _check_angles(angles: np.ndarray, tag: str) -> None:
    """Check ``a_0 < a_1 < ... < a_0 + 2 pi`` and consecutive gaps in (0, pi)."""
    n = len(angles)
    for j in range(n - 1):
        if not angles[j + 1] > angles[j] + TOL:
            raise AssumptionError(f"{tag}1", j + 1, "angles are not strictly increasing")
    if not angles[-1] < angles[0] + TWO_PI - TOL:
        raise AssumptionError(f"{tag}1", n - 1, "angles exceed one period")
    for j in range(n):
        a = angles[j]
        b = angles[(j + 1) % n] + (TWO_PI if j == n - 1 else 0.0)
        if not (a < b - TOL and b < a + math.pi - TOL):
            raise AssumptionError(f"{tag}2", j, f"gap {b - a:.6g} not in (0, pi)")


@dataclass(frozen=True)
class SupportSpec:
    """``gamma_o(p) = max_j eta_j (cos psi_j, sin psi_j) . p``."""

    eta: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float).ravel()
        psi = np.asarray(self.psi, dtype=float).ravel()
        if eta.shape != psi.shape or eta.size < 3:
            raise ValueError("need at least three (eta, psi) pairs of equal length")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def from_vectors(cls, vectors) -> "SupportSpec":
        v = _as_vectors(vectors)
        a = np.arctan2(v[:, 1], v[:, 0])
        # keep the given order, unwrap forward
        a[1:] = a[0] + np.cumsum(np.mod(np.diff(a), TWO_PI))
        return cls(np.hypot(v[:, 0], v[:, 1]), a)

    @property
    def count(self) -> int:
        return self.eta.size

    @property
    def vectors(self) -> np.ndarray:
        return self.eta[:, None] * np.column_stack([np.cos(self.psi), np.sin(self.psi)])

    def validate(self) -> None:
        """Raise :class:`AssumptionError` unless (gamma1)-(gamma3) hold."""
        for j, e in enumerate(self.eta):
            if not e > 0:
                raise AssumptionError("gamma0", j, f"eta_j = {e} is not positive")
        _check_angles(self.psi, "gamma")
        report = validate_sectors(self.vectors)
        for j, (nonempty, matches) in enumerate(zip(report.nonempty, report.neighbour_form)):
            if not nonempty:
                raise AssumptionError("gamma3", j, "sector P_j is empty")
            if not matches:
                raise AssumptionError("gamma3", j, "P_j differs from the neighbour intersection")


@dataclass(frozen=True)
class EnergyDensity:
    """``gamma(p) = max_j n_j . p`` with vectors sorted by polar angle."""

    vectors: np.ndarray

    def __post_init__(self):
        v = _as_vectors(self.vectors)
        order = np.argsort(np.mod(np.arctan2(v[:, 1], v[:, 0]), TWO_PI), kind="stable")
        object.__setattr__(self, "vectors", v[order])

    @property
    def r(self) -> np.ndarray:
        return np.hypot(self.vectors[:, 0], self.vectors[:, 1])

    @property
    def theta(self) -> np.ndarray:
        return np.mod(np.arctan2(self.vectors[:, 1], self.vectors[:, 0]), TWO_PI)

    def gauges(self, p) -> np.ndarray:
        """Sector gauges ``g_j(p) = n_j . p``; trailing axis of the result is j."""
        p = np.asarray(p, dtype=float)
        return p @ self.vectors.T

    def indicators(self, p) -> np.ndarray:
        """Sector indicators ``f_j(p) = min_{k != j} (g_j(p) - g_k(p))``."""
        g = self.gauges(p)
        n = self.vectors.shape[0]
        out = np.empty_like(g)
        for j in range(n):
            others = np.delete(g, j, axis=-1)
            out[..., j] = g[..., j] - others.max(axis=-1)
        return out

    def reflected(self) -> "EnergyDensity":
        """Density of ``p -> gamma(-p)``."""
        return EnergyDensity(-self.vectors)


def eval_support(spec: SupportSpec, p) -> float | np.ndarray:
    return np.max(np.asarray(p, dtype=float) @ spec.vectors.T, axis=-1)


def eval_energy(density: EnergyDensity, p) -> float | np.ndarray:
    return np.max(density.gauges(p), axis=-1)


def eval_energy_sectors(density: EnergyDensity, p) -> float | np.ndarray:
    """Sector form ``sum_j (n_j . p) [f_j(p) >= 0]``, first sector wins ties."""
    g = density.gauges(p)
    f = density.indicators(p)
    pick = np.argmax(f >= -TOL, axis=-1)
    return np.take_along_axis(g, np.expand_dims(pick, -1), axis=-1)[..., 0]


@dataclass
class SectorReport:
    nonempty: list[bool]
    neighbour_form: list[bool]

    @property
    def ok(self) -> bool:
        return all(self.nonempty) and all(self.neighbour_form)

    @property
    def empty_sectors(self) -> list[int]:
        return [j for j, ok in enumerate(self.nonempty) if not ok]


def _feasible_arcs(diffs: np.ndarray, probes: np.ndarray) -> np.ndarray:
    """Boolean (probes,) mask of directions q with diffs . q > tol for every row."""
    q = np.column_stack([np.cos(probes), np.sin(probes)])
    scale = np.maximum(np.hypot(diffs[:, 0], diffs[:, 1]), 1.0)
    return np.all(q @ diffs.T > TOL * scale, axis=1)


def validate_sectors(vectors) -> SectorReport:
    """Check that every ``P_j = {p : v_j.p >= v_k.p for all k}`` has interior.

    Also checks ``P_j`` equals the intersection of the two neighbour
    half-planes.  Both sets are cones, so it is enough to probe one direction
    inside every arc cut out by the constraint boundaries.
    """
    v = _as_vectors(vectors)
    n = v.shape[0]
    if n < 3:
        raise ValueError("need at least three vectors")
    nonempty, neighbour_form = [], []
    for j in range(n):
        diffs = v[j] - np.delete(v, j, axis=0)
        cuts = []
        for d in diffs:
            if np.hypot(*d) > TOL:
                a = math.atan2(d[1], d[0])
                cuts += [a - math.pi / 2, a + math.pi / 2]
        cuts = np.sort(np.mod(cuts, TWO_PI))
        if cuts.size == 0:
            probes = np.array([0.0])
        else:
            nxt = np.append(cuts[1:], cuts[0] + TWO_PI)
            probes = 0.5 * (cuts + nxt)
        full = _feasible_arcs(diffs, probes)
        nb = _feasible_arcs(np.array([v[j] - v[(j - 1) % n], v[j] - v[(j + 1) % n]]), probes)
        nonempty.append(bool(full.any()))
        neighbour_form.append(bool(np.array_equal(full, nb)))
    return SectorReport(nonempty, neighbour_form)


def dual(spec: SupportSpec) -> EnergyDensity:
    """Energy density whose unit ball is polar to the Wulff polygon of ``spec``.

    Walks the vertices: ``theta_j`` is perpendicular to ``m_j - m_{j-1}`` and
    ``r_j = 1 / (eta_j cos(theta_j - psi_j))``.  When ``r_j`` comes out negative
    the other root of ``cos(theta - c) = 0`` is taken, which leaves ``n_j`` as is.
    """
    spec.validate()
    m = spec.vectors
    diff = m - np.roll(m, 1, axis=0)
    c = np.arctan2(diff[:, 1], diff[:, 0])
    theta = c + math.pi / 2
    r = 1.0 / (spec.eta * np.cos(theta - spec.psi))
    flip = r < 0
    r = np.where(flip, -r, r)
    theta = np.where(flip, theta + math.pi, theta)
    return EnergyDensity(r[:, None] * np.column_stack([np.cos(theta), np.sin(theta)]))


def support_of(density: EnergyDensity) -> SupportSpec:
    """Inverse of :func:`dual`: the same construction with the roles swapped."""
    back = dual(SupportSpec.from_vectors(density.vectors))
    return SupportSpec.from_vectors(back.vectors)


@dataclass(frozen=True)
class WulffShape:
    """Wulff polygon facets: normal angles, lengths and mobilities."""

    phi: np.ndarray
    length: np.ndarray
    beta: np.ndarray = field(default=None)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).ravel()
        length = np.asarray(self.length, dtype=float).ravel()
        beta = (np.ones_like(phi) if self.beta is None
                else np.asarray(self.beta, dtype=float).ravel())
        if not (phi.shape == length.shape == beta.shape):
            raise ValueError("phi, length and beta must have equal length")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "beta", beta)

    @property
    def count(self) -> int:
        return self.phi.size

    @property
    def normals(self) -> np.ndarray:
        return np.column_stack([np.cos(self.phi), np.sin(self.phi)])

    @property
    def tangents(self) -> np.ndarray:
        return np.column_stack([np.sin(self.phi), -np.cos(self.phi)])

    def validate(self) -> None:
        _check_angles(self.phi, "W")
        for j in range(self.count):
            if not self.length[j] > 0:
                raise AssumptionError("W", j, f"facet length {self.length[j]} not positive")
            if not self.beta[j] > 0:
                raise AssumptionError("W", j, f"mobility {self.beta[j]} not positive")


def wulff_vertices(spec: SupportSpec) -> np.ndarray:
    """Vertex ``j`` is where the supporting lines ``j-1`` and ``j`` meet."""
    m = spec.vectors
    n = spec.count
    out = np.empty((n, 2))
    for j in range(n):
        a = np.array([m[j - 1], m[j]])
        det = np.linalg.det(a)
        if abs(det) < TOL * np.abs(a).max() ** 2:
            raise AssumptionError("W2", j, f"supporting lines {(j - 1) % n} and {j} are parallel")
        out[j] = np.linalg.solve(a, np.ones(2))
    return out


def wulff_shape_from_support(spec: SupportSpec, beta=None) -> WulffShape:
    spec.validate()
    v = wulff_vertices(spec)
    length = np.hypot(*(np.roll(v, -1, axis=0) - v).T)
    shape = WulffShape(spec.psi.copy(), length, beta)
    shape.validate()
    return shape


@dataclass
class NormalizationReport:
    residuals: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(np.abs(self.residuals) <= TOL))

    @property
    def failing(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(np.abs(self.residuals) > TOL)]


def normalization_check(spec: SupportSpec, shape: WulffShape) -> NormalizationReport:
    """Residuals ``gamma_o(N_j) - 1`` for every facet normal."""
    return NormalizationReport(eval_support(spec, shape.normals) - 1.0)


PRESET_SPECS = {
    "square": lambda: SupportSpec(np.ones(4), np.pi * np.arange(4) / 2),
    "diagonal": lambda: SupportSpec(np.ones(4), np.pi * np.arange(4) / 2 + np.pi / 4),
    "triangle": lambda: SupportSpec(np.ones(3), 2 * np.pi * np.arange(3) / 3),
}


def preset_spec(name: str) -> SupportSpec:
    try:
        return PRESET_SPECS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESET_SPECS)}") from None


def load_spec(source: str | Path | dict) -> SupportSpec:
    """Support spec from a preset name, a JSON file, or an already-parsed dict.

    The JSON form is ``{"preset": "square"}`` or
    ``{"facets": [[eta, psi], ...]}`` with psi in radians.
    """
    if isinstance(source, str) and source in PRESET_SPECS:
        return preset_spec(source)
    if not isinstance(source, dict):
        source = json.loads(Path(source).read_text())
    if "preset" in source:
        return preset_spec(source["preset"])
    facets = np.asarray(source["facets"], dtype=float)
    return SupportSpec(facets[:, 0], facets[:, 1])
