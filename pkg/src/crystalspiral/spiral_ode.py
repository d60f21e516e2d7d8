"""Facet-length ODE model of a pinned polygonal spiral.

The spiral is the polyline ``y_k = O, y_{j-1} = y_j + d_j T_j`` followed by
the half-line ``y_0 + lambda T_0``.  Facet ``j`` uses the Wulff data of index
``j mod N``.  Between generation events the lengths obey a tridiagonal ODE;
a new facet of zero length is born at the centre as soon as the newest one
reaches the critical length ``rho_c l / U``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .wulff import WulffShape

log = logging.getLogger(__name__)

NEG_GUARD = 1e-14
EVENT_TOL = 1e-12

OK, CROSSED, NEGATIVE = 0, 1, 2


class SpiralError(RuntimeError):
    pass


class NoGeneration(SpiralError):
    pass


@dataclass(frozen=True)
class EvolutionParams:
    U: float = 1.0
    rho_c: float = 0.02

    def __post_init__(self):
        if not (self.U > 0 and self.rho_c > 0):
            raise ValueError(f"need U > 0 and rho_c > 0, got U={self.U}, rho_c={self.rho_c}")


@dataclass(frozen=True)
class CoefficientTable:
    b: np.ndarray
    c_plus: np.ndarray
    c_minus: np.ndarray


def coefficients(shape: WulffShape) -> CoefficientTable:
    phi, beta = shape.phi, shape.beta
    n = shape.count
    nxt = np.roll(phi, -1)
    nxt[-1] += 2 * np.pi
    prv = np.roll(phi, 1)
    prv[0] -= 2 * np.pi
    gap_up, gap_down = nxt - phi, phi - prv
    for j in range(n):
        for gap in (gap_up[j], gap_down[j]):
            if not 0 < gap < np.pi:
                raise ValueError(f"angle gap {gap} at facet {j} outside (0, pi)")
    b = (1.0 / np.tan(gap_up) + 1.0 / np.tan(gap_down)) / beta
    c_plus = 1.0 / (np.roll(beta, -1) * np.sin(gap_up))
    c_minus = 1.0 / (np.roll(beta, 1) * np.sin(gap_down))
    return CoefficientTable(b, c_plus, c_minus)


@dataclass
class SpiralState:
    """``d[j-1]`` holds ``d_j``; ``generation_times[j-1]`` holds ``T_j``."""

    t: float
    d: np.ndarray
    generation_times: list[float] = field(default_factory=lambda: [0.0])

    @property
    def k(self) -> int:
        return self.d.size

    def copy(self) -> "SpiralState":
        return SpiralState(self.t, self.d.copy(), list(self.generation_times))

    @classmethod
    def initial(cls) -> "SpiralState":
        return cls(0.0, np.zeros(1), [0.0])


@dataclass
class SpiralPolyline:
    """Vertices ``y_k = O, y_{k-1}, ..., y_0`` and the direction of ``L_0``."""

    t: float
    points: np.ndarray
    ray: np.ndarray

    def segments(self, ray_length: float = 10.0) -> np.ndarray:
        """(k+1, 2, 2) array of facet segments, the half-line clipped at ``ray_length``."""
        pts = self.points
        segs = [np.array([pts[i], pts[i + 1]]) for i in range(len(pts) - 1)]
        segs.append(np.array([pts[-1], pts[-1] + ray_length * self.ray]))
        return np.array(segs)


@njit(cache=True)
def _rhs(d, b, cp, cm, ell, U, rho, out):
    k = d.size
    n = b.size
    # F[j] for facets 1..k-1, with F_0 = U (half-line)
    for j in range(1, k + 1):
        w = j % n
        fm = U if j == 1 else U - rho * ell[(j - 1) % n] / d[j - 2]
        if j == k:
            out[j - 1] = cm[w] * fm
        else:
            fj = U - rho * ell[w] / d[j - 1]
            acc = -b[w] * fj + cm[w] * fm
            if j + 1 <= k - 1:
                acc += cp[w] * (U - rho * ell[(j + 1) % n] / d[j])
            out[j - 1] = acc


@njit(cache=True)
def _step(d, h, b, cp, cm, ell, U, rho, euler):
    k1 = np.empty_like(d)
    _rhs(d, b, cp, cm, ell, U, rho, k1)
    if euler:
        return d + h * k1
    k2 = np.empty_like(d)
    k3 = np.empty_like(d)
    k4 = np.empty_like(d)
    _rhs(d + 0.5 * h * k1, b, cp, cm, ell, U, rho, k2)
    _rhs(d + 0.5 * h * k2, b, cp, cm, ell, U, rho, k3)
    _rhs(d + h * k3, b, cp, cm, ell, U, rho, k4)
    return d + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _march(d, t, t_stop, dt, threshold, b, cp, cm, ell, U, rho, euler):
    """Fixed steps until ``t_stop`` or until ``d_k`` reaches ``threshold``.

    Returns (status, t, d, t_prev, d_prev).
    """
    k = d.size
    t_prev = t
    d_prev = d.copy()
    while t < t_stop:
        h = dt
        if t + h >= t_stop or t_stop - (t + h) < 1e-3 * dt:
            h = t_stop - t
        d_new = _step(d, h, b, cp, cm, ell, U, rho, euler)
        t_prev = t
        d_prev = d
        t = t_stop if h == t_stop - t else t + h
        d = d_new
        for j in range(k - 1):
            if not d[j] > 1e-14:
                return NEGATIVE, t, d, t_prev, d_prev
        if d[k - 1] >= threshold:
            return CROSSED, t, d, t_prev, d_prev
    return OK, t, d, t_prev, d_prev


class DiscreteSpiral:
    """Event-driven integrator bound to one Wulff shape and parameter set."""

    def __init__(self, shape: WulffShape, params: EvolutionParams, dt: float = 1e-6,
                 method: str = "rk4"):
        shape.validate()
        if not dt > 0:
            raise ValueError("dt must be positive")
        if method not in ("rk4", "euler"):
            raise ValueError(f"unknown method {method!r}")
        self.shape = shape
        self.params = params
        self.dt = dt
        self.euler = method == "euler"
        self.coeffs = coefficients(shape)

    def _args(self):
        c = self.coeffs
        return (c.b, c.c_plus, c.c_minus, self.shape.length, self.params.U, self.params.rho_c,
                self.euler)

    def threshold(self, k: int) -> float:
        return self.params.rho_c * self.shape.length[k % self.shape.count] / self.params.U

    def rhs(self, state: SpiralState) -> np.ndarray:
        if np.any(state.d[:-1] <= 0):
            raise SpiralError(f"nonpositive interior length at t={state.t}: {state.d}")
        out = np.empty_like(state.d)
        _rhs(state.d, *self._args()[:-1], out)
        return out

    def rk4_step(self, state: SpiralState, h: float) -> SpiralState:
        d = _step(state.d, h, *self._args())
        return SpiralState(state.t + h, d, list(state.generation_times))

    def _localize(self, t0, d0, h, level):
        lo, hi = 0.0, h
        args = self._args()
        while hi - lo > EVENT_TOL:
            mid = 0.5 * (lo + hi)
            if _step(d0, mid, *args)[-1] >= level:
                hi = mid
            else:
                lo = mid
        return t0 + hi, _step(d0, hi, *args)

    def advance(self, state: SpiralState, t_stop: float) -> tuple[SpiralState, bool]:
        """Integrate towards ``t_stop``; stop early at a generation time.

        Returns the new state and whether it sits on a generation event.
        """
        level = self.threshold(state.k)
        status, t, d, t_prev, d_prev = _march(state.d.astype(float), state.t, t_stop, self.dt,
                                              level, *self._args())
        if status == NEGATIVE:
            raise SpiralError(f"facet length dropped below {NEG_GUARD} at t={t:.9g} (k={state.k})")
        if status == CROSSED:
            t, d = self._localize(t_prev, d_prev, t - t_prev, level)
            return SpiralState(t, d, list(state.generation_times)), True
        return SpiralState(t, d, list(state.generation_times)), False

    def advance_until_generation(self, state: SpiralState, t_max: float = np.inf):
        """State at the next generation time ``T_{k+1}`` and that time."""
        horizon = t_max if np.isfinite(t_max) else state.t + 1e3
        new, hit = self.advance(state, horizon)
        if not hit:
            raise NoGeneration(f"no generation before t_max={horizon}")
        return new, new.t

    @staticmethod
    def add_facet(state: SpiralState) -> SpiralState:
        return SpiralState(state.t, np.append(state.d, 0.0), state.generation_times + [state.t])

    def vertices(self, state: SpiralState) -> SpiralPolyline:
        tang = self.shape.tangents
        n = self.shape.count
        pts = np.zeros((state.k + 1, 2))
        for i, j in enumerate(range(state.k, 0, -1)):
            pts[i + 1] = pts[i] + state.d[j - 1] * tang[j % n]
        return SpiralPolyline(state.t, pts, tang[0].copy())

    def simulate(self, t_end: float, sample_times=None):
        """Run from the initial ray to ``t_end``.

        Returns ``[(state, polyline), ...]`` at ``sample_times`` (default: just
        ``t_end``); the step grid is shortened to land on every sample exactly.
        """
        if t_end < 0:
            raise ValueError("t_end must be nonnegative")
        samples = [t_end] if sample_times is None else sorted(float(s) for s in sample_times)
        if samples and (samples[0] < 0 or samples[-1] > t_end + 1e-12):
            raise ValueError("sample times must lie in [0, t_end]")
        state = SpiralState.initial()
        out = []
        for ts in samples:
            while state.t < ts:
                state, hit = self.advance(state, ts)
                if hit:
                    log.debug("facet %d generated at t=%.12f", state.k + 1, state.t)
                    state = self.add_facet(state)
            out.append((state.copy(), self.vertices(state)))
        return out


def segments_intersect(segs: np.ndarray, skip_adjacent: bool = True) -> list[tuple[int, int]]:
    """Index pairs of non-adjacent segments that touch or cross."""
    p, q = segs[:, 0], segs[:, 1]
    hits = []
    n = len(segs)

    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                       - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    for i in range(n):
        js = np.arange(i + 2 if skip_adjacent else i + 1, n)
        if js.size == 0:
            continue
        o1 = orient(p[i], q[i], p[js])
        o2 = orient(p[i], q[i], q[js])
        o3 = orient(p[js], q[js], p[i])
        o4 = orient(p[js], q[js], q[i])
        bad = (o1 * o2 < 0) & (o3 * o4 < 0)
        hits += [(i, int(j)) for j in js[bad]]
    return hits


def is_simple(poly: SpiralPolyline, ray_length: float = 10.0) -> bool:
    segs = poly.segments(ray_length)
    keep = np.hypot(*(segs[:, 1] - segs[:, 0]).T) > 0
    return not segments_intersect(segs[keep])
