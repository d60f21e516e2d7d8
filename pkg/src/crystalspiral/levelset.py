"""Explicit finite differences for the crystalline spiral level-set equation.

Solves ``u_t = gamma~(p) (rho_c div xi~(p) + U) / beta~(p)`` with
``p = grad(u - theta)`` on ``W = [-L, L]^2 minus the disc |x| <= rho`` and
``nu . grad(u - theta) = 0`` on both boundaries.  ``theta = arg x`` enters
the stencils only through ``grad theta = (-y, x) / |x|^2``, and the ghost
fill only through increments of ``arg`` between nearby nodes, so no branch
of ``theta`` is ever chosen.

``xi~`` is the gradient of ``gamma~(p) = gamma(-p)`` with the crystalline
jumps smoothed by ``sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .spiral_ode import EvolutionParams
from .wulff import EnergyDensity

SQUARE, DIAGONAL, SECTOR = 0, 1, 2
XI_KINDS = {"square": SQUARE, "diagonal": DIAGONAL, "sector": SECTOR}


class LevelSetError(RuntimeError):
    pass


# -- smoothed sign / characteristic functions ------------------------------------

# fast-math minus the no-NaN / no-inf assumptions, so blow-ups stay detectable
JIT = dict(cache=True, fastmath={"nsz", "arcp", "contract", "afn", "reassoc"},
           error_model="numpy")


@njit(**JIT)
def _sigma(z, scale):
    if z == 0.0:
        return 0.0
    return z / math.hypot(z, scale)


def sigma(z, p1, p2, eps):
    """``z / sqrt(z^2 + eps^2 (|p1| + |p2|)^2)``, and 0 at ``z == 0``."""
    z = np.asarray(z, dtype=float)
    scale = eps * (np.abs(p1) + np.abs(p2))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = z / np.hypot(z, scale)
    out = np.where(z == 0, 0.0, out)
    return out if out.ndim else float(out)


def zeta(z, p1, p2, eps):
    """Smoothed characteristic function ``(sigma + 1) / 2``."""
    return 0.5 * (sigma(z, p1, p2, eps) + 1.0)


@njit(**JIT)
def _xi_gamma(p1, p2, kind, vecs, eps, unit_scale):
    """Return (xi1, xi2, gamma) of the reflected density at ``p``."""
    if kind == SQUARE:
        scale = eps if unit_scale else eps * (abs(p1) + abs(p2))
        return _sigma(p1, scale), _sigma(p2, scale), abs(p1) + abs(p2)
    if kind == DIAGONAL:
        r = 1.0 / math.sqrt(2.0)
        q1 = (p1 + p2) * r
        q2 = (p1 - p2) * r
        scale = eps if unit_scale else eps * (abs(q1) + abs(q2))
        s1 = _sigma(q1, scale)
        s2 = _sigma(q2, scale)
        return (s1 + s2) * r, (s1 - s2) * r, abs(q1) + abs(q2)
    n = vecs.shape[0]
    scale = eps if unit_scale else eps * (abs(p1) + abs(p2))
    x1 = 0.0
    x2 = 0.0
    g = 0.0
    for j in range(n):
        gj = vecs[j, 0] * p1 + vecs[j, 1] * p2
        best = -np.inf
        for k in range(n):
            if k != j:
                gk = vecs[k, 0] * p1 + vecs[k, 1] * p2
                if gk > best:
                    best = gk
        w = 0.5 * (_sigma(gj - best, scale) + 1.0)
        x1 += w * vecs[j, 0]
        x2 += w * vecs[j, 1]
        g += w * gj
    return x1, x2, g


# -- configuration and grid ------------------------------------------------------

@dataclass
class LevelSetConfig:
    """Grid, radius and anisotropy of one level-set run.

    ``density`` is the (unreflected) energy density; the solver works with
    ``gamma~(p) = gamma(-p)``.  ``xi_kind`` picks the closed forms of the
    square and diagonal examples or the generic sector sum.
    """

    s: int
    rho: float
    params: EvolutionParams
    density: EnergyDensity
    xi_kind: str = "sector"
    eps: float | None = None
    unit_smoothing: bool = False
    u0: float = -math.pi / 2
    half_width: float = 1.5
    dt_factor: float = 0.1
    theta_grad: str = "analytic"

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.xi_kind not in XI_KINDS:
            raise ValueError(f"unknown xi kind {self.xi_kind!r}")
        if self.theta_grad not in ("analytic", "increment"):
            raise ValueError(f"unknown theta_grad {self.theta_grad!r}")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.rho < self.half_width:
            raise ValueError("rho must be smaller than the box half-width")
        if self.rho < math.sqrt(2) * self.dx:
            raise ValueError(f"rho={self.rho} too small: the origin would enter the stencil "
                             f"(need rho >= sqrt(2) dx = {math.sqrt(2) * self.dx:.6g})")
        if self.eps is None:
            self.eps = default_eps(self)
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def dx(self) -> float:
        return 0.02 / self.s

    @property
    def dt(self) -> float:
        return self.dt_factor * self.dx ** 2

    @property
    def n_half(self) -> int:
        return int(round(self.half_width / self.dx))

    @property
    def size(self) -> int:
        return 2 * self.n_half + 1

    @property
    def reflected_vectors(self) -> np.ndarray:
        return np.ascontiguousarray(-self.density.vectors)

    def stiffness(self) -> float:
        """Upper bound of ``gamma~ |D xi~|`` times ``eps``, used for the stability floor."""
        if self.xi_kind in ("square", "diagonal"):
            return 1.0
        v = self.reflected_vectors
        jumps = np.hypot(*(v - np.roll(v, 1, axis=0)).T)
        return float(np.hypot(*v.T).max() * jumps.max() ** 2 / 2)


def default_eps(cfg: LevelSetConfig) -> float:
    """``dx``, raised where needed so the explicit step stays diffusion-stable.

    The smoothed flux has diffusivity up to ``rho_c K / eps``; 2-D explicit
    stability wants ``D dt / dx^2 <= 1/4``.
    """
    floor = 4.0 * cfg.params.rho_c * cfg.stiffness() * cfg.dt / cfg.dx ** 2
    return max(cfg.dx, floor)


def _wrapped_increment(ax, ay, bx, by):
    """``arg b - arg a`` taken in (-pi, pi]; zero where either point is the origin."""
    cross = ax * by - ay * bx
    dot = ax * bx + ay * by
    out = np.arctan2(cross, dot)
    bad = ((ax == 0) & (ay == 0)) | ((bx == 0) & (by == 0))
    return np.where(bad, 0.0, out)


def _analytic_grad(x, y):
    r2 = x * x + y * y
    with np.errstate(invalid="ignore", divide="ignore"):
        gx, gy = -y / r2, x / r2
    bad = r2 == 0
    return np.where(bad, 0.0, gx), np.where(bad, 0.0, gy)


def _theta_rates(x, y, dx, mode):
    """Components of ``grad theta`` used by the stencils, shape (6, P, P).

    Rows: x-face (i+1/2, j) normal and tangential parts, y-face (i, j+1/2)
    normal and tangential parts, node x and y parts.  ``analytic`` evaluates
    ``(-y, x) / |x|^2`` at those points; ``increment`` uses exact wrapped
    increments of ``arg`` along grid edges divided by their length.
    """
    P = x.shape[0]
    out = np.zeros((6, P, P))
    if mode == "analytic":
        out[0], out[1] = _analytic_grad(x + 0.5 * dx, y)
        out[3], out[2] = _analytic_grad(x, y + 0.5 * dx)
        out[4], out[5] = _analytic_grad(x, y)
        return out
    ex_ = np.zeros((P, P))
    ey_ = np.zeros((P, P))
    ex_[:-1] = _wrapped_increment(x[:-1], y[:-1], x[1:], y[1:]) / dx
    ey_[:, :-1] = _wrapped_increment(x[:, :-1], y[:, :-1], x[:, 1:], y[:, 1:]) / dx
    out[0], out[2] = ex_, ey_
    out[4, 1:] = 0.5 * (ex_[1:] + ex_[:-1])
    out[5, :, 1:] = 0.5 * (ey_[:, 1:] + ey_[:, :-1])
    out[1, :-1] = 0.5 * (out[5, :-1] + out[5, 1:])
    out[3, :, :-1] = 0.5 * (out[4, :, :-1] + out[4, :, 1:])
    return out


@dataclass
class Grid:
    """Node coordinates (padded by one ghost layer) and boundary-fill plan."""

    cfg: LevelSetConfig
    x: np.ndarray = field(init=False)
    y: np.ndarray = field(init=False)
    active: np.ndarray = field(init=False)

    def __post_init__(self):
        cfg = self.cfg
        n = cfg.n_half
        idx = np.arange(-n - 1, n + 2)
        # axis 0 is the x index i, axis 1 the y index j
        self.x, self.y = np.meshgrid(idx * cfg.dx, idx * cfg.dx, indexing="ij")
        inside = np.zeros_like(self.x, dtype=bool)
        inside[1:-1, 1:-1] = True
        # compare squared integer radii so the mask depends on rho only through
        # which nodes it separates
        ii, jj = np.meshgrid(idx, idx, indexing="ij")
        r2 = (ii.astype(float) ** 2 + jj.astype(float) ** 2)
        self.active = inside & (r2 * cfg.dx ** 2 > cfg.rho ** 2)
        self.theta_rates = _theta_rates(self.x, self.y, cfg.dx, cfg.theta_grad)
        self._build_ghosts()

    @property
    def interior(self) -> tuple[slice, slice]:
        return (slice(1, -1), slice(1, -1))

    @property
    def mask(self) -> np.ndarray:
        """Active mask on the unpadded grid."""
        return self.active[self.interior]

    @property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return self.x[self.interior], self.y[self.interior]

    def _build_ghosts(self):
        P = self.x.shape[0]
        targets, ptr, nbrs, weights, incs = [], [0], [], [], []

        def add(g, sources):
            gi, gj = g
            tot = sum(w for _, w in sources)
            for (ni, nj), w in sources:
                nbrs.append(ni * P + nj)
                weights.append(w / tot)
                incs.append(float(_wrapped_increment(self.x[ni, nj], self.y[ni, nj],
                                                     self.x[gi, gj], self.y[gi, gj])))
            targets.append(gi * P + gj)
            ptr.append(len(nbrs))

        # inner hole, outermost first so outward neighbours are already filled
        hole = [(i, j) for i in range(1, P - 1) for j in range(1, P - 1)
                if not self.active[i, j] and not (self.x[i, j] == 0 and self.y[i, j] == 0)]
        hole.sort(key=lambda g: -(self.x[g] ** 2 + self.y[g] ** 2))
        for g in hole:
            gx, gy = self.x[g], self.y[g]
            r = math.hypot(gx, gy)
            src = []
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    if di == 0 and dj == 0:
                        continue
                    c = (di * gx + dj * gy) / (r * math.hypot(di, dj))
                    if c > 1e-12:
                        src.append(((g[0] + di, g[1] + dj), c))
            add(g, src)
        # outer frame: copy u - theta from the inward neighbour
        for i in range(P):
            for j in range(P):
                if 0 < i < P - 1 and 0 < j < P - 1:
                    continue
                ni = min(max(i, 1), P - 2)
                nj = min(max(j, 1), P - 2)
                add((i, j), [((ni, nj), 1.0)])
        self.ghost_target = np.array(targets, dtype=np.int64)
        self.ghost_ptr = np.array(ptr, dtype=np.int64)
        self.ghost_src = np.array(nbrs, dtype=np.int64)
        self.ghost_w = np.array(weights)
        self.ghost_inc = np.array(incs)


# -- kernels -------------------------------------------------------------------

@njit(**JIT)
def _fill_ghosts(u, target, ptr, src, w, inc):
    flat = u.ravel()
    for g in range(target.size):
        acc = 0.0
        for q in range(ptr[g], ptr[g + 1]):
            acc += w[q] * (flat[src[q]] + inc[q])
        flat[target[g]] = acc


@njit(**JIT)
def _sig(z, scale2):
    # branch-free sigma, exactly 0 at z == 0; the floor only bites for |p| < 1e-150
    return z / math.sqrt(z * z + scale2 + 1e-300)


@njit(**JIT)
def _scale2(a, b, eps, unit):
    s = eps if unit else eps * (abs(a) + abs(b))
    return s * s


@njit(**JIT)
def _square_x(p1, p2, vecs, eps, unit):
    return _sig(p1, _scale2(p1, p2, eps, unit))


@njit(**JIT)
def _square_y(p1, p2, vecs, eps, unit):
    return _sig(p2, _scale2(p1, p2, eps, unit))


@njit(**JIT)
def _square_gamma(p1, p2, vecs, eps, unit):
    return abs(p1) + abs(p2)


@njit(**JIT)
def _diag_sig(p1, p2, eps, unit):
    r = 0.7071067811865476
    q1 = (p1 + p2) * r
    q2 = (p1 - p2) * r
    sc = _scale2(q1, q2, eps, unit)
    return _sig(q1, sc), _sig(q2, sc)


@njit(**JIT)
def _diag_x(p1, p2, vecs, eps, unit):
    s1, s2 = _diag_sig(p1, p2, eps, unit)
    return (s1 + s2) * 0.7071067811865476


@njit(**JIT)
def _diag_y(p1, p2, vecs, eps, unit):
    s1, s2 = _diag_sig(p1, p2, eps, unit)
    return (s1 - s2) * 0.7071067811865476


@njit(**JIT)
def _diag_gamma(p1, p2, vecs, eps, unit):
    return (abs(p1 + p2) + abs(p1 - p2)) * 0.7071067811865476


@njit(**JIT)
def _sector_sum(p1, p2, vecs, eps, unit, c):
    """``sum_j zeta(f_j(p)) c_j`` with ``c_j = vecs[j, c]`` (c = 0, 1) or ``g_j`` (c = 2)."""
    n = vecs.shape[0]
    m1 = -1e300
    m2 = -1e300
    for j in range(n):
        g = vecs[j, 0] * p1 + vecs[j, 1] * p2
        if g > m1:
            m2 = m1
            m1 = g
        elif g > m2:
            m2 = g
    sc = _scale2(p1, p2, eps, unit)
    acc = 0.0
    for j in range(n):
        g = vecs[j, 0] * p1 + vecs[j, 1] * p2
        other = m2 if g == m1 else m1
        w = 0.5 * (_sig(g - other, sc) + 1.0)
        acc += w * (g if c == 2 else vecs[j, c])
    return acc


@njit(**JIT)
def _sector_x(p1, p2, vecs, eps, unit):
    return _sector_sum(p1, p2, vecs, eps, unit, 0)


@njit(**JIT)
def _sector_y(p1, p2, vecs, eps, unit):
    return _sector_sum(p1, p2, vecs, eps, unit, 1)


@njit(**JIT)
def _sector_gamma(p1, p2, vecs, eps, unit):
    return _sector_sum(p1, p2, vecs, eps, unit, 2)


@njit(**JIT)
def _tri_weights(p1, p2, vecs, eps, unit):
    g0 = vecs[0, 0] * p1 + vecs[0, 1] * p2
    g1 = vecs[1, 0] * p1 + vecs[1, 1] * p2
    g2 = vecs[2, 0] * p1 + vecs[2, 1] * p2
    sc = _scale2(p1, p2, eps, unit)
    w0 = 0.5 * (_sig(g0 - max(g1, g2), sc) + 1.0)
    w1 = 0.5 * (_sig(g1 - max(g0, g2), sc) + 1.0)
    w2 = 0.5 * (_sig(g2 - max(g0, g1), sc) + 1.0)
    return w0, w1, w2, g0, g1, g2


@njit(**JIT)
def _tri_x(p1, p2, vecs, eps, unit):
    w0, w1, w2, _, _, _ = _tri_weights(p1, p2, vecs, eps, unit)
    return w0 * vecs[0, 0] + w1 * vecs[1, 0] + w2 * vecs[2, 0]


@njit(**JIT)
def _tri_y(p1, p2, vecs, eps, unit):
    w0, w1, w2, _, _, _ = _tri_weights(p1, p2, vecs, eps, unit)
    return w0 * vecs[0, 1] + w1 * vecs[1, 1] + w2 * vecs[2, 1]


@njit(**JIT)
def _tri_gamma(p1, p2, vecs, eps, unit):
    w0, w1, w2, g0, g1, g2 = _tri_weights(p1, p2, vecs, eps, unit)
    return w0 * g0 + w1 * g1 + w2 * g2


KERNELS = {
    SQUARE: (_square_x, _square_y, _square_gamma),
    DIAGONAL: (_diag_x, _diag_y, _diag_gamma),
    SECTOR: (_sector_x, _sector_y, _sector_gamma),
}


def kernels_for(cfg: "LevelSetConfig"):
    kind = XI_KINDS[cfg.xi_kind]
    if kind == SECTOR and cfg.density.vectors.shape[0] == 3:
        return _tri_x, _tri_y, _tri_gamma
    return KERNELS[kind]


@njit(**JIT)
def _divergence(u, tg, dx, vecs, eps, unit, out, fx, fy, xi_x, xi_y):
    P = u.shape[0]
    inv = 1.0 / dx
    inv4 = 0.25 / dx
    for i in range(0, P - 1):
        for j in range(1, P - 1):
            pn = (u[i + 1, j] - u[i, j]) * inv - tg[0, i, j]
            pt = ((u[i, j + 1] - u[i, j - 1] + u[i + 1, j + 1] - u[i + 1, j - 1]) * inv4
                  - tg[1, i, j])
            fx[i, j] = xi_x(pn, pt, vecs, eps, unit)
    for i in range(1, P - 1):
        for j in range(0, P - 1):
            pn = (u[i, j + 1] - u[i, j]) * inv - tg[2, i, j]
            pt = ((u[i + 1, j] - u[i - 1, j] + u[i + 1, j + 1] - u[i - 1, j + 1]) * inv4
                  - tg[3, i, j])
            fy[i, j] = xi_y(pt, pn, vecs, eps, unit)
    for i in range(1, P - 1):
        for j in range(1, P - 1):
            out[i, j] = (fx[i, j] - fx[i - 1, j] + fy[i, j] - fy[i, j - 1]) * inv


@njit(cache=True)
def _first_nonfinite(u, active):
    # compiled without fastmath so the NaN / inf test is not folded away
    P = u.shape[0]
    for i in range(P):
        for j in range(P):
            if active[i, j] and not np.isfinite(u[i, j]):
                return i * P + j
    return -1


@njit(**JIT)
def _run(u, nsteps, dt, dx, active, tg, target, ptr, src, w, inc,
         vecs, eps, unit, rho_c, U, xi_x, xi_y, gam):
    """Advance ``u`` in place by ``nsteps`` steps of size ``dt``.

    Every padded-interior node is computed; only active ones are written back.
    Returns -1 on success, else the step index that produced a nonfinite value.
    """
    P = u.shape[0]
    div = np.zeros((P, P))
    fx = np.zeros((P, P))
    fy = np.zeros((P, P))
    new = np.empty((P, P))
    inv2 = 0.5 / dx
    for step in range(nsteps):
        _fill_ghosts(u, target, ptr, src, w, inc)
        _divergence(u, tg, dx, vecs, eps, unit, div, fx, fy, xi_x, xi_y)
        for i in range(1, P - 1):
            for j in range(1, P - 1):
                p1 = (u[i + 1, j] - u[i - 1, j]) * inv2 - tg[4, i, j]
                p2 = (u[i, j + 1] - u[i, j - 1]) * inv2 - tg[5, i, j]
                v = u[i, j] + dt * gam(p1, p2, vecs, eps, unit) * (rho_c * div[i, j] + U)
                new[i, j] = v if active[i, j] else u[i, j]
        for i in range(1, P - 1):
            for j in range(1, P - 1):
                u[i, j] = new[i, j]
        if _first_nonfinite(u, active) >= 0:
            return step
    _fill_ghosts(u, target, ptr, src, w, inc)
    return -1


# -- public operations -----------------------------------------------------------

@dataclass
class ScalarField:
    """Level-set values on the unpadded grid; inactive nodes are NaN."""

    values: np.ndarray
    t: float


def theta_gradient(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    if np.any(r2 == 0):
        raise ValueError("grad theta is undefined at the origin")
    return np.stack([-x[..., 1] / r2, x[..., 0] / r2], axis=-1)


def xi_reg(p, cfg: LevelSetConfig) -> np.ndarray:
    """Smoothed ``D gamma~`` at ``p`` (any leading shape)."""
    p = np.asarray(p, dtype=float)
    flat = p.reshape(-1, 2)
    out = np.array([_xi_gamma(a, b, XI_KINDS[cfg.xi_kind], cfg.reflected_vectors, cfg.eps,
                              cfg.unit_smoothing)[:2] for a, b in flat])
    return out.reshape(p.shape)


def gamma_reg(p, cfg: LevelSetConfig) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    flat = p.reshape(-1, 2)
    out = np.array([_xi_gamma(a, b, XI_KINDS[cfg.xi_kind], cfg.reflected_vectors, cfg.eps,
                              cfg.unit_smoothing)[2] for a, b in flat])
    return out.reshape(p.shape[:-1])


class LevelSetSolver:
    """Owns the grid and the padded working array for one configuration."""

    def __init__(self, cfg: LevelSetConfig):
        self.cfg = cfg
        self.grid = Grid(cfg)
        self._kernels = kernels_for(cfg)
        self._vecs = cfg.reflected_vectors

    def initial(self, value: float | None = None) -> np.ndarray:
        u = np.full(self.grid.x.shape, self.cfg.u0 if value is None else value)
        self.apply_bc(u)
        return u

    def apply_bc(self, u: np.ndarray) -> np.ndarray:
        """Fill ghost nodes in place so the normal difference of ``u - theta`` vanishes."""
        g = self.grid
        _fill_ghosts(u, g.ghost_target, g.ghost_ptr, g.ghost_src, g.ghost_w, g.ghost_inc)
        return u

    def divergence_term(self, u: np.ndarray) -> np.ndarray:
        """Discrete ``div xi~(grad(u - theta))`` on the padded grid (0 off ``W``)."""
        g = self.grid
        out = np.zeros_like(u)
        cfg = self.cfg
        _divergence(u, g.theta_rates, cfg.dx, self._vecs, cfg.eps, cfg.unit_smoothing, out,
                    np.zeros_like(u), np.zeros_like(u), *self._kernels[:2])
        out[~g.active] = 0.0
        return out

    def gradient(self, u: np.ndarray) -> np.ndarray:
        """Central-difference ``grad(u - theta)`` at interior nodes."""
        g = self.grid
        P = u.shape[0]
        out = np.full((P, P, 2), np.nan)
        dx = self.cfg.dx
        tg = g.theta_rates
        out[1:-1, 1:-1, 0] = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * dx) - tg[4, 1:-1, 1:-1]
        out[1:-1, 1:-1, 1] = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * dx) - tg[5, 1:-1, 1:-1]
        return out

    def advance(self, u: np.ndarray, nsteps: int, dt: float | None = None) -> np.ndarray:
        """``nsteps`` explicit steps in place; ghosts are refreshed before each."""
        g, cfg = self.grid, self.cfg
        bad = _run(u, int(nsteps), cfg.dt if dt is None else dt, cfg.dx, g.active,
                   g.theta_rates, g.ghost_target, g.ghost_ptr, g.ghost_src, g.ghost_w, g.ghost_inc,
                   self._vecs, cfg.eps, cfg.unit_smoothing, cfg.params.rho_c, cfg.params.U,
                   *self._kernels)
        if bad >= 0:
            i, j = np.argwhere(g.active & ~np.isfinite(u))[0]
            raise LevelSetError(f"nonfinite update in step {bad} at "
                                f"x=({g.x[i, j]:.6g}, {g.y[i, j]:.6g})")
        return u

    def snapshot(self, u: np.ndarray, t: float) -> ScalarField:
        vals = u[self.grid.interior].copy()
        vals[~self.grid.mask] = np.nan
        return ScalarField(vals, t)

    def solve(self, t_end: float, sample_times=None, u0: np.ndarray | None = None):
        """Snapshots at ``sample_times`` (default ``[t_end]``).

        Steps have the fixed size ``dt``; the step before each sample is
        shortened to land on it.
        """
        if t_end < 0:
            raise ValueError("t_end must be nonnegative")
        samples = [t_end] if sample_times is None else sorted(float(s) for s in sample_times)
        u = self.initial() if u0 is None else u0.copy()
        dt = self.cfg.dt
        t = 0.0
        out = []
        for ts in samples:
            n_full = int(math.floor((ts - t) / dt * (1 + 1e-12)))
            if n_full > 0:
                self.advance(u, n_full)
            t_now = t + n_full * dt
            rest = ts - t_now
            if rest > 1e-9 * dt:
                self.advance(u, 1, rest)
            t = ts
            out.append(self.snapshot(u, ts))
        return out


def unwrapped_phase(field: ScalarField, grid: Grid) -> np.ndarray:
    """``u - arg x`` with the principal ``arg``; only defined mod 2 pi."""
    x, y = grid.coords
    return field.values - np.arctan2(y, x)


def extract_contour(field: ScalarField, grid: Grid) -> list[np.ndarray]:
    """Polylines of ``{u - theta = 0 mod 2 pi}`` in physical coordinates.

    Traced as the zero set of ``sin(u - theta)`` restricted to where
    ``cos(u - theta) > 0``, which avoids the 0/2 pi seam altogether.
    """
    from scipy.ndimage import map_coordinates
    from skimage.measure import find_contours

    phase = unwrapped_phase(field, grid)
    mask = grid.mask
    s = np.where(mask, np.sin(phase), 0.0)
    c = np.where(mask, np.cos(phase), -1.0)
    n = grid.cfg.n_half
    dx = grid.cfg.dx
    lines = []
    for raw in find_contours(s, 0.0, mask=mask):
        keep = map_coordinates(c, raw.T, order=1) > 0
        runs = np.split(np.arange(len(raw)), np.flatnonzero(np.diff(keep.astype(int))) + 1)
        for r in runs:
            if keep[r[0]] and len(r) > 1:
                lines.append((raw[r] - n) * dx)
    return lines
