"""Grids, stencils and discrete norms for the chamber and its flexible wall.

Layout
------
The chamber is the unit square (``reduced-2D``) or unit cube (``full-3D``)
sampled with ``n`` nodes per axis, spacing ``h = 1/(n-1)``.  Full-grid
arrays are indexed ``[y, x]`` or ``[z, y, x]``; the flexible wall is the
face whose first index is 0.  Every other boundary node (wall corners and
edges included) belongs to the rigid Dirichlet part.

The wave unknowns are the nodes not on the rigid part.  On the wall the
Laplacian uses the ghost value ``u[-1] = u[1] + 2 h w_t`` so that the
outward normal derivative equals the wall velocity.  The wall carries a
clamped beam (2-D) or plate (3-D); its operator is
``B = D^T diag(c) D`` where ``D`` is the ghost-reflected discrete
Laplacian evaluated at every wall node and ``c`` the trapezoid weights.
In 1-D this is exactly the 5-point fourth difference with the
``w[-1] = w[1]`` reflection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

MODES = ("reduced-2D", "full-3D")
MIN_NODES = 8


class GeometryError(ValueError):
    pass


def _trap_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _second_diff_dirichlet(n: int, h: float) -> sp.csr_matrix:
    """Second difference on nodes ``1..n-2`` with zero end values."""
    k = n - 2
    return sp.diags([np.ones(k - 1), -2.0 * np.ones(k), np.ones(k - 1)], [-1, 0, 1], format="csr") / h**2


def _second_diff_ghost(n: int, h: float) -> sp.csr_matrix:
    """Second difference on nodes ``0..n-2``; reflecting ghost at node 0, zero at ``n-1``."""
    k = n - 1
    m = sp.diags([np.ones(k - 1), -2.0 * np.ones(k), np.ones(k - 1)], [-1, 0, 1], format="lil")
    m[0, 1] = 2.0
    return m.tocsr() / h**2


def _clamped_laplacian_1d(n: int, h: float) -> sp.csr_matrix:
    """Map interior values ``w[1..n-2]`` to second differences at all ``n`` nodes.

    Ends carry ``w = 0`` and the clamped reflection ``w[-1] = w[1]``.
    """
    rows, cols, vals = [], [], []
    for i in range(n):
        for j, c in ((i - 1, 1.0), (i, -2.0), (i + 1, 1.0)):
            if j == -1:
                j = 1
            elif j == n:
                j = n - 2
            if 1 <= j <= n - 2:
                rows.append(i)
                cols.append(j - 1)
                vals.append(c)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n - 2)) / h**2


def _injection(n: int) -> sp.csr_matrix:
    """Embed interior values ``w[1..n-2]`` into an ``n``-vector with zero ends."""
    return sp.csr_matrix((np.ones(n - 2), (np.arange(1, n - 1), np.arange(n - 2))), shape=(n, n - 2))


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


@dataclass(frozen=True, eq=False)
class Geometry:
    """Discrete chamber/wall geometry with assembled operators.

    Attributes
    ----------
    mode : str
        ``"reduced-2D"`` or ``"full-3D"``.
    n : int
        Nodes per axis of the chamber grid.
    h : float
        Grid spacing, shared by chamber and wall.
    """

    mode: str
    n: int
    h: float
    dim: int
    lap: sp.csr_matrix = field(repr=False)
    bih: sp.csr_matrix = field(repr=False)
    weights_u: np.ndarray = field(repr=False)
    weights_w: np.ndarray = field(repr=False)
    weights_omega: np.ndarray = field(repr=False)
    weights_gamma: np.ndarray = field(repr=False)
    u_index: np.ndarray = field(repr=False)
    w_index: np.ndarray = field(repr=False)
    gamma_to_u: np.ndarray = field(repr=False)

    # -- shapes ---------------------------------------------------------
    @property
    def omega_shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def gamma_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1)

    @property
    def h_omega(self) -> float:
        return self.h

    @property
    def h_gamma(self) -> float:
        return self.h

    @property
    def n_u(self) -> int:
        return self.u_index.size

    @property
    def n_w(self) -> int:
        return self.w_index.size

    @property
    def coupling(self) -> float:
        """Coefficient of the wall velocity in the wave rows on the wall (``2/h``)."""
        return 2.0 / self.h

    @property
    def area_omega(self) -> float:
        return float(self.weights_omega.sum())

    @property
    def area_gamma(self) -> float:
        return float(self.weights_gamma.sum())

    # -- assembled symmetric forms -------------------------------------------
    @cached_property
    def stiffness_u(self) -> sp.csr_matrix:
        """``A = W (-lap)``: symmetric positive definite, ``u^T A u = ||grad u||^2``."""
        return sp.csr_matrix(sp.diags(self.weights_u) @ (-self.lap))

    @cached_property
    def stiffness_w(self) -> sp.csr_matrix:
        """``W_Gamma bih``: symmetric positive definite, ``w^T B w = |Delta w|^2``."""
        return sp.csr_matrix(sp.diags(self.weights_w) @ self.bih)

    @cached_property
    def trace_mass(self) -> sp.csr_matrix:
        """Quadratic form ``u -> |gamma u|_2^2`` on the wave unknowns."""
        d = np.zeros(self.n_u)
        d[self.gamma_to_u] = self.weights_w
        return sp.diags(d, format="csr")

    # -- field conversion --------------------------------------------------
    def restrict_u(self, field: np.ndarray) -> np.ndarray:
        field = np.asarray(field, dtype=float)
        if field.shape != self.omega_shape:
            raise GeometryError(f"field shape {field.shape} != {self.omega_shape}")
        return field.ravel()[self.u_index].copy()

    def extend_u(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_u,):
            raise GeometryError(f"vector shape {vec.shape} != ({self.n_u},)")
        out = np.zeros(self.n**self.dim)
        out[self.u_index] = vec
        return out.reshape(self.omega_shape)

    def restrict_w(self, field: np.ndarray) -> np.ndarray:
        field = np.asarray(field, dtype=float)
        if field.shape != self.gamma_shape:
            raise GeometryError(f"boundary field shape {field.shape} != {self.gamma_shape}")
        return field.ravel()[self.w_index].copy()

    def extend_w(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_w,):
            raise GeometryError(f"vector shape {vec.shape} != ({self.n_w},)")
        out = np.zeros(self.n ** (self.dim - 1))
        out[self.w_index] = vec
        return out.reshape(self.gamma_shape)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates of the chamber grid, ordered like the array axes."""
        x = np.linspace(0.0, 1.0, self.n)
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    def gamma_coords(self) -> tuple[np.ndarray, ...]:
        x = np.linspace(0.0, 1.0, self.n)
        if self.dim == 2:
            return (x,)
        return np.meshgrid(x, x, indexing="ij")

    def cfl_limit(self) -> float:
        """Leapfrog stability bound ``2 / sqrt(rho)`` from Gershgorin spectral radii."""
        rho_u = float(np.abs(self.lap).sum(axis=1).max())
        rho_w = float(np.abs(self.bih).sum(axis=1).max())
        return 2.0 / np.sqrt(max(rho_u, rho_w))

    def default_dt(self) -> float:
        return 0.25 * min(self.h, self.h**2 / 2.0)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "n": self.n, "h": self.h}


def build_geometry(mode: str = "reduced-2D", n: int | tuple[int, ...] = 64) -> Geometry:
    """Assemble grids, operators and quadrature weights.

    ``n`` may be an int or a tuple of per-axis node counts; the counts must
    agree because a single spacing is shared by chamber and wall.
    """
    if mode not in MODES:
        raise GeometryError(f"unknown geometry mode {mode!r}; expected one of {MODES}")
    dim = 2 if mode == "reduced-2D" else 3
    if not np.isscalar(n):
        dims = tuple(int(k) for k in n)
        if len(dims) != dim:
            raise GeometryError(f"{mode} expects {dim} grid dimensions, got {len(dims)}")
        if len(set(dims)) != 1:
            raise GeometryError(f"grid dimensions {dims} must be equal (uniform spacing)")
        n = dims[0]
    n = int(n)
    if n < MIN_NODES:
        raise GeometryError(f"grid size {n} < {MIN_NODES} nodes per axis")
    h = 1.0 / (n - 1)

    lz = _second_diff_ghost(n, h)
    ld = _second_diff_dirichlet(n, h)
    iz = sp.identity(n - 1, format="csr")
    idn = sp.identity(n - 2, format="csr")
    wz = _trap_weights(n, h)[: n - 1]
    wd = np.full(n - 2, h)

    if dim == 2:
        lap = _kron_all([lz, idn]) + _kron_all([iz, ld])
        weights_u = np.kron(wz, wd)
    else:
        lap = _kron_all([lz, idn, idn]) + _kron_all([iz, ld, idn]) + _kron_all([iz, idn, ld])
        weights_u = np.kron(np.kron(wz, wd), wd)

    full = np.zeros((n,) * dim, dtype=bool)
    interior = (slice(0, n - 1),) + (slice(1, n - 1),) * (dim - 1)
    full[interior] = True
    u_index = np.flatnonzero(full)

    gdim = dim - 1
    d1 = _clamped_laplacian_1d(n, h)
    e1 = _injection(n)
    cg = _trap_weights(n, h)
    if gdim == 1:
        dmat = d1
        cw = cg
    else:
        dmat = _kron_all([d1, e1]) + _kron_all([e1, d1])
        cw = np.kron(cg, cg)
    bform = sp.csr_matrix(dmat.T @ sp.diags(cw) @ dmat)
    weights_w = np.full((n - 2) ** gdim, h**gdim)
    bih = sp.csr_matrix(sp.diags(1.0 / weights_w) @ bform)

    gfull = np.zeros((n,) * gdim, dtype=bool)
    gfull[(slice(1, n - 1),) * gdim] = True
    w_index = np.flatnonzero(gfull)
    gamma_to_u = np.arange((n - 2) ** gdim)

    weights_omega = _trap_weights(n, h)
    for _ in range(dim - 1):
        weights_omega = np.multiply.outer(weights_omega, _trap_weights(n, h))
    weights_gamma = cg if gdim == 1 else np.multiply.outer(cg, cg)

    lap = sp.csr_matrix(lap)
    lap.sort_indices()
    bih.sort_indices()
    return Geometry(
        mode=mode,
        n=n,
        h=h,
        dim=dim,
        lap=lap,
        bih=bih,
        weights_u=weights_u,
        weights_w=weights_w,
        weights_omega=weights_omega,
        weights_gamma=weights_gamma,
        u_index=u_index,
        w_index=w_index,
        gamma_to_u=gamma_to_u,
    )


def dirichlet_segment(n: int) -> tuple[sp.csr_matrix, np.ndarray]:
    """Stiffness form and weights for ``-u''`` on ``[0, 1]`` with zero ends.

    Used by the embedding-constant sanity mode.
    """
    h = 1.0 / (n - 1)
    weights = np.full(n - 2, h)
    return sp.csr_matrix(sp.diags(weights) @ (-_second_diff_dirichlet(n, h))), weights


# -- stencil application on full-grid fields ----------------------------------


def apply_laplacian(u: np.ndarray, w_t: np.ndarray, geom: Geometry) -> np.ndarray:
    """Discrete Laplacian with the Neumann coupling ``d_nu u = w_t`` on the wall.

    Rigid-wall rows are returned as zero.
    """
    uv = geom.restrict_u(u)
    zv = geom.restrict_w(w_t)
    out = geom.lap @ uv
    out[geom.gamma_to_u] += geom.coupling * zv
    return geom.extend_u(out)


def apply_biharmonic(w: np.ndarray, geom: Geometry) -> np.ndarray:
    """Clamped fourth-order operator on the wall; zero on the wall boundary."""
    return geom.extend_w(geom.bih @ geom.restrict_w(w))


# -- norms ---------------------------------------------------------------


def l2_omega(u: np.ndarray, geom: Geometry) -> float:
    u = np.asarray(u, dtype=float)
    if u.shape != geom.omega_shape:
        raise GeometryError(f"field shape {u.shape} != {geom.omega_shape}")
    return float(np.sqrt(np.sum(geom.weights_omega * u * u)))


def l2_gamma(w: np.ndarray, geom: Geometry) -> float:
    w = np.asarray(w, dtype=float)
    if w.shape != geom.gamma_shape:
        raise GeometryError(f"boundary field shape {w.shape} != {geom.gamma_shape}")
    return float(np.sqrt(np.sum(geom.weights_gamma * w * w)))


def lp_omega(u: np.ndarray, exponent: float, geom: Geometry) -> float:
    """``||u||_exponent`` with trapezoid quadrature."""
    u = np.asarray(u, dtype=float)
    if u.shape != geom.omega_shape:
        raise GeometryError(f"field shape {u.shape} != {geom.omega_shape}")
    return float(np.sum(geom.weights_omega * np.abs(u) ** exponent) ** (1.0 / exponent))


def lq_gamma(w: np.ndarray, exponent: float, geom: Geometry) -> float:
    w = np.asarray(w, dtype=float)
    if w.shape != geom.gamma_shape:
        raise GeometryError(f"boundary field shape {w.shape} != {geom.gamma_shape}")
    return float(np.sum(geom.weights_gamma * np.abs(w) ** exponent) ** (1.0 / exponent))


def trace_gamma(u: np.ndarray, geom: Geometry) -> np.ndarray:
    """Restriction of a chamber field to the wall."""
    u = np.asarray(u, dtype=float)
    if u.shape != geom.omega_shape:
        raise GeometryError(f"field shape {u.shape} != {geom.omega_shape}")
    return u[0].copy()


def h1_semi(u: np.ndarray, geom: Geometry) -> float:
    """``||grad u||_2`` from edge differences.

    Each edge difference is weighted by the edge length times the
    trapezoid weights across it; along the wall this gives the one-sided
    ``(u[1] - u[0]) / h`` normal difference matching the ghost rows.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != geom.omega_shape:
        raise GeometryError(f"field shape {u.shape} != {geom.omega_shape}")
    h = geom.h
    tw = _trap_weights(geom.n, h)
    total = 0.0
    for ax in range(geom.dim):
        du = np.diff(u, axis=ax) / h
        wts = np.ones(du.shape) * h
        for other in range(geom.dim):
            if other != ax:
                shape = [1] * geom.dim
                shape[other] = geom.n
                wts = wts * tw.reshape(shape)
        total += float(np.sum(wts * du * du))
    return float(np.sqrt(total))


def h2_semi(w: np.ndarray, geom: Geometry) -> float:
    """``|Delta w|_2`` on the wall using clamped ghost reflection and trapezoid weights."""
    w = np.asarray(w, dtype=float)
    if w.shape != geom.gamma_shape:
        raise GeometryError(f"boundary field shape {w.shape} != {geom.gamma_shape}")
    h = geom.h
    w = w.copy()
    # clamped fields vanish on the wall boundary
    for ax in range(w.ndim):
        idx = [slice(None)] * w.ndim
        idx[ax] = 0
        w[tuple(idx)] = 0.0
        idx[ax] = -1
        w[tuple(idx)] = 0.0
    lap = np.zeros_like(w)
    for ax in range(w.ndim):
        pad = np.pad(w, [(1, 1) if a == ax else (0, 0) for a in range(w.ndim)], mode="reflect")
        lo = [slice(None)] * w.ndim
        hi = [slice(None)] * w.ndim
        mid = [slice(None)] * w.ndim
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        mid[ax] = slice(1, -1)
        lap += (pad[tuple(lo)] - 2.0 * pad[tuple(mid)] + pad[tuple(hi)]) / h**2
    return float(np.sqrt(np.sum(geom.weights_gamma * lap * lap)))
