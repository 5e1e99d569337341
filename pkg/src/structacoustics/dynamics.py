"""Time integration of the coupled damped wave-plate system and its energy ledger.

Scheme
------
Velocity Verlet on the displacements.  The first half kick is explicit
(it only needs the known velocities).  The second half kick is implicit
in the damping and in the skew wave/wall coupling::

    v^{n+1} + dt/2 g1(v^{n+1}) - dt/2 (2/h) z^{n+1} = v^{n+1/2} + dt/2 (lap u^{n+1} + f(u^{n+1}))
    z^{n+1} + dt/2 g2(z^{n+1}) + dt/2 v^{n+1}|_wall = z^{n+1/2} + dt/2 (-bih w^{n+1} + h(w^{n+1}))

Away from the wall this is one monotone scalar equation per node.  On the
wall each node couples a wave and a plate velocity; eliminating the plate
velocity leaves one increasing scalar equation.  The coupling work then
cancels to rounding, so the energy identity is second-order accurate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as K
from .geometry import Geometry
from .nonlinearity import DampingProfile, ModelParams, eval_f, eval_g, eval_h
from .well import energy_terms

log = logging.getLogger(__name__)


class CFLError(ValueError):
    pass


class InstabilityError(RuntimeError):
    def __init__(self, message: str, last_good_time: float, ledger: Optional["EnergyLedger"] = None):
        super().__init__(message)
        self.last_good_time = last_good_time
        self.ledger = ledger


@dataclass
class State:
    """Displacements and velocities on full grids at time ``t``."""

    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    z: np.ndarray

    @classmethod
    def zeros(cls, geom: Geometry, t: float = 0.0) -> "State":
        return cls(t, np.zeros(geom.omega_shape), np.zeros(geom.omega_shape),
                   np.zeros(geom.gamma_shape), np.zeros(geom.gamma_shape))

    def copy(self) -> "State":
        return State(self.t, self.u.copy(), self.v.copy(), self.w.copy(), self.z.copy())


@dataclass
class EnergyLedger:
    """Per-output-time energy bookkeeping.

    ``calE + D - calE[0]`` is the energy-identity defect; ``residual``
    stores it relative to ``max(calE[0], 1e-14)``.
    """

    t: list = field(default_factory=list)
    E: list = field(default_factory=list)
    calE: list = field(default_factory=list)
    J: list = field(default_factory=list)
    D: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    label: list = field(default_factory=list)
    norm_X: list = field(default_factory=list)
    nehari: list = field(default_factory=list)
    dt: float = float("nan")

    COLUMNS = ("t", "E", "calE", "J", "D", "residual", "label")

    def __len__(self) -> int:
        return len(self.t)

    def append(self, t, E, calE, J, D, label="", norm_X=float("nan"), nehari=float("nan")) -> None:
        self.t.append(float(t))
        self.E.append(float(E))
        self.calE.append(float(calE))
        self.J.append(float(J))
        self.D.append(float(D))
        scale = max(self.calE[0], 1e-14)
        self.residual.append((self.calE[-1] + self.D[-1] - self.calE[0]) / scale)
        self.label.append(label)
        self.norm_X.append(float(norm_X))
        self.nehari.append(float(nehari))

    def array(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        for i in range(len(self)):
            yield tuple(getattr(self, c)[i] for c in self.COLUMNS)


def energy_identity_residual(ledger: EnergyLedger, i: int) -> float:
    """Relative defect ``(calE(t_i) + D(t_i) - calE(0)) / max(calE(0), 1e-14)``."""
    return (ledger.calE[i] + ledger.D[i] - ledger.calE[0]) / max(ledger.calE[0], 1e-14)


def solve_damping_scalar(a: float, lam: float, profile: DampingProfile) -> float:
    """Return the unique ``v`` with ``v + lam g(v) = a``."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    return float(K.solve_scalar(float(a), float(lam), profile.coeff, profile.near_exp, profile.far_exp))


def dissipation_D(trajectory: list, params: ModelParams, geom: Geometry) -> np.ndarray:
    """Trapezoid accumulation of the damping power over a list of states."""
    if not trajectory:
        return np.zeros(0)
    power = np.array([
        np.sum(geom.weights_omega * eval_g(s.v, params.damping_u) * s.v)
        + np.sum(geom.weights_gamma * eval_g(s.z, params.damping_w) * s.z)
        for s in trajectory
    ])
    t = np.array([s.t for s in trajectory])
    D = np.zeros(len(trajectory))
    D[1:] = np.cumsum(0.5 * np.diff(t) * (power[1:] + power[:-1]))
    return D


class Integrator:
    """Holds packed unknown vectors and advances them with the compiled kernel."""

    def __init__(self, state: State, params: ModelParams, geom: Geometry, dt: Optional[float] = None):
        self.params = params
        self.geom = geom
        self.dt = geom.default_dt() if dt is None else float(dt)
        limit = geom.cfl_limit()
        if not 0 < self.dt <= limit:
            raise CFLError(f"time step {self.dt:.3e} violates the stability bound {limit:.3e}")
        self.t0 = float(state.t)
        self.t = self.t0
        self.nstep = 0
        self.u = geom.restrict_u(state.u)
        self.v = geom.restrict_u(state.v)
        self.w = geom.restrict_w(state.w)
        self.z = geom.restrict_w(state.z)
        self.lapu = geom.lap @ self.u
        self.bw = geom.bih @ self.w
        self.fu = np.asarray(eval_f(self.u, params), dtype=float)
        self.hw = np.asarray(eval_h(self.w, params), dtype=float)
        self.acc = np.zeros(1)
        self.is_gam = np.zeros(geom.n_u, dtype=np.bool_)
        self.is_gam[geom.gamma_to_u] = True
        self.gam = geom.gamma_to_u.astype(np.int64)
        lap, bih = geom.lap, geom.bih
        self._ops = (
            lap.indptr.astype(np.int64), lap.indices.astype(np.int64), lap.data,
            bih.indptr.astype(np.int64), bih.indices.astype(np.int64), bih.data,
        )

    @property
    def D(self) -> float:
        return float(self.acc[0])

    def advance(self, nsteps: int) -> None:
        if nsteps <= 0:
            return
        p, g = self.params, self.geom
        du, dw = p.damping_u, p.damping_w
        K.advance(
            int(nsteps), self.dt,
            self.u, self.v, self.w, self.z,
            self.lapu, self.fu, self.bw, self.hw,
            *self._ops,
            self.gam, self.is_gam, g.coupling, g.weights_u, g.weights_w,
            float(p.p), float(p.source_scale_f), float(p.q), float(p.source_scale_h),
            du.coeff, du.near_exp, du.far_exp, dw.coeff, dw.near_exp, dw.far_exp,
            self.acc,
        )
        self.nstep += nsteps
        self.t = self.t0 + self.nstep * self.dt

    def finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all()
                    and np.isfinite(self.w).all() and np.isfinite(self.z).all())

    def terms(self) -> dict:
        return energy_terms(self.u, self.v, self.w, self.z, self.geom, self.params, lapu=self.lapu, bw=self.bw)

    def state(self) -> State:
        g = self.geom
        return State(self.t, g.extend_u(self.u), g.extend_u(self.v), g.extend_w(self.w), g.extend_w(self.z))


def step(state: State, params: ModelParams, geom: Geometry, dt: float) -> State:
    """One time step of size ``dt`` from ``state``."""
    integ = Integrator(state, params, geom, dt)
    integ.advance(1)
    if not integ.finite():
        raise InstabilityError("non-finite field values after one step", state.t)
    return integ.state()


def simulate(
    state0: State,
    params: ModelParams,
    geom: Geometry,
    t_end: float,
    *,
    dt: Optional[float] = None,
    output_dt: Optional[float] = None,
    stride: Optional[int] = None,
    snapshot_every: int = 0,
    classify: Optional[Callable[[np.ndarray, np.ndarray, dict], tuple]] = None,
    residual_tol: float = 1e-3,
) -> tuple[list, EnergyLedger]:
    """Integrate to ``t_end`` and record the ledger every ``stride`` steps.

    Parameters
    ----------
    output_dt, stride
        Ledger spacing, either as a time (rounded to whole steps) or a step
        count.  Defaults to about 200 rows.
    snapshot_every
        Store a full :class:`State` every this many ledger rows (0: only
        first and last).
    classify
        Callback ``(u_vec, w_vec, terms) -> (label, norm_X, nehari)``.
    residual_tol
        Abort with :class:`InstabilityError` if ``calE`` grows by more than
        this (relative) between rows.
    """
    integ = Integrator(state0, params, geom, dt)
    nsteps_total = int(round((t_end - state0.t) / integ.dt))
    if stride is None:
        if output_dt is not None:
            stride = max(1, int(round(output_dt / integ.dt)))
        else:
            stride = max(1, nsteps_total // 200)
    ledger = EnergyLedger(dt=integ.dt)
    snaps: list = []

    def record():
        tm = integ.terms()
        label, nx, neh = ("", float("nan"), float("nan"))
        if classify is not None:
            label, nx, neh = classify(integ.u, integ.w, tm)
        ledger.append(integ.t, tm["E"], tm["calE"], tm["J"], integ.D, label, nx, neh)

    record()
    snaps.append(integ.state())
    scale = max(ledger.calE[0], 1e-14)
    done = 0
    row = 0
    while done < nsteps_total:
        k = min(stride, nsteps_total - done)
        integ.advance(k)
        done += k
        row += 1
        if not integ.finite():
            raise InstabilityError(f"non-finite values near t={integ.t:.6g}", ledger.t[-1], ledger)
        record()
        if ledger.calE[-1] - ledger.calE[-2] > residual_tol * scale:
            raise InstabilityError(
                f"total energy increased by {(ledger.calE[-1] - ledger.calE[-2]) / scale:.3e} (relative)"
                f" at t={integ.t:.6g}", ledger.t[-2], ledger)
        if snapshot_every and row % snapshot_every == 0 and done < nsteps_total:
            snaps.append(integ.state())
    if len(snaps) == 1 or snaps[-1].t != integ.t:
        snaps.append(integ.state())
    log.debug("simulated %d steps, dt=%.3e", nsteps_total, integ.dt)
    return snaps, ledger
