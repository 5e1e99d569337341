"""Decay-rate machinery: concave damping majorants, stabilization constants,
the comparison ODE and rate fits on energy ledgers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .geometry import Geometry
from .nonlinearity import DampingProfile

log = logging.getLogger(__name__)

NOISE_FLOOR = 1e-14
_DENSE_LIMIT = 1500


# -- majorants -------------------------------------------------------------


class Majorant(NamedTuple):
    """Concave power ``phi(s) = coeff * s**exponent``."""

    coeff: float
    exponent: float

    def __call__(self, s):
        return self.coeff * np.asarray(s, dtype=float) ** self.exponent


def build_phi(profile: DampingProfile) -> Majorant:
    """Concave majorant with ``phi(g(s) s) >= g(s)^2 + s^2`` on ``|s| < 1``.

    For near-origin exponent ``k >= 1`` the exponent is ``2/(k+1)``; for
    sublinear ``k < 1`` it is ``2k/(k+1)``.  The coefficient is
    ``c_lo^(-exponent) (1 + c_hi^2)`` in both cases.
    """
    k = float(profile.near_exp)
    c_lo, c_hi = profile.near_bounds
    expo = 2.0 / (k + 1.0) if k >= 1.0 else 2.0 * k / (k + 1.0)
    return Majorant(c_lo ** (-expo) * (1.0 + c_hi**2), expo)


@dataclass
class DecayProfile:
    """Exponents and coefficients of ``Phi = phi_1 + phi_2 + id`` and the predicted branch."""

    nu1: float
    nu2: float
    C1: float
    C2: float
    beta: float
    b: Optional[float]
    branch: str

    def Phi(self, s):
        s = np.asarray(s, dtype=float)
        return self.C1 * s**self.nu1 + self.C2 * s**self.nu2 + s

    def Phi_tilde(self, C_tilde: float) -> "PowerSum":
        return PowerSum(((C_tilde * self.C1, self.nu1), (C_tilde * self.C2, self.nu2), (C_tilde, 1.0)))

    def to_dict(self) -> dict:
        return asdict(self)


def beta_and_b(profile_u: DampingProfile, profile_w: DampingProfile) -> DecayProfile:
    """``beta = max(1/nu_i)``; exponential branch iff both majorants are linear."""
    p1, p2 = build_phi(profile_u), build_phi(profile_w)
    beta = max(1.0 / p1.exponent, 1.0 / p2.exponent)
    if p1.exponent == 1.0 and p2.exponent == 1.0:
        return DecayProfile(p1.exponent, p2.exponent, p1.coeff, p2.coeff, 1.0, None, "exponential")
    return DecayProfile(p1.exponent, p2.exponent, p1.coeff, p2.coeff, beta, 1.0 / (beta - 1.0), "algebraic")


@dataclass(frozen=True)
class PowerSum:
    """``s -> sum(coef * s**expo)``; concave and increasing for exponents in (0, 1]."""

    terms: tuple

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, e in self.terms:
            out = out + c * s**e
        return out if out.ndim else float(out)

    @property
    def linear_coeff(self) -> Optional[float]:
        if all(e == 1.0 for _, e in self.terms):
            return float(sum(c for c, _ in self.terms))
        return None


# -- inversions ------------------------------------------------------------


def _bisect_increasing(fun: Callable[[float], float], target: float, hi: float) -> float:
    lo = 0.0
    while fun(hi) < target:
        hi *= 2.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fun(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi if abs(fun(hi) - target) <= abs(fun(lo) - target) else lo


def invert_I_plus_Phi(s: float, Phi_tilde: Callable) -> float:
    """Unique ``lam >= 0`` with ``lam + Phi_tilde(lam) = s``."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s == 0.0:
        return 0.0
    lin = getattr(Phi_tilde, "linear_coeff", None)
    if lin is not None:
        return s / (1.0 + lin)
    return _bisect_increasing(lambda x: x + float(Phi_tilde(x)), s, s)


def invert_Phi(s: float, Phi_tilde: Callable) -> float:
    """Unique ``lam >= 0`` with ``Phi_tilde(lam) = s``."""
    if s <= 0.0:
        return 0.0
    return _bisect_increasing(lambda x: float(Phi_tilde(x)), s, max(s, 1.0))


# -- comparison ODE --------------------------------------------------------


def sigma_exponential(t, E0: float, C: float):
    """Closed form for ``Phi_tilde(s) = C s``: ``E0 exp(-t / (1 + C))``."""
    return E0 * np.exp(-np.asarray(t, dtype=float) / (1.0 + C))


def sigma_tilde(t, C0: float, beta: float, t0: float, sigma_t0: float):
    """Algebraic envelope ``[C0 (beta-1)(t-t0) + sigma(t0)^(1-beta)]^(-1/(beta-1))``."""
    t = np.asarray(t, dtype=float)
    return (C0 * (beta - 1.0) * (t - t0) + sigma_t0 ** (1.0 - beta)) ** (-1.0 / (beta - 1.0))


def fit_C0(Phi_tilde: Callable, beta: float, n: int = 2000) -> float:
    """Largest sampled ``C0`` with ``(I + Phi_tilde)^{-1}(s) >= C0 s^beta`` for ``lam in (0, 1]``."""
    lam = np.logspace(-12, 0, n)
    s = lam + np.asarray(Phi_tilde(lam))
    return float(np.min(lam / s**beta))


@dataclass
class DecayODESolution:
    t: np.ndarray
    sigma: np.ndarray
    n_steps: int
    self_consistency: float


def _rk4(rhs, y0: float, t_out: np.ndarray, n_sub: int) -> np.ndarray:
    out = np.empty_like(t_out)
    out[0] = y = y0
    for i in range(1, t_out.size):
        h = (t_out[i] - t_out[i - 1]) / n_sub
        for _ in range(n_sub):
            k1 = rhs(y)
            k2 = rhs(max(y - 0.5 * h * k1, 0.0))
            k3 = rhs(max(y - 0.5 * h * k2, 0.0))
            k4 = rhs(max(y - h * k3, 0.0))
            y = y - h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        out[i] = y
    return out


def solve_decay_ode(E0: float, Phi_tilde: Callable, t_end: float, *, n_out: int = 201,
                    rtol: float = 1e-8, max_halvings: int = 14) -> DecayODESolution:
    """Integrate ``sigma' = -(I + Phi_tilde)^{-1} sigma`` with ``sigma(0) = E0``.

    Classical RK4; the substep count doubles until two successive
    resolutions agree to ``rtol`` (relative) at every output time.
    """
    t = np.linspace(0.0, t_end, n_out)
    if E0 == 0.0:
        return DecayODESolution(t, np.zeros_like(t), 0, 0.0)

    def rhs(y):
        return invert_I_plus_Phi(y, Phi_tilde) if y > 0.0 else 0.0

    n_sub = 1
    prev = _rk4(rhs, E0, t, n_sub)
    err = math.inf
    for _ in range(max_halvings):
        n_sub *= 2
        cur = _rk4(rhs, E0, t, n_sub)
        err = float(np.max(np.abs(cur - prev) / np.maximum(np.abs(cur), 1e-300)))
        prev = cur
        if err <= rtol:
            break
    else:
        log.warning("decay ODE self-consistency %.2e above %.0e", err, rtol)
    return DecayODESolution(t, prev, n_sub * (n_out - 1), err)


# -- stabilization constants -----------------------------------------------


def _extreme_gen_eig(A: sp.spmatrix, M: sp.spmatrix, largest: bool) -> float:
    """Extreme eigenvalue of the symmetric pencil ``A x = mu M x`` (``M`` positive definite)."""
    n = A.shape[0]
    if n <= _DENSE_LIMIT:
        vals = sla.eigh(A.toarray(), M.toarray(), eigvals_only=True)
        return float(vals[-1] if largest else vals[0])
    if largest:
        return float(eigsh(A.tocsc(), k=1, M=M.tocsc(), which="LA", tol=1e-12)[0][0])
    return float(eigsh(A.tocsc(), k=1, M=M.tocsc(), sigma=0.0, which="LM", tol=1e-12)[0][0])


def embedding_c1_star(geom: Geometry) -> float:
    """Best ``c`` in ``||u||_2^2 <= c ||grad u||_2^2``."""
    return 1.0 / _extreme_gen_eig(geom.stiffness_u, sp.diags(geom.weights_u), largest=False)


def embedding_c2_star(geom: Geometry) -> float:
    """Best ``c`` in ``|w|_2^2 <= c |Delta w|_2^2``."""
    return 1.0 / _extreme_gen_eig(geom.stiffness_w, sp.diags(geom.weights_w), largest=False)


def embedding_trace_star(geom: Geometry) -> float:
    """Best ``c`` in ``|gamma u|_2^2 <= c ||grad u||_2^2``."""
    return _extreme_gen_eig(geom.trace_mass, geom.stiffness_u, largest=True)


def stabilization_c0(c1_star: float, c_trace_star: float, c2_star: float) -> float:
    """``max(1, c1* + c_*, 2 c2*)``."""
    return max(1.0, c1_star + c_trace_star, 2.0 * c2_star)


@dataclass
class StabilizationConstants:
    c1_star: float
    c2_star: float
    c_trace_star: float
    c0: float
    xi: float
    T0: float
    T0_stated: float
    c: float
    C_tilde: Optional[float] = None
    C_tilde_provenance: str = "not fitted"

    def to_dict(self) -> dict:
        return asdict(self)


def compute_stabilization_constants(well, geom: Geometry, delta: Optional[float] = None) -> StabilizationConstants:
    """``c0``, ``xi`` and both versions of ``T0`` from the discrete embedding constants.

    ``T0`` carries the ``(1 - xi)`` factor needed by the stabilization
    argument; ``T0_stated`` omits it.
    """
    c1 = embedding_c1_star(geom)
    c2 = embedding_c2_star(geom)
    ct = embedding_trace_star(geom)
    c0 = stabilization_c0(c1, ct, c2)
    xi = well.xi(delta)
    if not xi < 1.0:
        raise ValueError(f"xi = {xi} >= 1; delta must be positive")
    c = well.c
    base = max(1.0, 1.0 / geom.area_omega, 1.0 / geom.area_gamma)
    T0 = max(base, 8.0 * c * c0 / ((c - 2.0) * (1.0 - xi)))
    T0s = max(base, 8.0 * c * c0 / (c - 2.0))
    return StabilizationConstants(c1, c2, ct, c0, xi, T0, T0s, c)


@dataclass
class StabilizationCheck:
    T: list
    ratios: list
    sup_ratio: float
    T_base: float
    short_run: bool
    undamped: bool = False
    notice: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sup_ratio"] = None if not math.isfinite(self.sup_ratio) else self.sup_ratio
        d["ratios"] = [None if not math.isfinite(r) else r for r in self.ratios]
        return d


def check_stabilization(ledger, consts: StabilizationConstants, Phi: Callable, n_multiples: int = 3) -> StabilizationCheck:
    """``R(T) = calE(T) / Phi(D(T))`` at ``T = T_base, 2 T_base, ...``.

    ``T_base`` is ``consts.T0`` when the ledger spans ``n_multiples * T0``;
    otherwise the stated ``T0`` and then ``T_end / n_multiples`` are tried
    and the result is marked ``short_run``.
    """
    t = np.asarray(ledger.t, dtype=float)
    calE = np.asarray(ledger.calE, dtype=float)
    D = np.asarray(ledger.D, dtype=float)
    span = t[-1] - t[0] if t.size else 0.0
    notice = ""
    if span >= n_multiples * consts.T0:
        T_base, short = consts.T0, False
    elif span >= n_multiples * consts.T0_stated:
        T_base, short = consts.T0_stated, True
        notice = f"ledger spans {span:g} < {n_multiples} * T0 = {n_multiples * consts.T0:g}; using T0 without (1 - xi)"
    else:
        T_base, short = span / n_multiples, True
        notice = f"ledger spans {span:g} < {n_multiples} * T0 = {n_multiples * consts.T0:g}; using T_end / {n_multiples}"
    Ts, Rs = [], []
    undamped = False
    if T_base > 0.0:
        k = 1
        while t[0] + k * T_base <= t[-1] * (1 + 1e-12):
            T = t[0] + k * T_base
            e = float(np.interp(T, t, calE))
            d = float(np.interp(T, t, D))
            ph = float(Phi(d))
            if ph > 0.0:
                Rs.append(e / ph)
            elif e > 0.0:
                undamped = True
                Rs.append(math.inf)
            else:
                Rs.append(0.0)
            Ts.append(T)
            k += 1
    if undamped:
        notice = (notice + "; " if notice else "") + "D(T) = 0 with calE(T) > 0: undamped run, estimate inapplicable"
    sup = max(Rs) if Rs else 0.0
    return StabilizationCheck(Ts, Rs, sup, T_base, short, undamped, notice)


def fit_C_tilde(checks: Sequence[StabilizationCheck]) -> float:
    """``sup`` of the stabilization ratio over a suite of runs."""
    return max((c.sup_ratio for c in checks), default=0.0)


# -- rate fits -------------------------------------------------------------


@dataclass
class DecayFit:
    branch: str
    window: tuple
    rate: Optional[float] = None
    r2: Optional[float] = None
    exponent_b: Optional[float] = None
    loglog_slope: Optional[float] = None
    loglog_r2: Optional[float] = None
    envelope_sup: Optional[float] = None
    truncated: bool = False
    n_points: int = 0
    notice: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), r2


def fit_decay_rate(t, calE, profile: DecayProfile, *, window_start: float = 0.2,
                   noise_floor: float = NOISE_FLOOR) -> DecayFit:
    """Fit the decay law of ``profile.branch`` on ``[window_start * T_end, T_end]``.

    The algebraic log-log slope is taken against ``log(1 + t)``, matching
    the ``(1 + t)^(-b)`` envelope.  Points with ``calE <= noise_floor`` end
    the window.  If nothing is
    left the fit uses the prefix above the floor and sets ``truncated``.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(calE, dtype=float)
    T_end = float(t[-1])
    lo = window_start * T_end
    above = e > noise_floor
    stop = int(np.argmin(above)) if not above.all() else t.size
    sel = np.zeros(t.size, dtype=bool)
    sel[:stop] = True
    notice = ""
    truncated = stop < t.size
    win = sel & (t >= lo)
    if win.sum() < 3:
        win = sel.copy()
        truncated = True
        notice = "energy reached the noise floor before the fit window; fitted the prefix"
    fit = DecayFit(profile.branch, (float(t[win][0]) if win.any() else lo, float(t[win][-1]) if win.any() else T_end),
                   truncated=truncated, n_points=int(win.sum()), notice=notice)
    if win.sum() < 2:
        fit.notice = "fewer than two usable points"
        return fit
    tw, ew = t[win], e[win]
    if profile.branch == "exponential":
        slope, _, r2 = _linfit(tw, np.log(ew))
        fit.rate = -slope
        fit.r2 = r2
    else:
        fit.exponent_b = profile.b
        fit.envelope_sup = float(np.max(ew * (1.0 + tw) ** profile.b))
        slope, _, r2 = _linfit(np.log1p(tw), np.log(ew))
        fit.loglog_slope = slope
        fit.loglog_r2 = r2
    return fit
