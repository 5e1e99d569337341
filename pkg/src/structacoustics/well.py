"""Potential-well quantities in the discrete norms.

Everything here is computed with the same quadrature and stiffness forms
as the time stepper, so the inequalities checked along trajectories are
statements about one consistent finite-dimensional system.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.optimize as opt
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .geometry import Geometry
from .nonlinearity import ModelParams

log = logging.getLogger(__name__)

TOL_N = 1e-9
TOL_D = 1e-6
DELTA_FRACTION = 0.05


# -- energies --------------------------------------------------------------


def energy_terms(u, v, w, z, geom: Geometry, params: ModelParams, lapu=None, bw=None) -> dict:
    """All energy pieces for packed unknown vectors.

    ``lapu`` and ``bw`` may be passed when ``lap @ u`` and ``bih @ w`` are
    already at hand.
    """
    wu, ww = geom.weights_u, geom.weights_w
    if lapu is None:
        lapu = geom.lap @ u
    if bw is None:
        bw = geom.bih @ w
    grad2 = -float(np.dot(wu * u, lapu))
    lap2 = float(np.dot(ww * w, bw))
    kin = 0.5 * (float(np.dot(wu * v, v)) + float(np.dot(ww * z, z)))
    intF = params.M_f * float(np.dot(wu, np.abs(u) ** (params.p + 1.0)))
    intH = params.M_h * float(np.dot(ww, np.abs(w) ** (params.q + 1.0)))
    normX2 = grad2 + lap2
    J = 0.5 * normX2 - intF - intH
    return {
        "kinetic": kin,
        "grad2": grad2,
        "lap2": lap2,
        "normX2": normX2,
        "intF": intF,
        "intH": intH,
        "E": kin + 0.5 * normX2,
        "J": J,
        "calE": kin + J,
        "nehari": normX2 - (params.p + 1.0) * intF - (params.q + 1.0) * intH,
    }


def _pack(state_or_u, w, geom):
    return geom.restrict_u(state_or_u), geom.restrict_w(w)


def quadratic_energy(state, geom: Geometry) -> float:
    """``E = (||u_t||^2 + |w_t|^2 + ||grad u||^2 + |Delta w|^2) / 2``."""
    u, w = _pack(state.u, state.w, geom)
    v, z = _pack(state.v, state.z, geom)
    wu, ww = geom.weights_u, geom.weights_w
    return 0.5 * (float(np.dot(wu * v, v)) + float(np.dot(ww * z, z))
                  + float(u @ (geom.stiffness_u @ u)) + float(w @ (geom.stiffness_w @ w)))


def potential_J(u, w, geom: Geometry, params: ModelParams) -> float:
    """Potential energy ``||(u, w)||_X^2 / 2 - int F(u) - int H(w)``."""
    uv, wv = _pack(u, w, geom)
    return energy_terms(uv, np.zeros_like(uv), wv, np.zeros_like(wv), geom, params)["J"]


def total_energy(state, geom: Geometry, params: ModelParams) -> float:
    u, w = _pack(state.u, state.w, geom)
    v, z = _pack(state.v, state.z, geom)
    return energy_terms(u, v, w, z, geom, params)["calE"]


def nehari_residual(u, w, geom: Geometry, params: ModelParams, require_nonzero: bool = False) -> float:
    """``||grad u||^2 + |Delta w|^2 - (p+1) int F - (q+1) int H``.

    With ``require_nonzero`` the zero pair (excluded from the manifold)
    raises ``ValueError``.
    """
    uv, wv = _pack(u, w, geom)
    if require_nonzero and not (np.any(uv) or np.any(wv)):
        raise ValueError("the zero pair is not admissible for Nehari-manifold queries")
    return energy_terms(uv, np.zeros_like(uv), wv, np.zeros_like(wv), geom, params)["nehari"]


# -- ray maximisation ------------------------------------------------------


def ray_max(a: float, b: float, c: float, p: float, q: float) -> tuple[float, float]:
    """Maximise ``phi(lam) = a lam^2/2 - b lam^(p+1) - c lam^(q+1)`` over ``lam >= 0``.

    Returns ``(lam_star, phi(lam_star))``; ``(inf, inf)`` if ``b = c = 0``.
    The critical point is the unique zero of the decreasing map
    ``a - (p+1) b lam^(p-1) - (q+1) c lam^(q-1)``.
    """
    if b <= 0.0 and c <= 0.0:
        return math.inf, math.inf
    if a <= 0.0:
        return 0.0, 0.0

    def dphi(lam):
        return a - (p + 1.0) * b * lam ** (p - 1.0) - (q + 1.0) * c * lam ** (q - 1.0)

    hi = 1.0
    while dphi(hi) > 0.0:
        hi *= 2.0
    lo = 0.0
    lam = opt.bisect(dphi, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=400)
    return lam, 0.5 * a * lam**2 - b * lam ** (p + 1.0) - c * lam ** (q + 1.0)


# -- embedding constants ---------------------------------------------------


@dataclass
class AscentResult:
    value: float
    field: np.ndarray
    restart_values: list
    converged: bool


def max_sobolev_ratio(
    stiffness: sp.spmatrix,
    weights: np.ndarray,
    power: float,
    *,
    seed: int = 0,
    restarts: int = 16,
    tol: float = 1e-8,
    maxiter: int = 5000,
) -> AscentResult:
    """Maximise ``sum(weights |x|^power) / (x^T S x)^(power/2)`` by normalised ascent.

    On the ``S``-unit sphere the map ``x -> S^{-1} grad G(x)`` followed by
    renormalisation never decreases the convex functional ``G``, so each
    restart climbs monotonically.  Stops when the relative change of the
    ratio falls below ``tol ** 1.5`` or after ``maxiter`` sweeps.
    """
    lu = splu(sp.csc_matrix(stiffness))
    rng = np.random.default_rng(seed)
    n = weights.size
    values, fields = [], []
    converged_all = True
    stop = tol**1.5

    def normalise(x):
        return x / math.sqrt(float(x @ (stiffness @ x)))

    def G(x):
        return float(np.dot(weights, np.abs(x) ** power))

    for _ in range(restarts):
        # random start smoothed by one stiffness solve
        x = normalise(lu.solve(weights * rng.standard_normal(n)))
        g_old = G(x)
        ok = False
        for _ in range(maxiter):
            grad = weights * np.abs(x) ** (power - 2.0) * x
            x = normalise(lu.solve(grad))
            g_new = G(x)
            if abs(g_new - g_old) <= stop * abs(g_new):
                ok = True
                g_old = g_new
                break
            g_old = g_new
        converged_all &= ok
        values.append(g_old)
        fields.append(x)
    best = int(np.argmax(values))
    return AscentResult(values[best], fields[best], values, converged_all)


@dataclass
class EmbeddingConstants:
    K1: float
    K2: float
    u_field: np.ndarray = field(repr=False)
    w_field: np.ndarray = field(repr=False)
    restarts_K1: list = field(default_factory=list, repr=False)
    restarts_K2: list = field(default_factory=list, repr=False)
    converged: bool = True


def estimate_embedding_constants(geom: Geometry, params: ModelParams, *, seed: int = 0,
                                 restarts: int = 16, tol: float = 1e-8) -> EmbeddingConstants:
    """Discrete best constants ``K1 = sup ||u||_{p+1}^{p+1} / ||grad u||^{p+1}`` and ``K2``."""
    r1 = max_sobolev_ratio(geom.stiffness_u, geom.weights_u, params.p + 1.0,
                           seed=seed, restarts=restarts, tol=tol)
    r2 = max_sobolev_ratio(geom.stiffness_w, geom.weights_w, params.q + 1.0,
                           seed=seed + 1, restarts=restarts, tol=tol)
    if not (r1.converged and r2.converged):
        log.warning("embedding-constant ascent hit the iteration cap; reporting best-so-far")
    return EmbeddingConstants(r1.value, r2.value, r1.field, r2.field,
                              r1.restart_values, r2.restart_values, r1.converged and r2.converged)


# -- well geometry ---------------------------------------------------------


def _sstar_residual(s, M_f, K1, M_h, K2, p, q):
    return 1.0 - M_f * K1 * (p + 1.0) * s ** (p - 1.0) - M_h * K2 * (q + 1.0) * s ** (q - 1.0)


def find_s_star(M_f: float, K1: float, M_h: float, K2: float, p: float, q: float) -> float:
    """Positive zero of ``1 - M_f K1 (p+1) s^(p-1) - M_h K2 (q+1) s^(q-1)``."""
    if M_f * K1 <= 0.0 and M_h * K2 <= 0.0:
        raise ValueError("no positive root: both source/embedding products vanish")
    args = (M_f, K1, M_h, K2, p, q)
    hi = 1.0
    while _sstar_residual(hi, *args) > 0.0:
        hi *= 2.0
    return opt.bisect(_sstar_residual, 0.0, hi, args=args, xtol=1e-300,
                      rtol=4 * np.finfo(float).eps, maxiter=400)


def lambda_fn(s, M_f: float, K1: float, M_h: float, K2: float, p: float, q: float):
    """``Lambda(s) = s^2/2 - M_f K1 s^(p+1) - M_h K2 s^(q+1)``."""
    s = np.asarray(s, dtype=float)
    return 0.5 * s**2 - M_f * K1 * s ** (p + 1.0) - M_h * K2 * s ** (q + 1.0)


@dataclass
class WellGeometry:
    """Constants describing the potential well in the discrete norms."""

    p: float
    q: float
    M_f: float
    M_h: float
    K1: float
    K2: float
    s_star: float
    delta: float
    d_est: float
    lambda_at_sstar: float
    c: float
    provenance: dict = field(default_factory=dict)

    @classmethod
    def from_constants(cls, params: ModelParams, K1: float, K2: float, d_est: float = math.inf,
                       delta: Optional[float] = None, provenance: Optional[dict] = None) -> "WellGeometry":
        if params.M_f * K1 <= 0.0 and params.M_h * K2 <= 0.0:
            # no sources: the well is the whole space
            s = lam = math.inf
        else:
            s = find_s_star(params.M_f, K1, params.M_h, K2, params.p, params.q)
            lam = float(lambda_fn(s, params.M_f, K1, params.M_h, K2, params.p, params.q))
        return cls(params.p, params.q, params.M_f, params.M_h, K1, K2, s,
                   DELTA_FRACTION * s if delta is None else delta, d_est, lam, params.c,
                   dict(provenance or {}))

    def radius(self, delta: Optional[float] = None) -> float:
        """``s* - delta``; infinite when there are no sources."""
        if math.isinf(self.s_star):
            return math.inf
        return self.s_star - (self.delta if delta is None else delta)

    def Lambda(self, s):
        return lambda_fn(s, self.M_f, self.K1, self.M_h, self.K2, self.p, self.q)

    def s_star_residual(self) -> float:
        return float(-_sstar_residual(self.s_star, self.M_f, self.K1, self.M_h, self.K2, self.p, self.q))

    def xi(self, delta: Optional[float] = None) -> float:
        """``M_f (p+1) K1 (s*-delta)^(p-1) + M_h (q+1) K2 (s*-delta)^(q-1)``; below 1 for delta > 0."""
        s = self.radius(delta)
        if math.isinf(s):
            return 0.0
        return (self.M_f * (self.p + 1.0) * self.K1 * s ** (self.p - 1.0)
                + self.M_h * (self.q + 1.0) * self.K2 * s ** (self.q - 1.0))

    @property
    def lambda_delta(self) -> float:
        s = self.radius()
        return math.inf if math.isinf(s) else float(self.Lambda(s))

    @property
    def energy_bound(self) -> float:
        """``c d / (c - 2)`` bound on the quadratic energy."""
        return self.c * self.d_est / (self.c - 2.0)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["d_est"] = None if math.isinf(self.d_est) else self.d_est
        out["xi"] = self.xi()
        out["lambda_at_s_star_minus_delta"] = self.lambda_delta
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "WellGeometry":
        keys = {f for f in cls.__dataclass_fields__}
        kw = {k: v for k, v in data.items() if k in keys}
        if kw.get("d_est") is None:
            kw["d_est"] = math.inf
        return cls(**kw)


# -- depth -----------------------------------------------------------------


@dataclass
class DepthResult:
    d_est: float
    u: Optional[np.ndarray] = field(default=None, repr=False)
    w: Optional[np.ndarray] = field(default=None, repr=False)
    sampled: list = field(default_factory=list, repr=False)
    refined: float = math.inf
    sources_disabled: bool = False


def ray_level(u, w, geom: Geometry, params: ModelParams) -> float:
    """``sup_{lam >= 0} J(lam (u, w))`` for packed vectors."""
    a = float(u @ (geom.stiffness_u @ u)) + float(w @ (geom.stiffness_w @ w))
    b = params.M_f * float(np.dot(geom.weights_u, np.abs(u) ** (params.p + 1.0)))
    c = params.M_h * float(np.dot(geom.weights_w, np.abs(w) ** (params.q + 1.0)))
    return ray_max(a, b, c, params.p, params.q)[1]


def _xnorm(u, w, geom):
    return math.sqrt(float(u @ (geom.stiffness_u @ u)) + float(w @ (geom.stiffness_w @ w)))


def random_smooth_direction(geom: Geometry, rng: np.random.Generator, lu_u=None, lu_w=None):
    """Random pair with smooth components and a random split of X-norm between them."""
    lu_u = lu_u or splu(sp.csc_matrix(geom.stiffness_u))
    lu_w = lu_w or splu(sp.csc_matrix(geom.stiffness_w))
    u = lu_u.solve(geom.weights_u * rng.standard_normal(geom.n_u))
    w = lu_w.solve(geom.weights_w * rng.standard_normal(geom.n_w))
    u /= math.sqrt(float(u @ (geom.stiffness_u @ u)))
    w /= math.sqrt(float(w @ (geom.stiffness_w @ w)))
    theta = rng.uniform(0.0, 0.5 * math.pi)
    return math.cos(theta) * u, math.sin(theta) * w


def estimate_depth_d(
    geom: Geometry,
    params: ModelParams,
    *,
    seed: int = 0,
    n_directions: int = 64,
    candidates: Sequence[tuple] = (),
    basis: Optional[Sequence[tuple]] = None,
    refine_iters: int = 500,
) -> DepthResult:
    """Sampled mountain-pass level ``min_dir max_lam J(lam dir)`` (an upper bound of the depth).

    Without ``basis`` the directions are random smooth pairs plus any
    ``candidates``; the best one is refined by the Nehari fixed-point map
    ``(u, w) -> (A^{-1} W f(u), B^{-1} W h(w))`` with backtracking so the
    level never increases.  With ``basis`` (a list of packed ``(u, w)``
    pairs) directions are coefficient vectors and refinement is a
    Nelder-Mead search on the coefficients.
    """
    if not params.sources_enabled:
        return DepthResult(math.inf, sources_disabled=True)
    rng = np.random.default_rng(seed)

    if basis is not None:
        bu = np.array([b[0] for b in basis])
        bw = np.array([b[1] for b in basis])

        def level(coef):
            coef = np.asarray(coef)
            if not np.any(coef):
                return math.inf
            return ray_level(coef @ bu, coef @ bw, geom, params)

        samples = [rng.standard_normal(len(basis)) for _ in range(n_directions)]
        samples += [np.eye(len(basis))[i] for i in range(len(basis))]
        vals = [level(cf) for cf in samples]
        best = int(np.argmin(vals))
        res = opt.minimize(level, samples[best], method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        d = min(vals[best], float(res.fun))
        coef = res.x if res.fun <= vals[best] else samples[best]
        return DepthResult(d, coef @ bu, coef @ bw, vals, float(res.fun))

    lu_u = splu(sp.csc_matrix(geom.stiffness_u))
    lu_w = splu(sp.csc_matrix(geom.stiffness_w))
    dirs = [random_smooth_direction(geom, rng, lu_u, lu_w) for _ in range(n_directions)]
    dirs += [(np.asarray(cu, float), np.asarray(cw, float)) for cu, cw in candidates]
    vals = [ray_level(u, w, geom, params) for u, w in dirs]
    best = int(np.argmin(vals))
    u, w = dirs[best]
    cur = vals[best]
    p, q = params.p, params.q
    for _ in range(refine_iters):
        nu = lu_u.solve(geom.weights_u * params.source_scale_f * np.abs(u) ** (p - 1.0) * u)
        nw = lu_w.solve(geom.weights_w * params.source_scale_h * np.abs(w) ** (q - 1.0) * w)
        nrm = _xnorm(nu, nw, geom)
        if nrm == 0.0:
            break
        nu, nw = nu / nrm, nw / nrm
        x0 = _xnorm(u, w, geom)
        u0, w0 = u / x0, w / x0
        theta = 1.0
        improved = False
        while theta > 1e-4:
            tu = (1 - theta) * u0 + theta * nu
            tw = (1 - theta) * w0 + theta * nw
            val = ray_level(tu, tw, geom, params)
            if val < cur:
                improved = True
                break
            theta *= 0.5
        if not improved:
            break
        change = cur - val
        u, w, cur = tu, tw, val
        if change <= 1e-12 * cur:
            break
    return DepthResult(min(cur, vals[best]), u, w, vals, cur)


def compute_well_geometry(geom: Geometry, params: ModelParams, *, seed: int = 0,
                          restarts: int = 16, n_directions: int = 64,
                          delta_fraction: float = DELTA_FRACTION) -> tuple[WellGeometry, EmbeddingConstants, DepthResult]:
    """Embedding constants, ``s*``, ``Lambda(s*)`` and the sampled depth for one geometry."""
    emb = estimate_embedding_constants(geom, params, seed=seed, restarts=restarts)
    cands = [(emb.u_field, np.zeros(geom.n_w)), (np.zeros(geom.n_u), emb.w_field)]
    depth = estimate_depth_d(geom, params, seed=seed + 2, n_directions=n_directions, candidates=cands)
    well = WellGeometry.from_constants(
        params, emb.K1, emb.K2, depth.d_est,
        provenance={
            "K1": f"normalised ascent, {restarts} restarts, seed {seed}",
            "K2": f"normalised ascent, {restarts} restarts, seed {seed + 1}",
            "s_star": "bisection on the s* equation",
            "d_est": f"min over {n_directions} random smooth rays + 2 extremal rays, Nehari refinement, seed {seed + 2}",
            "delta": f"{delta_fraction} * s_star",
        },
    )
    well.delta = delta_fraction * well.s_star
    return well, emb, depth


# -- classification --------------------------------------------------------


@dataclass
class Classification:
    label: str
    J: float
    nehari: float
    norm_X: float


def classify_vec(u, w, well: WellGeometry, geom: Geometry, params: ModelParams,
                 terms: Optional[dict] = None, tol_N: float = TOL_N) -> Classification:
    if terms is None:
        terms = energy_terms(u, np.zeros_like(u), w, np.zeros_like(w), geom, params)
    J, neh, nx2 = terms["J"], terms["nehari"], terms["normX2"]
    nx = math.sqrt(max(nx2, 0.0))
    if not (np.any(u) or np.any(w)):
        return Classification("W1", 0.0, 0.0, 0.0)
    thr = tol_N * nx2
    if abs(neh) <= thr:
        label = "on-Nehari"
    elif J < well.d_est and neh > thr:
        label = "W1"
    elif J < well.d_est and neh < -thr:
        label = "W2"
    else:
        label = "outside-W"
    return Classification(label, J, neh, nx)


def classify(u, w, well: WellGeometry, geom: Geometry, params: ModelParams) -> Classification:
    """Label a full-grid pair as ``W1``, ``W2``, ``on-Nehari`` or ``outside-W``."""
    uv, wv = _pack(u, w, geom)
    return classify_vec(uv, wv, well, geom, params)


def check_in_tilde_W1_delta(u, w, well: WellGeometry, geom: Geometry, params: ModelParams,
                            delta: Optional[float] = None) -> bool:
    """``||(u, w)||_X <= s* - delta`` and ``J(u, w) <= Lambda(s* - delta)``."""
    delta = well.delta if delta is None else delta
    uv, wv = _pack(u, w, geom)
    t = energy_terms(uv, np.zeros_like(uv), wv, np.zeros_like(wv), geom, params)
    s = well.radius(delta)
    if math.isinf(s):
        return True
    return math.sqrt(t["normX2"]) <= s and t["J"] <= float(well.Lambda(s))


# -- global existence monitor ---------------------------------------------


def theorem31_monitor(ledger, well: WellGeometry, *, energy_tol: float = 1e-3, alg_tol: float = 1e-10) -> dict:
    """Check the four global-existence claims on every ledger row.

    (i) ``J <= calE(t) <= calE(0) < d``; (ii) label ``W1``;
    (iii) ``E(t) < c d / (c - 2)``; (iv) ``(c-2)/c E <= calE <= E``.
    The time-discrete ``calE`` may exceed ``calE(0)`` by the residual
    tolerance ``energy_tol`` (relative); (iv) uses ``alg_tol``.
    """
    t = np.asarray(ledger.t)
    E = np.asarray(ledger.E)
    calE = np.asarray(ledger.calE)
    J = np.asarray(ledger.J)
    labels = list(ledger.label)
    c, d = well.c, well.d_est
    if len(t) == 0:
        return {"enabled": False, "notice": "empty ledger"}
    if labels[0] != "W1" or not calE[0] < d:
        return {"enabled": False,
                "notice": f"hypotheses fail at t=0 (label {labels[0]!r}, calE(0)={calE[0]:.6g}, d={d:.6g})"}
    scale = max(abs(calE[0]), 1e-14)
    kin = calE - J
    claim1 = (J <= calE + alg_tol * scale) & (calE <= calE[0] + energy_tol * scale) & (calE[0] < d)
    claim2 = np.array([lb == "W1" for lb in labels])
    bound = c * d / (c - 2.0)
    claim3 = E < bound
    lo = (c - 2.0) / c * E
    tol4 = alg_tol * np.maximum(E, 1e-300)
    claim4 = (lo <= calE + tol4) & (calE <= E + tol4)
    report = {
        "enabled": True,
        "n_rows": int(len(t)),
        "claims": {
            "i": bool(claim1.all()),
            "ii": bool(claim2.all()),
            "iii": bool(claim3.all()),
            "iv": bool(claim4.all()),
        },
        "margins": {
            "i_min_d_minus_calE0": float(d - calE[0]),
            "i_max_calE_growth_rel": float(np.max(calE - calE[0]) / scale),
            "i_min_kinetic": float(kin.min()),
            "iii_min_gap": float(np.min(bound - E)),
            "iv_min_lower_gap": float(np.min(calE - lo)),
            "iv_min_upper_gap": float(np.min(E - calE)),
        },
        "per_row": {
            "i": claim1.tolist(),
            "ii": claim2.tolist(),
            "iii": claim3.tolist(),
            "iv": claim4.tolist(),
        },
    }
    report["all_hold"] = all(report["claims"].values())
    return report
