"""Source and damping nonlinearities together with the parameter gates.

Sources are pure power laws ``f(u) = s |u|^(p-1) u`` and
``h(w) = s |w|^(q-1) w`` so that their primitives are homogeneous and the
constant ``M`` in ``F(u) <= M |u|^(p+1)`` is attained with equality.

Damping is an odd power law glued at ``|s| = 1``::

    g(s) = coeff * |s|^(near_exp - 1) s    for |s| < 1
    g(s) = coeff * |s|^(far_exp - 1) s     for |s| >= 1

Both branches equal ``coeff * sign(s)`` at ``|s| = 1``, so the far-branch
coefficient that enforces continuity is ``coeff`` itself.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Raised when a parameter set violates a hard modelling assumption."""


@dataclass(frozen=True)
class DampingProfile:
    """Monotone odd damping law with separate near-origin and far-field exponents.

    Parameters
    ----------
    near_exp : float
        Growth exponent on ``|s| < 1``.  Values below one give sublinear
        damping, exactly one linear, above one superlinear.
    far_exp : float
        Exponent on ``|s| >= 1`` (the ``m`` or ``r`` of the growth bounds).
    coeff : float
        Positive scale.
    """

    near_exp: float = 1.0
    far_exp: float = 1.0
    coeff: float = 1.0

    @property
    def alpha(self) -> float:
        """Lower constant in ``alpha |s|^(far+1) <= g(s) s`` for ``|s| >= 1``."""
        return self.coeff

    @property
    def beta(self) -> float:
        """Upper constant in ``g(s) s <= beta |s|^(far+1)`` for ``|s| >= 1``."""
        return self.coeff

    @property
    def near_bounds(self) -> tuple[float, float]:
        """``(c_lo, c_hi)`` with ``c_lo |s|^k <= |g(s)| <= c_hi |s|^k`` on ``|s| < 1``."""
        return self.coeff, self.coeff

    @property
    def linear_near_origin(self) -> bool:
        return self.near_exp == 1.0

    def __call__(self, s):
        return eval_g(s, self)


@dataclass(frozen=True)
class ModelParams:
    """Exponents and scales of the coupled wave-plate model."""

    p: float = 2.0
    q: float = 2.0
    damping_u: DampingProfile = field(default_factory=DampingProfile)
    damping_w: DampingProfile = field(default_factory=DampingProfile)
    source_scale_f: float = 1.0
    source_scale_h: float = 1.0

    @property
    def m(self) -> float:
        return self.damping_u.far_exp

    @property
    def r(self) -> float:
        return self.damping_w.far_exp

    @property
    def M_f(self) -> float:
        """Homogeneity constant of ``F``: ``F(u) = M_f |u|^(p+1)`` exactly."""
        return self.source_scale_f / (self.p + 1.0)

    @property
    def M_h(self) -> float:
        return self.source_scale_h / (self.q + 1.0)

    @property
    def c(self) -> float:
        """``min(p + 1, q + 1)``."""
        return min(self.p + 1.0, self.q + 1.0)

    @property
    def sources_enabled(self) -> bool:
        return self.source_scale_f > 0.0 or self.source_scale_h > 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        data = dict(data)
        for key in ("damping_u", "damping_w"):
            if key in data and isinstance(data[key], dict):
                data[key] = DampingProfile(**data[key])
        return cls(**data)


def _odd_power(x, exponent, scale):
    x = np.asarray(x, dtype=float)
    return scale * np.abs(x) ** (exponent - 1.0) * x


def eval_f(u, params: ModelParams):
    """Wave source ``f(u) = scale |u|^(p-1) u``."""
    return _odd_power(u, params.p, params.source_scale_f)


def eval_h(w, params: ModelParams):
    """Plate source ``h(w) = scale |w|^(q-1) w``."""
    return _odd_power(w, params.q, params.source_scale_h)


def eval_F(u, params: ModelParams):
    """Primitive ``M_f |u|^(p+1)`` of ``f``.

    Evaluated as ``u f(u) / (p + 1)`` so that the Euler identity holds to
    rounding; the separately rounded exponents ``p - 1`` and ``p + 1``
    would otherwise differ by a few ulps times ``|log u|``.
    """
    u = np.asarray(u, dtype=float)
    return u * eval_f(u, params) / (params.p + 1.0)


def eval_H(w, params: ModelParams):
    w = np.asarray(w, dtype=float)
    return w * eval_h(w, params) / (params.q + 1.0)


def eval_g(s, profile: DampingProfile):
    """Evaluate the glued damping law (vectorised)."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    # np.where evaluates both branches; 0 ** negative is avoided by the clip
    safe = np.where(a > 0.0, a, 1.0)
    expo = np.where(a < 1.0, profile.near_exp, profile.far_exp)
    out = profile.coeff * safe ** (expo - 1.0) * s
    out = np.where(a > 0.0, out, 0.0)
    return out if out.ndim else float(out)


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_if_invalid(self) -> None:
        if self.errors:
            raise ParameterError("; ".join(self.errors))

    def to_dict(self) -> dict:
        return {"ok": self.ok, "errors": list(self.errors), "warnings": list(self.warnings)}


def _check_profile(name: str, prof: DampingProfile, report: ValidationReport) -> None:
    vals = (prof.near_exp, prof.far_exp, prof.coeff)
    if not all(np.isfinite(v) for v in vals):
        report.errors.append(f"{name}: exponents and coefficient must be finite")
        return
    if prof.coeff <= 0:
        report.errors.append(f"{name}: damping coefficient must be > 0")
    if prof.near_exp <= 0:
        report.errors.append(f"{name}: near-origin exponent must be > 0")
    if prof.far_exp < 1:
        report.errors.append(f"{name}: far-field exponent must be >= 1 (growth condition at infinity)")


def validate_params(params: ModelParams, *, for_decay: bool = False) -> ValidationReport:
    """Check the hard assumptions and collect advisory warnings.

    Hard failures: damping shape, ``1 < p <= 5`` (``p < 5`` when
    ``for_decay``), ``q > 1``, nonnegative source scales and the gate
    ``p (m + 1) / m < 6``.  Uniqueness side conditions and the extra
    integrability needed when ``m > 5`` are reported as warnings only.
    """
    report = ValidationReport()
    _check_profile("damping_u", params.damping_u, report)
    _check_profile("damping_w", params.damping_w, report)
    p, q = params.p, params.q
    if not (np.isfinite(p) and np.isfinite(q)):
        report.errors.append("source exponents must be finite")
        return report
    if not 1.0 < p <= 5.0:
        report.errors.append(f"p = {p} outside the potential-well range 1 < p <= 5")
    elif for_decay and p >= 5.0:
        report.errors.append(f"p = {p}: decay estimates require 1 < p < 5")
    if not q > 1.0:
        report.errors.append(f"q = {q}: require q > 1")
    if params.source_scale_f < 0 or params.source_scale_h < 0:
        report.errors.append("source scales must be nonnegative (good-sign sources only)")
    m = params.m
    if m >= 1.0:
        gate = p * (m + 1.0) / m
        if not gate < 6.0:
            report.errors.append(f"p(m+1)/m<6 violated: p(m+1)/m = {gate:g}")
    if p > 3.0 and m < 3.0 * p - 4.0:
        report.warnings.append(
            f"uniqueness not covered by m >= 3p-4 (m = {m:g}, 3p-4 = {3 * p - 4:g}); "
            "existence results unaffected"
        )
    if m > 5.0:
        report.warnings.append(
            "m > 5: decay estimates assume u in L^inf(L^{3(m-1)/2}); monitored, not enforced"
        )
    return report
