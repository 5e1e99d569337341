"""Scenario orchestration shared by the command line and the test-suite."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import decay as dec
from . import output
from . import well as wl
from .config import set_path
from .dynamics import InstabilityError, State, simulate
from .geometry import Geometry, build_geometry
from .nonlinearity import DampingProfile, ModelParams, validate_params

log = logging.getLogger(__name__)


class ValidationFailure(ValueError):
    """Config is well formed but violates a modelling assumption."""


# -- construction ----------------------------------------------------------


def params_from_config(cfg: dict) -> ModelParams:
    p = cfg["params"]
    return ModelParams(
        p=float(p["p"]),
        q=float(p["q"]),
        damping_u=DampingProfile(**{k: float(v) for k, v in p["damping_u"].items()}),
        damping_w=DampingProfile(**{k: float(v) for k, v in p["damping_w"].items()}),
        source_scale_f=float(p["source_scale_f"]),
        source_scale_h=float(p["source_scale_h"]),
    )


def geometry_from_config(cfg: dict) -> Geometry:
    g = cfg["geometry"]
    dims = g["dims"]
    return build_geometry(g["mode"], dims[0] if len(dims) == 1 else tuple(dims))


def well_from_config(cfg: dict, geom: Geometry, params: ModelParams):
    """``(WellGeometry, EmbeddingConstants | None, DepthResult | None)``."""
    wc = cfg["well"]
    seed = int(cfg["seed"])
    syn = wc.get("synthetic")
    if syn:
        scaled = ModelParams(params.p, params.q, params.damping_u, params.damping_w,
                             syn["M"] * (params.p + 1.0), syn["M"] * (params.q + 1.0))
        well = wl.WellGeometry.from_constants(
            scaled, syn["K1"], syn["K2"], math.inf,
            provenance={"mode": "synthetic constants (M, K1, K2 given); depth not computed"})
        well.delta = wc["delta_fraction"] * well.s_star
        return well, None, None
    well, emb, depth = wl.compute_well_geometry(
        geom, params, seed=seed, restarts=wc["restarts"], n_directions=wc["n_directions"],
        delta_fraction=wc["delta_fraction"])
    return well, emb, depth


def _taper(geom: Geometry) -> np.ndarray:
    """Smooth profile vanishing on the rigid walls with zero slope at the flexible wall."""
    axes = geom.coords()
    out = np.cos(0.5 * np.pi * axes[0])
    for a in axes[1:]:
        out = out * np.sin(np.pi * a)
    return out


def _wall_shape(geom: Geometry) -> np.ndarray:
    axes = geom.gamma_coords()
    out = np.ones(geom.gamma_shape)
    for a in axes:
        out = out * np.sin(np.pi * a) ** 2
    return out


def base_shape(cfg: dict, geom: Geometry) -> State:
    """Unscaled initial datum (zero velocities unless read from file)."""
    ini = cfg["initial"]
    shape = ini["shape"]
    if shape == "file":
        if not ini.get("path"):
            raise ValidationFailure("initial.shape = 'file' needs initial.path")
        states = output.read_snapshots(ini["path"])
        s = states[-1]
        if s.u.shape != geom.omega_shape or s.w.shape != geom.gamma_shape:
            raise ValidationFailure("snapshot file does not match the configured geometry")
        return State(0.0, s.u, s.v, s.w, s.z)
    axes = geom.coords()
    if shape == "gaussian-bump":
        center = list(ini["center"]) + [0.5] * geom.dim
        r2 = sum((a - c) ** 2 for a, c in zip(axes, center[: geom.dim]))
        u = np.exp(-r2 / (2.0 * ini["width"] ** 2)) * _taper(geom)
        gax = geom.gamma_coords()
        gr2 = sum((a - c) ** 2 for a, c in zip(gax, center[1: geom.dim]))
        w = np.exp(-gr2 / (2.0 * ini["width"] ** 2)) * _wall_shape(geom)
    else:
        mode = list(ini["mode"]) + [1] * geom.dim
        u = np.cos((mode[0] - 0.5) * np.pi * axes[0])
        for k, a in zip(mode[1: geom.dim], axes[1:]):
            u = u * np.sin(k * np.pi * a)
        w = _wall_shape(geom)
    u = geom.extend_u(geom.restrict_u(u))
    w = ini["w_weight"] * geom.extend_w(geom.restrict_w(w))
    return State(0.0, u, np.zeros_like(u), w, np.zeros_like(w))


def _scaled(s: State, a: float) -> State:
    return State(s.t, a * s.u, a * s.v, a * s.w, a * s.z)


def admissible(state: State, well: wl.WellGeometry, geom: Geometry, params: ModelParams) -> bool:
    """Initial datum in the closed well subset and ``calE(0) <= Lambda(s* - delta)``."""
    if not wl.check_in_tilde_W1_delta(state.u, state.w, well, geom, params):
        return False
    return wl.total_energy(state, geom, params) <= well.lambda_delta


def max_admissible_amplitude(shape: State, well: wl.WellGeometry, geom: Geometry,
                             params: ModelParams, rel_tol: float = 1e-10) -> float:
    """Largest ``a`` with ``a * shape`` admissible, by bisection."""
    if math.isinf(well.radius()):
        return math.inf
    if not admissible(_scaled(shape, 1e-300), well, geom, params):
        return 0.0
    hi = 1.0
    while admissible(_scaled(shape, hi), well, geom, params):
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if admissible(_scaled(shape, mid), well, geom, params):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class InitialData:
    state: State
    scale: float
    max_amplitude: Optional[float]
    info: dict = field(default_factory=dict)


def make_initial_state(cfg: dict, geom: Geometry, params: ModelParams, well: wl.WellGeometry) -> InitialData:
    """Build the configured datum; with ``auto_scale`` place it at
    ``amplitude * fraction * A_max`` where ``A_max`` is the largest
    admissible amplitude (``fraction <= 0.9`` keeps a 10% margin)."""
    ini = cfg["initial"]
    shape = base_shape(cfg, geom)
    if ini["auto_scale"] and ini["shape"] != "file":
        a_max = max_admissible_amplitude(shape, well, geom, params)
        if not math.isfinite(a_max):
            scale = ini["amplitude"] * ini["fraction"]
        else:
            scale = ini["amplitude"] * ini["fraction"] * a_max
    else:
        a_max = None
        scale = ini["amplitude"]
    st = _scaled(shape, scale)
    cls = wl.classify(st.u, st.w, well, geom, params)
    info = {
        "shape": ini["shape"],
        "scale": scale,
        "max_admissible_amplitude": a_max,
        "fraction": ini["fraction"] if ini["auto_scale"] else None,
        "amplitude_multiplier": ini["amplitude"],
        "label": cls.label,
        "J": cls.J,
        "nehari": cls.nehari,
        "norm_X": cls.norm_X,
        "calE0": wl.total_energy(st, geom, params),
        "in_tilde_W1_delta": wl.check_in_tilde_W1_delta(st.u, st.w, well, geom, params),
        "admissible": admissible(st, well, geom, params),
    }
    return InitialData(st, scale, a_max, info)


# -- commands --------------------------------------------------------------


def command_validate(cfg: dict) -> dict:
    params = params_from_config(cfg)
    rep = validate_params(params, for_decay=False)
    out = {"params": rep.to_dict()}
    try:
        geom = geometry_from_config(cfg)
        dt = cfg["time"]["dt"]
        limit = geom.cfl_limit()
        geo = {"ok": True, "n": geom.n, "mode": geom.mode, "cfl_limit": limit,
               "dt": geom.default_dt() if dt is None else dt}
        if dt is not None and dt > limit:
            geo["ok"] = False
            geo["error"] = f"time step {dt:.3e} violates the stability bound {limit:.3e}"
    except ValueError as exc:
        geo = {"ok": False, "error": str(exc)}
    out["geometry"] = geo
    out["ok"] = rep.ok and geo["ok"]
    return out


def _require_valid(cfg: dict) -> tuple[Geometry, ModelParams]:
    rep = command_validate(cfg)
    if not rep["ok"]:
        msgs = list(rep["params"]["errors"])
        if not rep["geometry"]["ok"]:
            msgs.append(rep["geometry"]["error"])
        raise ValidationFailure("; ".join(msgs))
    for w in rep["params"]["warnings"]:
        log.warning(w)
    return geometry_from_config(cfg), params_from_config(cfg)


def command_well(cfg: dict) -> dict:
    geom, params = _require_valid(cfg)
    well, emb, depth = well_from_config(cfg, geom, params)
    rep = {"config": cfg, "well": well.to_dict()}
    if emb is not None:
        rep["embedding"] = {
            "K1_restarts": emb.restarts_K1,
            "K2_restarts": emb.restarts_K2,
            "converged": emb.converged,
        }
        rep["depth"] = {"sampled_min": min(depth.sampled) if depth.sampled else None,
                        "refined": depth.refined, "sources_disabled": depth.sources_disabled}
        if depth.sources_disabled:
            rep["depth"]["notice"] = "sources disabled: depth infinite"
        consts = dec.compute_stabilization_constants(well, geom)
        rep["stabilization"] = consts.to_dict()
    ini = make_initial_state(cfg, geom, params, well)
    rep["initial"] = ini.info
    return rep


def _classifier(well, geom, params):
    def cb(u, w, terms):
        c = wl.classify_vec(u, w, well, geom, params, terms=terms)
        return c.label, c.norm_X, c.nehari
    return cb


@dataclass
class SimulationResult:
    report: dict
    ledger: object
    snaps: list
    well: wl.WellGeometry
    geom: Geometry
    params: ModelParams
    aborted: bool = False


def run_simulation(cfg: dict) -> SimulationResult:
    geom, params = _require_valid(cfg)
    well, emb, depth = well_from_config(cfg, geom, params)
    ini = make_initial_state(cfg, geom, params, well)
    tm = cfg["time"]
    rep = {"config": cfg, "well": well.to_dict(), "initial": ini.info}
    aborted = False
    try:
        snaps, ledger = simulate(
            ini.state, params, geom, tm["t_end"], dt=tm["dt"], output_dt=tm["output_dt"],
            stride=tm["stride"], snapshot_every=cfg["outputs"]["snapshot_every"],
            classify=_classifier(well, geom, params), residual_tol=tm["residual_tol"])
    except InstabilityError as exc:
        aborted = True
        ledger = exc.ledger
        snaps = []
        rep["instability"] = {"message": str(exc), "last_good_time": exc.last_good_time}
    res = np.abs(np.asarray(ledger.residual)) if ledger is not None and len(ledger) else np.zeros(1)
    rep["run"] = {
        "dt": ledger.dt if ledger is not None else None,
        "rows": len(ledger) if ledger is not None else 0,
        "max_abs_residual": float(res.max()),
        "aborted": aborted,
    }
    if ledger is not None and len(ledger):
        rep["theorem31"] = wl.theorem31_monitor(ledger, well, energy_tol=tm["residual_tol"])
        rep["theorem31"].pop("per_row", None)
    return SimulationResult(rep, ledger, snaps, well, geom, params, aborted)


def _write_sim_outputs(res: SimulationResult, cfg: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    o = cfg["outputs"]
    if res.ledger is not None:
        output.write_ledger_csv(res.ledger, out / o["ledger"])
    if o["snapshots"] and res.snaps:
        output.write_snapshots(res.snaps, out / o["snapshots"])
    if o["plot_script"]:
        output.write_plot_script(o["ledger"], out / o["plot_script"])
    res.report["config_hash"] = config_hash(cfg)
    output.write_report(res.report, out / o["report"])


def config_hash(cfg: dict) -> str:
    """Hash of everything that influences the ledger."""
    keep = {k: cfg[k] for k in ("seed", "geometry", "params", "well", "initial", "time")}
    return hashlib.sha256(json.dumps(keep, sort_keys=True).encode()).hexdigest()[:16]


def command_simulate(cfg: dict, out: Path) -> SimulationResult:
    res = run_simulation(cfg)
    _write_sim_outputs(res, cfg, Path(out))
    return res


def decay_analysis(ledger, well: wl.WellGeometry, geom: Geometry, params: ModelParams,
                   cfg: dict) -> dict:
    """Branch, rate fit, stabilization ratios and the comparison-ODE bound for one ledger."""
    prof = dec.beta_and_b(params.damping_u, params.damping_w)
    vrep = validate_params(params, for_decay=True)
    fit = dec.fit_decay_rate(ledger.t, ledger.calE, prof, window_start=cfg["decay"]["window_start"])
    consts = dec.compute_stabilization_constants(well, geom)
    chk = dec.check_stabilization(ledger, consts, prof.Phi)
    C_tilde = cfg["decay"]["C_tilde"]
    if C_tilde is None:
        C_tilde = chk.sup_ratio if math.isfinite(chk.sup_ratio) and chk.sup_ratio > 0 else None
        consts.C_tilde_provenance = "sup of R(T) over this run"
    else:
        consts.C_tilde_provenance = "configured"
    consts.C_tilde = C_tilde
    rep = {
        "decay_validation": vrep.to_dict(),
        "profile": prof.to_dict(),
        "fit": fit.to_dict(),
        "stabilization": consts.to_dict(),
        "stabilization_check": chk.to_dict(),
    }
    if chk.short_run:
        rep["short_run"] = True
    t = np.asarray(ledger.t)
    calE = np.asarray(ledger.calE)
    if C_tilde is not None and calE[0] > 0 and chk.T_base > 0:
        phit = prof.Phi_tilde(C_tilde)
        T = chk.T_base
        horizon = max(t[-1] / T - 1.0, 0.0)
        sol = dec.solve_decay_ode(float(calE[0]), phit, max(horizon, 1e-12))
        arg = t / T - 1.0
        bound = np.where(arg >= 0, np.interp(np.clip(arg, 0, None), sol.t, sol.sigma), calE[0])
        env = {"T": T, "t": t.tolist(), "calE": calE.tolist(), "sigma_bound": bound.tolist(),
               "bound_holds": bool(np.all(calE <= bound * (1 + 1e-9))),
               "ode_self_consistency": sol.self_consistency}
        if prof.branch == "algebraic":
            C0 = dec.fit_C0(phit, prof.beta)
            env["C0"] = C0
            lam = np.array([dec.invert_I_plus_Phi(s, phit) for s in sol.sigma])
            idx = np.flatnonzero(lam <= 1.0)
            if idx.size:
                i0 = int(idx[0])
                t0 = float(sol.t[i0])
                st = dec.sigma_tilde(np.clip(arg, t0, None), C0, prof.beta, t0, float(sol.sigma[i0]))
                env["t0"] = t0
                env["sigma_tilde"] = np.where(arg >= t0, st, np.nan).tolist()
        else:
            env["gamma"] = 1.0 / (1.0 + phit.linear_coeff)
        rep["envelope"] = env
    return rep


def command_decay(cfg: dict, out: Path) -> dict:
    """Decay report; reuses ``ledger.csv`` in ``out`` when it was produced by the same config."""
    out = Path(out)
    o = cfg["outputs"]
    ledger_path, report_path = out / o["ledger"], out / o["report"]
    geom, params = _require_valid(cfg)
    reuse = False
    if ledger_path.exists() and report_path.exists():
        try:
            reuse = output.read_report(report_path).get("config_hash") == config_hash(cfg)
        except (ValueError, OSError):
            reuse = False
    if reuse:
        ledger = output.read_ledger_csv(ledger_path)
        report = output.read_report(report_path)
        well = wl.WellGeometry.from_dict(report["well"])
    else:
        res = command_simulate(cfg, out)
        if res.aborted:
            raise InstabilityError(res.report["instability"]["message"],
                                   res.report["instability"]["last_good_time"], res.ledger)
        ledger, report, well = res.ledger, res.report, res.well
    report["decay"] = decay_analysis(ledger, well, geom, params, cfg)
    env = report["decay"].get("envelope")
    if env is not None:
        with open(out / "envelope.csv", "w") as fh:
            cols = ["t", "calE", "sigma_bound"] + (["sigma_tilde"] if "sigma_tilde" in env else [])
            fh.write(",".join(cols) + "\n")
            for i in range(len(env["t"])):
                fh.write(",".join(repr(float(env[c][i])) for c in cols) + "\n")
    report["config_hash"] = config_hash(cfg)
    output.write_report(report, report_path)
    return report


def command_sweep(cfg: dict, out: Path) -> dict:
    """Run ``sweep.command`` once per ``sweep.values`` entry of ``sweep.key``."""
    sw = cfg.get("sweep")
    if not sw:
        raise ValidationFailure("sweep command needs a 'sweep' block with key and values")
    out = Path(out)
    cmd = sw.get("command", "simulate")
    jobs = []
    for i, val in enumerate(sw["values"]):
        sub = copy.deepcopy(cfg)
        sub.pop("sweep")
        set_path(sub, sw["key"], val)
        jobs.append((i, val, sub, out / f"run_{i:02d}"))

    def work(job):
        i, val, sub, d = job
        if cmd == "decay":
            rep = command_decay(sub, d)
            chk = rep["decay"]["stabilization_check"]
            return {"value": val, "dir": str(d), "sup_ratio": chk["sup_ratio"], "fit": rep["decay"]["fit"]}
        res = command_simulate(sub, d)
        return {"value": val, "dir": str(d), "aborted": res.aborted,
                "max_abs_residual": res.report["run"]["max_abs_residual"]}

    with ThreadPoolExecutor(max_workers=sw.get("workers", 1)) as pool:
        results = list(pool.map(work, jobs))
    summary = {"key": sw["key"], "command": cmd, "runs": results}
    if cmd == "decay":
        sups = [r["sup_ratio"] for r in results if r["sup_ratio"] is not None]
        if sups:
            summary["C_tilde"] = max(sups)
            summary["C_tilde_spread"] = max(sups) / min(sups) if min(sups) > 0 else None
    out.mkdir(parents=True, exist_ok=True)
    output.write_report(summary, out / "sweep.json")
    return summary
