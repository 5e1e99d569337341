"""Result files: ledger CSV, JSON reports, binary snapshot dumps, plot script."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import EnergyLedger, State

LEDGER_HEADER = EnergyLedger.COLUMNS
SNAPSHOT_FORMAT = "structacoustics-snapshots"


def write_ledger_csv(ledger: EnergyLedger, path: str | Path) -> None:
    """Write the ledger with the fixed header ``t,E,calE,J,D,residual,label``.

    Floats use ``repr`` so that re-reading gives identical values and
    identical runs give identical bytes.
    """
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(LEDGER_HEADER)
        for row in ledger.rows():
            wr.writerow([repr(float(x)) for x in row[:-1]] + [row[-1]])


def read_ledger_csv(path: str | Path) -> EnergyLedger:
    led = EnergyLedger()
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != LEDGER_HEADER:
            raise ValueError(f"{path}: unexpected ledger header {header}")
        for row in rd:
            t, E, calE, J, D, res, label = row
            led.t.append(float(t))
            led.E.append(float(E))
            led.calE.append(float(calE))
            led.J.append(float(J))
            led.D.append(float(D))
            led.residual.append(float(res))
            led.label.append(label)
            led.norm_X.append(math.nan)
            led.nehari.append(math.nan)
    return led


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_report(report: dict, path: str | Path) -> None:
    """JSON with non-finite floats written as ``null``."""
    Path(path).write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")


def read_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def write_snapshots(states: Sequence[State], path: str | Path) -> None:
    """One JSON header line, then ``u, v, w, z`` of every state as raw little-endian float64."""
    if not states:
        raise ValueError("no states to write")
    header = {
        "format": SNAPSHOT_FORMAT,
        "version": 1,
        "dtype": "<f8",
        "omega_shape": list(states[0].u.shape),
        "gamma_shape": list(states[0].w.shape),
        "fields": ["u", "v", "w", "z"],
        "times": [float(s.t) for s in states],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        for s in states:
            for arr in (s.u, s.v, s.w, s.z):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_snapshots(path: str | Path) -> list[State]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"{path}: not a snapshot file")
        data = np.frombuffer(fh.read(), dtype=header["dtype"])
    so, sg = tuple(header["omega_shape"]), tuple(header["gamma_shape"])
    no, ng = int(np.prod(so)), int(np.prod(sg))
    per = 2 * no + 2 * ng
    if data.size != per * len(header["times"]):
        raise ValueError(f"{path}: truncated snapshot data")
    out = []
    for i, t in enumerate(header["times"]):
        blk = data[i * per:(i + 1) * per]
        u = blk[:no].reshape(so).copy()
        v = blk[no:2 * no].reshape(so).copy()
        w = blk[2 * no:2 * no + ng].reshape(sg).copy()
        z = blk[2 * no + ng:].reshape(sg).copy()
        out.append(State(float(t), u, v, w, z))
    return out


PLOT_TEMPLATE = '''"""Plot the energy ledger written next to this script (needs matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {ledger!r}
with open(path) as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
for key in ("E", "calE", "J", "D"):
    ax1.plot(t, [float(r[key]) for r in rows], label=key)
ax1.set_yscale("symlog", linthresh=1e-12)
ax1.legend()
ax2.plot(t, [abs(float(r["residual"])) for r in rows])
ax2.set_yscale("log")
ax2.set_ylabel("|residual|")
ax2.set_xlabel("t")
fig.tight_layout()
fig.savefig({png!r})
'''


def write_plot_script(ledger_name: str, path: str | Path) -> None:
    png = Path(ledger_name).with_suffix(".png").name
    Path(path).write_text(PLOT_TEMPLATE.format(ledger=ledger_name, png=png))
