"""File formats: trajectory and control CSV, state dumps, JSON reports."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .dynamics import ControlSignal, Trajectory, WaveState


def to_jsonable(obj):
    """Plain Python types for json; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path, data) -> None:
    write_atomic(path, json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n")


def write_trajectory_csv(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "energy", "norm_u", "norm_v", "dissipation", "v_mean"])
        vm = traj.v_means()
        for i, row in enumerate(traj.csv_rows()):
            w.writerow([repr(float(x)) for x in row] + [repr(float(vm[i]))])


def write_controls_csv(path, signal: ControlSignal, compact: bool = False) -> None:
    """One row per time sample; compact mode keeps only the L2 norms of f and h."""
    N = signal.f.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if compact:
            w.writerow(["t", "norm_f", "norm_h"])
        else:
            w.writerow(
                ["t"]
                + [f"f_re_{j}" for j in range(N)]
                + [f"f_im_{j}" for j in range(N)]
                + [f"h_{j}" for j in range(N)]
            )
        for m, t in enumerate(signal.times):
            if compact:
                nf = math.sqrt(float(np.mean(np.abs(signal.f[m]) ** 2)))
                nh = math.sqrt(float(np.mean(signal.h[m] ** 2)))
                w.writerow([repr(float(t)), repr(nf), repr(nh)])
            else:
                vals = np.concatenate([signal.f[m].real, signal.f[m].imag, signal.h[m]])
                w.writerow([repr(float(t))] + [repr(float(x)) for x in vals])


def read_controls_csv(path, T: float, dt: float) -> ControlSignal:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    N = (data.shape[1] - 1) // 3
    f = data[:, 1:1 + N] + 1j * data[:, 1 + N:1 + 2 * N]
    h = data[:, 1 + 2 * N:]
    return ControlSignal(f, h, T, dt)


def dump_state(path, state: WaveState) -> None:
    write_json(path, state.to_dict())


def load_state(path) -> WaveState:
    return WaveState.from_dict(json.loads(Path(path).read_text()))


def write_ratio_csv(path, stats_list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimate", "sample", "ratio"])
        for st in stats_list:
            for i, r in enumerate(st.ratios):
                w.writerow([st.name, i, repr(float(r))])
