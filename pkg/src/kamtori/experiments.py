"""Experiment execution: canned paper reproductions and run-directory output.

A run owns one output directory. Series data goes to CSV (17 significant
digits, '.' decimal separator), scalar results to JSON, and every emitted
file is listed in manifest.json with its SHA-256 hash; re-running the same
config reproduces every data file byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._version import __version__
from .config import (
    FIGURE2_GRID_A,
    FIGURE2_GRID_B,
    FIGURE4_GRID,
    PORTRAIT_N_STEPS,
    RunConfig,
)
from .errors import KamtoriError, UnsupportedDimensionError
from .integrators import (
    SCHEMES,
    Trajectory,
    get_scheme,
    integrate,
    integrate_batch,
)
from .naff import SignalSeries, fundamental_frequencies, naff_decompose, trajectory_observables
from .resonance import (
    ScanRow,
    detect_peaks,
    fit_convergence_order,
    scan_step_sizes,
    search_resonance,
)
from .state import PhaseState
from .systems import get_system, pendulum_frequency

_FLOAT_FMT = "{:.17g}"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _FLOAT_FMT.format(float(value))


@dataclass(frozen=True)
class RunManifest:
    """Record of one executed run."""

    config: dict
    version: str
    started: str
    finished: str
    status: str
    failing_stage: Optional[str]
    files: List[dict]

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "status": self.status,
            "failing_stage": self.failing_stage,
            "files": self.files,
        }


class _RunWriter:
    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files: List[dict] = []
        os.makedirs(out_dir, exist_ok=True)

    def register(self, name: str) -> None:
        path = os.path.join(self.out_dir, name)
        digest = hashlib.sha256(open(path, "rb").read()).hexdigest()
        self.files.append({"name": name, "sha256": digest, "bytes": os.path.getsize(path)})

    def write_csv(self, name: str, header: Sequence[str], rows) -> None:
        path = os.path.join(self.out_dir, name)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        self.register(name)

    def write_json(self, name: str, payload: dict) -> None:
        path = os.path.join(self.out_dir, name)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.register(name)


def _initial_state(config: RunConfig) -> PhaseState:
    return PhaseState(np.array(config.initial_p), np.array(config.initial_q))


def _grid(spec: Tuple[float, float, float]) -> np.ndarray:
    start, stop, step = spec
    count = int(round((stop - start) / step))
    grid = start + step * np.arange(count + 1)
    return np.round(grid[grid <= stop + 1e-12 * step], 12)


def _scan_header(system) -> List[str]:
    return (
        ["h"]
        + [f"err_I{j + 1}" for j in range(len(system.first_integrals))]
        + ["err_H", "converged"]
    )


def _scan_rows_to_csv(rows: List[ScanRow]):
    for row in rows:
        yield [row.h, *row.errors, row.converged]


def write_trajectory_csv(writer: _RunWriter, name: str, traj: Trajectory) -> None:
    n = traj.p.shape[1]
    header = ["step", "t"] + [f"p{i+1}" for i in range(n)] + [f"q{i+1}" for i in range(n)]
    times = traj.times()

    def rows():
        for i in range(traj.p.shape[0]):
            yield [i, times[i], *traj.p[i], *traj.q[i]]

    writer.write_csv(name, header, rows())


def emit_phase_portrait(traj: Trajectory, path: str) -> None:
    """Write (n, p_n, q_n mod 2 pi) rows for a 1-DOF trajectory."""
    if traj.p.shape[1] != 1:
        raise UnsupportedDimensionError("phase portraits are only defined for 1-DOF systems")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    q_mod = np.mod(traj.q[:, 0], 2.0 * np.pi)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "p", "q_mod_2pi"])
        for i in range(traj.p.shape[0]):
            writer.writerow([_fmt(i), _fmt(traj.p[i, 0]), _fmt(q_mod[i])])


def _spectrum_rows(lines):
    for idx, line in enumerate(lines):
        amp = line.amplitude
        yield [idx, line.omega, amp.real, amp.imag, abs(amp)]


_SPECTRUM_HEADER = ["line_index", "omega", "re_amp", "im_amp", "abs_amp"]


def _run_integrate(config: RunConfig, writer: _RunWriter) -> None:
    system = get_system(config.system)
    scheme = get_scheme(config.scheme)
    traj = integrate(scheme, system, _initial_state(config), config.h, config.n_steps, config.solver)
    write_trajectory_csv(writer, "trajectory.csv", traj)


def _spectrum_for(config: RunConfig, writer: _RunWriter) -> List[list]:
    system = get_system(config.system)
    scheme = get_scheme(config.scheme)
    traj = integrate(scheme, system, _initial_state(config), config.h, config.n_steps, config.solver)
    all_lines = []
    for dof, obs in enumerate(trajectory_observables(traj, system)):
        lines = naff_decompose(SignalSeries(obs, traj.h), config.n_lines)
        name = "spectrum.csv" if dof == 0 else f"spectrum_dof{dof+1}.csv"
        writer.write_csv(name, _SPECTRUM_HEADER, _spectrum_rows(lines))
        all_lines.append(lines)
    return all_lines


def _run_scan(config: RunConfig, writer: _RunWriter) -> None:
    system = get_system(config.system)
    scheme = get_scheme(config.scheme)
    grid_spec = config.h_grid or FIGURE2_GRID_A
    rows = scan_step_sizes(
        scheme, system, _initial_state(config), _grid(grid_spec), config.n_steps, config.solver
    )
    writer.write_csv("scan.csv", _scan_header(system), _scan_rows_to_csv(rows))
    energy_index = len(system.first_integrals)
    peaks = detect_peaks(rows, energy_index, config.peak_window, config.peak_factor)
    writer.write_json("peaks.json", {"scan.csv": [{"h": h, "error": e} for h, e in peaks]})


def _drift_measurements(config: RunConfig):
    system = get_system(config.system)
    scheme = get_scheme(config.scheme)
    if system.name != "pendulum":
        raise UnsupportedDimensionError("the drift experiment is defined for the pendulum")
    state0 = _initial_state(config)
    energy = float(system.energy(state0.as_z()))
    omega_exact = pendulum_frequency(energy)
    trajs = integrate_batch(
        scheme, system, state0, np.array(config.drift_h), config.n_steps, config.solver
    )
    rows = []
    for traj in trajs:
        omega_h = float(fundamental_frequencies(traj, system, config.n_lines)[0])
        rows.append((traj.h, omega_h, abs(omega_h - omega_exact)))
    return omega_exact, rows


def _run_drift(config: RunConfig, writer: _RunWriter) -> None:
    omega_exact, rows = _drift_measurements(config)
    writer.write_csv("drift.csv", ["h", "omega_h", "freq_error"], rows)
    slope, intercept, r2 = fit_convergence_order(
        [r[0] for r in rows], [max(r[2], 1e-300) for r in rows]
    )
    writer.write_json(
        "drift.json",
        {"slope": slope, "intercept": intercept, "r2": r2, "omega_exact": omega_exact},
    )


def _run_label(config: RunConfig, writer: _RunWriter) -> None:
    label = search_resonance(config.omega, config.h, config.k_max, config.l_max, config.tol)
    payload = {"found": label is not None}
    if label is not None:
        payload["label"] = label.as_dict()
    writer.write_json("label.json", payload)


def _run_portrait(config: RunConfig, writer: _RunWriter) -> None:
    system = get_system(config.system)
    scheme = get_scheme(config.scheme)
    traj = integrate(scheme, system, _initial_state(config), config.h, config.n_steps, config.solver)
    emit_phase_portrait(traj, os.path.join(writer.out_dir, "portrait.csv"))
    writer.register("portrait.csv")


def _run_figure1(config: RunConfig, writer: _RunWriter) -> None:
    _spectrum_for(config, writer)
    _run_drift(config, writer)


def _run_figure2(config: RunConfig, writer: _RunWriter) -> None:
    system = get_system(config.system)
    scheme = get_scheme(config.scheme)
    state0 = _initial_state(config)
    if config.h_grid is None:
        grids = {"scan.csv": _grid(FIGURE2_GRID_A), "scan2.csv": _grid(FIGURE2_GRID_B)}
    else:
        # explicit grid: split at its midpoint to keep the two-panel layout
        grid = _grid(config.h_grid)
        half = max(len(grid) // 2, 1)
        grids = {"scan.csv": grid[:half], "scan2.csv": grid[half:]}
    energy_index = len(system.first_integrals)
    peaks_payload: Dict[str, list] = {}
    for name, grid in grids.items():
        rows = scan_step_sizes(scheme, system, state0, grid, config.n_steps, config.solver)
        writer.write_csv(name, _scan_header(system), _scan_rows_to_csv(rows))
        peaks = detect_peaks(rows, energy_index, config.peak_window, config.peak_factor)
        peaks_payload[name] = [{"h": h, "error": e} for h, e in peaks]
    writer.write_json("peaks.json", peaks_payload)


def _run_figure3(config: RunConfig, writer: _RunWriter) -> None:
    system = get_system(config.system)
    scheme = get_scheme(config.scheme)
    state0 = _initial_state(config)
    n_steps = config.n_steps if config.n_steps != 100_000 else PORTRAIT_N_STEPS
    for h in config.portrait_h:
        traj = integrate(scheme, system, state0, h, n_steps, config.solver)
        name = f"portrait_h{_fmt(h)}.csv"
        emit_phase_portrait(traj, os.path.join(writer.out_dir, name))
        writer.register(name)


def _run_figure4(config: RunConfig, writer: _RunWriter) -> None:
    system = get_system(config.system)
    state0 = _initial_state(config)
    grid = _grid(config.h_grid or FIGURE4_GRID)
    energy_index = len(system.first_integrals)
    peaks_payload: Dict[str, list] = {}
    for name in ("im", "sv", "se", "runge"):
        rows = scan_step_sizes(SCHEMES[name], system, state0, grid, config.n_steps, config.solver)
        fname = f"scan_{name}.csv"
        writer.write_csv(fname, _scan_header(system), _scan_rows_to_csv(rows))
        peaks = detect_peaks(rows, energy_index, config.peak_window, config.peak_factor)
        peaks_payload[fname] = [{"h": h, "error": e} for h, e in peaks]
    writer.write_json("peaks.json", peaks_payload)


def _run_spectrum(config: RunConfig, writer: _RunWriter) -> None:
    _spectrum_for(config, writer)


_RUNNERS = {
    "integrate": _run_integrate,
    "spectrum": _run_spectrum,
    "scan": _run_scan,
    "drift": _run_drift,
    "label": _run_label,
    "portrait": _run_portrait,
    "figure1": _run_figure1,
    "figure2": _run_figure2,
    "figure3": _run_figure3,
    "figure4": _run_figure4,
}


def _config_echo(config: RunConfig) -> dict:
    echo = {}
    for key, value in config.__dict__.items():
        if key == "solver":
            echo[key] = {"tol": value.tol, "max_iter": value.max_iter, "method": value.method}
        elif isinstance(value, tuple):
            echo[key] = list(value)
        else:
            echo[key] = value
    return echo


def run(config: RunConfig, out_root: Optional[str] = None) -> RunManifest:
    """Execute the configured experiment and write its run directory."""
    out_dir = config.out_dir
    if out_root is not None and not os.path.isabs(out_dir):
        out_dir = os.path.join(out_root, out_dir)
    writer = _RunWriter(out_dir)
    started = datetime.now(timezone.utc).isoformat()
    status = "ok"
    failing_stage = None
    error = None
    try:
        _RUNNERS[config.kind](config, writer)
    except KamtoriError as exc:
        status = "failed"
        failing_stage = f"{config.kind}: {exc}"
        error = exc
    finished = datetime.now(timezone.utc).isoformat()
    manifest = RunManifest(
        config=_config_echo(config),
        version=__version__,
        started=started,
        finished=finished,
        status=status,
        failing_stage=failing_stage,
        files=writer.files,
    )
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if error is not None:
        raise error
    return manifest
