"""Declarative run configuration (JSON) with strict validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import ConfigError
from .integrators import SCHEMES, SolverConfig
from .systems import get_system, make_expression_system, register_system

KINDS = (
    "integrate",
    "spectrum",
    "scan",
    "drift",
    "label",
    "portrait",
    "figure1",
    "figure2",
    "figure3",
    "figure4",
)

_TOP_LEVEL_KEYS = {
    "kind",
    "system",
    "scheme",
    "initial",
    "h",
    "h_grid",
    "n_steps",
    "solver",
    "n_lines",
    "out_dir",
    "seed",
    "systems",
    "omega",
    "k_max",
    "l_max",
    "tol",
    "drift_h",
    "portrait_h",
    "peak_window",
    "peak_factor",
}

_INITIAL_KEYS = {"p", "q", "x", "y"}
_H_GRID_KEYS = {"start", "stop", "step"}
_SOLVER_KEYS = {"tol", "max_iter", "method"}
_SYSTEM_DEF_KEYS = {"name", "dof", "hamiltonian", "observable"}

# paper experiment defaults
PENDULUM_INITIAL = ((0.7,), (0.0,))
DEFAULT_N_STEPS = 100_000
DRIFT_H_DEFAULT = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5)
FIGURE2_GRID_A = (0.01, 3.0, 0.01)
FIGURE2_GRID_B = (3.0, 6.0, 0.01)
FIGURE4_GRID = (0.01, 1.5, 0.005)
PORTRAIT_H_DEFAULT = (0.01, 1.95, 2.05, 2.15, 3.4, 3.5, 3.6)
PORTRAIT_N_STEPS = 5000


@dataclass(frozen=True)
class RunConfig:
    """Validated experiment description."""

    kind: str
    system: str
    scheme: str
    initial_p: Tuple[float, ...]
    initial_q: Tuple[float, ...]
    h: float
    h_grid: Optional[Tuple[float, float, float]]
    n_steps: int
    solver: SolverConfig
    n_lines: int
    out_dir: str
    seed: int
    omega: Optional[Tuple[float, ...]] = None
    k_max: int = 8
    l_max: int = 2
    tol: float = 0.05
    drift_h: Tuple[float, ...] = DRIFT_H_DEFAULT
    portrait_h: Tuple[float, ...] = PORTRAIT_H_DEFAULT
    peak_window: int = 11
    peak_factor: float = 3.0


def _line_of_key(text: str, key: str) -> Optional[int]:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _require_finite(value, name, text):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number", line=_line_of_key(text, name.split(".")[-1]))
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite", line=_line_of_key(text, name.split(".")[-1]))
    return float(value)


def _check_keys(mapping, allowed, where, text):
    for key in mapping:
        if key not in allowed:
            raise ConfigError(
                f"unknown key {key!r} in {where}; allowed: {', '.join(sorted(allowed))}",
                line=_line_of_key(text, key),
            )


def _vector(raw, name, text):
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{name} must be a non-empty array", line=_line_of_key(text, name))
    return tuple(_require_finite(v, name, text) for v in raw)


def validate_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Unknown keys are hard errors; every numeric field is checked before any
    computation happens. Custom systems declared under "systems" are
    registered as a side effect.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw, _TOP_LEVEL_KEYS, "config", text)

    for sysdef in raw.get("systems", []):
        if not isinstance(sysdef, dict):
            raise ConfigError("entries of 'systems' must be objects", line=_line_of_key(text, "systems"))
        _check_keys(sysdef, _SYSTEM_DEF_KEYS, "system definition", text)
        for need in ("name", "dof", "hamiltonian"):
            if need not in sysdef:
                raise ConfigError(
                    f"system definition missing {need!r}", line=_line_of_key(text, "systems")
                )
        model = make_expression_system(
            name=str(sysdef["name"]),
            dof=int(sysdef["dof"]),
            hamiltonian=str(sysdef["hamiltonian"]),
            observable=str(sysdef.get("observable", "angle")),
        )
        register_system(model, overwrite=True)

    kind = raw.get("kind", "integrate")
    if kind not in KINDS:
        raise ConfigError(
            f"unknown kind {kind!r}; valid kinds: {', '.join(KINDS)}",
            line=_line_of_key(text, "kind"),
        )

    default_system = "ruessmann3" if kind == "figure4" else "pendulum"
    system_name = raw.get("system", default_system)
    try:
        system = get_system(str(system_name))
    except ConfigError as exc:
        raise ConfigError(str(exc), line=_line_of_key(text, "system")) from None

    scheme_name = str(raw.get("scheme", "im"))
    if scheme_name not in SCHEMES:
        raise ConfigError(
            f"unknown scheme {scheme_name!r}; valid schemes: {', '.join(sorted(SCHEMES))}",
            line=_line_of_key(text, "scheme"),
        )

    if "initial" in raw:
        init = raw["initial"]
        if not isinstance(init, dict):
            raise ConfigError("'initial' must be an object", line=_line_of_key(text, "initial"))
        _check_keys(init, _INITIAL_KEYS, "initial", text)
        if "p" in init or "q" in init:
            if not ("p" in init and "q" in init):
                raise ConfigError("initial state needs both p and q", line=_line_of_key(text, "initial"))
            p = _vector(init["p"], "p", text)
            q = _vector(init["q"], "q", text)
        elif "x" in init and "y" in init:
            p = _vector(init["x"], "x", text)
            q = _vector(init["y"], "y", text)
        else:
            raise ConfigError(
                "initial state needs p/q (or x/y for Cartesian systems)",
                line=_line_of_key(text, "initial"),
            )
    elif system.name == "pendulum":
        p, q = PENDULUM_INITIAL
    elif system.name == "ruessmann3":
        from .systems import RUESSMANN3_X0, RUESSMANN3_Y0

        p, q = tuple(RUESSMANN3_X0), tuple(RUESSMANN3_Y0)
    else:
        raise ConfigError(f"system {system.name!r} needs an explicit initial state")
    if len(p) != system.dof or len(q) != system.dof:
        raise ConfigError(
            f"initial state has {len(p)} components, system {system.name!r} has dof {system.dof}",
            line=_line_of_key(text, "initial"),
        )

    h = _require_finite(raw.get("h", 0.01), "h", text)
    if h <= 0:
        raise ConfigError("h must be positive", line=_line_of_key(text, "h"))

    h_grid = None
    if "h_grid" in raw:
        grid = raw["h_grid"]
        if not isinstance(grid, dict):
            raise ConfigError("'h_grid' must be an object", line=_line_of_key(text, "h_grid"))
        _check_keys(grid, _H_GRID_KEYS, "h_grid", text)
        for need in _H_GRID_KEYS:
            if need not in grid:
                raise ConfigError(f"h_grid missing {need!r}", line=_line_of_key(text, "h_grid"))
        start = _require_finite(grid["start"], "h_grid.start", text)
        stop = _require_finite(grid["stop"], "h_grid.stop", text)
        step = _require_finite(grid["step"], "h_grid.step", text)
        if start <= 0 or step <= 0:
            raise ConfigError("h_grid start and step must be positive", line=_line_of_key(text, "h_grid"))
        if stop < start:
            raise ConfigError("h_grid stop must be >= start", line=_line_of_key(text, "h_grid"))
        h_grid = (start, stop, step)

    n_steps = raw.get("n_steps", DEFAULT_N_STEPS)
    if isinstance(n_steps, bool) or not isinstance(n_steps, int) or n_steps < 0:
        raise ConfigError("n_steps must be a non-negative integer", line=_line_of_key(text, "n_steps"))

    solver_raw = raw.get("solver", {})
    if not isinstance(solver_raw, dict):
        raise ConfigError("'solver' must be an object", line=_line_of_key(text, "solver"))
    _check_keys(solver_raw, _SOLVER_KEYS, "solver", text)
    try:
        solver = SolverConfig(
            tol=float(solver_raw.get("tol", 1e-13)),
            max_iter=int(solver_raw.get("max_iter", 50)),
            method=str(solver_raw.get("method", "newton")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), line=_line_of_key(text, "solver")) from None

    n_lines = raw.get("n_lines", 5)
    if isinstance(n_lines, bool) or not isinstance(n_lines, int) or n_lines < 1:
        raise ConfigError("n_lines must be a positive integer", line=_line_of_key(text, "n_lines"))

    omega = _vector(raw["omega"], "omega", text) if "omega" in raw else None
    k_max = raw.get("k_max", 8)
    l_max = raw.get("l_max", 2)
    for name, val in (("k_max", k_max), ("l_max", l_max)):
        if isinstance(val, bool) or not isinstance(val, int) or val < 1:
            raise ConfigError(f"{name} must be a positive integer", line=_line_of_key(text, name))
    tol = _require_finite(raw.get("tol", 0.05), "tol", text)
    if tol <= 0:
        raise ConfigError("tol must be positive", line=_line_of_key(text, "tol"))
    if kind == "label" and omega is None:
        raise ConfigError("kind 'label' requires 'omega'", line=_line_of_key(text, "kind"))

    drift_h = tuple(sorted(_vector(raw["drift_h"], "drift_h", text))) if "drift_h" in raw else DRIFT_H_DEFAULT
    portrait_h = (
        tuple(_vector(raw["portrait_h"], "portrait_h", text))
        if "portrait_h" in raw
        else PORTRAIT_H_DEFAULT
    )
    if any(v <= 0 for v in drift_h) or any(v <= 0 for v in portrait_h):
        raise ConfigError("step sizes must be positive")

    peak_window = raw.get("peak_window", 11)
    peak_factor = raw.get("peak_factor", 3.0)
    if isinstance(peak_window, bool) or not isinstance(peak_window, int) or peak_window < 3 or peak_window % 2 == 0:
        raise ConfigError("peak_window must be an odd integer >= 3", line=_line_of_key(text, "peak_window"))
    peak_factor = _require_finite(peak_factor, "peak_factor", text)
    if peak_factor <= 1:
        raise ConfigError("peak_factor must exceed 1", line=_line_of_key(text, "peak_factor"))

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer", line=_line_of_key(text, "seed"))

    out_dir = str(raw.get("out_dir", f"runs/{kind}"))

    return RunConfig(
        kind=kind,
        system=system.name,
        scheme=scheme_name,
        initial_p=p,
        initial_q=q,
        h=h,
        h_grid=h_grid,
        n_steps=n_steps,
        solver=solver,
        n_lines=n_lines,
        out_dir=out_dir,
        seed=seed,
        omega=omega,
        k_max=k_max,
        l_max=l_max,
        tol=tol,
        drift_h=drift_h,
        portrait_h=portrait_h,
        peak_window=peak_window,
        peak_factor=peak_factor,
    )
