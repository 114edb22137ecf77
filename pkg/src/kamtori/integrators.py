"""One-step maps, implicit-equation solving and trajectory generation.

All stepping goes through a batched engine operating on stacked states of
shape (M, 2n): every row is an independent trajectory, so a step-size scan
advances its whole grid in lockstep. Rows are assembled in input order,
which keeps scans deterministic regardless of how the batch is processed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, NonConvergenceError
from .state import PhaseState
from .systems import SystemModel

Array = np.ndarray

_SQRT_EPS = float(np.sqrt(np.finfo(float).eps))


@dataclass(frozen=True)
class Scheme:
    """A one-step integration scheme."""

    kind: str
    order: int
    symplectic: bool


IMPLICIT_MIDPOINT = Scheme("implicit_midpoint", order=2, symplectic=True)
STOERMER_VERLET = Scheme("stoermer_verlet", order=2, symplectic=True)
SYMPLECTIC_EULER = Scheme("symplectic_euler", order=1, symplectic=True)
RUNGE_EXPLICIT_MIDPOINT = Scheme("runge_explicit_midpoint", order=2, symplectic=False)

SCHEMES = {
    "im": IMPLICIT_MIDPOINT,
    "sv": STOERMER_VERLET,
    "se": SYMPLECTIC_EULER,
    "runge": RUNGE_EXPLICIT_MIDPOINT,
}


def get_scheme(name: str) -> Scheme:
    from .errors import ConfigError

    try:
        return SCHEMES[name]
    except KeyError:
        known = ", ".join(sorted(SCHEMES))
        raise ConfigError(f"unknown scheme {name!r}; known schemes: {known}") from None


@dataclass(frozen=True)
class SolverConfig:
    """Implicit-equation solver settings.

    Newton with a finite-difference Jacobian is the default; built-in
    systems provide analytic Hessians that the batched path uses instead.
    """

    tol: float = 1e-13
    max_iter: int = 50
    method: str = "newton"  # "newton" | "fixed_point"

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.method not in ("newton", "fixed_point"):
            raise ValueError(f"unknown solver method {self.method!r}")


DEFAULT_SOLVER = SolverConfig()


class _StateSeq:
    """Lazy sequence view over a trajectory's stored arrays."""

    def __init__(self, traj: "Trajectory"):
        self._traj = traj

    def __len__(self):
        return self._traj.p.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return PhaseState(self._traj.p[i], self._traj.q[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class Trajectory:
    """Time series produced by one scheme at one step size."""

    scheme: Scheme
    h: float
    system: str
    p: Array  # (N+1, n)
    q: Array  # (N+1, n)

    @property
    def n_steps(self) -> int:
        return self.p.shape[0] - 1

    @property
    def states(self) -> _StateSeq:
        return _StateSeq(self)

    def state(self, i: int) -> PhaseState:
        return PhaseState(self.p[i], self.q[i])

    def times(self) -> Array:
        return self.h * np.arange(self.p.shape[0])


# ---------------------------------------------------------------------------
# Generic implicit solve (public operation, single residual)
# ---------------------------------------------------------------------------

def solve_implicit(
    residual: Callable[[Array], Array],
    guess: Array,
    cfg: SolverConfig = DEFAULT_SOLVER,
) -> Array:
    """Solve residual(z) = 0 to |residual|_inf <= cfg.tol.

    Newton iterations use a forward finite-difference Jacobian with step
    sqrt(machine epsilon) * (1 + |z|); a singular Jacobian triggers a damped
    fixed-point fallback before failure is reported.
    """
    z = np.atleast_1d(np.asarray(guess, dtype=float)).copy()
    m = z.size
    last = np.inf
    for _ in range(cfg.max_iter):
        r = np.atleast_1d(np.asarray(residual(z), dtype=float))
        if not np.isfinite(r).all():
            raise DivergenceError("residual produced non-finite values")
        last = float(np.abs(r).max())
        if last <= cfg.tol:
            return z
        if cfg.method == "fixed_point":
            z = z - r
            continue
        step = _SQRT_EPS * (1.0 + float(np.abs(z).max()))
        J = np.empty((m, m))
        for j in range(m):
            zj = z.copy()
            zj[j] += step
            J[:, j] = (np.atleast_1d(residual(zj)) - r) / step
        try:
            dz = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            dz = 0.5 * r  # damped fixed-point fallback
        if not np.isfinite(dz).all():
            dz = 0.5 * r
        z = z - dz
    raise NonConvergenceError(
        f"implicit solve stalled at residual {last:.3e} after {cfg.max_iter} iterations",
        residual=last,
    )


# ---------------------------------------------------------------------------
# Batched implicit stage solver
#
# Residual and Jacobian callables receive the current iterate of the active
# rows plus their row indices into the full batch, so stage definitions can
# close over per-row data (previous state, step size).
# ---------------------------------------------------------------------------

_EYE_CACHE: dict = {}


def _eye(m):
    try:
        return _EYE_CACHE[m]
    except KeyError:
        _EYE_CACHE[m] = np.eye(m)[None]
        return _EYE_CACHE[m]


def _solve_newton_system(J, R):
    """Batched solve J dz = R with closed forms for tiny blocks."""
    m = R.shape[1]
    if m == 1:
        return R / J[:, 0, :]
    if m == 2:
        a, b = J[:, 0, 0], J[:, 0, 1]
        c, d = J[:, 1, 0], J[:, 1, 1]
        det = a * d - b * c
        dz = np.empty_like(R)
        dz[:, 0] = (d * R[:, 0] - b * R[:, 1]) / det
        dz[:, 1] = (a * R[:, 1] - c * R[:, 0]) / det
        return dz
    return np.linalg.solve(J, R[..., None])[..., 0]


def _newton_update(J, R):
    """Newton correction with per-row damped fixed-point fallback."""
    with np.errstate(all="ignore"):
        try:
            dZ = _solve_newton_system(J, R)
        except np.linalg.LinAlgError:
            dZ = np.empty_like(R)
            for i in range(R.shape[0]):
                try:
                    dZ[i] = np.linalg.solve(J[i], R[i])
                except np.linalg.LinAlgError:
                    dZ[i] = 0.5 * R[i]
    bad = ~np.isfinite(dZ).all(axis=1)
    if bad.any():
        Rb = R[bad]
        dZ[bad] = 0.5 * np.where(np.isfinite(Rb), Rb, 0.0)
    return dZ


def _run_stage(res_rows, jac_rows, guess, cfg):
    """Newton-solve a batch of independent implicit stages.

    Runs in whole-batch mode until the first row converges (the common case:
    every row then exits together), after which converged rows drop out of
    the active set. Rows with singular Jacobians fall back to damped
    fixed-point updates; failed rows keep their last iterate.
    """
    Z = guess
    M = guess.shape[0]
    tol = cfg.tol
    fixed_point = cfg.method == "fixed_point"
    all_rows = np.arange(M)
    ok = None  # lazily switch to masked mode
    for _ in range(cfg.max_iter):
        if ok is None:
            Ra = res_rows(Z, all_rows)
            with np.errstate(invalid="ignore"):
                res_norm = np.abs(Ra).max(axis=1)
            conv = res_norm <= tol  # NaN/inf rows stay unconverged
            if conv.all():
                return Z, np.ones(M, bool)
            if not conv.any():
                finite = np.isfinite(res_norm)
                if not finite.any():
                    return Z, np.zeros(M, bool)
                if fixed_point:
                    Z = Z - np.where(np.isfinite(Ra), Ra, 0.0)
                    continue
                J = (
                    _fd_jacobian_rows(res_rows, Z, Ra, all_rows)
                    if jac_rows is None
                    else jac_rows(Z, all_rows)
                )
                Z = Z - _newton_update(J, np.where(np.isfinite(Ra), Ra, 0.0))
                continue
            ok = conv.copy()  # mixed batch: fall through to masked mode
        act = np.flatnonzero(~ok)
        if act.size == 0:
            break
        Za = Z[act]
        Ra = res_rows(Za, act)
        with np.errstate(invalid="ignore"):
            res_norm = np.abs(Ra).max(axis=1)
        conv = res_norm <= tol
        ok[act[conv]] = True
        finite = np.isfinite(res_norm)
        todo = finite & ~conv
        if not todo.any():
            if finite.all():
                continue
            break  # only non-finite rows remain; no further progress
        rows = act[todo]
        Zt, Rt = Z[rows], Ra[todo]
        if fixed_point:
            Z[rows] = Zt - Rt
            continue
        J = _fd_jacobian_rows(res_rows, Zt, Rt, rows) if jac_rows is None else jac_rows(Zt, rows)
        Z[rows] = Zt - _newton_update(J, Rt)
    if ok is None:
        Ra = res_rows(Z, all_rows)
        with np.errstate(invalid="ignore"):
            ok = np.abs(Ra).max(axis=1) <= tol
    return Z, ok


def _fd_jacobian_rows(res_rows, Zt, Rt, rows):
    M, m = Zt.shape
    J = np.empty((M, m, m))
    step = _SQRT_EPS * (1.0 + np.abs(Zt).max(axis=1))
    for j in range(m):
        Zj = Zt.copy()
        Zj[:, j] += step
        J[:, :, j] = (res_rows(Zj, rows) - Rt) / step[:, None]
    return J


# ---------------------------------------------------------------------------
# Scheme step implementations (batched)
# ---------------------------------------------------------------------------

def _step_implicit_midpoint(system, Z, h, cfg):
    n = system.dof

    def res(Zn, rows):
        mid = 0.5 * (Z[rows] + Zn)
        return Zn - Z[rows] - h[rows, None] * system.vector_field(mid)

    def jac(Zn, rows):
        mid = 0.5 * (Z[rows] + Zn)
        H = system.hess(mid)
        # d/dZn [h f(mid)] = (h/2) A Hess with A = [[0, -I], [I, 0]]
        AH = np.concatenate([-H[:, n:, :], H[:, :n, :]], axis=1)
        return _eye(2 * n) - 0.5 * h[rows, None, None] * AH

    return _run_stage(res, jac if system.hess is not None else None, Z.copy(), cfg)


def _step_symplectic_euler(system, Z, h, cfg):
    n = system.dof
    p, q = Z[:, :n], Z[:, n:]

    def res(pn, rows):
        Zs = np.concatenate([pn, q[rows]], axis=1)
        g = system.grad(Zs)
        return pn - p[rows] + h[rows, None] * g[:, n:]

    def jac(pn, rows):
        Zs = np.concatenate([pn, q[rows]], axis=1)
        H = system.hess(Zs)
        return _eye(n) + h[rows, None, None] * H[:, n:, :n]

    pn, ok = _run_stage(res, jac if system.hess is not None else None, p.copy(), cfg)
    g = system.grad(np.concatenate([pn, q], axis=1))
    qn = q + h[:, None] * g[:, :n]
    return np.concatenate([pn, qn], axis=1), ok


def _step_stoermer_verlet(system, Z, h, cfg):
    """p-first generalized Stormer-Verlet: two adjoint symplectic-Euler half steps."""
    n = system.dof
    p, q = Z[:, :n], Z[:, n:]
    hh = 0.5 * h

    def res_a(ph, rows):
        Zs = np.concatenate([ph, q[rows]], axis=1)
        return ph - p[rows] + hh[rows, None] * system.grad(Zs)[:, n:]

    def jac_a(ph, rows):
        Zs = np.concatenate([ph, q[rows]], axis=1)
        H = system.hess(Zs)
        return _eye(n) + hh[rows, None, None] * H[:, n:, :n]

    have_hess = system.hess is not None
    ph, ok_a = _run_stage(res_a, jac_a if have_hess else None, p.copy(), cfg)

    gp0 = system.grad(np.concatenate([ph, q], axis=1))[:, :n]

    def res_b(qn, rows):
        Zs = np.concatenate([ph[rows], qn], axis=1)
        g = system.grad(Zs)
        return qn - q[rows] - hh[rows, None] * (gp0[rows] + g[:, :n])

    def jac_b(qn, rows):
        Zs = np.concatenate([ph[rows], qn], axis=1)
        H = system.hess(Zs)
        return _eye(n) - hh[rows, None, None] * H[:, :n, n:]

    qn, ok_b = _run_stage(res_b, jac_b if have_hess else None, q.copy(), cfg)

    g = system.grad(np.concatenate([ph, qn], axis=1))
    pn = ph - hh[:, None] * g[:, n:]
    return np.concatenate([pn, qn], axis=1), ok_a & ok_b


def _step_runge_explicit_midpoint(system, Z, h, cfg):
    hcol = h[:, None]
    Zm = Z + 0.5 * hcol * system.vector_field(Z)
    Zn = Z + hcol * system.vector_field(Zm)
    ok = np.isfinite(Zn).all(axis=1)
    return Zn, ok


_STEPPERS = {
    "implicit_midpoint": _step_implicit_midpoint,
    "stoermer_verlet": _step_stoermer_verlet,
    "symplectic_euler": _step_symplectic_euler,
    "runge_explicit_midpoint": _step_runge_explicit_midpoint,
}


def step_batch(
    scheme: Scheme,
    system: SystemModel,
    Z: Array,
    h: Array,
    cfg: SolverConfig = DEFAULT_SOLVER,
):
    """Advance a batch of states one step each. Returns (Z_next, ok mask)."""
    stepper = _STEPPERS[scheme.kind]
    # non-finite intermediates surface as ok=False / DivergenceError,
    # not as floating-point warnings
    with np.errstate(over="ignore", invalid="ignore"):
        Zn, ok = stepper(system, np.asarray(Z, dtype=float), np.asarray(h, dtype=float), cfg)
        ok = ok & np.isfinite(Zn).all(axis=1)
    return Zn, ok


def step(
    scheme: Scheme,
    system: SystemModel,
    state: PhaseState,
    h: float,
    cfg: SolverConfig = DEFAULT_SOLVER,
) -> PhaseState:
    """One application of the scheme to a single state."""
    system.check_state(state)
    if h == 0.0:
        raise ValueError("step size must be nonzero")
    Zn, ok = step_batch(scheme, system, state.as_z()[None, :], np.array([h]), cfg)
    if not ok[0]:
        if not np.isfinite(Zn[0]).all():
            raise DivergenceError(f"{scheme.kind} step produced non-finite state at h={h}")
        raise NonConvergenceError(
            f"{scheme.kind} implicit solve did not converge at h={h}",
            residual=float(np.abs(_step_residual(scheme, system, state.as_z(), Zn[0], h)).max()),
        )
    return PhaseState.from_z(Zn[0])


def _step_residual(scheme, system, Z0, Z1, h):
    """Residual of the defining implicit relation, for error reporting."""
    if scheme.kind == "implicit_midpoint":
        return Z1 - Z0 - h * system.vector_field(0.5 * (Z0 + Z1))
    return Z1 - Z0


def _integrate_pendulum_im(state0, h, n_steps, cfg):
    """Fused single-trajectory kernel for the pendulum implicit midpoint.

    Same Newton iteration as the generic engine (guess = current state,
    closed-form 2x2 solve, residual tolerance cfg.tol); specialized to keep
    10^5-step runs in the paper's pendulum experiments cheap.
    """
    P = np.empty(n_steps + 1)
    Q = np.empty(n_steps + 1)
    p = float(state0.p[0])
    q = float(state0.q[0])
    P[0] = p
    Q[0] = q
    tol = cfg.tol
    sin = math.sin
    cos = math.cos
    half_h = 0.5 * h
    for i in range(n_steps):
        pn, qn = p, q
        res = math.inf
        for _ in range(cfg.max_iter):
            mq = 0.5 * (q + qn)
            Rp = pn - p + h * sin(mq)
            Rq = qn - q - h * (0.5 * (p + pn))
            res = max(abs(Rp), abs(Rq))
            if res <= tol:
                break
            b = half_h * cos(mq)
            det = 1.0 + half_h * b
            pn -= (Rp - b * Rq) / det
            qn -= (Rq + half_h * Rp) / det
        else:
            raise NonConvergenceError(
                f"implicit_midpoint implicit solve failed at step {i + 1}",
                residual=res,
                step_index=i + 1,
            )
        if not (math.isfinite(pn) and math.isfinite(qn)):
            raise DivergenceError(
                f"implicit_midpoint produced non-finite state at step {i + 1}"
            )
        p, q = pn, qn
        P[i + 1] = p
        Q[i + 1] = q
    return P[:, None], Q[:, None]


def integrate(
    scheme: Scheme,
    system: SystemModel,
    state0: PhaseState,
    h: float,
    n_steps: int,
    cfg: SolverConfig = DEFAULT_SOLVER,
) -> Trajectory:
    """Repeatedly apply the scheme; trajectory has n_steps + 1 states."""
    system.check_state(state0)
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if (
        scheme.kind == "implicit_midpoint"
        and system.name == "pendulum"
        and cfg.method == "newton"
    ):
        P, Q = _integrate_pendulum_im(state0, float(h), n_steps, cfg)
        return Trajectory(scheme=scheme, h=float(h), system=system.name, p=P, q=Q)
    n = system.dof
    P = np.empty((n_steps + 1, n))
    Q = np.empty((n_steps + 1, n))
    P[0] = state0.p
    Q[0] = state0.q
    Z = state0.as_z()[None, :]
    harr = np.array([float(h)])
    for i in range(n_steps):
        Z, ok = step_batch(scheme, system, Z, harr, cfg)
        if not ok[0]:
            if not np.isfinite(Z[0]).all():
                raise DivergenceError(
                    f"{scheme.kind} produced non-finite state at step {i + 1}"
                )
            raise NonConvergenceError(
                f"{scheme.kind} implicit solve failed at step {i + 1}",
                step_index=i + 1,
            )
        P[i + 1] = Z[0, :n]
        Q[i + 1] = Z[0, n:]
    return Trajectory(scheme=scheme, h=float(h), system=system.name, p=P, q=Q)


def integrate_batch(
    scheme: Scheme,
    system: SystemModel,
    state0: PhaseState,
    h_values: Array,
    n_steps: int,
    cfg: SolverConfig = DEFAULT_SOLVER,
):
    """Integrate one initial state at several step sizes simultaneously.

    Returns a list of Trajectory, one per step size, in input order.
    Raises on the first failing row (annotated with step index and h).
    """
    system.check_state(state0)
    h_values = np.asarray(h_values, dtype=float)
    M = h_values.size
    n = system.dof
    rec = np.empty((n_steps + 1, M, 2 * n))
    Z = np.repeat(state0.as_z()[None, :], M, axis=0)
    rec[0] = Z
    for i in range(n_steps):
        Z, ok = step_batch(scheme, system, Z, h_values, cfg)
        if not ok.all():
            j = int(np.flatnonzero(~ok)[0])
            raise NonConvergenceError(
                f"{scheme.kind} failed at step {i + 1} for h={h_values[j]}",
                step_index=i + 1,
            )
        rec[i + 1] = Z
    return [
        Trajectory(
            scheme=scheme,
            h=float(h_values[j]),
            system=system.name,
            p=rec[:, j, :n].copy(),
            q=rec[:, j, n:].copy(),
        )
        for j in range(M)
    ]


# ---------------------------------------------------------------------------
# Symplecticity checks
# ---------------------------------------------------------------------------

def step_jacobian(
    scheme: Scheme,
    system: SystemModel,
    state: PhaseState,
    h: float,
    cfg: SolverConfig = DEFAULT_SOLVER,
    fd_step: float = 1e-6,
) -> Array:
    """Central finite-difference Jacobian of the one-step map, shape (2n, 2n)."""
    system.check_state(state)
    z0 = state.as_z()
    m = z0.size
    cols = []
    for j in range(m):
        zp = z0.copy()
        zm = z0.copy()
        zp[j] += fd_step
        zm[j] -= fd_step
        sp = step(scheme, system, PhaseState.from_z(zp), h, cfg).as_z()
        sm = step(scheme, system, PhaseState.from_z(zm), h, cfg).as_z()
        cols.append((sp - sm) / (2.0 * fd_step))
    return np.stack(cols, axis=1)


def jacobian_determinant(
    scheme: Scheme,
    system: SystemModel,
    state: PhaseState,
    h: float,
    cfg: SolverConfig = DEFAULT_SOLVER,
) -> float:
    """Determinant of the one-step map's Jacobian (1 for symplectic maps)."""
    return float(np.linalg.det(step_jacobian(scheme, system, state, h, cfg)))


def symplecticity_defect(
    scheme: Scheme,
    system: SystemModel,
    state: PhaseState,
    h: float,
    cfg: SolverConfig = DEFAULT_SOLVER,
) -> float:
    """Max-norm of M^T J M - J for the one-step map's Jacobian M."""
    n = system.dof
    M = step_jacobian(scheme, system, state, h, cfg)
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return float(np.abs(M.T @ J @ M - J).max())
