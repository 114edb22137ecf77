"""Hamiltonian system models and their exact oracles.

Every model exposes vectorized callables on stacked states ``Z`` of shape
``(..., 2n)`` with the momentum block first: ``Z = [p_1..p_n, q_1..q_n]``.
For Cartesian systems (Ruessmann) the x block sits in the p slots and the
y block in the q slots, matching the canonical equations
xdot = -dK/dy, ydot = dK/dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConfigError,
    DegenerateAngleError,
    DimensionError,
    OutOfRegimeError,
)
from .state import PhaseState, TWO_PI

Array = np.ndarray


@dataclass(frozen=True)
class SystemModel:
    """An integrable Hamiltonian system.

    Parameters
    ----------
    name : str
        Registry identifier.
    dof : int
        Degrees of freedom n.
    energy : callable
        ``energy(Z)`` with ``Z`` of shape ``(..., 2n)`` returning ``(...)``.
    grad : callable
        ``grad(Z)`` returning ``(..., 2n)`` stacked as (dH/dp, dH/dq).
    hess : callable or None
        ``hess(Z)`` returning ``(..., 2n, 2n)``; None means the implicit
        solver falls back to finite-difference Jacobians.
    first_integrals : tuple of (str, callable)
        Ordered conserved quantities, each ``fn(Z) -> (...)``.
    observable : str
        Complex observable used for frequency analysis: "angle" means
        exp(i q_i), "cartesian" means p_i + i q_i (i.e. x_i + i y_i).
    aa_forward, aa_inverse : callable or None
        Cartesian <-> action-angle maps on stacked states, when available.
    exact_frequency : callable or None
        ``exact_frequency(actions)`` -> frequency vector, radians per time.
    action_energy : callable or None
        Hamiltonian in action form, ``action_energy(actions) -> (...)``.
    """

    name: str
    dof: int
    energy: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    hess: Optional[Callable[[Array], Array]] = None
    first_integrals: tuple = ()
    observable: str = "angle"
    aa_forward: Optional[Callable[[Array], Array]] = None
    aa_inverse: Optional[Callable[[Array], Array]] = None
    exact_frequency: Optional[Callable[[Array], Array]] = None
    action_energy: Optional[Callable[[Array], Array]] = None

    def check_state(self, state: PhaseState) -> None:
        if state.n != self.dof:
            raise DimensionError(
                f"{self.name} has {self.dof} degrees of freedom, state has {state.n}"
            )

    def vector_field(self, Z: Array) -> Array:
        """Hamiltonian vector field (pdot, qdot) = (-dH/dq, dH/dp)."""
        g = self.grad(Z)
        n = self.dof
        return np.concatenate([-g[..., n:], g[..., :n]], axis=-1)


# ---------------------------------------------------------------------------
# Pendulum: H(p, q) = p^2/2 + (1 - cos q)
# ---------------------------------------------------------------------------

def _pend_energy(Z):
    return 0.5 * Z[..., 0] ** 2 + (1.0 - np.cos(Z[..., 1]))


def _pend_grad(Z):
    out = np.empty_like(Z)
    out[..., 0] = Z[..., 0]
    out[..., 1] = np.sin(Z[..., 1])
    return out


def _pend_hess(Z):
    H = np.zeros(Z.shape[:-1] + (2, 2))
    H[..., 0, 0] = 1.0
    H[..., 1, 1] = np.cos(Z[..., 1])
    return H


PENDULUM = SystemModel(
    name="pendulum",
    dof=1,
    energy=_pend_energy,
    grad=_pend_grad,
    hess=_pend_hess,
    first_integrals=(("H", _pend_energy),),
    observable="angle",
)


# ---------------------------------------------------------------------------
# Ruessmann 3-DOF system: K(x, y) = I1^2 (1 + I2) + I1^3 I3,
# I_i = (x_i^2 + y_i^2)/2.  Action form H(p) = p1^2 + p1^2 p2 + p1^3 p3.
# ---------------------------------------------------------------------------

def _ruess_actions(Z):
    x = Z[..., :3]
    y = Z[..., 3:]
    return 0.5 * (x * x + y * y)


def _ruess_action_energy(I):
    I = np.asarray(I, dtype=float)
    I1, I2, I3 = I[..., 0], I[..., 1], I[..., 2]
    return I1 ** 2 * (1.0 + I2) + I1 ** 3 * I3


def _ruess_energy(Z):
    return _ruess_action_energy(_ruess_actions(Z))


def _ruess_dKdI(I):
    """Partial derivatives of K with respect to the actions, shape (..., 3)."""
    I1, I2, I3 = I[..., 0], I[..., 1], I[..., 2]
    out = np.empty_like(I)
    out[..., 0] = 2.0 * I1 * (1.0 + I2) + 3.0 * I1 ** 2 * I3
    out[..., 1] = I1 ** 2
    out[..., 2] = I1 ** 3
    return out


def _ruess_grad(Z):
    I = _ruess_actions(Z)
    G = _ruess_dKdI(I)
    out = np.empty_like(Z)
    out[..., :3] = G * Z[..., :3]
    out[..., 3:] = G * Z[..., 3:]
    return out


_RUESS_SLOT_ACTION = np.array([0, 1, 2, 0, 1, 2])


def _ruess_hess(Z):
    I = _ruess_actions(Z)
    I1, I2, I3 = I[..., 0], I[..., 1], I[..., 2]
    G = _ruess_dKdI(I)
    G2 = np.zeros(Z.shape[:-1] + (3, 3))
    G2[..., 0, 0] = 2.0 * (1.0 + I2) + 6.0 * I1 * I3
    G2[..., 0, 1] = G2[..., 1, 0] = 2.0 * I1
    G2[..., 0, 2] = G2[..., 2, 0] = 3.0 * I1 ** 2
    a = _RUESS_SLOT_ACTION
    H = G2[..., a[:, None], a[None, :]] * Z[..., :, None] * Z[..., None, :]
    diag = G[..., a]
    idx = np.arange(6)
    H[..., idx, idx] += diag
    return H


def _ruess_exact_frequency(p):
    p = np.asarray(p, dtype=float)
    p1, p2, p3 = p[..., 0], p[..., 1], p[..., 2]
    out = np.empty_like(p)
    out[..., 0] = 2.0 * p1 + 2.0 * p1 * p2 + 3.0 * p1 ** 2 * p3
    out[..., 1] = p1 ** 2
    out[..., 2] = p1 ** 3
    return out


def _aa_forward_generic(Z):
    """(x, y) -> (I, theta) with I = (x^2+y^2)/2, theta = atan2(y, x) in [0, 2pi)."""
    n = Z.shape[-1] // 2
    x = Z[..., :n]
    y = Z[..., n:]
    I = 0.5 * (x * x + y * y)
    if np.any(I == 0.0):
        raise DegenerateAngleError("zero action: angle undefined at x_i = y_i = 0")
    theta = np.mod(np.arctan2(y, x), TWO_PI)
    return np.concatenate([I, theta], axis=-1)


def _aa_inverse_generic(Z):
    """(I, theta) -> (x, y) with x = sqrt(2I) cos theta, y = sqrt(2I) sin theta."""
    n = Z.shape[-1] // 2
    I = Z[..., :n]
    theta = Z[..., n:]
    if np.any(I < 0.0):
        raise DimensionError("actions must be non-negative")
    r = np.sqrt(2.0 * I)
    return np.concatenate([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def _ruess_integral(i):
    def fn(Z, _i=i):
        return _ruess_actions(Z)[..., _i]

    return fn


RUESSMANN3 = SystemModel(
    name="ruessmann3",
    dof=3,
    energy=_ruess_energy,
    grad=_ruess_grad,
    hess=_ruess_hess,
    first_integrals=(
        ("I1", _ruess_integral(0)),
        ("I2", _ruess_integral(1)),
        ("I3", _ruess_integral(2)),
    ),
    observable="cartesian",
    aa_forward=_aa_forward_generic,
    aa_inverse=_aa_inverse_generic,
    exact_frequency=_ruess_exact_frequency,
    action_energy=_ruess_action_energy,
)

# Paper experiment initial data for the 3-DOF system.
RUESSMANN3_X0 = np.array([0.2, 0.1, 0.4 * math.sqrt(2.0)])
RUESSMANN3_Y0 = np.array([0.37, 0.2, 0.53])


# ---------------------------------------------------------------------------
# Spec operations
# ---------------------------------------------------------------------------

def eval_hamiltonian(system: SystemModel, state: PhaseState) -> float:
    """Energy H(state); pure and deterministic."""
    system.check_state(state)
    return float(system.energy(state.as_z()))


def eval_gradients(system: SystemModel, state: PhaseState):
    """Return (dH/dp, dH/dq) at the state."""
    system.check_state(state)
    g = system.grad(state.as_z())
    n = system.dof
    return g[:n].copy(), g[n:].copy()


def first_integral_values(system: SystemModel, state: PhaseState) -> Array:
    """Ordered values of the declared first integrals."""
    system.check_state(state)
    if not system.first_integrals:
        raise DimensionError(f"{system.name} declares no first integrals")
    z = state.as_z()
    return np.array([fn(z) for _, fn in system.first_integrals], dtype=float)


def to_action_angle(system: SystemModel, cartesian: PhaseState) -> PhaseState:
    """Map a Cartesian state to (actions, angles), angles in [0, 2pi)."""
    system.check_state(cartesian)
    if system.aa_forward is None:
        raise OutOfRegimeError(f"{system.name} has no action-angle map")
    return PhaseState.from_z(system.aa_forward(cartesian.as_z()))


def from_action_angle(system: SystemModel, aa: PhaseState) -> PhaseState:
    """Inverse of :func:`to_action_angle`."""
    system.check_state(aa)
    if system.aa_inverse is None:
        raise OutOfRegimeError(f"{system.name} has no action-angle map")
    return PhaseState.from_z(system.aa_inverse(aa.as_z()))


def agm_elliptic_k(k: float) -> float:
    """Complete elliptic integral K(k) (modulus convention) via the AGM.

    K(k) = pi / (2 agm(1, sqrt(1 - k^2))); quadratically convergent.
    """
    if not 0.0 <= k < 1.0:
        raise OutOfRegimeError(f"modulus must satisfy 0 <= k < 1, got {k}")
    a = 1.0
    b = math.sqrt(1.0 - k * k)
    # quadratic convergence; stop at the rounding floor (a >= b throughout)
    while a - b > 4.0 * np.finfo(float).eps * a:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def pendulum_period(energy: float) -> float:
    """Libration period of H = p^2/2 + (1 - cos q) at the given energy.

    Uses T = 4 K(sin(q_m/2)) with q_m = arccos(1 - E), evaluated through the
    arithmetic-geometric mean; absolute accuracy well below 1e-10.
    """
    if not 0.0 < energy < 2.0:
        raise OutOfRegimeError(
            f"libration requires 0 < E < 2 (rotation or equilibrium otherwise), got {energy}"
        )
    q_m = math.acos(1.0 - energy)
    k = math.sin(0.5 * q_m)
    return 4.0 * agm_elliptic_k(k)


def pendulum_frequency(energy: float) -> float:
    """Angular frequency 2 pi / T of the pendulum libration."""
    return TWO_PI / pendulum_period(energy)


# ---------------------------------------------------------------------------
# Config-defined systems: closed-form H(p, q) expressions with high-order
# finite-difference gradients (no symbolic machinery).
# ---------------------------------------------------------------------------

_EXPR_NAMESPACE = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "pi": np.pi,
    "e": np.e,
}

_FD4_STEP = float(np.cbrt(np.finfo(float).eps))


def _compile_expression(expr: str, dof: int) -> Callable[[Array], Array]:
    """Compile an H(p, q) expression into a vectorized energy function.

    The expression sees ``p`` and ``q`` as length-n index-able vectors,
    e.g. ``"p[0]**2/2 + 1 - cos(q[0])"``.
    """
    if "__" in expr:
        raise ConfigError("double underscores are not allowed in expressions")
    try:
        code = compile(expr, "<hamiltonian>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"invalid Hamiltonian expression: {exc}") from exc
    for name in code.co_names:
        if name not in _EXPR_NAMESPACE and name not in ("p", "q"):
            raise ConfigError(f"unknown name {name!r} in Hamiltonian expression")

    class _Slice:
        # exposes component i of a stacked block as array[..., i]
        def __init__(self, block):
            self._block = block

        def __getitem__(self, i):
            return self._block[..., i]

    def energy(Z):
        Z = np.asarray(Z, dtype=float)
        ns = dict(_EXPR_NAMESPACE)
        ns["p"] = _Slice(Z[..., :dof])
        ns["q"] = _Slice(Z[..., dof:])
        value = eval(code, {"__builtins__": {}}, ns)
        return np.broadcast_to(np.asarray(value, dtype=float), Z.shape[:-1]).copy()

    # probe once so bad expressions fail at definition time
    energy(np.zeros(2 * dof) + 0.1)
    return energy


def fd_gradient(energy: Callable[[Array], Array], Z: Array) -> Array:
    """Fourth-order central finite-difference gradient of a scalar field.

    Step per component: cbrt(machine epsilon) * (1 + |z_i|).
    """
    Z = np.asarray(Z, dtype=float)
    out = np.empty_like(Z)
    for i in range(Z.shape[-1]):
        hstep = _FD4_STEP * (1.0 + np.abs(Z[..., i]))
        zp = Z.copy()
        zm = Z.copy()
        zp2 = Z.copy()
        zm2 = Z.copy()
        zp[..., i] += hstep
        zm[..., i] -= hstep
        zp2[..., i] += 2.0 * hstep
        zm2[..., i] -= 2.0 * hstep
        out[..., i] = (
            8.0 * (energy(zp) - energy(zm)) - (energy(zp2) - energy(zm2))
        ) / (12.0 * hstep)
    return out


def make_expression_system(
    name: str,
    dof: int,
    hamiltonian: str,
    observable: str = "angle",
) -> SystemModel:
    """Build a SystemModel from a closed-form H(p, q) expression."""
    if dof < 1:
        raise ConfigError(f"dof must be >= 1, got {dof}")
    if observable not in ("angle", "cartesian"):
        raise ConfigError(f"observable must be 'angle' or 'cartesian', got {observable!r}")
    energy = _compile_expression(hamiltonian, dof)

    def grad(Z):
        return fd_gradient(energy, Z)

    return SystemModel(
        name=name,
        dof=dof,
        energy=energy,
        grad=grad,
        hess=None,
        first_integrals=(("H", energy),),
        observable=observable,
    )


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_REGISTRY = {
    "pendulum": PENDULUM,
    "ruessmann3": RUESSMANN3,
}


def get_system(name: str) -> SystemModel:
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ConfigError(f"unknown system {name!r}; known systems: {known}") from None


def register_system(system: SystemModel, overwrite: bool = False) -> None:
    if system.name in _REGISTRY and not overwrite:
        raise ConfigError(f"system {system.name!r} already registered")
    _REGISTRY[system.name] = system


def system_names() -> list:
    return sorted(_REGISTRY)
