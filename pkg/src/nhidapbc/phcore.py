"""Constrained port-Hamiltonian mechanics in reduced momentum coordinates.

A mechanical system subject to Pfaffian velocity constraints A(q)^T q_dot = 0
is described by its mass matrix M(q), potential V(q), constraint matrix A(q),
an annihilator S(q) whose columns span ker(A^T), and an input matrix F(q).
Projecting the generalized momenta through S eliminates the constraint forces
and yields an ordinary (unconstrained) Hamiltonian ODE on the constraint
manifold, at the price of a momentum-dependent gyroscopic term built from the
Lie brackets of the annihilator columns.

Two formulations of the same dynamics live here:

* ``reduced_rhs``  -- the projected ODE in (q, p_tilde), used everywhere.
* ``full_constrained_rhs`` -- the original multiplier (DAE) form, kept as an
  independent oracle: the multiplier is eliminated explicitly so both systems
  can be integrated and compared.

All functions are pure; models are immutable after construction and safe to
share between concurrent runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ModelError

# Finite-difference step for models without analytic derivatives.
FD_STEP = 1e-6

# Constraint residual |A^T M^-1 p| accepted on entry to the multiplier oracle.
CONSTRAINT_TOL = 1e-6
# Residual at which a running simulation is considered broken.
CONSTRAINT_ABORT = 1e-3


@dataclass(frozen=True)
class MechanicalModel:
    """Callable description of one agent's physics.

    Derivative callables use the convention "derivative index last":
    ``mass_jac(q)[a, b, l] = d M[a, b] / d q[l]`` and likewise
    ``annihilator_jac(q)[a, j, l] = d S[a, j] / d q[l]``.  When a derivative
    callable is omitted it is replaced by central finite differences with
    step ``FD_STEP``.

    Returned arrays may be cached and shared between calls; treat them as
    read-only.
    """

    n: int
    k: int
    m: int
    mass: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], float]
    potential_grad: Callable[[np.ndarray], np.ndarray]
    constraint: Callable[[np.ndarray], np.ndarray]
    annihilator: Callable[[np.ndarray], np.ndarray]
    input_map: Callable[[np.ndarray], np.ndarray]
    annihilator_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    mass_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constraint_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    workspace: Optional[Callable[[np.ndarray], np.ndarray]] = None
    workspace_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "model"


def _finite_vector(x, dim, what):
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"{what}: expected shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what}: non-finite entries")
    return x


def solve_small(A, b):
    """Solve A x = b, special-casing the tiny systems the hot loop meets.

    Direct Cramer formulas up to 3x3 avoid the LAPACK call overhead that
    otherwise dominates per-step cost; larger systems fall through to numpy.
    Raises numpy.linalg.LinAlgError on a singular matrix, like numpy.
    """
    n = A.shape[0]
    if n == 1:
        a = A[0, 0]
        if a == 0.0:
            raise np.linalg.LinAlgError("singular 1x1 matrix")
        return np.array([b[0] / a])
    if n == 2:
        a, c = A[0, 0], A[0, 1]
        d, e = A[1, 0], A[1, 1]
        det = a * e - c * d
        if det == 0.0:
            raise np.linalg.LinAlgError("singular 2x2 matrix")
        b0, b1 = b[0], b[1]
        return np.array([(e * b0 - c * b1) / det, (a * b1 - d * b0) / det])
    if n == 3:
        a00, a01, a02 = A[0]
        a10, a11, a12 = A[1]
        a20, a21, a22 = A[2]
        c00 = a11 * a22 - a12 * a21
        c01 = a12 * a20 - a10 * a22
        c02 = a10 * a21 - a11 * a20
        det = a00 * c00 + a01 * c01 + a02 * c02
        if det == 0.0:
            raise np.linalg.LinAlgError("singular 3x3 matrix")
        b0, b1, b2 = b[0], b[1], b[2]
        x0 = (b0 * c00 + b1 * (a02 * a21 - a01 * a22) + b2 * (a01 * a12 - a02 * a11)) / det
        x1 = (b0 * c01 + b1 * (a00 * a22 - a02 * a20) + b2 * (a02 * a10 - a00 * a12)) / det
        x2 = (b0 * c02 + b1 * (a01 * a20 - a00 * a21) + b2 * (a00 * a11 - a01 * a10)) / det
        return np.array([x0, x1, x2])
    return np.linalg.solve(A, b)


@dataclass(frozen=True)
class FullState:
    """Configuration q and generalized momenta p = M(q) q_dot."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if q.shape != p.shape or q.ndim != 1:
            raise ValueError(f"FullState: q {q.shape} and p {p.shape} must be equal-length vectors")
        if not np.isfinite(q.sum() + p.sum()):  # nan/inf propagate through the sum
            raise ValueError("FullState: non-finite entries")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class ReducedState:
    """Configuration q and reduced momenta p_tilde = S(q)^T p."""

    q: np.ndarray
    p_tilde: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        pt = np.asarray(self.p_tilde, dtype=float)
        if q.ndim != 1 or pt.ndim != 1:
            raise ValueError("ReducedState: q and p_tilde must be vectors")
        if not np.isfinite(q.sum() + pt.sum()):
            raise ValueError("ReducedState: non-finite entries")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p_tilde", pt)


# ---------------------------------------------------------------------------
# finite-difference fallbacks


def fd_array_jac(fn, q, h=FD_STEP):
    """Central finite differences of an array-valued function of q.

    Returns ``jac`` with ``jac[..., l] = d fn(q)[...] / d q[l]`` (derivative
    index appended last, matching the analytic-Jacobian convention).
    """
    q = np.asarray(q, dtype=float)
    base = np.asarray(fn(q), dtype=float)
    jac = np.zeros(base.shape + (q.size,))
    for l in range(q.size):
        dq = np.zeros_like(q)
        dq[l] = h
        jac[..., l] = (np.asarray(fn(q + dq)) - np.asarray(fn(q - dq))) / (2.0 * h)
    return jac


def _mass_jac(model, q):
    if model.mass_jac is not None:
        return model.mass_jac(q)
    return fd_array_jac(model.mass, q)


def _annihilator_jac(model, q):
    if model.annihilator_jac is not None:
        return model.annihilator_jac(q)
    return fd_array_jac(model.annihilator, q)


def _constraint_jac(model, q):
    if model.constraint_jac is not None:
        return model.constraint_jac(q)
    return fd_array_jac(model.constraint, q)


# ---------------------------------------------------------------------------
# momentum transformation


def transformation_matrix(model, q):
    """T(q) = [S^T ; A^T M^-1], mapping p to (p_tilde, p2)."""
    S = model.annihilator(q)
    A = model.constraint(q)
    M = model.mass(q)
    try:
        AtMinv = np.linalg.solve(M, A).T
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"{model.name}: singular mass matrix at q={q}") from exc
    return np.vstack([S.T, AtMinv])


def reduced_momenta(model, state):
    """Split full momenta into (p_tilde, p2) = (S^T p, A^T M^-1 p).

    p2 vanishes exactly when the state satisfies the velocity constraint;
    a nonzero p2 flags an off-manifold state.
    """
    q = _finite_vector(state.q, model.n, "q")
    p = _finite_vector(state.p, model.n, "p")
    S = model.annihilator(q)
    A = model.constraint(q)
    M = model.mass(q)
    try:
        v = np.linalg.solve(M, p)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"{model.name}: singular mass matrix at q={q}") from exc
    return S.T @ p, A.T @ v


def reconstruct_full_momenta(model, q, p_tilde):
    """Lift reduced momenta back to the constraint manifold.

    Solves T(q) p = (p_tilde, 0): the unique full momentum vector that
    projects to p_tilde while satisfying A^T M^-1 p = 0.
    """
    q = _finite_vector(q, model.n, "q")
    p_tilde = _finite_vector(p_tilde, model.n - model.k, "p_tilde")
    T = transformation_matrix(model, q)
    rhs = np.concatenate([p_tilde, np.zeros(model.k)])
    try:
        return np.linalg.solve(T, rhs)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"{model.name}: transformation matrix singular at q={q}") from exc


def constraint_violation(model, state):
    """Constraint residual A^T M^-1 p (zero on the constraint manifold)."""
    q = _finite_vector(state.q, model.n, "q")
    p = _finite_vector(state.p, model.n, "p")
    A = model.constraint(q)
    try:
        v = np.linalg.solve(model.mass(q), p)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"{model.name}: singular mass matrix at q={q}") from exc
    return A.T @ v


# ---------------------------------------------------------------------------
# reduced (projected) dynamics


def _gyroscopic(S, DS, p):
    """Y with entries -p^T [S_i, S_j] from stacked column Jacobians DS."""
    nk = S.shape[1]
    if not DS.any():
        return np.zeros((nk, nk))
    # V[l, j] = sum_a DS[a, j, l] p[a]  (column-Jacobian transposed times p)
    V = (p @ DS.reshape(DS.shape[0], -1)).reshape(nk, -1).T
    G = S.T @ V
    return G.T - G


def gyroscopic_matrix(model, q, p_tilde):
    """Skew matrix of constraint-induced gyroscopic forces.

    Entry (i, j) is -p^T [S_i, S_j](q) with [S_i, S_j] the Lie bracket of
    annihilator columns and p the on-manifold lift of p_tilde.
    """
    q = _finite_vector(q, model.n, "q")
    p = reconstruct_full_momenta(model, q, p_tilde)
    S = model.annihilator(q)
    DS = _annihilator_jac(model, q)
    return _gyroscopic(S, DS, p)


def kinetic_q_gradient(model, q, S, DS, u, w, Mw):
    """d/dq of the reduced kinetic energy 0.5 p_tilde^T Mt^-1 p_tilde.

    Uses u = Mt^-1 p_tilde and w = S u (= q_dot), so the derivative of the
    inverse never has to be formed:  dK/dq_l = -0.5 u^T (dMt/dq_l) u.
    """
    n = q.shape[0]
    out = np.zeros(n)
    if DS.any():
        # t1[l] = sum_aj Mw[a] DS[a, j, l] u[j]
        out -= Mw @ (DS.transpose(0, 2, 1) @ u)
    DM = _mass_jac(model, q)
    if DM.any():
        # t2[l] = sum_ab w[a] DM[a, b, l] w[b]
        out -= 0.5 * (w @ (DM.transpose(0, 2, 1) @ w))
    return out


def reduced_rhs(model, rstate, tau):
    """Time derivative of (q, p_tilde) under input tau.

    q_dot       = S Mt^-1 p_tilde
    p_tilde_dot = -S^T dH/dq + Y Mt^-1 p_tilde + (S^T F) tau

    with Mt = S^T M S and H the reduced Hamiltonian.  The dH/dq term includes
    the configuration dependence of Mt^-1.
    """
    q, pt = rstate.q, rstate.p_tilde
    if q.shape[0] != model.n or pt.shape[0] != model.n - model.k:
        raise ValueError(f"{model.name}: state dims {q.shape}, {pt.shape} "
                         f"inconsistent with n={model.n}, k={model.k}")
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (model.m,):
        raise ValueError(f"{model.name}: tau must have shape ({model.m},)")

    S = model.annihilator(q)
    M = model.mass(q)
    Mt = S.T @ M @ S
    try:
        u = solve_small(Mt, pt)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"{model.name}: reduced mass matrix singular at q={q}") from exc
    w = S @ u
    Mw = M @ w

    DS = _annihilator_jac(model, q)
    dHdq = kinetic_q_gradient(model, q, S, DS, u, w, Mw) + model.potential_grad(q)
    Y = _gyroscopic(S, DS, Mw)  # on-manifold lift: p = M S u = M q_dot
    pt_dot = -S.T @ dHdq + Y @ u + (S.T @ model.input_map(q)) @ tau
    return w, pt_dot


# ---------------------------------------------------------------------------
# explicit multiplier dynamics (verification oracle)


def full_constrained_rhs(model, state, tau, tol_c=CONSTRAINT_TOL):
    """Rates (q_dot, p_dot, lambda) of the multiplier form of the dynamics.

    The multiplier is chosen so the constraint A^T M^-1 p is preserved to
    first order.  Input states must already satisfy the constraint to within
    ``tol_c``: a larger residual signals integrator drift and is rejected.
    """
    q, p = state.q, state.p
    if q.shape[0] != model.n:
        raise ValueError(f"{model.name}: state dim {q.shape} inconsistent with n={model.n}")
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (model.m,):
        raise ValueError(f"{model.name}: tau must have shape ({model.m},)")

    M = model.mass(q)
    A = model.constraint(q)
    try:
        v = solve_small(M, p)  # q_dot
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"{model.name}: singular mass matrix at q={q}") from exc

    c = A.T @ v
    if c.size and np.max(np.abs(c)) > tol_c:
        raise ModelError(
            f"{model.name}: constraint residual {np.max(np.abs(c)):.3e} exceeds {tol_c:.1e}"
        )

    DM = _mass_jac(model, q)
    dHdq = model.potential_grad(q).copy()
    if DM.any():
        dHdq -= 0.5 * (v @ (DM.transpose(0, 2, 1) @ v))
    force = -dHdq + model.input_map(q) @ tau

    if model.k == 0:
        return v, force, np.zeros(0)

    DA = _constraint_jac(model, q)
    # d/dt(A^T M^-1) p = (dA/dt)^T v - A^T M^-1 (dM/dt) v, both along q_dot = v
    drift = v @ (DA @ v)
    if DM.any():
        dMdt_v = (DM @ v) @ v
        drift -= A.T @ solve_small(M, dMdt_v)

    if A.shape[1] == 1:
        MinvA = solve_small(M, A[:, 0])[:, None]
    else:
        MinvA = np.linalg.solve(M, A)
    B = A.T @ MinvA
    try:
        lam = -solve_small(B, drift + MinvA.T @ force)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"{model.name}: constraint matrix rank-deficient at q={q}") from exc

    return v, force + A @ lam, lam
