"""Energy-shaping feedback for systems that are fully actuated on the
constraint manifold, plus the machinery to verify it.

The control input is solved from equating the open-loop reduced dynamics with
a target Hamiltonian system having desired mass M_d, skew interconnection J,
damping K_v and desired potential V_d.  ``closed_loop_rhs`` evaluates that
target vector field directly, so matching can be checked numerically:
open loop + control must reproduce it exactly when m = n - k.

For underactuated systems the feasibility residuals (kinetic and potential
matching conditions, projected through the left annihilator of the reduced
input matrix) are exposed by ``matching_residuals``; they are empty vectors
whenever m = n - k.

The desired-potential gradient is passed in as a plain vector: its
construction (goal terms, switching branch, repulsive fields, consensus
coupling) lives in ``pcdpot`` and the simulation layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ControlError, ModelError
from .phcore import _annihilator_jac, _gyroscopic, kinetic_q_gradient, solve_small


def _sym_pd(a, name, strict=True):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got {a.shape}")
    if a.size and np.max(np.abs(a - a.T)) > 1e-12:
        raise ValueError(f"{name} must be symmetric")
    if strict and a.size and np.min(np.linalg.eigvalsh(a)) <= 0:
        raise ValueError(f"{name} must be positive definite")
    a = a.copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ControllerConfig:
    """Gains and shaping choices for one agent.

    m_d is the desired mass matrix; ``None`` keeps the plant's reduced mass
    (no kinetic shaping), in which case the kinetic parts of the open- and
    closed-loop energy gradients cancel identically.  ``j_policy`` selects
    the gyroscopic interconnection: "gyroscopic" reuses the plant's Y,
    "zero" drops it.  Switch thresholds apply to ||s - s*|| and ||s_dot||.
    ``ablate_r_forcing`` zeroes the branch-1 heading forcing; it exists to
    demonstrate the invariant-set obstruction and must stay off in normal
    use.
    """

    q_s: np.ndarray
    q_r: np.ndarray
    k_v: np.ndarray
    m_d: Optional[np.ndarray] = None
    j_policy: str = "gyroscopic"
    s_threshold: float = 1e-2
    sdot_threshold: float = 1e-2
    apf_eta: float = 0.1
    apf_rho0: float = 1.0
    ablate_r_forcing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "q_s", _sym_pd(self.q_s, "q_s"))
        object.__setattr__(self, "q_r", _sym_pd(self.q_r, "q_r"))
        object.__setattr__(self, "k_v", _sym_pd(self.k_v, "k_v"))
        if self.m_d is not None:
            object.__setattr__(self, "m_d", _sym_pd(self.m_d, "m_d"))
        if self.j_policy not in ("gyroscopic", "zero"):
            raise ValueError(f"unknown j_policy {self.j_policy!r}")
        if self.s_threshold <= 0 or self.sdot_threshold <= 0:
            raise ValueError("switch thresholds must be positive")
        if self.apf_eta <= 0 or self.apf_rho0 <= 0:
            raise ValueError("APF parameters must be positive")


def left_annihilator(Ft):
    """Rows spanning the left null space of the reduced input matrix.

    Returns an ((n-k-m) x (n-k)) matrix with F_perp @ Ft = 0; zero rows when
    the system is fully actuated in the constrained space.
    """
    Ft = np.asarray(Ft, dtype=float)
    nk, m = Ft.shape
    U, sv, _ = np.linalg.svd(Ft)
    rank = int(np.sum(sv > 1e-12 * (sv[0] if sv.size else 1.0)))
    if rank < m:
        raise ControlError(f"reduced input matrix rank {rank} < m={m}")
    return U[:, rank:].T


def _plant_terms(model, q, pt):
    """Shared open-loop quantities at one reduced state."""
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
    kin_grad = kinetic_q_gradient(model, q, S, DS, u, w, Mw)
    Y = _gyroscopic(S, DS, Mw)
    Ft = S.T @ model.input_map(q)
    return S, Mt, u, kin_grad, Y, Ft


def _desired_momentum_terms(cfg, Mt, pt, u, kin_grad):
    """(u_d, desired kinetic q-gradient, M_d) for the configured shaping."""
    if cfg.m_d is None:
        return u, kin_grad, Mt  # M_d = Mt: gradients coincide
    try:
        u_d = solve_small(cfg.m_d, pt)
    except np.linalg.LinAlgError as exc:
        raise ControlError("desired mass matrix singular") from exc
    return u_d, np.zeros_like(kin_grad), cfg.m_d  # constant M_d: no q-dependence


def control_law(model, pcd, cfg, rstate, grad_Vd):
    """Input realizing the desired dynamics at one state.

    tau = (Ft^T Ft)^-1 Ft^T ( S^T dH/dq - M_d Mt^-1 S^T dH_d/dq
                              - Y dH/dpt + J dH_d/dpt )  -  K_v Ft^T dH_d/dpt
    """
    q = np.asarray(rstate.q, dtype=float)
    pt = np.asarray(rstate.p_tilde, dtype=float)
    grad_Vd = np.asarray(grad_Vd, dtype=float)

    S, Mt, u, kin_grad, Y, Ft = _plant_terms(model, q, pt)
    u_d, kin_grad_d, M_d = _desired_momentum_terms(cfg, Mt, pt, u, kin_grad)
    J = Y if cfg.j_policy == "gyroscopic" else np.zeros_like(Y)

    dHdq = kin_grad + model.potential_grad(q)
    dHddq = kin_grad_d + grad_Vd
    core = S.T @ dHdq - M_d @ solve_small(Mt, S.T @ dHddq) - Y @ u + J @ u_d
    try:
        tau = solve_small(Ft.T @ Ft, Ft.T @ core)
    except np.linalg.LinAlgError as exc:
        raise ControlError(f"{model.name}: input matrix lost rank at q={q}") from exc
    return tau - cfg.k_v @ (Ft.T @ u_d)


def closed_loop_rhs(model, pcd, cfg, rstate, grad_Vd):
    """Target closed-loop vector field (for matching verification and tests).

    q_dot       = S Mt^-1 M_d dH_d/dpt           (= S Mt^-1 p_tilde)
    p_tilde_dot = -M_d Mt^-1 S^T dH_d/dq + (J - Ft K_v Ft^T) dH_d/dpt
    """
    q = np.asarray(rstate.q, dtype=float)
    pt = np.asarray(rstate.p_tilde, dtype=float)
    grad_Vd = np.asarray(grad_Vd, dtype=float)

    S, Mt, u, kin_grad, Y, Ft = _plant_terms(model, q, pt)
    u_d, kin_grad_d, M_d = _desired_momentum_terms(cfg, Mt, pt, u, kin_grad)
    J = Y if cfg.j_policy == "gyroscopic" else np.zeros_like(Y)

    dHddq = kin_grad_d + grad_Vd
    q_dot = S @ u
    pt_dot = -M_d @ solve_small(Mt, S.T @ dHddq) + J @ u_d - Ft @ (cfg.k_v @ (Ft.T @ u_d))
    return q_dot, pt_dot


def desired_energy(model, cfg, q, pt, Vd_value):
    """H_d = 0.5 p_tilde^T M_d^-1 p_tilde + V_d at one state."""
    if cfg.m_d is None:
        S = model.annihilator(q)
        M_d = S.T @ model.mass(q) @ S
    else:
        M_d = cfg.m_d
    return 0.5 * float(pt @ solve_small(M_d, pt)) + float(Vd_value)


def matching_residuals(model, pcd, cfg, rstate, grad_Vd):
    """Kinetic and potential matching residuals under the left annihilator.

    Both are empty when m = n - k (fully actuated in the constrained space):
    the conditions are then vacuous and any (M_d, V_d) matches.
    """
    q = np.asarray(rstate.q, dtype=float)
    pt = np.asarray(rstate.p_tilde, dtype=float)
    grad_Vd = np.asarray(grad_Vd, dtype=float)

    S, Mt, u, kin_grad, Y, Ft = _plant_terms(model, q, pt)
    Fperp = left_annihilator(Ft)
    if Fperp.shape[0] == 0:
        return np.zeros(0), np.zeros(0)

    u_d, kin_grad_d, M_d = _desired_momentum_terms(cfg, Mt, pt, u, kin_grad)
    J = Y if cfg.j_policy == "gyroscopic" else np.zeros_like(Y)

    # gradients of the full (un-halved) quadratic forms
    kin = Fperp @ (
        S.T @ (2.0 * kin_grad)
        - M_d @ solve_small(Mt, S.T @ (2.0 * kin_grad_d))
        - 2.0 * (Y @ u)
        + 2.0 * (J @ u_d)
    )
    pot = Fperp @ (
        S.T @ model.potential_grad(q)
        - M_d @ solve_small(Mt, S.T @ grad_Vd)
    )
    return kin, pot
