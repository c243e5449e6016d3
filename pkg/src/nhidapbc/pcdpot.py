"""Decomposed desired potentials and the two-branch switching scheme.

Smooth static feedback cannot stabilize the constrained coordinates s at an
arbitrary goal: with a quadratic goal potential the s-dynamics settle on the
affine set D_s(r)^T Q_s (s - s*) = 0, generally away from s*.  The goal-error
force is therefore split into

    v_alpha = D_s(r)^T grad V_ds   (the part the s-dynamics can remove)
    v_omega = A_s(r)^T grad V_ds   (the part blocked by the constraint)

and the unconstrained coordinates r are recruited to drive v_omega to zero
through the branch-1 potential  V_dr = 0.5 v_omega^T Q_r v_omega.  Since the
two projections span orthogonal complements, killing both drives s to s*.
Once ||s - s*|| and ||s_dot|| pass their thresholds a supervisor latches to
branch 2, a plain quadratic in (r - r*), finishing full-state stabilization.
The switch never reverts.

Repulsive fields for collision avoidance and consensus pulls from neighbours
enter as extra terms of grad V_ds, so the same projections steer the heading
around obstacles and towards the team.  By construction each block of the
assembled force acts only on its own coordinates: the s-block is
grad V_ds and the r-block is dV_dr/dr, with no cross terms.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CollisionError

# Below this separation the repulsive field is considered a collision.
RHO_MIN = 1e-6


class Branch(enum.IntEnum):
    CONSTRAINED = 1      # drive s -> s* using the r-dynamics for steering
    UNCONSTRAINED = 2    # s reached: quadratic stabilization of r


@dataclass(frozen=True)
class PotentialMode:
    """Per-agent switching state; transitions only 1 -> 2, at most once."""

    branch: Branch = Branch.CONSTRAINED
    switch_time: Optional[float] = None


@dataclass(frozen=True)
class GoalSpec:
    """Target (s*, r*); either block may be None ("free")."""

    s_star: Optional[np.ndarray] = None
    r_star: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("s_star", "r_star"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=float))


# ---------------------------------------------------------------------------
# repulsive field


def apf_repulsive(position, other_positions, eta, rho0):
    """Repulsive energy and gradient at ``position`` from nearby points.

    Per neighbour at distance rho <= rho0:  U = 0.5 eta (1/rho - 1/rho0)^2,
    zero outside the influence radius.  Distances below RHO_MIN are treated
    as a collision and abort the computation.
    """
    if eta <= 0 or rho0 <= 0:
        raise ValueError("apf_repulsive: eta and rho0 must be positive")
    position = np.asarray(position, dtype=float)
    energy = 0.0
    grad = np.zeros_like(position)
    for other in other_positions:
        d = position - np.asarray(other, dtype=float)
        rho = np.linalg.norm(d)
        if rho < RHO_MIN:
            raise CollisionError(
                f"separation {rho:.3e} m below minimum {RHO_MIN:.0e} m"
            )
        if rho >= rho0:
            continue
        gap = 1.0 / rho - 1.0 / rho0
        energy += 0.5 * eta * gap * gap
        grad += -eta * gap / rho**3 * d
    return energy, grad


# ---------------------------------------------------------------------------
# s-potential


def grad_V_ds(pcd, cfg, s, s_star, obstacles=(), extra_grad_s=None):
    """Gradient of the s-potential: goal spring, repulsion, injected pulls.

    ``obstacles`` are neighbour positions in s-coordinates; ``extra_grad_s``
    is an already-assembled additional gradient (consensus coupling), which
    must not depend on r.
    """
    s = np.asarray(s, dtype=float)
    if s_star is not None:
        g = cfg.q_s @ (s - s_star)
    else:
        g = np.zeros_like(s)
    if len(obstacles):
        _, rep = apf_repulsive(s, obstacles, cfg.apf_eta, cfg.apf_rho0)
        g = g + rep
    if extra_grad_s is not None:
        g = g + extra_grad_s
    return g


def v_ds_value(pcd, cfg, s, s_star, obstacles=()):
    """Value of the s-potential (goal spring + repulsion)."""
    s = np.asarray(s, dtype=float)
    value = 0.0
    if s_star is not None:
        e = s - s_star
        value += 0.5 * float(e @ (cfg.q_s @ e))
    if len(obstacles):
        rep, _ = apf_repulsive(s, obstacles, cfg.apf_eta, cfg.apf_rho0)
        value += rep
    return value


def v_alpha(pcd, cfg, s, s_star, r, obstacles=(), extra_grad_s=None):
    """Goal-error force projected onto the directions the constraint allows."""
    g = grad_V_ds(pcd, cfg, s, s_star, obstacles, extra_grad_s)
    return pcd.d_s(r).T @ g


def v_omega(pcd, cfg, s, s_star, r, obstacles=(), extra_grad_s=None):
    """Goal-error force projected onto the blocked (invariant-set) directions."""
    g = grad_V_ds(pcd, cfg, s, s_star, obstacles, extra_grad_s)
    return pcd.a_s(r).T @ g


# ---------------------------------------------------------------------------
# r-potential (two branches)


def grad_V_dr(pcd, cfg, mode, s, r, goal, obstacles=(), extra_grad_s=None):
    """Gradient of the r-potential for the active branch.

    Branch 1: d/dr of 0.5 v_omega^T Q_r v_omega with grad V_ds held fixed
    (it does not depend on r), i.e. (dv_omega/dr)^T Q_r v_omega.
    Branch 2: Q_r (r - r*), or zero when r* is free.
    """
    r = np.asarray(r, dtype=float)
    if mode.branch == Branch.CONSTRAINED:
        if cfg.ablate_r_forcing:
            return np.zeros(pcd.p_dim)
        g = grad_V_ds(pcd, cfg, s, goal.s_star, obstacles, extra_grad_s)
        vw = pcd.a_s(r).T @ g
        dvw = np.einsum("ajl,a->jl", pcd.a_s_jac(r), g)  # (k, p)
        return dvw.T @ (cfg.q_r @ vw)
    if goal.r_star is None:
        return np.zeros(pcd.p_dim)
    return cfg.q_r @ (r - goal.r_star)


def v_dr_value(pcd, cfg, mode, s, r, goal, obstacles=(), extra_grad_s=None):
    """Value of the r-potential for the active branch."""
    r = np.asarray(r, dtype=float)
    if mode.branch == Branch.CONSTRAINED:
        if cfg.ablate_r_forcing:
            return 0.0
        vw = v_omega(pcd, cfg, s, goal.s_star, r, obstacles, extra_grad_s)
        return 0.5 * float(vw @ (cfg.q_r @ vw))
    if goal.r_star is None:
        return 0.0
    e = r - goal.r_star
    return 0.5 * float(e @ (cfg.q_r @ e))


def assemble_grad_Vd(pcd, cfg, mode, q, goal, obstacles=(), extra_grad_s=None):
    """Full desired-potential gradient: s-block and r-block side by side.

    Cross-gradients (r-dependence of V_ds through the projections, s-dependence
    of the branch-1 r-potential) are excluded by construction: each decomposed
    subsystem is driven only by its own gradient.
    """
    s, r = pcd.split(q)
    gs = grad_V_ds(pcd, cfg, s, goal.s_star, obstacles, extra_grad_s)
    gr = grad_V_dr(pcd, cfg, mode, s, r, goal, obstacles, extra_grad_s)
    return pcd.join(gs, gr)


# ---------------------------------------------------------------------------
# branch supervision


def switch_supervisor(mode, s, s_star, s_dot, cfg, t=None):
    """Latch branch 1 -> 2 once position and speed pass their thresholds.

    Never reverts; agents without an s-goal stay in branch 1 (their branch-2
    potential would be identical anyway when r* is free).
    """
    if mode.branch == Branch.UNCONSTRAINED or s_star is None:
        return mode
    if (np.linalg.norm(np.asarray(s) - s_star) < cfg.s_threshold
            and np.linalg.norm(s_dot) < cfg.sdot_threshold):
        return PotentialMode(branch=Branch.UNCONSTRAINED, switch_time=t)
    return mode
