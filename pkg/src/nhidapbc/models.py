"""Concrete agent models and their configuration decomposition.

Three agent kinds are provided:

* ``diff_drive``  -- planar differential-drive robot, q = (x, y, theta) with
  the no-side-slip constraint  x_dot sin(theta) - y_dot cos(theta) = 0.
  Generalized inputs are taken directly in the constrained directions
  (forward force, steering torque), so the reduced input matrix is identity.
* ``knife_edge``  -- a blade sliding on the plane; same constraint class as
  the differential drive with its own inertia parameters.
* ``arm3dof``     -- fully actuated anthropomorphic arm (base yaw + two pitch
  joints), holonomic, with gravity and configuration-dependent inertia.
  Links are modelled as point masses at the link ends plus constant rotor
  inertias on each joint axis, which keeps the mass matrix positive definite
  in every pose (including the stretched-up singularity of the point-mass
  chain).

The nonholonomic models expose the coordinate split q = (s, r): the
constraint matrix and inertia depend only on r = theta and constrain only
s = (x, y).  The annihilator is assembled block-wise from the unconstrained
distribution D_s(r), so the reduced mass matrix is block diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .phcore import MechanicalModel


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PcdStructure:
    """Coordinate split q -> (s, r) with the constraint acting only on s.

    ``a_s(r)`` is the s-block of the constraint matrix, ``d_s(r)`` spans the
    directions of s-motion the constraint allows (D_s^T A_s = 0), and
    ``a_s_jac(r)[a, j, l] = d A_s[a, j] / d r[l]``.
    """

    p_dim: int
    s_idx: np.ndarray
    r_idx: np.ndarray
    a_s: Callable[[np.ndarray], np.ndarray]
    a_s_jac: Callable[[np.ndarray], np.ndarray]
    d_s: Callable[[np.ndarray], np.ndarray]

    @property
    def s_dim(self):
        return len(self.s_idx)

    def split(self, q):
        """(s, r) blocks of a configuration vector."""
        q = np.asarray(q, dtype=float)
        return q[self.s_idx], q[self.r_idx]

    def join(self, gs, gr):
        """Scatter s-block and r-block values back into a full q-vector."""
        out = np.empty(self.s_dim + self.p_dim)
        out[self.s_idx] = gs
        out[self.r_idx] = gr
        return out


def trivial_pcd(n):
    """Degenerate split for holonomic agents: everything is s, nothing is r.

    With k = 0 the constrained-space machinery collapses to ordinary energy
    shaping: v_omega is empty, the r-potential vanishes, and the assembled
    force is the plain potential gradient.
    """
    empty_as = _frozen(np.zeros((n, 0)))
    empty_jac = _frozen(np.zeros((n, 0, 0)))
    eye = _frozen(np.eye(n))
    return PcdStructure(
        p_dim=0,
        s_idx=np.arange(n),
        r_idx=np.arange(0),
        a_s=lambda r: empty_as,
        a_s_jac=lambda r: empty_jac,
        d_s=lambda r: eye,
    )


# ---------------------------------------------------------------------------
# planar unicycle-class models (differential drive, knife edge)


def _unicycle(mass_kg, inertia_kgm2, name):
    if mass_kg <= 0 or inertia_kgm2 <= 0:
        raise ValueError(f"{name}: mass and inertia must be positive")

    M = _frozen(np.diag([mass_kg, mass_kg, inertia_kgm2]))
    Mjac = _frozen(np.zeros((3, 3, 3)))
    zero3 = _frozen(np.zeros(3))
    wjac = _frozen(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]))

    def annihilator(q):
        c, s = np.cos(q[2]), np.sin(q[2])
        return np.array([[c, 0.0], [s, 0.0], [0.0, 1.0]])

    def constraint(q):
        return np.array([[np.sin(q[2])], [-np.cos(q[2])], [0.0]])

    def annihilator_jac(q):
        c, s = np.cos(q[2]), np.sin(q[2])
        jac = np.zeros((3, 2, 3))
        jac[0, 0, 2] = -s
        jac[1, 0, 2] = c
        return jac

    def constraint_jac(q):
        c, s = np.cos(q[2]), np.sin(q[2])
        jac = np.zeros((3, 1, 3))
        jac[0, 0, 2] = c
        jac[1, 0, 2] = s
        return jac

    def workspace(q):
        return np.array([q[0], q[1], 0.0])

    model = MechanicalModel(
        n=3,
        k=1,
        m=2,
        mass=lambda q: M,
        potential=lambda q: 0.0,
        potential_grad=lambda q: zero3,
        constraint=constraint,
        annihilator=annihilator,
        input_map=annihilator,  # F = S: forward force and steering torque
        annihilator_jac=annihilator_jac,
        mass_jac=lambda q: Mjac,
        constraint_jac=constraint_jac,
        workspace=workspace,
        workspace_jac=lambda q: wjac,
        name=name,
    )

    def a_s(r):
        return np.array([[np.sin(r[0])], [-np.cos(r[0])]])

    def a_s_jac(r):
        jac = np.zeros((2, 1, 1))
        jac[0, 0, 0] = np.cos(r[0])
        jac[1, 0, 0] = np.sin(r[0])
        return jac

    def d_s(r):
        return np.array([[np.cos(r[0])], [np.sin(r[0])]])

    pcd = PcdStructure(
        p_dim=1,
        s_idx=np.array([0, 1]),
        r_idx=np.array([2]),
        a_s=a_s,
        a_s_jac=a_s_jac,
        d_s=d_s,
    )
    return model, pcd


def build_diff_drive(mass_kg, inertia_kgm2):
    """Differential-drive robot: n=3, k=1, m=2, s=(x, y), r=theta."""
    return _unicycle(mass_kg, inertia_kgm2, "diff_drive")


def build_knife_edge(mass_kg, inertia_kgm2):
    """Knife edge on the plane; structurally identical to the diff drive."""
    return _unicycle(mass_kg, inertia_kgm2, "knife_edge")


# ---------------------------------------------------------------------------
# 3-DoF anthropomorphic arm (holonomic)


def build_arm3dof(link_masses, link_lengths, gravity=9.81,
                  rotor_inertias=(0.05, 0.05, 0.05), base=(0.0, 0.0, 0.0)):
    """Fully actuated arm: base yaw (q1), shoulder pitch (q2), elbow pitch (q3).

    Pitch angles are measured from horizontal, so at q = 0 the arm is
    stretched out horizontally and the end effector sits at
    base + (l2 + l3, 0, l1).  Link 1 is the vertical base column; being on
    the yaw axis, its mass adds no configuration-dependent dynamics.
    ``rotor_inertias`` are constant per-joint inertias that keep M(q)
    positive definite in every pose.
    """
    m1, m2, m3 = (float(v) for v in link_masses)
    l1, l2, l3 = (float(v) for v in link_lengths)
    j1, j2, j3 = (float(v) for v in rotor_inertias)
    if min(m1, m2, m3, l1, l2, l3) <= 0 or min(j1, j2, j3) <= 0:
        raise ValueError("arm3dof: masses, lengths and rotor inertias must be positive")
    if gravity < 0:
        raise ValueError("arm3dof: gravity must be non-negative")
    g = float(gravity)
    base = np.asarray(base, dtype=float)
    if base.shape != (3,):
        raise ValueError("arm3dof: base must be an xyz triple")
    base = _frozen(base)

    eye3 = _frozen(np.eye(3))
    empty_A = _frozen(np.zeros((3, 0)))
    zero_Sjac = _frozen(np.zeros((3, 3, 3)))
    zero_Ajac = _frozen(np.zeros((3, 0, 3)))

    def _radial(q):
        # horizontal reach and its derivatives
        c2, c23 = np.cos(q[1]), np.cos(q[1] + q[2])
        s2, s23 = np.sin(q[1]), np.sin(q[1] + q[2])
        rho = l2 * c2 + l3 * c23
        return rho, c2, s2, c23, s23

    def mass(q):
        rho, c2, s2, c23, s23 = _radial(q)
        c3 = np.cos(q[2])
        M = np.zeros((3, 3))
        M[0, 0] = j1 + m2 * (l2 * c2) ** 2 + m3 * rho**2
        M[1, 1] = j2 + m2 * l2**2 + m3 * (l2**2 + l3**2 + 2 * l2 * l3 * c3)
        M[1, 2] = M[2, 1] = m3 * (l3**2 + l2 * l3 * c3)
        M[2, 2] = j3 + m3 * l3**2
        return M

    def mass_jac(q):
        rho, c2, s2, c23, s23 = _radial(q)
        s3 = np.sin(q[2])
        drho2 = -(l2 * s2 + l3 * s23)
        drho3 = -l3 * s23
        jac = np.zeros((3, 3, 3))
        jac[0, 0, 1] = -2 * m2 * l2**2 * c2 * s2 + 2 * m3 * rho * drho2
        jac[0, 0, 2] = 2 * m3 * rho * drho3
        jac[1, 1, 2] = -2 * m3 * l2 * l3 * s3
        d23 = -m3 * l2 * l3 * s3
        jac[1, 2, 2] = jac[2, 1, 2] = d23
        return jac

    def potential(q):
        s2, s23 = np.sin(q[1]), np.sin(q[1] + q[2])
        return g * (m2 * (l1 + l2 * s2) + m3 * (l1 + l2 * s2 + l3 * s23))

    def potential_grad(q):
        c2, c23 = np.cos(q[1]), np.cos(q[1] + q[2])
        return np.array([
            0.0,
            g * ((m2 + m3) * l2 * c2 + m3 * l3 * c23),
            g * m3 * l3 * c23,
        ])

    def workspace(q):
        rho, c2, s2, c23, s23 = _radial(q)
        c1, s1 = np.cos(q[0]), np.sin(q[0])
        z = l1 + l2 * s2 + l3 * s23
        return base + np.array([rho * c1, rho * s1, z])

    def workspace_jac(q):
        rho, c2, s2, c23, s23 = _radial(q)
        c1, s1 = np.cos(q[0]), np.sin(q[0])
        drho2 = -(l2 * s2 + l3 * s23)
        drho3 = -l3 * s23
        dz2 = l2 * c2 + l3 * c23
        dz3 = l3 * c23
        return np.array([
            [-rho * s1, c1 * drho2, c1 * drho3],
            [rho * c1, s1 * drho2, s1 * drho3],
            [0.0, dz2, dz3],
        ])

    return MechanicalModel(
        n=3,
        k=0,
        m=3,
        mass=mass,
        potential=potential,
        potential_grad=potential_grad,
        constraint=lambda q: empty_A,
        annihilator=lambda q: eye3,
        input_map=lambda q: eye3,
        annihilator_jac=lambda q: zero_Sjac,
        mass_jac=mass_jac,
        constraint_jac=lambda q: zero_Ajac,
        workspace=workspace,
        workspace_jac=workspace_jac,
        name="arm3dof",
    )


# ---------------------------------------------------------------------------
# decomposition validation


@dataclass(frozen=True)
class PcdReport:
    """Per-assumption max residuals from sampling the decomposition."""

    applicable: bool
    residuals: dict
    passed: bool
    note: str = ""

    def lines(self):
        if not self.applicable:
            return [f"PCD: {self.note}"]
        out = []
        for name, value in self.residuals.items():
            out.append(f"PCD {name}: max residual {value:.3e}")
        out.append(f"PCD: {'PASS' if self.passed else 'FAIL'}")
        return out


def validate_pcd(model, pcd, n_samples=200, seed=0, tol=1e-10):
    """Sample the decomposition assumptions and report max residuals.

    Checks, over random configurations:
      annihilator          A(q)^T S(q) = 0
      unconstrained_dist   D_s(r)^T A_s(r) = 0
      constraint_on_s      A has zero r-rows, matches A_s, depends only on r
      mass_r_only          M(q) depends only on r
      block_coupling       M_sr(r)^T D_s(r) = 0
    """
    if model.k == 0:
        return PcdReport(applicable=False, residuals={}, passed=True,
                         note="not applicable, k=0 (holonomic)")

    rng = np.random.default_rng(seed)
    res = {name: 0.0 for name in
           ("annihilator", "unconstrained_dist", "constraint_on_s",
            "mass_r_only", "block_coupling")}

    for _ in range(n_samples):
        q = rng.uniform(-3.0, 3.0, size=model.n)
        s, r = pcd.split(q)
        q_alt = pcd.join(rng.uniform(-3.0, 3.0, size=pcd.s_dim), r)

        A = model.constraint(q)
        S = model.annihilator(q)
        As = pcd.a_s(r)
        Ds = pcd.d_s(r)
        M = model.mass(q)

        res["annihilator"] = max(res["annihilator"], np.max(np.abs(A.T @ S)))
        res["unconstrained_dist"] = max(res["unconstrained_dist"],
                                        np.max(np.abs(Ds.T @ As)))
        c_resid = max(
            np.max(np.abs(A[pcd.r_idx, :])) if pcd.p_dim else 0.0,
            np.max(np.abs(A[pcd.s_idx, :] - As)),
            np.max(np.abs(A - model.constraint(q_alt))),
        )
        res["constraint_on_s"] = max(res["constraint_on_s"], c_resid)
        res["mass_r_only"] = max(res["mass_r_only"],
                                 np.max(np.abs(M - model.mass(q_alt))))
        Msr = M[np.ix_(pcd.s_idx, pcd.r_idx)]
        res["block_coupling"] = max(res["block_coupling"],
                                    np.max(np.abs(Msr.T @ Ds)))

    passed = all(v <= tol for v in res.values())
    return PcdReport(applicable=True, residuals=res, passed=passed)
