"""Scratch physics smoke test (not part of the deliverable)."""
import time

import numpy as np

from nhidapbc import models, phcore, idapbc, pcdpot
from nhidapbc.phcore import FullState, ReducedState

model, pcd = models.build_diff_drive(10.0, 1.0)

# spec example: theta=0, p=(2,0,1) -> pt=(2,1), p2=0
pt, p2 = phcore.reduced_momenta(model, FullState([0, 0, 0], [2, 0, 1]))
print("pt", pt, "p2", p2)

pt, p2 = phcore.reduced_momenta(model, FullState([0, 0, 0], [2, 5, 1]))
print("off-manifold p2", p2)  # expect -0.5

p = phcore.reconstruct_full_momenta(model, [0, 0, 0], [2, 1])
print("reconstruct", p)  # expect (2,0,1)

# reduced_rhs example
qd, ptd = phcore.reduced_rhs(model, ReducedState([0, 0, 0], [2, 1]), [0, 0])
print("qd", qd, "ptd", ptd)  # (0.2,0,1), (0,0)

# full constrained example: theta=0, p=(2,0,1) -> lambda = -2
qd, pdot, lam = phcore.full_constrained_rhs(model, FullState([0, 0, 0], [2, 0, 1]), [0, 0])
print("lambda", lam, "pdot", pdot)

# oracle equivalence: integrate both 1 s, dt=1e-4, tau=(1,0.2)
tau = np.array([1.0, 0.2])
q0 = np.array([0.0, 0.0, np.pi / 6])
pt0 = np.array([1.0, 0.3])
p0 = phcore.reconstruct_full_momenta(model, q0, pt0)

def rk4(f, y, dt):
    k1 = f(y); k2 = f(y + 0.5 * dt * k1); k3 = f(y + 0.5 * dt * k2); k4 = f(y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

def f_red(y):
    qd, ptd = phcore.reduced_rhs(model, ReducedState(y[:3], y[3:]), tau)
    return np.concatenate([qd, ptd])

def f_full(y):
    qd, pd, _ = phcore.full_constrained_rhs(model, FullState(y[:3], y[3:]), tau, tol_c=1e-3)
    return np.concatenate([qd, pd])

t0 = time.perf_counter()
y_r = np.concatenate([q0, pt0])
y_f = np.concatenate([q0, p0])
dt = 1e-4
cmax = 0.0
for i in range(10000):
    y_r = rk4(f_red, y_r, dt)
    y_f = rk4(f_full, y_f, dt)
    if i % 100 == 0:
        cmax = max(cmax, abs(phcore.constraint_violation(model, FullState(y_f[:3], y_f[3:]))[0]))
print(f"integration wall: {time.perf_counter()-t0:.2f}s")
print("q deviation:", np.max(np.abs(y_r[:3] - y_f[:3])), "cviol:", cmax)

# matching identity at random states
cfg = idapbc.ControllerConfig(q_s=np.eye(2), q_r=np.eye(1), k_v=np.eye(2))
goal = pcdpot.GoalSpec(s_star=np.array([4.0, 4.0]), r_star=None)
mode = pcdpot.PotentialMode()
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(200):
    q = rng.uniform(-3, 3, 3)
    ptr = rng.uniform(-2, 2, 2)
    rs = ReducedState(q, ptr)
    gvd = pcdpot.assemble_grad_Vd(pcd, cfg, mode, q, goal)
    t = idapbc.control_law(model, pcd, cfg, rs, gvd)
    qd1, ptd1 = phcore.reduced_rhs(model, rs, t)
    qd2, ptd2 = idapbc.closed_loop_rhs(model, pcd, cfg, rs, gvd)
    worst = max(worst, np.max(np.abs(qd1 - qd2)), np.max(np.abs(ptd1 - ptd2)))
print("matching worst:", worst)

# control law example: tau=(3,9)
rs = ReducedState([1, 1, 0], [0, 0])
gvd = pcdpot.assemble_grad_Vd(pcd, cfg, mode, np.array([1.0, 1.0, 0.0]), goal)
print("gvd", gvd)  # (-3,-3,-9)
print("tau", idapbc.control_law(model, pcd, cfg, rs, gvd))  # (3,9)

# arm checks
arm = models.build_arm3dof([1.0, 1.0, 1.0], [0.5, 0.4, 0.3])
print("fk zero:", arm.workspace(np.zeros(3)))  # (0.7, 0, 0.5)
apcd = models.trivial_pcd(3)
acfg = idapbc.ControllerConfig(q_s=np.eye(3), q_r=np.zeros((0, 0)), k_v=np.eye(3))
agoal = pcdpot.GoalSpec(s_star=np.array([0.3, 0.2, -0.4]), r_star=None)
worst = 0.0
for _ in range(200):
    q = rng.uniform(-3, 3, 3)
    ptr = rng.uniform(-2, 2, 3)
    rs = ReducedState(q, ptr)
    gvd = pcdpot.assemble_grad_Vd(apcd, acfg, mode, q, agoal)
    t = idapbc.control_law(arm, apcd, acfg, rs, gvd)
    qd1, ptd1 = phcore.reduced_rhs(arm, rs, t)
    qd2, ptd2 = idapbc.closed_loop_rhs(arm, apcd, acfg, rs, gvd)
    worst = max(worst, np.max(np.abs(qd1 - qd2)), np.max(np.abs(ptd1 - ptd2)))
print("arm matching worst:", worst)

# arm mass_jac and gravity grad FD check
for _ in range(20):
    q = rng.uniform(-3, 3, 3)
    dm = arm.mass_jac(q)
    dm_fd = phcore.fd_array_jac(arm.mass, q)
    assert np.max(np.abs(dm - dm_fd)) < 1e-6, np.max(np.abs(dm - dm_fd))
    gv = arm.potential_grad(q)
    gv_fd = phcore.fd_array_jac(arm.potential, q)
    assert np.max(np.abs(gv - gv_fd)) < 1e-6
    J = arm.workspace_jac(q)
    J_fd = phcore.fd_array_jac(arm.workspace, q)
    assert np.max(np.abs(J - J_fd)) < 1e-6
print("arm jacobians ok")
