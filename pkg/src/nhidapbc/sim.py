"""Deterministic fixed-step integration of the coupled closed-loop system.

One classical RK4 step advances every agent simultaneously: the coupled
vector field (feedback law + consensus pulls + repulsive fields) is evaluated
at each integrator stage against that stage's immutable state snapshot, then
the branch supervisor runs once per step on the post-step state.  There is no
randomness anywhere in the loop, so identical scenarios produce bit-identical
trajectories.

A run ends at t_final, or earlier when every agent satisfies its convergence
criteria, or when the whole team is quiescent without having converged (the
stalled outcome, which is how the branch-1 invariant-set obstruction shows up
in practice).  Non-convergence is an outcome, not an error; only non-finite
states abort.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import coop, models, pcdpot, phcore
from .errors import NumericalFailure
from .idapbc import ControllerConfig, control_law, desired_energy
from .pcdpot import Branch, GoalSpec, PotentialMode
from .phcore import MechanicalModel, ReducedState, reduced_rhs, solve_small

# Quiescence detection: the run is declared stalled when every agent keeps
# both velocity and momentum below these bounds for a full window of steps.
STALL_WINDOW = 50
STALL_VELOCITY = 1e-6
STALL_MOMENTUM = 1e-4


@dataclass(frozen=True)
class AgentDef:
    """Static description of one agent in a scenario."""

    id: str
    kind: str
    model: MechanicalModel
    pcd: models.PcdStructure
    cfg: ControllerConfig
    goal: GoalSpec


@dataclass(frozen=True)
class WorldDef:
    """Immutable scenario context shared by every step."""

    agents: Tuple[AgentDef, ...]
    graph: Optional[coop.CoopGraph] = None
    collision_enabled: bool = False
    safety_radius: float = 0.0
    consensus_tol: float = 5e-3


@dataclass
class SimState:
    """Dynamic state of the team at one instant."""

    t: float
    qs: List[np.ndarray]
    pts: List[np.ndarray]
    modes: List[PotentialMode]

    def copy(self):
        return SimState(self.t, [q.copy() for q in self.qs],
                        [p.copy() for p in self.pts], list(self.modes))


@dataclass
class AgentTrace:
    q: np.ndarray
    pt: np.ndarray
    tau: np.ndarray
    h_d: np.ndarray
    cviol: np.ndarray
    mode: np.ndarray


@dataclass
class TrajectoryLog:
    """Sampled trajectories; strictly increasing time, constant sample step."""

    t: np.ndarray
    agents: Dict[str, AgentTrace]
    min_distance: Optional[np.ndarray] = None
    disagreement: Optional[np.ndarray] = None


@dataclass
class RunReport:
    converged: Dict[str, bool]
    all_converged: bool
    stalled: bool
    t_end: float
    steps: int
    final: Dict[str, dict]
    switch_times: Dict[str, Optional[float]]
    max_constraint_violation: float
    max_energy_increase: float
    min_inter_agent_distance: Optional[float]
    final_disagreement: Optional[Tuple[float, float]]
    wall_clock_s: float

    def to_dict(self):
        return {
            "converged": dict(self.converged),
            "all_converged": self.all_converged,
            "stalled": self.stalled,
            "t_end": self.t_end,
            "steps": self.steps,
            "final": {k: dict(v) for k, v in self.final.items()},
            "switch_times": dict(self.switch_times),
            "max_constraint_violation": self.max_constraint_violation,
            "max_energy_increase": self.max_energy_increase,
            "min_inter_agent_distance": self.min_inter_agent_distance,
            "final_disagreement": list(self.final_disagreement)
            if self.final_disagreement is not None else None,
            "wall_clock_s": self.wall_clock_s,
        }


@dataclass
class Violation:
    kind: str
    agent: Optional[str]
    t: float
    value: float
    limit: float

    def __str__(self):
        who = f" agent {self.agent}" if self.agent else ""
        return (f"{self.kind}{who} at t={self.t:.3f}s: "
                f"{self.value:.3e} exceeds {self.limit:.1e}")


# ---------------------------------------------------------------------------
# coupled vector field


def _external_pulls(world, qs):
    """Per-agent z-space gradients from consensus edges and repulsion.

    Returns (zs, pulls) with pulls[i] = d(V_c + U_rep)/d z_i, or None when
    the agent feels nothing.
    """
    n_agents = len(world.agents)
    if world.graph is None and not world.collision_enabled:
        return None, [None] * n_agents
    zs = [a.model.workspace(qs[i]) for i, a in enumerate(world.agents)]

    ids = [a.id for a in world.agents]
    zmap = dict(zip(ids, zs))
    pulls: List[Optional[np.ndarray]] = []
    for i, agent in enumerate(world.agents):
        pull = None
        if world.graph is not None and world.graph.neighbors(agent.id):
            pull = coop.disagreement_pull(world.graph, agent.id, zmap)
        if world.collision_enabled and n_agents > 1:
            others = [zs[j] for j in range(n_agents) if j != i]
            _, rep = pcdpot.apf_repulsive(zs[i], others,
                                          agent.cfg.apf_eta, agent.cfg.apf_rho0)
            pull = rep if pull is None else pull + rep
        pulls.append(pull)
    return zs, pulls


def _agent_extra(agent, q, pull):
    """Map a z-space pull to the s-block gradient injection."""
    if pull is None:
        return None
    gq = agent.model.workspace_jac(q).T @ pull
    return gq[agent.pcd.s_idx]


def _agent_rates(agent, q, pt, mode, extra):
    """Controlled rates for one agent, sharing plant terms between the
    feedback law and the dynamics.

    Identical to control_law followed by reduced_rhs (a property test pins
    the agreement); fused because the simulator evaluates this hundreds of
    thousands of times per run.  Falls back to the public composition for
    non-default shaping choices.
    """
    model, pcd, cfg = agent.model, agent.pcd, agent.cfg
    gvd = pcdpot.assemble_grad_Vd(pcd, cfg, mode, q, agent.goal,
                                  extra_grad_s=extra)
    if cfg.m_d is not None or cfg.j_policy != "gyroscopic":
        rstate = ReducedState(q, pt)
        tau = control_law(model, pcd, cfg, rstate, gvd)
        qd, ptd = reduced_rhs(model, rstate, tau)
        return qd, ptd, tau

    S = model.annihilator(q)
    M = model.mass(q)
    Mt = S.T @ M @ S
    u = solve_small(Mt, pt)
    w = S @ u
    Mw = M @ w
    DS = phcore._annihilator_jac(model, q)
    kin = phcore.kinetic_q_gradient(model, q, S, DS, u, w, Mw)
    Y = phcore._gyroscopic(S, DS, Mw)
    grad_V = model.potential_grad(q)
    Ft = S.T @ model.input_map(q)

    # M_d = Mt and J = Y: kinetic gradients and gyroscopic terms cancel in
    # the law, leaving the potential mismatch plus damping injection.
    core = S.T @ (grad_V - gvd)
    tau = solve_small(Ft.T @ Ft, Ft.T @ core) - cfg.k_v @ (Ft.T @ u)
    ptd = -S.T @ (kin + grad_V) + Y @ u + Ft @ tau
    return w, ptd, tau


def _rates(world, qs, pts, modes):
    """Coupled closed-loop rates for all agents at one snapshot."""
    zs, pulls = _external_pulls(world, qs)
    qds, ptds = [], []
    for i, agent in enumerate(world.agents):
        extra = _agent_extra(agent, qs[i], pulls[i])
        qd, ptd, _ = _agent_rates(agent, qs[i], pts[i], modes[i], extra)
        qds.append(qd)
        ptds.append(ptd)
    return qds, ptds


def _sample_aux(world, state):
    """Quantities logged at sample instants: tau, H_d, constraint residual."""
    _, pulls = _external_pulls(world, state.qs)
    zs = [a.model.workspace(q) for a, q in zip(world.agents, state.qs)]
    ids = [a.id for a in world.agents]
    zmap = dict(zip(ids, zs))
    taus, hds, cviols = [], [], []
    for i, agent in enumerate(world.agents):
        q, pt, mode = state.qs[i], state.pts[i], state.modes[i]
        extra = _agent_extra(agent, q, pulls[i])
        _, _, tau = _agent_rates(agent, q, pt, mode, extra)
        taus.append(tau)

        s, r = agent.pcd.split(q)
        vd = pcdpot.v_ds_value(agent.pcd, agent.cfg, s, agent.goal.s_star)
        vd += pcdpot.v_dr_value(agent.pcd, agent.cfg, mode, s, r, agent.goal,
                                extra_grad_s=extra)
        if world.collision_enabled and len(world.agents) > 1:
            others = [zs[j] for j in range(len(world.agents)) if j != i]
            rep, _ = pcdpot.apf_repulsive(zs[i], others,
                                          agent.cfg.apf_eta, agent.cfg.apf_rho0)
            vd += rep
        if world.graph is not None:
            for j, w in world.graph.neighbors(agent.id):
                d = zmap[agent.id] - zmap[j]
                vd += 0.5 * w * float(d @ d)
        hds.append(desired_energy(agent.model, agent.cfg, q, pt, vd))

        w_vec = _qdot(agent, q, pt)
        A = agent.model.constraint(q)
        cviols.append(float(np.max(np.abs(A.T @ w_vec))) if agent.model.k else 0.0)
    return taus, hds, cviols, zs


def _qdot(agent, q, pt):
    S = agent.model.annihilator(q)
    Mt = S.T @ agent.model.mass(q) @ S
    return S @ solve_small(Mt, pt)


def total_energy(world, state):
    """Team energy: per-agent H_d (own potentials only) + shared couplings.

    Edge potentials and pairwise repulsion are counted once, so in branch 2
    (where every forcing term is an exact gradient) this is non-increasing
    along the coupled flow.
    """
    zs = [a.model.workspace(q) for a, q in zip(world.agents, state.qs)]
    total = 0.0
    for i, agent in enumerate(world.agents):
        q, pt, mode = state.qs[i], state.pts[i], state.modes[i]
        s, r = agent.pcd.split(q)
        vd = pcdpot.v_ds_value(agent.pcd, agent.cfg, s, agent.goal.s_star)
        vd += pcdpot.v_dr_value(agent.pcd, agent.cfg, mode, s, r, agent.goal)
        total += desired_energy(agent.model, agent.cfg, q, pt, vd)
    if world.graph is not None:
        zmap = {a.id: z for a, z in zip(world.agents, zs)}
        total += coop.edge_energy(world.graph, zmap)
    if world.collision_enabled and len(world.agents) > 1:
        eta = world.agents[0].cfg.apf_eta
        rho0 = world.agents[0].cfg.apf_rho0
        for i in range(len(zs)):
            rep, _ = pcdpot.apf_repulsive(zs[i], zs[i + 1:], eta, rho0)
            total += rep
    return total


# ---------------------------------------------------------------------------
# stepping


def step(world, state, dt):
    """One RK4 step of the whole team, then one supervisor evaluation."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    qs, pts = state.qs, state.pts
    modes = state.modes

    k1q, k1p = _rates(world, qs, pts, modes)
    q2 = [q + 0.5 * dt * d for q, d in zip(qs, k1q)]
    p2 = [p + 0.5 * dt * d for p, d in zip(pts, k1p)]
    k2q, k2p = _rates(world, q2, p2, modes)
    q3 = [q + 0.5 * dt * d for q, d in zip(qs, k2q)]
    p3 = [p + 0.5 * dt * d for p, d in zip(pts, k2p)]
    k3q, k3p = _rates(world, q3, p3, modes)
    q4 = [q + dt * d for q, d in zip(qs, k3q)]
    p4 = [p + dt * d for p, d in zip(pts, k3p)]
    k4q, k4p = _rates(world, q4, p4, modes)

    c = dt / 6.0
    new_qs = [q + c * (a + 2 * b + 2 * d + e)
              for q, a, b, d, e in zip(qs, k1q, k2q, k3q, k4q)]
    new_pts = [p + c * (a + 2 * b + 2 * d + e)
               for p, a, b, d, e in zip(pts, k1p, k2p, k3p, k4p)]
    t_new = state.t + dt

    new_modes = []
    for i, agent in enumerate(world.agents):
        mode = modes[i]
        if mode.branch == Branch.CONSTRAINED and agent.goal.s_star is not None:
            s, _ = agent.pcd.split(new_qs[i])
            sdot = _qdot(agent, new_qs[i], new_pts[i])[agent.pcd.s_idx]
            mode = pcdpot.switch_supervisor(mode, s, agent.goal.s_star, sdot,
                                            agent.cfg, t=t_new)
        new_modes.append(mode)

    return SimState(t_new, new_qs, new_pts, new_modes)


def _agent_status(agent, q, pt, mode):
    """Convergence diagnostics for one agent at one state."""
    w = _qdot(agent, q, pt)
    s, r = agent.pcd.split(q)
    out = {
        "sdot": float(np.linalg.norm(w[agent.pcd.s_idx])),
        "speed": float(np.max(np.abs(w))),
        "momentum": float(np.max(np.abs(pt))) if pt.size else 0.0,
        "s_err": None,
        "r_err": None,
        "mode": int(mode.branch),
    }
    if agent.goal.s_star is not None:
        out["s_err"] = float(np.linalg.norm(s - agent.goal.s_star))
    if agent.goal.r_star is not None:
        out["r_err"] = float(np.linalg.norm(r - agent.goal.r_star))
    return out


def _converged(world, state, statuses, disagreement):
    flags = {}
    for i, agent in enumerate(world.agents):
        st = statuses[i]
        ok = True
        if agent.goal.s_star is not None:
            ok &= st["s_err"] < agent.cfg.s_threshold
            ok &= st["sdot"] < agent.cfg.sdot_threshold
            ok &= state.modes[i].branch == Branch.UNCONSTRAINED
            if agent.goal.r_star is not None:
                ok &= st["r_err"] < agent.cfg.s_threshold
        else:
            ok &= st["speed"] < agent.cfg.sdot_threshold
        if world.graph is not None and world.graph.neighbors(agent.id):
            ok &= disagreement is not None and disagreement < world.consensus_tol
        flags[agent.id] = bool(ok)
    return flags


def run(spec, *, dt=None, t_final=None, stop_on_convergence=True):
    """Integrate a scenario to t_final or convergence of every agent.

    Returns (TrajectoryLog, RunReport).  Non-finite state raises
    NumericalFailure; non-convergence is reported, not raised.
    """
    from .scenario import build_world  # local import: scenario depends on sim types

    world, state = build_world(spec)
    dt = float(dt if dt is not None else spec.integrator.dt)
    t_final = float(t_final if t_final is not None else spec.integrator.t_final)
    log_every = int(spec.integrator.log_every)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be non-negative")

    n_steps = int(round(t_final / dt))
    n_agents = len(world.agents)
    ids = [a.id for a in world.agents]

    samples_t = []
    samples = {aid: {"q": [], "pt": [], "tau": [], "h_d": [], "cviol": [], "mode": []}
               for aid in ids}
    samples_mind = []
    samples_disagreement = []

    def record(st):
        taus, hds, cviols, zs = _sample_aux(world, st)
        samples_t.append(st.t)
        for i, aid in enumerate(ids):
            samples[aid]["q"].append(st.qs[i].copy())
            samples[aid]["pt"].append(st.pts[i].copy())
            samples[aid]["tau"].append(taus[i])
            samples[aid]["h_d"].append(hds[i])
            samples[aid]["cviol"].append(cviols[i])
            samples[aid]["mode"].append(int(st.modes[i].branch))
        if n_agents > 1:
            zmap = dict(zip(ids, zs))
            dmax, _ = coop.consensus_metrics(zmap)
            samples_disagreement.append(dmax)
            samples_mind.append(min(
                float(np.linalg.norm(zs[i] - zs[j]))
                for i in range(n_agents) for j in range(i + 1, n_agents)))

    t_start = time.perf_counter()
    record(state)

    stalled = False
    stall_count = 0
    converged_flags = {aid: False for aid in ids}
    steps_done = 0

    for k in range(1, n_steps + 1):
        state = step(world, state, dt)
        state.t = k * dt  # exact time grid, no accumulation error
        steps_done = k

        for q, pt in zip(state.qs, state.pts):
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(pt))):
                raise NumericalFailure(f"non-finite state at t={state.t:.6f}s")

        if k % log_every == 0:
            record(state)

        statuses = [_agent_status(a, state.qs[i], state.pts[i], state.modes[i])
                    for i, a in enumerate(world.agents)]
        disagreement = None
        if n_agents > 1:
            zmap = {a.id: a.model.workspace(state.qs[i])
                    for i, a in enumerate(world.agents)}
            disagreement, _ = coop.consensus_metrics(zmap)
        converged_flags = _converged(world, state, statuses, disagreement)

        if stop_on_convergence and all(converged_flags.values()):
            break

        quiet = all(st["speed"] < STALL_VELOCITY and st["momentum"] < STALL_MOMENTUM
                    for st in statuses)
        stall_count = stall_count + 1 if quiet else 0
        if stop_on_convergence and stall_count >= STALL_WINDOW:
            stalled = True
            break

    if not samples_t or samples_t[-1] != state.t:
        record(state)

    statuses = [_agent_status(a, state.qs[i], state.pts[i], state.modes[i])
                for i, a in enumerate(world.agents)]
    disagreement_pair = None
    if n_agents > 1:
        zmap = {a.id: a.model.workspace(state.qs[i])
                for i, a in enumerate(world.agents)}
        disagreement_pair = coop.consensus_metrics(zmap)
    converged_flags = _converged(
        world, state, statuses,
        disagreement_pair[0] if disagreement_pair else None)

    log = TrajectoryLog(
        t=np.asarray(samples_t),
        agents={
            aid: AgentTrace(
                q=np.asarray(s["q"]), pt=np.asarray(s["pt"]),
                tau=np.asarray(s["tau"]), h_d=np.asarray(s["h_d"]),
                cviol=np.asarray(s["cviol"]), mode=np.asarray(s["mode"], dtype=int))
            for aid, s in samples.items()
        },
        min_distance=np.asarray(samples_mind) if n_agents > 1 else None,
        disagreement=np.asarray(samples_disagreement) if n_agents > 1 else None,
    )

    max_cviol = max(float(np.max(tr.cviol)) if tr.cviol.size else 0.0
                    for tr in log.agents.values())
    max_dh = 0.0
    for tr in log.agents.values():
        if tr.h_d.size > 1:
            same_mode = tr.mode[1:] == tr.mode[:-1]
            dh = np.diff(tr.h_d)[same_mode]
            if dh.size:
                max_dh = max(max_dh, float(np.max(dh)))

    report = RunReport(
        converged=converged_flags,
        all_converged=all(converged_flags.values()),
        stalled=stalled,
        t_end=state.t,
        steps=steps_done,
        final={ids[i]: statuses[i] for i in range(n_agents)},
        switch_times={ids[i]: state.modes[i].switch_time for i in range(n_agents)},
        max_constraint_violation=max_cviol,
        max_energy_increase=max(max_dh, 0.0),
        min_inter_agent_distance=(float(np.min(log.min_distance))
                                  if log.min_distance is not None and log.min_distance.size
                                  else None),
        final_disagreement=disagreement_pair,
        wall_clock_s=time.perf_counter() - t_start,
    )
    return log, report


# ---------------------------------------------------------------------------
# post-hoc monitoring


def monitors(log, safety_radius=0.0, energy_tol=1e-6, constraint_tol=1e-3):
    """Scan a trajectory log for physical-consistency violations.

    Flags constraint drift beyond ``constraint_tol``, per-agent energy
    increases beyond ``energy_tol`` between consecutive samples with the same
    branch, and inter-agent distances below ``safety_radius``.
    """
    out = []
    for aid, tr in log.agents.items():
        for idx in np.nonzero(tr.cviol > constraint_tol)[0]:
            out.append(Violation("constraint", aid, float(log.t[idx]),
                                 float(tr.cviol[idx]), constraint_tol))
        if tr.h_d.size > 1:
            dh = np.diff(tr.h_d)
            same_mode = tr.mode[1:] == tr.mode[:-1]
            for idx in np.nonzero((dh > energy_tol) & same_mode)[0]:
                out.append(Violation("energy", aid, float(log.t[idx + 1]),
                                     float(dh[idx]), energy_tol))
    if safety_radius > 0.0 and log.min_distance is not None:
        for idx in np.nonzero(log.min_distance < safety_radius)[0]:
            out.append(Violation("distance", None, float(log.t[idx]),
                                 float(log.min_distance[idx]), safety_radius))
    return out
