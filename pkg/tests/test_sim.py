"""Simulator: determinism, integrator order, switching, energy, monitors."""

import copy

import numpy as np
import pytest

from nhidapbc import sim
from nhidapbc.errors import NumericalFailure
from nhidapbc.idapbc import control_law
from nhidapbc.pcdpot import Branch, GoalSpec, PotentialMode, assemble_grad_Vd
from nhidapbc.phcore import ReducedState, reduced_rhs
from nhidapbc.scenario import build_world, parse_scenario


def scenario1_dict(dt=1e-3, t_final=60.0, log_every=10, **controller):
    ctl = {"q_s": 2.0, "q_r": 1.0, "k_v": [8.0, 3.0]}
    ctl.update(controller)
    return {
        "integrator": {"dt": dt, "t_final": t_final, "log_every": log_every},
        "agents": [
            {"id": "robot", "kind": "diff_drive",
             "params": {"mass": 10.0, "inertia": 1.0},
             "q0": [1.0, 1.0, 0.0],
             "goal": {"s_star": [4.0, 4.0], "r_star": "free"},
             "controller": ctl},
        ],
    }


@pytest.fixture(scope="module")
def scenario1_run():
    spec = parse_scenario(scenario1_dict())
    return sim.run(spec)


class TestStep:
    def test_equilibrium_fixed_point(self):
        spec = parse_scenario({
            "integrator": {"dt": 1e-3, "t_final": 1.0, "log_every": 1},
            "agents": [
                {"id": "r", "kind": "diff_drive",
                 "params": {"mass": 10.0, "inertia": 1.0},
                 "q0": [4.0, 4.0, 0.7],
                 "goal": {"s_star": [4.0, 4.0], "r_star": 0.7}},
            ],
        })
        world, state = build_world(spec)
        state.modes = [PotentialMode(branch=Branch.UNCONSTRAINED)]
        q0, pt0 = state.qs[0].copy(), state.pts[0].copy()
        for _ in range(10):
            state = sim.step(world, state, 1e-3)
        assert np.max(np.abs(state.qs[0] - q0)) <= 1e-14
        assert np.max(np.abs(state.pts[0] - pt0)) <= 1e-14

    def test_rejects_bad_dt(self):
        spec = parse_scenario(scenario1_dict())
        world, state = build_world(spec)
        with pytest.raises(ValueError):
            sim.step(world, state, 0.0)

    def test_richardson_order(self):
        # trajectory at t=1 s under dt halving: observed order >= 3.5
        finals = []
        for dt in (2e-3, 1e-3, 5e-4):
            spec = parse_scenario(scenario1_dict(dt=dt, t_final=1.0))
            log, _ = sim.run(spec, stop_on_convergence=False)
            finals.append(log.agents["robot"].q[-1])
        e1 = np.linalg.norm(finals[0] - finals[1])
        e2 = np.linalg.norm(finals[1] - finals[2])
        order = np.log2(e1 / e2)
        assert order >= 3.5, f"observed order {order:.2f}"

    def test_energy_monotone_within_step(self, scenario1_run):
        log, _ = scenario1_run
        tr = log.agents["robot"]
        same_mode = tr.mode[1:] == tr.mode[:-1]
        dh = np.diff(tr.h_d)[same_mode]
        assert np.max(dh) <= 1e-9

    def test_fused_rates_match_public_composition(self, rng):
        spec = parse_scenario(scenario1_dict())
        world, state = build_world(spec)
        agent = world.agents[0]
        for _ in range(100):
            q = rng.uniform(-3, 3, 3)
            pt = rng.uniform(-3, 3, 2)
            mode = PotentialMode(branch=Branch.CONSTRAINED if rng.random() < 0.5
                                 else Branch.UNCONSTRAINED)
            qd1, ptd1, tau1 = sim._agent_rates(agent, q, pt, mode, None)
            gvd = assemble_grad_Vd(agent.pcd, agent.cfg, mode, q, agent.goal)
            rs = ReducedState(q, pt)
            tau2 = control_law(agent.model, agent.pcd, agent.cfg, rs, gvd)
            qd2, ptd2 = reduced_rhs(agent.model, rs, tau2)
            np.testing.assert_allclose(tau1, tau2, atol=1e-12)
            np.testing.assert_allclose(qd1, qd2, atol=1e-12)
            np.testing.assert_allclose(ptd1, ptd2, atol=1e-12)


class TestRun:
    def test_scenario1_converges(self, scenario1_run):
        log, rep = scenario1_run
        assert rep.all_converged
        assert rep.final["robot"]["s_err"] < 1e-2
        assert rep.final["robot"]["sdot"] < 1e-2
        assert rep.switch_times["robot"] is not None
        assert rep.t_end < 60.0

    def test_switch_ordering(self, scenario1_run):
        log, rep = scenario1_run
        tr = log.agents["robot"]
        assert np.all(np.diff(tr.mode) >= 0)
        # the recorded switch time separates the two phases
        ts = rep.switch_times["robot"]
        assert np.all(tr.mode[log.t < ts] == 1)
        assert np.all(tr.mode[log.t > ts] == 2)

    def test_constraint_preserved(self, scenario1_run):
        log, rep = scenario1_run
        assert rep.max_constraint_violation <= 1e-6

    def test_zero_length_run(self):
        spec = parse_scenario(scenario1_dict(t_final=0.0))
        log, rep = sim.run(spec)
        assert log.t.shape == (1,)
        assert log.t[0] == 0.0
        assert not rep.all_converged

    def test_determinism_bit_identical(self):
        spec = parse_scenario(scenario1_dict(t_final=2.0))
        log1, rep1 = sim.run(spec)
        log2, rep2 = sim.run(spec)
        tr1, tr2 = log1.agents["robot"], log2.agents["robot"]
        assert tr1.q.tobytes() == tr2.q.tobytes()
        assert tr1.pt.tobytes() == tr2.pt.tobytes()
        assert tr1.tau.tobytes() == tr2.tau.tobytes()
        assert tr1.h_d.tobytes() == tr2.h_d.tobytes()

    def test_dt_override(self):
        spec = parse_scenario(scenario1_dict(t_final=0.5))
        log, rep = sim.run(spec, dt=5e-4)
        assert rep.steps == 1000

    def test_numerical_failure_raises(self):
        # absurdly large step makes RK4 blow up to non-finite values
        spec = parse_scenario(scenario1_dict(dt=10.0, t_final=1000.0,
                                             log_every=1))
        with np.errstate(all="ignore"), pytest.raises(NumericalFailure):
            sim.run(spec)

    def test_ablated_run_stalls_short_of_goal(self):
        spec = parse_scenario(scenario1_dict(t_final=12.0,
                                             ablate_r_forcing=True))
        log, rep = sim.run(spec)
        assert not rep.all_converged
        assert rep.final["robot"]["s_err"] > 1e-1
        # settles on the invariant set: heading error orthogonal to motion
        tr = log.agents["robot"]
        q = tr.q[-1]
        err = q[:2] - np.array([4.0, 4.0])
        heading = np.array([np.cos(q[2]), np.sin(q[2])])
        align = abs(heading @ err) / np.linalg.norm(err)
        assert align < 0.05

    def test_consensus_only_agents_stay_branch1(self):
        spec = parse_scenario({
            "integrator": {"dt": 1e-3, "t_final": 0.5, "log_every": 10},
            "agents": [
                {"id": "a", "kind": "diff_drive",
                 "params": {"mass": 4.0, "inertia": 0.5}, "q0": [0, 0, 0]},
                {"id": "b", "kind": "diff_drive",
                 "params": {"mass": 4.0, "inertia": 0.5}, "q0": [1, 0, 0]},
            ],
            "edges": [{"i": "a", "j": "b", "weight": 1.0}],
        })
        log, rep = sim.run(spec, stop_on_convergence=False)
        for aid in ("a", "b"):
            assert np.all(log.agents[aid].mode == 1)


class TestMonitors:
    def test_clean_run_no_violations(self, scenario1_run):
        log, _ = scenario1_run
        assert sim.monitors(log) == []

    def test_energy_kick_flagged(self, scenario1_run):
        log, _ = scenario1_run
        mutated = copy.deepcopy(log)
        mutated.agents["robot"].h_d[50] += 1.0
        out = sim.monitors(mutated)
        assert any(v.kind == "energy" and v.agent == "robot" for v in out)

    def test_constraint_drift_flagged(self, scenario1_run):
        log, _ = scenario1_run
        mutated = copy.deepcopy(log)
        mutated.agents["robot"].cviol[7] = 5e-3
        out = sim.monitors(mutated)
        assert any(v.kind == "constraint" for v in out)

    def test_distance_violation_flagged(self):
        # two robots driven through each other with avoidance off
        spec = parse_scenario({
            "integrator": {"dt": 1e-3, "t_final": 6.0, "log_every": 10},
            "agents": [
                {"id": "a", "kind": "diff_drive",
                 "params": {"mass": 4.0, "inertia": 0.5},
                 "q0": [-2.0, 0.0, 0.0],
                 "goal": {"s_star": [2.0, 0.0], "r_star": "free"},
                 "controller": {"q_s": 2.0, "k_v": [6.0, 2.0]}},
                {"id": "b", "kind": "diff_drive",
                 "params": {"mass": 4.0, "inertia": 0.5},
                 "q0": [2.0, 0.0, 3.141592653589793],
                 "goal": {"s_star": [-2.0, 0.0], "r_star": "free"},
                 "controller": {"q_s": 2.0, "k_v": [6.0, 2.0]}},
            ],
            "collision": {"enabled": False, "safety_radius": 0.3},
        })
        log, rep = sim.run(spec, stop_on_convergence=False)
        out = sim.monitors(log, safety_radius=0.3)
        assert any(v.kind == "distance" for v in out)
        assert rep.min_inter_agent_distance < 0.3

    def test_violation_str(self):
        v = sim.Violation("energy", "robot", 1.25, 3.2e-5, 1e-6)
        msg = str(v)
        assert "energy" in msg and "robot" in msg and "1.250" in msg
