"""Scratch Theorem-1 sweep feasibility (not part of the deliverable)."""
import time

import numpy as np

from nhidapbc.scenario import parse_scenario
from nhidapbc import sim


def case(q0, goal, ablate, dt, t_final):
    return parse_scenario({
        "integrator": {"dt": dt, "t_final": t_final, "log_every": 50},
        "agents": [
            {"id": "robot", "kind": "diff_drive",
             "params": {"mass": 10.0, "inertia": 1.0},
             "q0": list(q0),
             "goal": {"s_star": list(goal), "r_star": "free"},
             "controller": {"q_s": 4.0, "q_r": 1.0, "k_v": [12.0, 4.0],
                            "ablate_r_forcing": ablate}},
        ],
    })


rng = np.random.default_rng(20260809)
n = 12
t0 = time.perf_counter()
n_conv = 0
n_stall = 0
for i in range(n):
    q0 = [*rng.uniform(-5, 5, 2), rng.uniform(-np.pi, np.pi)]
    goal = rng.uniform(-5, 5, 2)
    log, rep = sim.run(case(q0, goal, False, 2e-3, 60.0))
    ok = rep.all_converged
    n_conv += ok
    log2, rep2 = sim.run(case(q0, goal, True, 2e-3, 25.0))
    stalled = rep2.final["robot"]["s_err"] > 1e-1
    n_stall += stalled
    print(f"[{i}] conv={ok} t={rep.t_end:5.1f} err={rep.final['robot']['s_err']:.1e} | "
          f"ablated: stall={stalled} err={rep2.final['robot']['s_err']:.2e} "
          f"stalled_flag={rep2.stalled} t={rep2.t_end:.1f}")
print(f"converged {n_conv}/{n}, stalled {n_stall}/{n}, wall {time.perf_counter()-t0:.1f}s")
