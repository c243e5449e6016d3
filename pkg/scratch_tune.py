"""Scratch gain tuning for scenario 1 (not part of the deliverable)."""
import sys
import time

import numpy as np

from nhidapbc.scenario import parse_scenario
from nhidapbc import sim


def scenario1(q_s, q_r, k_v, dt=1e-3, t_final=60.0, thr=1e-2):
    return parse_scenario({
        "integrator": {"dt": dt, "t_final": t_final, "log_every": 10},
        "agents": [
            {"id": "robot", "kind": "diff_drive",
             "params": {"mass": 10.0, "inertia": 1.0},
             "q0": [1.0, 1.0, 0.0],
             "goal": {"s_star": [4.0, 4.0], "r_star": "free"},
             "controller": {"q_s": q_s, "q_r": q_r, "k_v": k_v,
                            "s_threshold": thr, "sdot_threshold": thr}},
        ],
    })


for q_s, q_r, k_v in [
    (1.0, 1.0, 1.0),
    (2.0, 1.0, [8.0, 3.0]),
    (2.0, 0.5, [9.0, 3.0]),
    (3.0, 0.5, [11.0, 3.0]),
    (2.0, 1.0, [9.0, 4.0]),
]:
    spec = scenario1(q_s, q_r, k_v)
    t0 = time.perf_counter()
    log, rep = sim.run(spec)
    wall = time.perf_counter() - t0
    tr = log.agents["robot"]
    dh = np.diff(tr.h_d)
    same = tr.mode[1:] == tr.mode[:-1]
    max_dh = float(dh[same].max()) if same.any() else 0.0
    print(f"q_s={q_s} q_r={q_r} k_v={k_v}: conv={rep.all_converged} "
          f"t_end={rep.t_end:.1f}s switch={rep.switch_times['robot']} "
          f"s_err={rep.final['robot']['s_err']:.2e} sdot={rep.final['robot']['sdot']:.2e} "
          f"max_dH={max_dh:.2e} wall={wall:.1f}s steps={rep.steps}")
