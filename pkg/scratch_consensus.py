"""Scratch consensus scenario tuning (not part of the deliverable)."""
import itertools
import time

import numpy as np

from nhidapbc.scenario import parse_scenario
from nhidapbc import sim


def consensus4(w, kv_dd, kv_arm, dd_mass=5.0, t_final=60.0, dt=1e-3):
    ids = ["dd1", "dd2", "arm1", "arm2"]
    return parse_scenario({
        "integrator": {"dt": dt, "t_final": t_final, "log_every": 10},
        "agents": [
            {"id": "dd1", "kind": "diff_drive",
             "params": {"mass": dd_mass, "inertia": 0.5},
             "q0": [-2.0, -1.2, 0.4],
             "controller": {"q_r": 0.5, "k_v": kv_dd}},
            {"id": "dd2", "kind": "diff_drive",
             "params": {"mass": dd_mass, "inertia": 0.5},
             "q0": [2.0, 1.4, -2.2],
             "controller": {"q_r": 0.5, "k_v": kv_dd}},
            {"id": "arm1", "kind": "arm3dof",
             "params": {"masses": [1.2, 1.0, 0.6], "lengths": [0.5, 0.4, 0.3],
                        "base": [0.0, 0.35, -0.5]},
             "q0": [1.2, 0.5, -0.6],
             "controller": {"k_v": kv_arm}},
            {"id": "arm2", "kind": "arm3dof",
             "params": {"masses": [1.2, 1.0, 0.6], "lengths": [0.5, 0.4, 0.3],
                        "base": [0.0, -0.35, -0.5]},
             "q0": [-0.8, 0.9, -1.2],
             "controller": {"k_v": kv_arm}},
        ],
        "edges": [{"i": a, "j": b, "weight": w}
                  for a, b in itertools.combinations(ids, 2)],
    })


for w, kv_dd, kv_arm in [
    (1.0, [6.0, 2.0], 2.0),
    (2.0, [8.0, 3.0], 3.0),
    (1.5, [7.0, 2.5], 2.5),
]:
    spec = consensus4(w, kv_dd, kv_arm)
    t0 = time.perf_counter()
    try:
        log, rep = sim.run(spec)
    except Exception as exc:
        print(f"w={w}: FAILED {exc}")
        continue
    wall = time.perf_counter() - t0
    print(f"w={w} kv_dd={kv_dd} kv_arm={kv_arm}: conv={rep.all_converged} "
          f"t_end={rep.t_end:.1f} disagreement={rep.final_disagreement[0]:.2e} "
          f"wall={wall:.1f}s per-agent={rep.converged}")
