"""Consensus tail diagnosis (not part of the deliverable)."""
import itertools
import time

import numpy as np

from nhidapbc.scenario import parse_scenario
from nhidapbc import sim


def consensus4(w=1.5, q_r=4.0, kv_dd=(7.0, 1.0), kv_arm=2.5, dd_mass=5.0,
               t_final=60.0, dt=2e-3):
    ids = ["dd1", "dd2", "arm1", "arm2"]
    return parse_scenario({
        "integrator": {"dt": dt, "t_final": t_final, "log_every": 10},
        "agents": [
            {"id": "dd1", "kind": "diff_drive",
             "params": {"mass": dd_mass, "inertia": 0.5},
             "q0": [-2.0, -1.2, 0.4],
             "controller": {"q_r": q_r, "k_v": list(kv_dd)}},
            {"id": "dd2", "kind": "diff_drive",
             "params": {"mass": dd_mass, "inertia": 0.5},
             "q0": [2.0, 1.4, -2.2],
             "controller": {"q_r": q_r, "k_v": list(kv_dd)}},
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


spec = consensus4()
t0 = time.perf_counter()
log, rep = sim.run(spec)
print(f"wall {time.perf_counter()-t0:.1f}s conv={rep.all_converged} "
      f"t_end={rep.t_end} disagreement={rep.final_disagreement}")
t = log.t
d = log.disagreement
for tt in [5, 10, 15, 20, 30, 40, 50, 60]:
    idx = np.searchsorted(t, tt)
    if idx < len(t):
        print(f"t={t[idx]:5.1f} disagreement={d[idx]:.3e}")
# final workspace outputs
from nhidapbc.scenario import build_world
world, _ = build_world(spec)
for i, a in enumerate(world.agents):
    tr = log.agents[a.id]
    q = tr.q[-1]
    z = a.model.workspace(q)
    print(f"{a.id}: q={np.round(q, 3)} z={np.round(z, 4)} speed~{np.linalg.norm(tr.pt[-1]):.2e}")
