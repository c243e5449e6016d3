"""Cooperative layer: communication graph and consensus coupling forces.

Each agent exposes a workspace output z(q) (planar position for mobile
robots, end-effector position for arms).  Neighbours on an undirected
weighted graph exchange z and apply the force of a quadratic edge potential

    V_c = 0.5 sum_(i,j) w_ij ||z_i - z_j||^2

pulled back through the output Jacobian.  The force on each agent uses only
its neighbours' outputs (locality), edge forces cancel pairwise in z-space,
and the coupling is conservative, so it adds no energy to the team.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class CoopGraph:
    """Undirected weighted communication graph over agent ids."""

    agents: Tuple[str, ...]
    edges: Tuple[Tuple[str, str, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        known = set(self.agents)
        if len(known) != len(self.agents):
            raise ValueError("duplicate agent ids")
        norm = []
        adjacency: Dict[str, list] = {a: [] for a in self.agents}
        for i, j, w in self.edges:
            if i == j:
                raise ValueError(f"self-loop on agent {i!r}")
            if i not in known or j not in known:
                raise ValueError(f"edge ({i!r}, {j!r}) references unknown agent")
            if w <= 0:
                raise ValueError(f"edge ({i!r}, {j!r}) weight must be positive")
            norm.append((i, j, float(w)))
            adjacency[i].append((j, float(w)))
            adjacency[j].append((i, float(w)))
        object.__setattr__(self, "edges", tuple(norm))
        object.__setattr__(self, "_adjacency", adjacency)

    def neighbors(self, agent_id):
        try:
            return tuple(self._adjacency[agent_id])
        except KeyError:
            raise KeyError(f"unknown agent id {agent_id!r}") from None

    def is_connected(self):
        if not self.agents:
            return True
        seen = {self.agents[0]}
        frontier = [self.agents[0]]
        while frontier:
            node = frontier.pop()
            for nb, _ in self._adjacency[node]:
                if nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        return len(seen) == len(self.agents)


@dataclass(frozen=True)
class CoopVariable:
    """Workspace output z and its Jacobian dz/dq, evaluated at one q."""

    z: np.ndarray
    jac: np.ndarray


def coop_variable(model, q):
    """Evaluate an agent's cooperative output (xyz) and its Jacobian."""
    if model.workspace is None or model.workspace_jac is None:
        raise ValueError(f"{model.name}: no workspace output defined")
    q = np.asarray(q, dtype=float)
    return CoopVariable(z=model.workspace(q), jac=model.workspace_jac(q))


def disagreement_pull(graph, agent_id, all_z):
    """z-space gradient of the agent's edge potentials: sum w_ij (z_i - z_j)."""
    zi = np.asarray(all_z[agent_id], dtype=float)
    pull = np.zeros_like(zi)
    for j, w in graph.neighbors(agent_id):
        pull += w * (zi - np.asarray(all_z[j], dtype=float))
    return pull


def coupling_force(graph, agent_id, all_z, jacobian):
    """Generalized consensus force: -(dz/dq)^T sum_j w_ij (z_i - z_j)."""
    return -np.asarray(jacobian, dtype=float).T @ disagreement_pull(graph, agent_id, all_z)


def edge_energy(graph, all_z):
    """Total coupling potential V_c, each edge counted once."""
    total = 0.0
    for i, j, w in graph.edges:
        d = np.asarray(all_z[i], dtype=float) - np.asarray(all_z[j], dtype=float)
        total += 0.5 * w * float(d @ d)
    return total


def consensus_metrics(all_z, graph=None):
    """(max, mean) pairwise disagreement ||z_i - z_j||.

    Over all unordered pairs by default; over graph edges when one is given.
    """
    ids = sorted(all_z)
    if len(ids) < 2:
        raise ValueError("consensus metrics need at least two agents")
    if graph is None:
        pairs = [(a, b) for idx, a in enumerate(ids) for b in ids[idx + 1:]]
    else:
        pairs = [(i, j) for i, j, _ in graph.edges]
    dists = [float(np.linalg.norm(np.asarray(all_z[a]) - np.asarray(all_z[b])))
             for a, b in pairs]
    return max(dists), float(np.mean(dists))
