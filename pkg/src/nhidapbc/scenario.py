"""Scenario files: schema, validation, defaults, and world assembly.

Scenarios are JSON.  Gains may be given as a scalar (isotropic), a flat list
(diagonal) or a nested list (full matrix); every unspecified knob falls back
to the documented defaults table, which is echoed verbatim into each run
report for reproducibility.

Validation errors carry the path of the offending field
(``agents[1].goal.s_star``) and map to CLI exit code 3.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import models, sim
from .coop import CoopGraph
from .errors import ScenarioError
from .idapbc import ControllerConfig
from .pcdpot import Branch, GoalSpec, PotentialMode

# Every tunable the schema leaves unspecified takes its value from here.
DEFAULTS = {
    "dt": 1e-3,
    "t_final": 60.0,
    "log_every": 10,
    "q_s": 1.0,
    "q_r": 1.0,
    "k_v": 1.0,
    "s_threshold": 1e-2,
    "sdot_threshold": 1e-2,
    "collision_enabled": False,
    "apf_eta": 0.1,
    "apf_rho0": 1.0,
    "safety_radius": 0.0,
    "consensus_tol": 5e-3,
    "diff_drive_mass": 10.0,
    "diff_drive_inertia": 1.0,
    "arm_masses": [1.0, 1.0, 1.0],
    "arm_lengths": [0.5, 0.4, 0.3],
    "arm_gravity": 9.81,
    "arm_rotor_inertias": [0.05, 0.05, 0.05],
}

AGENT_KINDS = ("diff_drive", "knife_edge", "arm3dof")

# (state dim, reduced momentum dim, s dim, r dim) per agent kind
_DIMS = {
    "diff_drive": (3, 2, 2, 1),
    "knife_edge": (3, 2, 2, 1),
    "arm3dof": (3, 3, 3, 0),
}


@dataclass(frozen=True)
class IntegratorSpec:
    dt: float = DEFAULTS["dt"]
    t_final: float = DEFAULTS["t_final"]
    log_every: int = DEFAULTS["log_every"]


@dataclass(frozen=True)
class CollisionSpec:
    enabled: bool = DEFAULTS["collision_enabled"]
    eta: float = DEFAULTS["apf_eta"]
    rho0: float = DEFAULTS["apf_rho0"]
    safety_radius: float = DEFAULTS["safety_radius"]


@dataclass(frozen=True)
class AgentSpec:
    id: str
    kind: str
    params: dict
    q0: np.ndarray
    ptilde0: np.ndarray
    goal: Optional[dict]
    controller: dict


@dataclass(frozen=True)
class EdgeSpec:
    i: str
    j: str
    weight: float


@dataclass(frozen=True)
class ScenarioSpec:
    integrator: IntegratorSpec
    agents: Tuple[AgentSpec, ...]
    edges: Tuple[EdgeSpec, ...]
    collision: CollisionSpec
    consensus_tol: float = DEFAULTS["consensus_tol"]


# ---------------------------------------------------------------------------
# parsing helpers


def _expect(cond, where, msg):
    if not cond:
        raise ScenarioError(where, msg)


def _number(raw, where, minimum=None, strict=False):
    _expect(isinstance(raw, (int, float)) and not isinstance(raw, bool),
            where, f"expected a number, got {raw!r}")
    v = float(raw)
    _expect(np.isfinite(v), where, "must be finite")
    if minimum is not None:
        if strict:
            _expect(v > minimum, where, f"must be > {minimum}")
        else:
            _expect(v >= minimum, where, f"must be >= {minimum}")
    return v


def _vector(raw, dim, where):
    _expect(isinstance(raw, list) and len(raw) == dim,
            where, f"expected a list of {dim} numbers")
    return np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(raw)])


def _gain_matrix(raw, dim, where):
    """Scalar -> scaled identity, flat list -> diagonal, nested -> full."""
    if dim == 0:
        return np.zeros((0, 0))
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        _expect(raw > 0, where, "scalar gain must be positive")
        return float(raw) * np.eye(dim)
    _expect(isinstance(raw, list) and len(raw) == dim,
            where, f"expected scalar, list of {dim}, or {dim}x{dim} matrix")
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
        vals = [_number(v, f"{where}[{i}]", minimum=0.0, strict=True)
                for i, v in enumerate(raw)]
        return np.diag(vals)
    rows = [_vector(row, dim, f"{where}[{i}]") for i, row in enumerate(raw)]
    return np.array(rows)


def _parse_goal(raw, kind, where):
    if raw is None:
        return None
    _expect(isinstance(raw, dict), where, "expected an object or null")
    s_dim, r_dim = _DIMS[kind][2], _DIMS[kind][3]
    if kind == "arm3dof":
        allowed = {"q_star"}
        _expect(set(raw) <= allowed, where, f"unknown keys {set(raw) - allowed}")
        q_star = raw.get("q_star")
        if q_star in (None, "free"):
            return None
        return {"s_star": _vector(q_star, s_dim, f"{where}.q_star"), "r_star": None}
    allowed = {"s_star", "r_star"}
    _expect(set(raw) <= allowed, where, f"unknown keys {set(raw) - allowed}")
    s_star = raw.get("s_star")
    r_star = raw.get("r_star")
    out = {"s_star": None, "r_star": None}
    if s_star not in (None, "free"):
        out["s_star"] = _vector(s_star, s_dim, f"{where}.s_star")
    if r_star not in (None, "free"):
        if isinstance(r_star, (int, float)) and not isinstance(r_star, bool) and r_dim == 1:
            out["r_star"] = np.array([float(r_star)])
        else:
            out["r_star"] = _vector(r_star, r_dim, f"{where}.r_star")
    _expect(not (out["r_star"] is not None and out["s_star"] is None), where,
            "r_star requires s_star (the switch criterion needs a position goal)")
    if out["s_star"] is None and out["r_star"] is None:
        return None
    return out


def _parse_agent(raw, idx):
    where = f"agents[{idx}]"
    _expect(isinstance(raw, dict), where, "expected an object")
    allowed = {"id", "kind", "params", "q0", "ptilde0", "goal", "controller"}
    _expect(set(raw) <= allowed, where, f"unknown keys {set(raw) - allowed}")

    aid = raw.get("id")
    _expect(isinstance(aid, str) and aid, f"{where}.id", "expected a non-empty string")
    kind = raw.get("kind")
    _expect(kind in AGENT_KINDS, f"{where}.kind",
            f"expected one of {AGENT_KINDS}, got {kind!r}")

    n, red, _, _ = _DIMS[kind]
    params = raw.get("params", {})
    _expect(isinstance(params, dict), f"{where}.params", "expected an object")
    q0 = _vector(raw.get("q0", [0.0] * n), n, f"{where}.q0")
    pt0 = _vector(raw.get("ptilde0", [0.0] * red), red, f"{where}.ptilde0")
    goal = _parse_goal(raw.get("goal"), kind, f"{where}.goal")
    controller = raw.get("controller", {})
    _expect(isinstance(controller, dict), f"{where}.controller", "expected an object")
    known = {"q_s", "q_r", "k_v", "m_d", "j_policy",
             "s_threshold", "sdot_threshold", "ablate_r_forcing"}
    _expect(set(controller) <= known, f"{where}.controller",
            f"unknown keys {set(controller) - known}")
    return AgentSpec(id=aid, kind=kind, params=dict(params), q0=q0,
                     ptilde0=pt0, goal=goal, controller=dict(controller))


def parse_scenario(raw, source="scenario"):
    """Validate a decoded JSON document into a ScenarioSpec."""
    _expect(isinstance(raw, dict), source, "top level must be an object")
    allowed = {"integrator", "agents", "edges", "collision", "consensus_tol"}
    _expect(set(raw) <= allowed, source, f"unknown keys {set(raw) - allowed}")

    integ_raw = raw.get("integrator", {})
    _expect(isinstance(integ_raw, dict), "integrator", "expected an object")
    _expect(set(integ_raw) <= {"dt", "t_final", "log_every"}, "integrator",
            f"unknown keys {set(integ_raw) - {'dt', 't_final', 'log_every'}}")
    dt = _number(integ_raw.get("dt", DEFAULTS["dt"]), "integrator.dt",
                 minimum=0.0, strict=True)
    t_final = _number(integ_raw.get("t_final", DEFAULTS["t_final"]),
                      "integrator.t_final", minimum=0.0)
    log_every = integ_raw.get("log_every", DEFAULTS["log_every"])
    _expect(isinstance(log_every, int) and not isinstance(log_every, bool)
            and log_every >= 1, "integrator.log_every", "expected an integer >= 1")

    agents_raw = raw.get("agents")
    _expect(isinstance(agents_raw, list) and agents_raw, "agents",
            "expected a non-empty list of agents")
    agents = tuple(_parse_agent(a, i) for i, a in enumerate(agents_raw))
    ids = [a.id for a in agents]
    _expect(len(set(ids)) == len(ids), "agents", f"duplicate agent ids in {ids}")

    edges_raw = raw.get("edges", [])
    _expect(isinstance(edges_raw, list), "edges", "expected a list")
    edges = []
    for i, e in enumerate(edges_raw):
        where = f"edges[{i}]"
        _expect(isinstance(e, dict), where, "expected an object")
        _expect(set(e) <= {"i", "j", "weight"}, where,
                f"unknown keys {set(e) - {'i', 'j', 'weight'}}")
        ei, ej = e.get("i"), e.get("j")
        for end, name in ((ei, "i"), (ej, "j")):
            _expect(end in ids, f"{where}.{name}",
                    f"references unknown agent id {end!r}")
        _expect(ei != ej, where, f"self-loop on agent {ei!r}")
        w = _number(e.get("weight", 1.0), f"{where}.weight", minimum=0.0, strict=True)
        edges.append(EdgeSpec(ei, ej, w))

    coll_raw = raw.get("collision", {})
    _expect(isinstance(coll_raw, dict), "collision", "expected an object")
    known = {"enabled", "eta", "rho0", "safety_radius"}
    _expect(set(coll_raw) <= known, "collision",
            f"unknown keys {set(coll_raw) - known}")
    enabled = coll_raw.get("enabled", DEFAULTS["collision_enabled"])
    _expect(isinstance(enabled, bool), "collision.enabled", "expected a boolean")
    collision = CollisionSpec(
        enabled=enabled,
        eta=_number(coll_raw.get("eta", DEFAULTS["apf_eta"]),
                    "collision.eta", minimum=0.0, strict=True),
        rho0=_number(coll_raw.get("rho0", DEFAULTS["apf_rho0"]),
                     "collision.rho0", minimum=0.0, strict=True),
        safety_radius=_number(coll_raw.get("safety_radius", DEFAULTS["safety_radius"]),
                              "collision.safety_radius", minimum=0.0),
    )

    consensus_tol = _number(raw.get("consensus_tol", DEFAULTS["consensus_tol"]),
                            "consensus_tol", minimum=0.0, strict=True)

    return ScenarioSpec(
        integrator=IntegratorSpec(dt=dt, t_final=t_final, log_every=log_every),
        agents=agents,
        edges=tuple(edges),
        collision=collision,
        consensus_tol=consensus_tol,
    )


def load_scenario(path):
    """Read and validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScenarioError(str(path), f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(str(path),
                            f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                            f"{exc.msg}") from exc
    return parse_scenario(raw, source=str(path))


# ---------------------------------------------------------------------------
# world assembly


def _build_model(agent):
    where = f"agent {agent.id!r} params"
    p = agent.params
    try:
        if agent.kind == "diff_drive":
            return models.build_diff_drive(
                p.get("mass", DEFAULTS["diff_drive_mass"]),
                p.get("inertia", DEFAULTS["diff_drive_inertia"]))
        if agent.kind == "knife_edge":
            return models.build_knife_edge(
                p.get("mass", DEFAULTS["diff_drive_mass"]),
                p.get("inertia", DEFAULTS["diff_drive_inertia"]))
        model = models.build_arm3dof(
            p.get("masses", DEFAULTS["arm_masses"]),
            p.get("lengths", DEFAULTS["arm_lengths"]),
            gravity=p.get("gravity", DEFAULTS["arm_gravity"]),
            rotor_inertias=p.get("rotor_inertias", DEFAULTS["arm_rotor_inertias"]),
            base=p.get("base", (0.0, 0.0, 0.0)))
        return model, models.trivial_pcd(model.n)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(where, str(exc)) from exc


def _build_config(agent, model, pcd, collision):
    c = agent.controller
    where = f"agent {agent.id!r} controller"
    s_dim, r_dim = pcd.s_dim, pcd.p_dim
    reduced_dim = model.n - model.k
    try:
        cfg = ControllerConfig(
            q_s=_gain_matrix(c.get("q_s", DEFAULTS["q_s"]), s_dim, f"{where}.q_s"),
            q_r=_gain_matrix(c.get("q_r", DEFAULTS["q_r"]), max(r_dim, 0), f"{where}.q_r"),
            k_v=_gain_matrix(c.get("k_v", DEFAULTS["k_v"]), model.m, f"{where}.k_v"),
            m_d=(None if c.get("m_d") is None
                 else _gain_matrix(c["m_d"], reduced_dim, f"{where}.m_d")),
            j_policy=c.get("j_policy", "gyroscopic"),
            s_threshold=_number(c.get("s_threshold", DEFAULTS["s_threshold"]),
                                f"{where}.s_threshold", minimum=0.0, strict=True),
            sdot_threshold=_number(c.get("sdot_threshold", DEFAULTS["sdot_threshold"]),
                                   f"{where}.sdot_threshold", minimum=0.0, strict=True),
            apf_eta=collision.eta,
            apf_rho0=collision.rho0,
            ablate_r_forcing=bool(c.get("ablate_r_forcing", False)),
        )
    except ValueError as exc:
        raise ScenarioError(where, str(exc)) from exc
    return cfg


def build_world(spec):
    """Instantiate models, controllers and graph; return (WorldDef, SimState)."""
    defs = []
    for agent in spec.agents:
        model, pcd = _build_model(agent)
        cfg = _build_config(agent, model, pcd, spec.collision)
        goal = GoalSpec(**agent.goal) if agent.goal else GoalSpec()
        defs.append(sim.AgentDef(id=agent.id, kind=agent.kind, model=model,
                                 pcd=pcd, cfg=cfg, goal=goal))

    graph = None
    if spec.edges:
        graph = CoopGraph(agents=tuple(a.id for a in spec.agents),
                          edges=tuple((e.i, e.j, e.weight) for e in spec.edges))

    world = sim.WorldDef(
        agents=tuple(defs),
        graph=graph,
        collision_enabled=spec.collision.enabled,
        safety_radius=spec.collision.safety_radius,
        consensus_tol=spec.consensus_tol,
    )
    state = sim.SimState(
        t=0.0,
        qs=[a.q0.copy() for a in spec.agents],
        pts=[a.ptilde0.copy() for a in spec.agents],
        modes=[PotentialMode(branch=Branch.CONSTRAINED) for _ in spec.agents],
    )
    return world, state
