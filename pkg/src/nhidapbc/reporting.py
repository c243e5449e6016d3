"""Writers for run outputs: trajectory CSV, report JSON, plot-data series.

The CSV schema is stable and bit-exact: fixed column order
``t,agent,mode,q...,ptilde...,tau...,H_d,constraint_viol`` with numbers in
plain decimal notation at 12 significant digits.  Plot data are plain
two-column text series consumable by any plotting tool; rendered figures are
produced separately by :mod:`nhidapbc.plots`.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .scenario import DEFAULTS


def _fmt(x):
    """12 significant digits, plain positional notation (no exponents)."""
    return np.format_float_positional(float(x), precision=12, unique=False,
                                      fractional=False, trim="-")


def csv_header(log):
    nq = max(tr.q.shape[1] for tr in log.agents.values())
    npt = max(tr.pt.shape[1] for tr in log.agents.values())
    nt = max(tr.tau.shape[1] for tr in log.agents.values())
    cols = ["t", "agent", "mode"]
    cols += [f"q{i}" for i in range(nq)]
    cols += [f"ptilde{i}" for i in range(npt)]
    cols += [f"tau{i}" for i in range(nt)]
    cols += ["H_d", "constraint_viol"]
    return cols


def write_trajectory_csv(log, path):
    """One row per (sample, agent); shorter state blocks padded with blanks."""
    cols = csv_header(log)
    nq = sum(c.startswith("q") for c in cols)
    npt = sum(c.startswith("ptilde") for c in cols)
    nt = sum(c.startswith("tau") for c in cols)

    lines = [",".join(cols)]
    agent_ids = list(log.agents)
    for idx, t in enumerate(log.t):
        for aid in agent_ids:
            tr = log.agents[aid]
            row = [_fmt(t), aid, str(int(tr.mode[idx]))]
            row += [_fmt(v) for v in tr.q[idx]] + [""] * (nq - tr.q.shape[1])
            row += [_fmt(v) for v in tr.pt[idx]] + [""] * (npt - tr.pt.shape[1])
            row += [_fmt(v) for v in tr.tau[idx]] + [""] * (nt - tr.tau.shape[1])
            row += [_fmt(tr.h_d[idx]), _fmt(tr.cviol[idx])]
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def report_payload(report, violations=(), exit_code=None, scenario_name=None):
    payload = report.to_dict()
    payload["violations"] = [str(v) for v in violations]
    payload["defaults"] = dict(DEFAULTS)
    if exit_code is not None:
        payload["exit_code"] = exit_code
    if scenario_name is not None:
        payload["scenario"] = scenario_name
    return payload


def write_report_json(payload, path):
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _series(path, xs, ys):
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{x:.12g} {y:.12g}\n")


def write_plotdata(log, outdir):
    """Two-column text series per figure, one directory per run."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t = log.t
    for aid, tr in log.agents.items():
        _series(outdir / f"{aid}_path.txt", tr.q[:, 0], tr.q[:, 1])
        for i in range(tr.q.shape[1]):
            _series(outdir / f"{aid}_q{i}.txt", t, tr.q[:, i])
        for i in range(tr.tau.shape[1]):
            _series(outdir / f"{aid}_tau{i}.txt", t, tr.tau[:, i])
        _series(outdir / f"{aid}_energy.txt", t, tr.h_d)
        _series(outdir / f"{aid}_constraint.txt", t, tr.cviol)
    if log.disagreement is not None:
        _series(outdir / "consensus.txt", t, log.disagreement)
    if log.min_distance is not None:
        _series(outdir / "min_distance.txt", t, log.min_distance)
