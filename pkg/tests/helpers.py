"""Shared numerical oracles for the test suite.

Finite-difference checks are intentionally independent of the analytic code
paths they verify: plain central differences on the value functions.
"""

import numpy as np


def fd_gradient(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = h
        g[i] = (f(x + dx) - f(x - dx)) / (2.0 * h)
    return g


def assert_close_rel(actual, expected, rtol, floor=1.0):
    """|a - e| <= rtol * max(floor, |e|), elementwise."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    scale = np.maximum(floor, np.abs(expected))
    err = np.abs(actual - expected)
    assert np.all(err <= rtol * scale), (
        f"relative error {np.max(err / scale):.3e} exceeds {rtol:.1e}"
    )


def rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
