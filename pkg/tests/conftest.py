"""Shared generators for randomized jets and moduli."""

import numpy as np
import pytest

from convext.jet import Jet, compute_A
from convext.modulus import HolderModulus, LinearModulus, ScaledModulus, TableModulus


def random_concave_table(rng, knots=5, coercive=True):
    """A concave non-decreasing table through (0, 0) with positive slopes."""
    dt = rng.uniform(0.2, 1.5, size=knots)
    t = np.concatenate([[0.0], np.cumsum(dt)])
    slopes = np.sort(rng.uniform(0.05 if coercive else 0.0, 2.0, size=knots))[::-1]
    if not coercive:
        slopes[-1] = 0.0
    w = np.concatenate([[0.0], np.cumsum(slopes * dt)])
    return TableModulus(np.column_stack([t, w]))


def random_modulus(rng, kinds=("holder", "linear", "table", "scaled")):
    kind = kinds[rng.integers(len(kinds))]
    if kind == "holder":
        return HolderModulus(rng.uniform(0.3, 1.0))
    if kind == "linear":
        return LinearModulus()
    if kind == "table":
        return random_concave_table(rng)
    base = HolderModulus(rng.uniform(0.3, 1.0)) if rng.random() < 0.5 else random_concave_table(rng)
    return ScaledModulus(base, rng.uniform(0.25, 4.0))


def random_convex_function(rng, d):
    """A smooth strictly convex function with a closed-form gradient.

    Quadratic bowl plus a few C^1 power ridges |<a, x> - b|^(1+p) / (1+p)
    with p in (1, 2), so the gradient is differentiable but not Lipschitz-
    trivial.  Returns (value_fn, grad_fn), both vectorized over rows.
    """
    q = rng.uniform(0.3, 1.5)
    center = rng.uniform(-0.5, 0.5, size=d)
    atoms = []
    for _ in range(int(rng.integers(1, 4))):
        a = rng.normal(size=d)
        a /= max(np.linalg.norm(a), 1e-9)
        b = rng.uniform(-0.5, 0.5)
        w = rng.uniform(0.2, 1.0)
        p = rng.uniform(1.1, 1.9)
        atoms.append((a, b, w, p))

    def value(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = 0.5 * q * np.sum((X - center) ** 2, axis=1)
        for a, b, w, p in atoms:
            u = X @ a - b
            out += w * np.abs(u) ** (1.0 + p) / (1.0 + p)
        return out

    def grad(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = q * (X - center)
        for a, b, w, p in atoms:
            u = X @ a - b
            out += (w * np.sign(u) * np.abs(u) ** p)[:, None] * a[None, :]
        return out

    return value, grad


def random_feasible_jet(rng, d, n, spread=1.0):
    """Restrict a random smooth convex function to n random points."""
    value, grad = random_convex_function(rng, d)
    for _ in range(100):
        pts = rng.uniform(-spread, spread, size=(n, d))
        if n == 1:
            break
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        np.fill_diagonal(dist, np.inf)
        if np.min(dist) > 1e-3:
            break
    return Jet(pts, value(pts), grad(pts))


def normalized_jet(rng, d, n, modulus, spread=1.0):
    """A random feasible jet rescaled so its least feasible constant is 1."""
    jet = random_feasible_jet(rng, d, n, spread)
    A = compute_A(jet, modulus)
    assert np.isfinite(A) and A > 0
    return jet.scaled(1.0 / A)


def dense_restriction_jet(rng, n=None, radius=1.0):
    """A random convex function restricted to a dense 1-D grid."""
    if n is None:
        n = int(rng.integers(60, 121))
    value, grad = random_convex_function(rng, 1)
    t = np.linspace(-radius, radius, n)
    pts = t[:, None]
    return Jet(pts, value(pts), grad(pts))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
