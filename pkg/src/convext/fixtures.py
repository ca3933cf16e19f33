"""Built-in demonstration jets, also shipped as JSON files.

``two_point_power_jet(alpha)`` restricts |t|^(1+alpha)/(1+alpha) to {-1, 1}:
the jet whose gradient seminorm and least constant realize the sharp ratio
((1+alpha)/(2 alpha))^alpha.  ``power_three_halves_grid_jet`` restricts
(2/3)|t|^(3/2) to a symmetric grid, where the two seminorms genuinely
differ.  ``single_parabola_jet`` is the one-point zero jet whose extension
with the identity modulus is t^2/2 (and whose capped variant is the Huber
function).
"""

from __future__ import annotations

import importlib.resources

import numpy as np

from .jet import Jet

__all__ = [
    "two_point_power_jet",
    "power_three_halves_grid_jet",
    "single_parabola_jet",
    "halfsq_jet",
    "fixture_path",
]


def two_point_power_jet(alpha: float) -> Jet:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    v = 1.0 / (1.0 + alpha)
    return Jet([[-1.0], [1.0]], [v, v], [[-1.0], [1.0]])


def power_three_halves_grid_jet(n: int = 401, radius: float = 2.0) -> Jet:
    """(2/3)|t|^(3/2) with gradient sign(t) sqrt(|t|) on a symmetric n-grid."""
    t = np.linspace(-radius, radius, n)
    f = (2.0 / 3.0) * np.abs(t) ** 1.5
    g = np.sign(t) * np.sqrt(np.abs(t))
    return Jet(t[:, None], f, g[:, None])


def single_parabola_jet() -> Jet:
    return Jet([[0.0]], [0.0], [[0.0]])


def halfsq_jet() -> Jet:
    """t^2/2 restricted to {0, 1}."""
    return Jet([[0.0], [1.0]], [0.0, 0.5], [[0.0], [1.0]])


def fixture_path(name: str) -> str:
    """Filesystem path of a shipped JSON fixture (e.g. 'single_parabola.json')."""
    ref = importlib.resources.files("convext") / "fixtures" / name
    return str(ref)
