"""From qualitative feasibility to a quantitative modulus.

A jet on a dense finite set that satisfies the two qualitative conditions
(value domination and tangency rigidity) admits a differentiable convex
extension, but no modulus is prescribed a priori.  This module manufactures
one from the data:

* ``delta(t)``: the worst tangent-plane crossing rate among witness points
  within distance t.  On finite sets the supremum reduces exactly to
  ``max(0, max_pairs(s_ij - c_ij / t))`` where c is the tangent defect and
  s the gradient gap: the witness direction aligns with the gradient gap
  and the optimal witness distance is t itself.
* ``delta1(t) = inf_{0<s<1} delta(s) + (2 L / s) t``: a concave,
  non-decreasing upper envelope of delta (the infimand is convex in 1/s,
  so a golden-section pass after a log-grid scan is exact).
* ``Delta = min(2 L, delta1)`` and ``omega = Delta^alpha``, tabulated on a
  log grid and repaired with an upper concave hull so the result is a
  certified concave table.
* ``M = 2 (2 L)^(1-alpha)``: with this constant the jet is feasible for
  the constructed omega, so the extension pipeline applies and delivers a
  C^1 convex interpolant with the sharp Lipschitz constant L = sup |G|.

alpha defaults to 1 (the Euclidean case); smaller values exercise the
norm-smoothness-limited variant together with a user-supplied midpoint
constant K.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .extension import (
    ExtensionConfig,
    ExtensionModel,
    VerificationReport,
    build_extension,
    verify_extension,
)
from .jet import (
    InfeasibleJetError,
    Jet,
    check_condition_C,
    check_condition_CW1,
    pair_defects,
    seminorm_A_extrinsic,
    sup_norm_gradients,
)
from .modulus import LinearModulus, Modulus, TableModulus, validate_modulus

__all__ = [
    "ConstructedModulus",
    "compute_delta",
    "delta_many",
    "delta1_value",
    "build_construction",
    "c1_extend",
]

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ConstructedModulus:
    """The tabulated construction delta <= delta1, Delta and omega = Delta^alpha."""

    alpha: float
    L: float
    t_grid: np.ndarray
    delta: np.ndarray
    delta1: np.ndarray
    Delta: np.ndarray
    omega: Optional[Modulus]
    M: float
    degenerate: bool = False

    def to_json(self):
        out = {
            "alpha": self.alpha,
            "L": self.L,
            "M": self.M,
            "degenerate": bool(self.degenerate),
            "t_grid": self.t_grid.tolist(),
            "delta": self.delta.tolist(),
            "delta1": self.delta1.tolist(),
            "Delta": self.Delta.tolist(),
        }
        if isinstance(self.omega, TableModulus):
            out["omega_knots"] = self.omega.knots.tolist()
        return out


def _require_qualitative(jet: Jet, tol: float):
    cond_c = check_condition_C(jet, tol)
    if not cond_c.ok:
        raise InfeasibleJetError("condition_C", cond_c.violations)
    cond_cw1 = check_condition_CW1(jet, tol)
    if not cond_cw1.ok:
        raise InfeasibleJetError("condition_CW1", cond_cw1.violations)


def _pair_arrays(jet: Jet):
    """Ordered-pair defects (c, s), reduced to the Pareto front.

    Pair B is dominated by pair A when s_A >= s_B and c_A <= c_B: then
    s_A - c_A / t >= s_B - c_B / t for every t > 0, so B never decides
    delta or delta1.  Pairs with s = 0 are dominated by the zero floor.
    The reduction trims O(n^2) pairs to O(n) on typical dense-grid jets.
    """
    C, S, _ = pair_defects(jet)
    n = jet.size
    ii, jj = np.where(~np.eye(n, dtype=bool))
    c, s = np.maximum(C[ii, jj], 0.0), S[ii, jj]
    keep = s > 0.0
    c, s = c[keep], s[keep]
    if len(s) == 0:
        return c, s
    order = np.argsort(-s, kind="stable")
    c, s = c[order], s[order]
    cmin = np.minimum.accumulate(c)
    front = np.concatenate([[True], c[1:] < cmin[:-1]])
    return c[front], s[front]


def delta_many(jet: Jet, ts, pair_cache=None) -> np.ndarray:
    """delta on an array of positive distances (exact finite-set reduction)."""
    ts = np.asarray(ts, dtype=float)
    if np.any(ts <= 0):
        raise ValueError("delta is defined for t > 0")
    if pair_cache is None:
        pair_cache = _pair_arrays(jet)
    c, s = pair_cache
    if len(c) == 0:
        return np.zeros_like(ts)
    vals = s[None, :] - c[None, :] / ts[:, None]
    return np.maximum(0.0, np.max(vals, axis=1))


def compute_delta(jet: Jet, t: float, tol: float = 1e-9) -> float:
    """Worst tangent-plane crossing rate within witness distance t."""
    if t <= 0:
        raise ValueError("delta is defined for t > 0")
    cond_c = check_condition_C(jet, tol)
    if not cond_c.ok:
        raise InfeasibleJetError("condition_C", cond_c.violations)
    return float(delta_many(jet, np.array([t]))[0])


def delta1_value(jet: Jet, L: float, t: float, pair_cache=None, n_scan: int = 200) -> float:
    """inf over s in (0,1) of delta(s) + (2 L / s) t.

    In u = 1/s the infimand is convex (a max of affine functions plus a
    linear term), so a log-grid scan bracketing the minimum followed by a
    golden-section pass returns the exact infimum.
    """
    if pair_cache is None:
        pair_cache = _pair_arrays(jet)
    c, s_gap = pair_cache

    def objective(u):
        # delta(1/u) + 2 L t u, vectorized over u
        u = np.asarray(u, dtype=float)
        if len(c):
            d = np.maximum(0.0, np.max(s_gap[None, :] - c[None, :] * u[:, None], axis=1))
        else:
            d = np.zeros_like(u)
        return d + 2.0 * L * t * u

    u_grid = np.geomspace(1.0 + 1e-6, 1e6, n_scan)
    vals = objective(u_grid)
    best = int(np.argmin(vals))
    a = u_grid[max(best - 1, 0)]
    b = u_grid[min(best + 1, n_scan - 1)]
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = objective(np.array([x1]))[0], objective(np.array([x2]))[0]
    for _ in range(80):
        if f1 > f2:      # minimum lies right of x1
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = objective(np.array([x2]))[0]
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = objective(np.array([x1]))[0]
    return float(min(vals[best], f1, f2))


def _upper_concave_hull(ts, ws):
    """Upper concave hull vertices of a graph sorted by t (slopes decrease)."""
    hx, hy = [], []
    for x, y in zip(ts, ws):
        while len(hx) >= 2 and (
            (hy[-1] - hy[-2]) * (x - hx[-1]) <= (y - hy[-1]) * (hx[-1] - hx[-2])
        ):
            hx.pop()
            hy.pop()
        hx.append(x)
        hy.append(y)
    return np.asarray(hx), np.asarray(hy)


def build_construction(
    jet: Jet,
    alpha: float = 1.0,
    t_grid=None,
    n_grid: int = 320,
    tol: float = 1e-9,
) -> ConstructedModulus:
    """Tabulate delta, delta1, Delta and build the concave table omega.

    The grid defaults to n_grid log-spaced points on
    [1e-4 * diam, 10 * diam].  A jet with L = 0 is constant (by value
    domination) and returns a degenerate record handled downstream by a
    constant extension.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    _require_qualitative(jet, tol)
    L = sup_norm_gradients(jet)
    if t_grid is None:
        diam = max(jet.diameter(), 1.0)
        t_grid = np.geomspace(1e-4 * diam, 10.0 * diam, n_grid)
    else:
        t_grid = np.asarray(t_grid, dtype=float)
        if np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
            raise ValueError("t_grid must be positive and strictly increasing")

    if L <= 1e-15 * (1.0 + float(np.max(np.abs(jet.values)))):
        zeros = np.zeros_like(t_grid)
        return ConstructedModulus(
            alpha=alpha, L=L, t_grid=t_grid, delta=zeros, delta1=zeros,
            Delta=zeros, omega=None, M=0.0, degenerate=True,
        )

    cache = _pair_arrays(jet)
    delta = delta_many(jet, t_grid, cache)
    delta1 = np.array([delta1_value(jet, L, t, cache) for t in t_grid])
    Delta = np.minimum(2.0 * L, delta1)

    ts = np.concatenate([[0.0], t_grid])
    ws = np.concatenate([[0.0], np.power(Delta, alpha)])
    hx, hy = _upper_concave_hull(ts, ws)
    omega = TableModulus(np.column_stack([hx, hy]))
    report = validate_modulus(omega, np.concatenate([[0.0], t_grid]))
    if not report.ok:
        raise RuntimeError(f"constructed table failed validation: {report.issues[:3]}")

    M = 2.0 * (2.0 * L) ** (1.0 - alpha)
    return ConstructedModulus(
        alpha=alpha, L=L, t_grid=t_grid, delta=delta, delta1=delta1,
        Delta=Delta, omega=omega, M=M,
    )


def c1_extend(
    jet: Jet,
    alpha: float = 1.0,
    domain=None,
    resolution: Optional[int] = None,
    smoothness_K: Optional[float] = None,
    samples: int = 2000,
    seed: int = 0,
    tol: float = 1e-9,
):
    """Full qualitative-to-quantitative pipeline.

    Builds the modulus construction, certifies that the jet is feasible for
    it with constant M = 2 (2L)^(1-alpha), and hands off to the extension
    pipeline with the Lipschitz cap set to L (so the delivered extension
    has the sharp Lipschitz constant).  Returns
    (model, verification report, construction).
    """
    cm = build_construction(jet, alpha=alpha, tol=tol)
    if cm.degenerate:
        cfg = ExtensionConfig(
            modulus=LinearModulus(), M="auto", lipschitz="auto",
            smoothness_K=smoothness_K, domain=domain, resolution=resolution,
        )
        model = build_extension(jet, cfg)
        report = verify_extension(model, samples=samples, seed=seed)
        return model, report, cm

    A_check = seminorm_A_extrinsic(jet, cm.omega)
    if not A_check <= cm.M * (1.0 + 1e-9) + 1e-6:
        raise RuntimeError(
            f"construction failed: least constant {A_check} exceeds M = {cm.M}"
        )

    cfg = ExtensionConfig(
        modulus=cm.omega, M=cm.M, lipschitz="auto",
        smoothness_K=smoothness_K, domain=domain, resolution=resolution,
    )
    model = build_extension(jet, cfg)
    report = verify_extension(model, samples=samples, seed=seed)
    return model, report, cm
