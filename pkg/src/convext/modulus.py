"""Moduli of continuity and their convex-analysis companions.

A modulus of continuity is a concave, non-decreasing function
omega : [0, inf) -> [0, inf) with omega(0) = 0.  Besides omega itself, the
code below evaluates

* ``phi(t)   = integral_0^t omega(s) ds``   (convex, the "parabola profile"),
* ``omega_inv(s)``                          (inverse, coercive moduli only),
* ``phi_star(s) = integral_0^s omega_inv`` (Fenchel conjugate of phi,
  coercive moduli only),

and audits the standard inequality suite tying the four functions together
(``validate_modulus``).  A modulus is *coercive* when it is increasing and
unbounded; only then are omega_inv and phi_star defined.

Supported kinds: power moduli t^alpha with alpha in (0, 1], the identity
modulus t, piecewise-linear concave tables, and positive scalings of any of
these.  All evaluations accept scalars or numpy arrays and are exact
(closed forms, or exact piecewise integration for tables).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Modulus",
    "HolderModulus",
    "LinearModulus",
    "TableModulus",
    "ScaledModulus",
    "ConjugatePair",
    "NonCoerciveModulusError",
    "ValidationIssue",
    "ValidationReport",
    "validate_modulus",
    "modulus_from_json",
    "modulus_to_json",
    "parse_modulus_spec",
]


class NonCoerciveModulusError(Exception):
    """Raised when omega_inv / phi_star is requested for a bounded modulus."""


def _check_nonneg(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.size and (np.any(np.isnan(arr)) or np.any(arr < 0)):
        raise ValueError(f"{name} must be >= 0, got {x!r}")
    return arr


class Modulus:
    """Base class; subclasses implement the four evaluations on arrays."""

    coercive: bool = False

    #: omega's exponent when omega(t) = scale * t^alpha, else None.
    holder_exponent: Optional[float] = None
    #: multiplicative scale in front of the base shape (1.0 unless scaled).
    holder_scale: float = 1.0

    @property
    def omega_sup(self) -> float:
        """sup_t omega(t); +inf for coercive moduli."""
        return np.inf

    # -- public evaluations (scalar in -> float out, array in -> array out)

    def omega(self, t):
        arr = _check_nonneg(t, "t")
        out = self._omega(arr)
        return float(out) if np.ndim(t) == 0 else out

    def phi(self, t):
        arr = _check_nonneg(t, "t")
        out = self._phi(arr)
        return float(out) if np.ndim(t) == 0 else out

    def omega_inv(self, s):
        if not self.coercive:
            raise NonCoerciveModulusError(
                "omega_inv is only defined for increasing unbounded moduli"
            )
        arr = _check_nonneg(s, "s")
        out = self._omega_inv(arr)
        return float(out) if np.ndim(s) == 0 else out

    def phi_star(self, s):
        if not self.coercive:
            raise NonCoerciveModulusError(
                "phi_star is only defined for increasing unbounded moduli"
            )
        arr = _check_nonneg(s, "s")
        out = self._phi_star(arr)
        return float(out) if np.ndim(s) == 0 else out

    def conjugate_pair(self) -> "ConjugatePair":
        inv = self.omega_inv if self.coercive else None
        return ConjugatePair(phi=self.phi, phi_star=self.phi_star if self.coercive else None, omega_inv=inv)

    # -- hooks

    def _omega(self, t):
        raise NotImplementedError

    def _phi(self, t):
        raise NotImplementedError

    def _omega_inv(self, s):
        raise NotImplementedError

    def _phi_star(self, s):
        raise NotImplementedError


@dataclass(frozen=True)
class ConjugatePair:
    """Bundled phi, its Fenchel conjugate, and omega_inv (None if bounded)."""

    phi: Callable
    phi_star: Optional[Callable]
    omega_inv: Optional[Callable]


class HolderModulus(Modulus):
    """omega(t) = t^alpha for alpha in (0, 1]."""

    coercive = True

    def __init__(self, alpha: float):
        alpha = float(alpha)
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        self.alpha = alpha
        self.holder_exponent = alpha

    def _omega(self, t):
        return np.power(t, self.alpha)

    def _phi(self, t):
        return np.power(t, 1.0 + self.alpha) / (1.0 + self.alpha)

    def _omega_inv(self, s):
        return np.power(s, 1.0 / self.alpha)

    def _phi_star(self, s):
        q = 1.0 + 1.0 / self.alpha
        return np.power(s, q) / q

    def __repr__(self):
        return f"HolderModulus(alpha={self.alpha})"


class LinearModulus(Modulus):
    """The identity modulus omega(t) = t (Lipschitz gradients)."""

    coercive = True
    holder_exponent = 1.0

    def _omega(self, t):
        return np.asarray(t, dtype=float)

    def _phi(self, t):
        return 0.5 * np.square(t)

    def _omega_inv(self, s):
        return np.asarray(s, dtype=float)

    def _phi_star(self, s):
        return 0.5 * np.square(s)

    def __repr__(self):
        return "LinearModulus()"


class TableModulus(Modulus):
    """Piecewise-linear concave modulus given by knots (t_i, w_i).

    The first knot must be (0, 0); beyond the last knot the table is
    extrapolated affinely with the final chord slope (this preserves
    concavity and monotonicity).  phi / phi_star / omega_inv are computed
    by exact piecewise integration and inversion of the linear segments.

    Pass ``validate=False`` to skip the shape checks at construction; this
    exists so that deliberately corrupted tables can be fed to
    ``validate_modulus`` in audits.
    """

    def __init__(self, knots, validate: bool = True):
        knots = np.asarray(knots, dtype=float)
        if knots.ndim != 2 or knots.shape[1] != 2 or knots.shape[0] < 2:
            raise ValueError("knots must be an (k >= 2, 2) array of (t, omega(t)) pairs")
        t, w = knots[:, 0].copy(), knots[:, 1].copy()
        if validate:
            if t[0] != 0.0 or w[0] != 0.0:
                raise ValueError("the first knot must be (0, 0)")
            if np.any(np.diff(t) <= 0):
                raise ValueError("knot abscissae must be strictly increasing")
            if np.any(w < 0) or np.any(np.diff(w) < 0):
                raise ValueError("knot values must be nonnegative and non-decreasing")
            slopes = np.diff(w) / np.diff(t)
            tol = 1e-12 * (1.0 + np.max(np.abs(w)))
            if np.any(np.diff(slopes) > tol):
                raise ValueError("knots are not concave (chord slopes increase)")
        self._t = t
        self._w = w
        self._slopes = np.diff(w) / np.diff(t)
        self._slope_end = float(self._slopes[-1]) if len(self._slopes) else 0.0
        # cumulative integral of omega at the knots (trapezoids are exact)
        self._Phi = np.concatenate(
            [[0.0], np.cumsum(np.diff(t) * (w[:-1] + w[1:]) / 2.0)]
        )
        self.coercive = self._slope_end > 0.0
        if self.coercive:
            # cumulative integral of omega_inv at the knot values
            self._Psi = np.concatenate(
                [[0.0], np.cumsum(np.diff(w) * (t[:-1] + t[1:]) / 2.0)]
            )

    @property
    def knots(self):
        return np.column_stack([self._t, self._w])

    @property
    def omega_sup(self):
        return np.inf if self.coercive else float(self._w[-1])

    def _omega(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self._t, self._w)
        over = t > self._t[-1]
        if np.any(over):
            out = np.where(over, self._w[-1] + self._slope_end * (t - self._t[-1]), out)
        return out

    def _phi(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self._t, t, side="right") - 1, 0, len(self._t) - 1)
        # omega is affine on [t_idx, t], so one trapezoid finishes the integral
        return self._Phi[idx] + (t - self._t[idx]) * (self._w[idx] + self._omega(t)) / 2.0

    def _omega_inv(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(self._w, s, side="right") - 1, 0, len(self._w) - 1)
        seg_slope = np.where(idx < len(self._slopes), self._slopes[np.minimum(idx, len(self._slopes) - 1)], self._slope_end)
        return self._t[idx] + (s - self._w[idx]) / seg_slope

    def _phi_star(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(self._w, s, side="right") - 1, 0, len(self._w) - 1)
        return self._Psi[idx] + (s - self._w[idx]) * (self._t[idx] + self._omega_inv(s)) / 2.0

    def __repr__(self):
        return f"TableModulus({self.knots.tolist()!r})"


class ScaledModulus(Modulus):
    """omega(t) = factor * base(t) for factor > 0.

    phi scales by the factor; the conjugate obeys
    (factor * phi)^*(s) = factor * phi^*(s / factor).
    """

    def __init__(self, base: Modulus, factor: float):
        factor = float(factor)
        if not factor > 0:
            raise ValueError(f"scale factor must be positive, got {factor}")
        self.base = base
        self.factor = factor
        self.coercive = base.coercive
        self.holder_exponent = base.holder_exponent
        self.holder_scale = factor * base.holder_scale

    @property
    def omega_sup(self):
        return self.factor * self.base.omega_sup

    def _omega(self, t):
        return self.factor * self.base._omega(t)

    def _phi(self, t):
        return self.factor * self.base._phi(t)

    def _omega_inv(self, s):
        return self.base._omega_inv(np.asarray(s, dtype=float) / self.factor)

    def _phi_star(self, s):
        return self.factor * self.base._phi_star(np.asarray(s, dtype=float) / self.factor)

    def __repr__(self):
        return f"ScaledModulus({self.base!r}, factor={self.factor})"


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationIssue:
    check: str
    where: tuple
    residual: float

    def __str__(self):
        return f"{self.check} at {self.where}: residual {self.residual:.3e}"


@dataclass
class ValidationReport:
    issues: list

    @property
    def ok(self) -> bool:
        return not self.issues

    def to_json(self):
        return {
            "ok": self.ok,
            "issues": [
                {"check": i.check, "where": list(i.where), "residual": i.residual}
                for i in self.issues
            ],
        }


def validate_modulus(m: Modulus, grid, rel_tol: float = 1e-9) -> ValidationReport:
    """Audit a modulus on a grid of nonnegative evaluation points.

    Checks, for every grid point t (and every ordered grid pair):

    * omega(0) = 0, omega non-decreasing, chord slopes non-increasing;
    * omega(lambda t) <= lambda omega(t) for lambda >= 1  (equivalently
      t / omega(t) non-decreasing);
    * (t/2) omega(t) <= phi(t) <= t omega(t/2);
    * for coercive m:  t omega_inv(t/2) <= phi_star(t) <= (t/2) omega_inv(t),
      and the conjugacy identity phi(t) + phi_star(omega(t)) = t omega(t).

    Returns a report whose ``issues`` list is empty iff every check passed
    within ``rel_tol`` relative slack.
    """
    grid = np.unique(_check_nonneg(grid, "grid"))
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    issues = []

    def fail(check, where, residual):
        issues.append(ValidationIssue(check, where, float(residual)))

    w0 = m.omega(0.0)
    if abs(w0) > rel_tol:
        fail("omega(0)=0", (0.0,), w0)

    w = m.omega(grid)
    scale = 1.0 + float(np.max(w)) if w.size else 1.0
    tol = rel_tol * scale

    for i in range(len(grid) - 1):
        if w[i + 1] < w[i] - tol:
            fail("monotone", (grid[i], grid[i + 1]), w[i] - w[i + 1])

    pos = grid > 0
    gp, wp = grid[pos], w[pos]
    # each interior point must sit on or above the chord of its neighbours
    pts_t = np.concatenate([[0.0], gp])
    pts_w = np.concatenate([[0.0], wp])
    for i in range(len(pts_t) - 2):
        t0, t1, t2 = pts_t[i], pts_t[i + 1], pts_t[i + 2]
        w0, w1, w2 = pts_w[i], pts_w[i + 1], pts_w[i + 2]
        chord = w0 + (w2 - w0) * (t1 - t0) / (t2 - t0)
        if w1 < chord - tol:
            fail("concave", (t0, t1, t2), chord - w1)

    # omega(lambda t) <= lambda omega(t): all ordered pairs t_i <= t_j
    for i in range(len(gp)):
        for j in range(i + 1, len(gp)):
            lhs = wp[j] * gp[i]
            rhs = gp[j] * wp[i]
            if lhs > rhs + tol * gp[j]:
                fail("subhomogeneous", (gp[i], gp[j]), (lhs - rhs) / gp[j])

    phi = m.phi(grid)
    w_half = m.omega(grid / 2.0)
    for i, t in enumerate(grid):
        lo, hi = 0.5 * t * w[i], t * w_half[i]
        if phi[i] < lo - tol * (1 + t):
            fail("phi_lower", (t,), lo - phi[i])
        if phi[i] > hi + tol * (1 + t):
            fail("phi_upper", (t,), phi[i] - hi)

    if m.coercive:
        star = m.phi_star(grid)
        inv = m.omega_inv(grid)
        inv_half = m.omega_inv(grid / 2.0)
        star_scale = 1.0 + float(np.max(np.abs(star)))
        for i, t in enumerate(grid):
            lo, hi = t * inv_half[i], 0.5 * t * inv[i]
            if star[i] < lo - rel_tol * star_scale:
                fail("phi_star_lower", (t,), lo - star[i])
            if star[i] > hi + rel_tol * star_scale:
                fail("phi_star_upper", (t,), star[i] - hi)
        eq = phi + m.phi_star(w) - grid * w
        for i, t in enumerate(grid):
            if abs(eq[i]) > 1e-8 * (1.0 + abs(grid[i] * w[i])):
                fail("conjugacy_equality", (t,), eq[i])

    return ValidationReport(issues)


# ---------------------------------------------------------------------------
# (de)serialization


def modulus_from_json(obj) -> Modulus:
    """Build a modulus from its JSON form.

    Accepted shapes: {"type": "holder", "alpha": a}, {"type": "linear"},
    {"type": "table", "knots": [[t, w], ...]}; an optional "scale" key wraps
    the result in a positive scaling.
    """
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError("modulus JSON must be an object with a 'type' key")
    kind = obj["type"]
    if kind == "holder":
        m = HolderModulus(obj["alpha"])
    elif kind == "linear":
        m = LinearModulus()
    elif kind == "table":
        m = TableModulus(obj["knots"])
    else:
        raise ValueError(f"unknown modulus type {kind!r}")
    if "scale" in obj:
        m = ScaledModulus(m, obj["scale"])
    return m


def modulus_to_json(m: Modulus):
    if isinstance(m, ScaledModulus):
        inner = modulus_to_json(m.base)
        inner["scale"] = m.factor * inner.get("scale", 1.0)
        return inner
    if isinstance(m, HolderModulus):
        return {"type": "holder", "alpha": m.alpha}
    if isinstance(m, LinearModulus):
        return {"type": "linear"}
    if isinstance(m, TableModulus):
        return {"type": "table", "knots": m.knots.tolist()}
    raise TypeError(f"cannot serialize modulus {m!r}")


def parse_modulus_spec(spec: str) -> Modulus:
    """Parse a CLI-style modulus spec: 'holder:0.5', 'linear' or 'table:FILE'."""
    if spec == "linear":
        return LinearModulus()
    if spec.startswith("holder:"):
        return HolderModulus(float(spec.split(":", 1)[1]))
    if spec.startswith("table:"):
        path = spec.split(":", 1)[1]
        with open(path) as fh:
            return modulus_from_json(json.load(fh))
    raise ValueError(f"unrecognized modulus spec {spec!r}")
