"""
Threshold distributions for randomized THR(tau) policies.

A ThresholdCdf is an atom at tau = 0 followed by contiguous pieces
[lower, upper) on which the CDF has a closed form; the last piece is closed
at 1. Every piece evaluator accepts floats and numpy arrays.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from exceptions import ArgumentError, SolverError

logger = logging.getLogger(__name__)

QSTAR_BRACKET = (0.25, 0.45)
QUANTILE_XTOL = 1e-12
VECTOR_BISECTION_STEPS = 60
CDF_TOLERANCE = 1e-9


def _constant(value):
    return lambda x: value + 0.0 * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class CdfPiece:
    lower: float
    upper: float
    evaluate: Callable
    inverse: Optional[Callable] = None


@dataclass(frozen=True)
class ThresholdCdf:
    name: str
    atom_at_zero: float
    pieces: tuple
    support_max: float

    def __post_init__(self):
        if not self.pieces or self.pieces[0].lower != 0 or self.pieces[-1].upper != 1:
            raise ArgumentError(f"{self.name}: pieces must cover [0, 1]")
        for left, right in zip(self.pieces, self.pieces[1:]):
            if left.upper != right.lower:
                raise ArgumentError(f"{self.name}: pieces are not contiguous at {left.upper}")
        if abs(self(self.support_max) - 1.0) > CDF_TOLERANCE:
            raise ArgumentError(f"{self.name}: F(support_max) must be 1")

    def __call__(self, x):
        x = float(x)
        if x < 0:
            return 0.0
        for piece in self.pieces:
            if piece.lower <= x < piece.upper:
                return float(piece.evaluate(x))
        return 1.0 if x > 1 else float(self.pieces[-1].evaluate(x))

    def evaluate_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        out = np.where(xs > 1, 1.0, 0.0)
        last = len(self.pieces) - 1
        for i, piece in enumerate(self.pieces):
            upper_ok = xs <= piece.upper if i == last else xs < piece.upper
            mask = (xs >= piece.lower) & upper_ok
            if mask.any():
                out[mask] = piece.evaluate(xs[mask])
        return out

    def probability(self, a, b):
        """Mass of the interval (a, b]."""
        return self(b) - self(a)

    def quantile(self, p):
        """
        Left-continuous generalized inverse inf{x : F(x) >= p}.

        Args:
            p (float): Probability level in [0, 1].

        Returns:
            float: The quantile.
        """
        p = float(p)
        if not 0 <= p <= 1:
            raise ArgumentError(f"probability must lie in [0, 1], got {p!r}")
        if p <= self.atom_at_zero:
            return 0.0
        for piece in self.pieces:
            if float(piece.evaluate(piece.upper)) < p:
                continue
            if float(piece.evaluate(piece.lower)) >= p:
                return float(piece.lower)
            if piece.inverse is not None:
                return float(min(max(piece.inverse(p), piece.lower), piece.upper))
            return optimize.bisect(
                lambda x: float(piece.evaluate(x)) - p, piece.lower, piece.upper, xtol=QUANTILE_XTOL
            )
        return float(self.support_max)

    def quantile_many(self, ps):
        ps = np.asarray(ps, dtype=float)
        if ((ps < 0) | (ps > 1)).any():
            raise ArgumentError("probabilities must lie in [0, 1]")
        out = np.zeros_like(ps)
        pending = ps > self.atom_at_zero
        for piece in self.pieces:
            if not pending.any():
                break
            hit = pending & (ps <= float(piece.evaluate(piece.upper)))
            at_lower = hit & (ps <= float(piece.evaluate(piece.lower)))
            out[at_lower] = piece.lower
            inside = hit & ~at_lower
            if inside.any():
                if piece.inverse is not None:
                    out[inside] = np.clip(piece.inverse(ps[inside]), piece.lower, piece.upper)
                else:
                    out[inside] = _bisect_many(piece, ps[inside])
            pending &= ~hit
        out[pending] = self.support_max
        return out

    def sample(self, rng):
        return self.quantile(rng.random())

    def sample_many(self, rng, n):
        return self.quantile_many(rng.random(n))


def _bisect_many(piece, targets):
    lo = np.full_like(targets, piece.lower)
    hi = np.full_like(targets, piece.upper)
    for _ in range(VECTOR_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        above = piece.evaluate(mid) >= targets
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return hi


@dataclass(frozen=True)
class SolvedConstants:
    q_star: float
    c_star: float
    f2_at_qstar: float
    root_residual: float = 0.0

    def __post_init__(self):
        if not 0 < self.q_star < 0.5 or not 0.4 < self.c_star < 0.5:
            raise SolverError(f"constants out of range: q*={self.q_star}, c*={self.c_star}")

    def to_dict(self):
        return {
            "q_star": float(f"{self.q_star:.15g}"),
            "c_star": float(f"{self.c_star:.15g}"),
            "f2_at_qstar": float(f"{self.f2_at_qstar:.15g}"),
            "root_residual": float(f"{self.root_residual:.3g}"),
        }


def h_function(c, x):
    """H(c, x) = (1-2c)/x - (1-2c) ln(1-x)/(1-2x) - (1-c)."""
    return (1 - 2 * c) / x - (1 - 2 * c) * np.log1p(-x) / (1 - 2 * x) - (1 - c)


def root_function(q):
    """2q^3 - 7q^2 + 5q - 1 - 2(1-q) q^2 ln(1-q); its root in (0.25, 0.45) is q*."""
    return 2 * q**3 - 7 * q**2 + 5 * q - 1 - 2 * (1 - q) * q**2 * math.log1p(-q)


def solve_constants(tol=1e-12):
    """
    Solve for q* by bisection, then c* in closed form (H is affine in c).

    Args:
        tol (float): Bisection tolerance on q.

    Returns:
        SolvedConstants: q*, c* and F2(q*).
    """
    if not tol > 0:
        raise ArgumentError(f"tol must be positive, got {tol!r}")
    lo, hi = QSTAR_BRACKET
    try:
        q = optimize.bisect(root_function, lo, hi, xtol=tol, maxiter=500)
    except (ValueError, RuntimeError) as e:
        raise SolverError(f"q* root search failed on {QSTAR_BRACKET}: {e}")
    a = 1 / q - math.log1p(-q) / (1 - 2 * q)
    c = (a - 1) / (2 * a - 1)
    f2_at_q = (1 - c) - (1 - 2 * c) * math.log1p(-q) / (1 - 2 * q)
    residual = abs(root_function(q))
    logger.debug("solved q*=%.15g c*=%.15g |g(q*)|=%.3g", q, c, residual)
    return SolvedConstants(q, c, f2_at_q, residual)


def cdf_f1():
    """CDF with atom 4/7 at zero, (4/7 - x)/(1 - 2x) up to 3/7, then 1."""
    boundary = 3 / 7
    left = CdfPiece(
        0.0,
        boundary,
        lambda x: (4 / 7 - x) / (1 - 2 * x),
        lambda p: (4 / 7 - p) / (1 - 2 * p),
    )
    right = CdfPiece(boundary, 1.0, _constant(1.0), None)
    return ThresholdCdf("f1", 4 / 7, (left, right), boundary)


def cdf_f2(consts=None):
    """CDF with atom 1 - c* at zero and positive density on all of (0, 1]."""
    if consts is None:
        consts = solve_constants()
    q, c = consts.q_star, consts.c_star
    left = CdfPiece(0.0, q, lambda x: (1 - c) - (1 - 2 * c) * np.log1p(-x) / (1 - 2 * x), None)
    right = CdfPiece(
        q,
        1.0,
        lambda x: 2 * (1 - c) - (1 - 2 * c) / x,
        lambda p: (1 - 2 * c) / (2 * (1 - c) - p),
    )
    return ThresholdCdf("f2", 1 - c, (left, right), 1.0)


def cdf_point_mass(tau):
    """Deterministic threshold tau."""
    try:
        tau = float(tau)
    except (TypeError, ValueError):
        raise ArgumentError(f"tau must be a number, got {tau!r}")
    if not 0 <= tau <= 1:
        raise ArgumentError(f"tau must lie in [0, 1], got {tau!r}")
    if tau == 0:
        return ThresholdCdf("greedy", 1.0, (CdfPiece(0.0, 1.0, _constant(1.0)),), 0.0)
    pieces = (CdfPiece(0.0, tau, _constant(0.0)), CdfPiece(tau, 1.0, _constant(1.0)))
    if tau == 1:
        pieces = (
            CdfPiece(
                0.0,
                1.0,
                lambda x: np.where(np.asarray(x) >= 1, 1.0, 0.0),
                lambda p: np.ones_like(np.asarray(p, dtype=float)),
            ),
        )
    return ThresholdCdf(f"fixed:{tau:g}", 0.0, pieces, tau)


def cdf_two_point(tau, mass_at_zero):
    """tau = 0 with probability mass_at_zero, otherwise tau."""
    if not 0 < tau < 1 or not 0 <= mass_at_zero <= 1:
        raise ArgumentError(f"invalid two-point law: tau={tau!r}, mass={mass_at_zero!r}")
    pieces = (CdfPiece(0.0, tau, _constant(float(mass_at_zero))), CdfPiece(tau, 1.0, _constant(1.0)))
    return ThresholdCdf(f"two_point:{tau:g}", float(mass_at_zero), pieces, tau)


def cdf_coin():
    """Greedy with probability 2/3, THR(1/2) with probability 1/3."""
    return cdf_two_point(0.5, 2 / 3)


def cdf_by_name(name, consts=None):
    """
    Resolve a distribution name: f1, f2, greedy, coin or fixed:<tau>.

    Args:
        name (str): Distribution name.
        consts (SolvedConstants): Used by f2; solved on demand.

    Returns:
        ThresholdCdf: The distribution.
    """
    if name == "f1":
        return cdf_f1()
    if name == "f2":
        return cdf_f2(consts)
    if name == "greedy":
        return cdf_point_mass(0)
    if name == "coin":
        return cdf_coin()
    if name.startswith("fixed:"):
        try:
            return cdf_point_mass(Fraction(name.split(":", 1)[1]))
        except ValueError:
            raise ArgumentError(f"cannot parse threshold in {name!r}")
    raise ArgumentError(f"unknown threshold distribution {name!r}")

