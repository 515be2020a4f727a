"""Tail sums over uniformly discrete sets and the closed-form decay bound.

For an r-uniformly discrete set D and s > d/2, the tail sum

    S(x, R) = sum over gamma in D with |x - gamma| >= R of (1 + |x - gamma|^2)^(-s)

is bounded by C * (1 + R)^(d - 2s) uniformly in x, where C depends only on
(d, s, eps, r, R) for any 0 < eps < min(1, r, R).  This module computes both
sides exactly on finite sets and fits the decay exponent empirically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import pi
from pathlib import Path

import numpy as np

from .discrete_sets import UniformlyDiscreteSet

# Geometry of the unit ball/sphere in R^d.
UNIT_BALL_VOLUME = {1: 2.0, 2: pi}
UNIT_SPHERE_AREA = {1: 2.0, 2: 2.0 * pi}

_CHUNK = 1 << 20  # points per block in tail sums, bounds peak memory


def default_epsilon(r: float, R: float) -> float:
    """Midpoint choice eps = 0.5 * min(1, r, R) inside the allowed range."""
    return 0.5 * min(1.0, r, R)


def _check_hypotheses(d: int, s: float, eps: float, r: float, R: float) -> None:
    if d not in (1, 2):
        raise ValueError("d must be 1 or 2")
    if not s > d / 2.0:
        raise ValueError(f"need s > d/2 = {d/2}, got s = {s}")
    if not r > 0:
        raise ValueError("r must be positive")
    if not R > 0:
        raise ValueError("R must be positive")
    if not 0 < eps < min(1.0, r, R):
        raise ValueError(f"eps must lie in (0, min(1, r, R)) = (0, {min(1.0, r, R)})")


def lemma_constant(d: int, s: float, eps: float, r: float, R: float) -> float:
    """Constant C(d, s, eps, r, R) in the tail bound S <= C (1+R)^(d-2s).

    C = 2^s (1-eps)^(-2s) / (chat eps^d (2s-d)) * (1 - eps/(1+R))^(d-2s)

    with chat = (unit ball volume)/(unit sphere area) = 1/d.  The (2s - d)
    in the denominator is the integrated tail exponent and is positive on
    the admissible range s > d/2.
    """
    _check_hypotheses(d, s, eps, r, R)
    chat = UNIT_BALL_VOLUME[d] / UNIT_SPHERE_AREA[d]
    return (
        2.0 ** s
        * (1.0 - eps) ** (-2.0 * s)
        / (chat * eps ** d * (2.0 * s - d))
        * (1.0 - eps / (1.0 + R)) ** (d - 2.0 * s)
    )


def tail_sum(ds: UniformlyDiscreteSet, x, R: float, s: float) -> float:
    """Exact sum of (1 + |x-gamma|^2)^(-s) over centers with |x-gamma| >= R."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (ds.d,):
        raise ValueError(f"x must have {ds.d} coordinates")
    if R < 0:
        raise ValueError("R must be nonnegative")
    total = 0.0
    pts = ds.points
    for lo in range(0, ds.n, _CHUNK):
        block = pts[lo:lo + _CHUNK]
        dist2 = np.sum((block - x) ** 2, axis=1)
        mask = dist2 >= R * R
        total += float(np.sum((1.0 + dist2[mask]) ** (-s)))
    return total


def truncation_residual_estimate(ds: UniformlyDiscreteSet, x, s: float) -> float:
    """Integral-comparison estimate of what an infinite extension of D could
    add beyond the finite set's extent.

    Uses sum ~ surface_area * integral rho^(d-1) <rho>^(-2s) drho from rho0,
    with rho0 the covering radius of D around x; the asymptotic closed form
    rho0^(d-2s) * area / (2s - d) is accurate for rho0 >> 1.
    """
    d = ds.d
    if not s > d / 2.0:
        raise ValueError("need s > d/2")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rho0 = float(np.max(np.max(np.abs(ds.points - x), axis=0)))
    if rho0 < 1.0:
        rho0 = 1.0
    return UNIT_SPHERE_AREA[d] * rho0 ** (d - 2.0 * s) / (2.0 * s - d)


@dataclass(frozen=True)
class LemmaCheck:
    """One evaluation of the tail bound at a sample point."""

    d: int
    s: float
    R: float
    eps: float
    x: tuple
    tail: float          # S(x, R), exact on the finite set
    bound: float         # C (1+R)^(d-2s)
    residual_estimate: float
    hypothesis_ok: bool = True
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.hypothesis_ok and self.tail <= self.bound

    @property
    def slack(self) -> float:
        return self.bound - self.tail


def verify_lemma(
    ds: UniformlyDiscreteSet, x, R: float, s: float, eps: float | None = None
) -> LemmaCheck:
    """Evaluate tail sum and bound at one point; raises on violated hypotheses."""
    if eps is None:
        eps = default_epsilon(ds.radius, R)
    _check_hypotheses(ds.d, s, eps, ds.radius, R)
    S = tail_sum(ds, x, R, s)
    B = lemma_constant(ds.d, s, eps, ds.radius, R) * (1.0 + R) ** (ds.d - 2.0 * s)
    resid = truncation_residual_estimate(ds, x, s)
    xt = tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())
    return LemmaCheck(d=ds.d, s=s, R=R, eps=eps, x=xt, tail=S, bound=B,
                      residual_estimate=resid)


def lemma_check(
    ds: UniformlyDiscreteSet, x, R: float, s: float, eps: float | None = None
) -> LemmaCheck:
    """Like verify_lemma, but a violated hypothesis yields a flagged row.

    Sweep drivers record such rows (with the violation in ``note``) instead
    of aborting the whole sweep.
    """
    if eps is None and R > 0:
        eps = default_epsilon(ds.radius, R)
    try:
        return verify_lemma(ds, x, R, s, eps)
    except ValueError as err:
        xt = tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())
        return LemmaCheck(d=ds.d, s=s, R=R, eps=float(eps) if eps else 0.0,
                          x=xt, tail=float("nan"), bound=float("nan"),
                          residual_estimate=float("nan"),
                          hypothesis_ok=False,
                          note=f"hypothesis violated: {err}")


@dataclass(frozen=True)
class TailSumReport:
    """Collection of lemma checks with summary statistics."""

    rows: tuple

    @property
    def pass_rate(self) -> float:
        valid = [r for r in self.rows if r.hypothesis_ok]
        if not valid:
            return float("nan")
        return sum(1 for r in valid if r.passed) / len(valid)

    @property
    def worst_slack(self) -> float:
        valid = [r for r in self.rows if r.hypothesis_ok]
        if not valid:
            return float("nan")
        return min(r.slack for r in valid)

    def write_csv(self, path) -> None:
        path = Path(path)
        d = self.rows[0].d if self.rows else 0
        xcols = [f"x{i+1}" for i in range(d)]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["d", "s", "R", "eps", *xcols, "tail", "bound",
                             "residual_estimate", "hypothesis_ok", "pass", "note"])
            for row in self.rows:
                writer.writerow([
                    row.d, f"{row.s:.17g}", f"{row.R:.17g}", f"{row.eps:.17g}",
                    *[f"{v:.17g}" for v in row.x],
                    f"{row.tail:.17g}", f"{row.bound:.17g}",
                    f"{row.residual_estimate:.17g}",
                    int(row.hypothesis_ok), int(row.passed), row.note,
                ])


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares fit of log S against log(1 + R)."""

    slope: float
    intercept: float
    target: float        # d - 2s
    tolerance: float
    R_values: tuple
    tails: tuple

    @property
    def passed(self) -> bool:
        # One-sided: the decay must be at least as fast as the bound predicts.
        return self.slope <= self.target + self.tolerance


def tail_exponent_fit(
    ds: UniformlyDiscreteSet,
    x,
    R_values,
    s: float,
    tolerance: float = 0.15,
) -> ExponentFit:
    """Fit the empirical tail decay exponent over a sweep of cutoffs.

    Requires at least four strictly increasing cutoffs and a set large
    enough that the estimated truncation error at the largest cutoff stays
    below 1% of the computed tail.
    """
    R_values = tuple(float(R) for R in R_values)
    if len(R_values) < 4:
        raise ValueError("need at least four cutoffs for a stable fit")
    if any(b <= a for a, b in zip(R_values, R_values[1:])):
        raise ValueError("cutoffs must be strictly increasing")
    if not s > ds.d / 2.0:
        raise ValueError("need s > d/2")
    tails = tuple(tail_sum(ds, x, R, s) for R in R_values)
    if min(tails) <= 0.0:
        raise ValueError("tail sum vanished; cutoffs exceed the set extent")
    resid = truncation_residual_estimate(ds, x, s)
    if resid > 0.01 * tails[-1]:
        raise ValueError(
            f"set too small: truncation estimate {resid:.3e} exceeds 1% of "
            f"the tail {tails[-1]:.3e} at R = {R_values[-1]}"
        )
    u = np.log1p(R_values)
    y = np.log(tails)
    A = np.vstack([u, np.ones_like(u)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    return ExponentFit(slope=float(slope), intercept=float(intercept),
                       target=ds.d - 2.0 * s, tolerance=tolerance,
                       R_values=R_values, tails=tails)
