"""Uniform discretization of a centered box in R^d with the L2 inner product.

Functions live on a regular grid of N = floor(2L/h) points per axis placed
symmetrically about the origin, and integrals are midpoint sums with uniform
weight h^d over the cells centered at the grid points.  Everything downstream
(localization moments, Gram matrices, operator norms) reduces to these sums,
so this module is the single place where quadrature conventions are fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

VALID_BCS = ("dirichlet", "periodic")

# Default fraction of the half-width treated as the boundary frame when
# checking how much mass sits dangerously close to the box edge.
DEFAULT_MARGIN_FRACTION = 0.125
DEFAULT_ESCAPE_TOL = 1e-6


class GridMismatchError(ValueError):
    """Raised when two grid functions do not share the same grid."""


class EscapedMassError(RuntimeError):
    """Raised when too much L2 mass sits near the box boundary.

    The box is a stand-in for all of R^d; quantities computed from a
    function whose mass reaches the boundary frame are silently
    under-counted, so we refuse instead.
    """


@dataclass(frozen=True)
class Grid:
    """Regular grid on the box [-L, L]^d.

    Parameters
    ----------
    d : int
        Spatial dimension, 1 or 2.
    L : float
        Half-width of the box.
    h : float
        Grid spacing.  The derived point count per axis is N = floor(2L/h).
    bc : str
        Boundary condition flag, "dirichlet" or "periodic".  It only
        affects difference operators built on the grid; quadrature and
        distances always use plain coordinates.
    """

    d: int
    L: float
    h: float
    bc: str = "dirichlet"

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"only d = 1 or 2 is supported, got {self.d}")
        if not (self.L > 0 and self.h > 0):
            raise ValueError("L and h must be positive")
        if self.n_per_axis < 3:
            raise ValueError("grid needs at least 3 points per axis; shrink h")
        if self.bc not in VALID_BCS:
            raise ValueError(f"bc must be one of {VALID_BCS}, got {self.bc!r}")

    @property
    def n_per_axis(self) -> int:
        return int(np.floor(2.0 * self.L / self.h))

    @property
    def n_points(self) -> int:
        return self.n_per_axis ** self.d

    @property
    def weight(self) -> float:
        """Quadrature weight of a single grid cell."""
        return self.h ** self.d

    @property
    def axis(self) -> NDArray[np.float64]:
        """Coordinates along one axis, symmetric about 0."""
        n = self.n_per_axis
        out = (np.arange(n) - (n - 1) / 2.0) * self.h
        out.flags.writeable = False
        return out

    @property
    def points(self) -> NDArray[np.float64]:
        """All grid points as an (n_points, d) array, C-ordered per axis."""
        ax = self.axis
        if self.d == 1:
            pts = ax[:, None]
        else:
            X, Y = np.meshgrid(ax, ax, indexing="ij")
            pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        pts.flags.writeable = False
        return pts

    def distances_to(self, center) -> NDArray[np.float64]:
        """Euclidean distance of every grid point to ``center``."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if c.shape != (self.d,):
            raise ValueError(f"center must have {self.d} coordinates")
        diff = self.points - c
        return np.sqrt(np.sum(diff * diff, axis=1))

    def compatible(self, other: "Grid") -> bool:
        return (
            self.d == other.d
            and self.L == other.L
            and self.h == other.h
            and self.bc == other.bc
        )

    # --- constructors for functions on this grid -------------------------

    def function(self, values) -> "GridFunction":
        return GridFunction(self, values)

    def from_callable(self, fn) -> "GridFunction":
        """Sample ``fn`` at the grid points.

        ``fn`` receives an (n_points, d) array and must return n_points
        values (vectorized evaluation).
        """
        vals = np.asarray(fn(self.points), dtype=complex).reshape(self.n_points)
        return GridFunction(self, vals)

    def ones(self) -> "GridFunction":
        return GridFunction(self, np.ones(self.n_points))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n_points))

    def ball_indicator(self, center, radius: float, normalized: bool = False) -> "GridFunction":
        """Indicator of the open ball B_radius(center), optionally L2-normalized."""
        mask = self.distances_to(center) < radius
        if not mask.any():
            raise ValueError("ball contains no grid points")
        vals = mask.astype(complex)
        f = GridFunction(self, vals)
        return f.normalized() if normalized else f

    def delta(self, center) -> "GridFunction":
        """Unit-norm function supported on the grid point nearest to ``center``."""
        idx = int(np.argmin(self.distances_to(center)))
        vals = np.zeros(self.n_points, dtype=complex)
        vals[idx] = 1.0 / np.sqrt(self.weight)
        return GridFunction(self, vals)


class GridFunction:
    """Complex-valued function sampled on a :class:`Grid`.

    Values are stored flat (C order over axes) and are immutable; all
    arithmetic returns new instances.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        vals = np.asarray(values, dtype=complex).reshape(-1).copy()
        if vals.size != grid.n_points:
            raise ValueError(
                f"expected {grid.n_points} values for this grid, got {vals.size}"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    # --- arithmetic -------------------------------------------------------

    def _check_same_grid(self, other: "GridFunction"):
        if self.grid is not other.grid and not self.grid.compatible(other.grid):
            raise GridMismatchError("grid functions live on different grids")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_same_grid(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check_same_grid(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "GridFunction":
        return GridFunction(self.grid, self.values * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def pointwise(self, other: "GridFunction") -> "GridFunction":
        """Pointwise product with another function on the same grid."""
        self._check_same_grid(other)
        return GridFunction(self.grid, self.values * other.values)

    # --- norms and mass ----------------------------------------------------

    def norm(self) -> float:
        return float(np.sqrt(self.norm_squared()))

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.weight)

    def normalized(self) -> "GridFunction":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero function")
        return GridFunction(self.grid, self.values / n)

    def frame_mass(self, margin: float | None = None) -> float:
        """L2 mass on the boundary frame [-L, L]^d minus [-(L-margin), L-margin]^d."""
        g = self.grid
        if margin is None:
            margin = DEFAULT_MARGIN_FRACTION * g.L
        if not 0 < margin < g.L:
            raise ValueError("margin must lie strictly between 0 and L")
        inner = g.L - margin
        outside = np.any(np.abs(g.points) > inner, axis=1)
        return float(np.sum(np.abs(self.values[outside]) ** 2) * g.weight)


def inner_product(f: GridFunction, g: GridFunction) -> complex:
    """Midpoint-rule L2 inner product, conjugate-linear in the first slot."""
    f._check_same_grid(g)
    return complex(np.vdot(f.values, g.values) * f.grid.weight)


def restrict_to_ball(f: GridFunction, center, radius: float) -> GridFunction:
    """Multiply ``f`` by the indicator of the open ball B_radius(center).

    Membership is strict (distance < radius), so restriction with radius 0
    gives the zero function and nested restrictions compose by the minimum
    of the radii (for a common center).
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    mask = f.grid.distances_to(center) < radius
    return GridFunction(f.grid, np.where(mask, f.values, 0.0))


class MultiplicationOperator:
    """Operator of pointwise multiplication by a fixed grid function."""

    __slots__ = ("multiplier",)

    def __init__(self, multiplier: GridFunction):
        object.__setattr__(self, "multiplier", multiplier)

    def __setattr__(self, name, value):
        raise AttributeError("MultiplicationOperator is immutable")

    @property
    def grid(self) -> Grid:
        return self.multiplier.grid

    def apply(self, f: GridFunction) -> GridFunction:
        return self.multiplier.pointwise(f)

    def adjoint(self) -> "MultiplicationOperator":
        return MultiplicationOperator(
            GridFunction(self.multiplier.grid, np.conj(self.multiplier.values))
        )

    def compose(self, other: "MultiplicationOperator") -> "MultiplicationOperator":
        # Multiplication operators commute; the composition is again one.
        return MultiplicationOperator(self.multiplier.pointwise(other.multiplier))


def multiplication_operator(f: GridFunction) -> MultiplicationOperator:
    return MultiplicationOperator(f)


def ensure_mass_contained(
    f: GridFunction,
    margin: float | None = None,
    tol: float = DEFAULT_ESCAPE_TOL,
    weight: float = 1.0,
) -> float:
    """Escaped-mass guard: refuse when boundary-frame mass is non-negligible.

    ``weight`` lets callers scale the frame mass by the worst-case value of
    an integrand weight on the frame (localization moments do this) before
    comparing against ``tol``.  Returns the weighted frame mass.
    """
    escaped = f.frame_mass(margin) * weight
    if escaped > tol:
        raise EscapedMassError(
            f"weighted boundary-frame mass {escaped:.3e} exceeds tolerance {tol:.1e}; "
            "enlarge the box or loosen the truncation tolerance explicitly"
        )
    return escaped


# --- serialization ---------------------------------------------------------

_HEADER_KEYS = ("d", "L", "h", "bc")


def save_grid_function(f: GridFunction, basepath) -> None:
    """Write ``f`` as <basepath>.json (grid header) plus <basepath>.csv (values).

    The CSV holds one row per grid point: flat index, real part, imaginary
    part, both printed with enough digits for an exact float round trip.
    """
    base = Path(basepath)
    header = {k: getattr(f.grid, k) for k in _HEADER_KEYS}
    base.with_suffix(".json").write_text(json.dumps(header, indent=2) + "\n")
    lines = ["index,re,im"]
    for i, v in enumerate(f.values):
        lines.append(f"{i},{v.real:.17g},{v.imag:.17g}")
    base.with_suffix(".csv").write_text("\n".join(lines) + "\n")


def load_grid_function(basepath) -> GridFunction:
    base = Path(basepath)
    header = json.loads(base.with_suffix(".json").read_text())
    grid = Grid(d=int(header["d"]), L=float(header["L"]), h=float(header["h"]),
                bc=str(header["bc"]))
    rows = base.with_suffix(".csv").read_text().strip().splitlines()[1:]
    vals = np.zeros(grid.n_points, dtype=complex)
    for row in rows:
        idx, re, im = row.split(",")
        vals[int(idx)] = float(re) + 1j * float(im)
    return GridFunction(grid, vals)
