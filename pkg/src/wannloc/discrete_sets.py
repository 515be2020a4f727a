"""Uniformly discrete point sets: localization centers and their geometry.

A set D in R^d is r-uniformly discrete when distinct points are at least
2r apart, i.e. the open balls B_r(gamma) are pairwise disjoint.  The
classes here carry finite center sets (lattices, perturbed lattices,
images of lattices under a bi-Lipschitz deformation) together with the
certified radius.
"""

from __future__ import annotations

import csv
from dataclasses import InitVar, dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .grid import Grid

# Row block size for pairwise-distance scans; bounds memory at O(block * n).
_BLOCK = 2048


@dataclass(frozen=True)
class UniformlyDiscreteSet:
    """Finite set of centers with a certified discreteness radius.

    ``points`` has shape (n, d).  ``radius`` is any r for which the open
    balls B_r around the points are pairwise disjoint; it need not be the
    largest such r (see :func:`max_discreteness_radius` for that).
    ``labels`` optionally records an integer index per point, e.g. the
    lattice point a deformed center came from.  Constructors that know the
    radius by construction (exact lattices) pass ``verify=False`` to skip
    the quadratic pairwise check.
    """

    points: NDArray[np.float64]
    radius: float
    labels: NDArray[np.int64] | None = None
    verify: InitVar[bool] = True

    def __post_init__(self, verify: bool):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] not in (1, 2):
            raise ValueError("points must have shape (n, d) with d in {1, 2}")
        if pts.shape[0] == 0:
            raise ValueError("center set must be nonempty")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.atleast_2d(np.asarray(self.labels, dtype=np.int64)).copy()
            if lab.shape != pts.shape:
                raise ValueError("labels must match points in shape")
            lab.flags.writeable = False
            object.__setattr__(self, "labels", lab)
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if verify and not verify_uniform_discreteness(pts, self.radius):
            raise ValueError(
                f"points are not {self.radius}-uniformly discrete "
                "(some pair is closer than 2r)"
            )

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __iter__(self):
        return iter(self.points)

    def __len__(self) -> int:
        return self.n


def pairwise_min_distance(points) -> float:
    """Smallest distance between distinct points (inf for a single point)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    if n < 2:
        return float("inf")
    best = np.inf
    # O(n^2) work, blocked so memory stays O(_BLOCK * n).
    for lo in range(0, n, _BLOCK):
        block = pts[lo:lo + _BLOCK]
        d2 = np.sum((block[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        rows = np.arange(block.shape[0])
        d2[rows, lo + rows] = np.inf
        best = min(best, float(d2.min()))
    return float(np.sqrt(best))


def verify_uniform_discreteness(points, r: float) -> bool:
    """Check that distinct points are pairwise at least 2r apart.

    The comparison is exact (>=), no tolerance: the integer lattice with
    r = 1/2 must verify, and any strictly larger r must fail.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    return pairwise_min_distance(points) >= 2.0 * r

def max_discreteness_radius(points) -> float:
    """Largest r for which the set is r-uniformly discrete: min distance / 2."""
    dmin = pairwise_min_distance(points)
    if not np.isfinite(dmin):
        raise ValueError("need at least two points to bound the radius")
    return 0.5 * dmin


def lattice(d: int, extent: int, spacing: float = 1.0,
            with_labels: bool = True) -> UniformlyDiscreteSet:
    """Integer lattice Z^d (scaled by ``spacing``) inside [-extent, extent]^d.

    The radius spacing/2 holds by construction, so no pairwise check runs;
    ``with_labels=False`` drops the label array for very large test sets.
    """
    axis = np.arange(-extent, extent + 1)
    if d == 1:
        labels = axis[:, None]
    elif d == 2:
        A, B = np.meshgrid(axis, axis, indexing="ij")
        labels = np.stack([A.ravel(), B.ravel()], axis=1)
    else:
        raise ValueError("only d = 1 or 2")
    pts = labels.astype(float) * spacing
    return UniformlyDiscreteSet(pts, radius=spacing / 2.0,
                                labels=labels if with_labels else None,
                                verify=False)


def perturbed_lattice(
    d: int, extent: int, max_shift: float, rng: np.random.Generator
) -> UniformlyDiscreteSet:
    """Integer lattice with i.i.d. uniform shifts of norm at most ``max_shift``.

    Shifts bounded by u < 1/2 leave the set (1/2 - u)-uniformly discrete.
    """
    if not 0 <= max_shift < 0.5:
        raise ValueError("max_shift must lie in [0, 1/2)")
    base = lattice(d, extent)
    shifts = rng.uniform(-1.0, 1.0, size=base.points.shape)
    norms = np.linalg.norm(shifts, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = rng.uniform(0.0, max_shift, size=(base.n, 1))
    pts = base.points + shifts / norms * radii
    return UniformlyDiscreteSet(pts, radius=0.5 - max_shift, labels=base.labels)


def deformed_lattice(
    inverse_map, d: int, extent: int, forward_lipschitz: float | None = None
) -> UniformlyDiscreteSet:
    """Image of the integer lattice under the inverse of a bi-Lipschitz map.

    ``inverse_map`` receives an (n, d) array of lattice points and returns
    their images.  The certified radius is measured from the images
    themselves (half the minimum pairwise distance).  When
    ``forward_lipschitz`` is given (a bound K with |f(x) - f(y)| <= K|x - y|
    for the forward map), image points of distinct lattice points must stay
    at least 1/K apart; the measured radius is sanity-checked against the
    implied nominal radius 1/(2K).
    """
    base = lattice(d, extent)
    pts = np.asarray(inverse_map(base.points), dtype=float)
    if pts.shape != base.points.shape:
        raise ValueError("inverse_map must preserve the shape of the point array")
    radius = max_discreteness_radius(pts)
    if forward_lipschitz is not None and forward_lipschitz > 0:
        nominal = 0.5 / forward_lipschitz
        if radius < nominal * (1.0 - 1e-9):
            raise ValueError(
                f"measured radius {radius:.6g} falls below the nominal "
                f"bi-Lipschitz bound {nominal:.6g}"
            )
    return UniformlyDiscreteSet(pts, radius=radius, labels=base.labels)


def restrict_to_box(ds: UniformlyDiscreteSet, half_width: float,
                    buffer: float = 0.0) -> UniformlyDiscreteSet:
    """Keep the centers inside [-(half_width - buffer), half_width - buffer]^d."""
    keep = np.all(np.abs(ds.points) <= half_width - buffer, axis=1)
    if not keep.any():
        raise ValueError("no centers survive the box restriction")
    labels = ds.labels[keep] if ds.labels is not None else None
    return UniformlyDiscreteSet(ds.points[keep], radius=ds.radius, labels=labels)


def fits_grid(ds: UniformlyDiscreteSet, grid: Grid) -> bool:
    """All centers inside the open box covered by the grid."""
    if ds.d != grid.d:
        return False
    return bool(np.all(np.abs(ds.points) < grid.L))


# --- serialization -----------------------------------------------------------

def save_discrete_set(ds: UniformlyDiscreteSet, path) -> None:
    """CSV with coordinate columns x1..xd, optional label columns n1..nd,
    and the radius recorded in a leading comment line."""
    path = Path(path)
    cols = [f"x{i+1}" for i in range(ds.d)]
    if ds.labels is not None:
        cols += [f"n{i+1}" for i in range(ds.d)]
    with path.open("w", newline="") as fh:
        fh.write(f"# radius={ds.radius:.17g}\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(ds.n):
            row = [f"{v:.17g}" for v in ds.points[i]]
            if ds.labels is not None:
                row += [str(v) for v in ds.labels[i]]
            writer.writerow(row)


def load_discrete_set(path) -> UniformlyDiscreteSet:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().strip()
        if not first.startswith("# radius="):
            raise ValueError("missing radius comment line")
        radius = float(first.split("=", 1)[1])
        reader = csv.reader(fh)
        header = next(reader)
        d = sum(1 for c in header if c.startswith("x"))
        has_labels = any(c.startswith("n") for c in header)
        pts, labs = [], []
        for row in reader:
            pts.append([float(v) for v in row[:d]])
            if has_labels:
                labs.append([int(v) for v in row[d:]])
    return UniformlyDiscreteSet(
        np.asarray(pts), radius=radius,
        labels=np.asarray(labs) if has_labels else None,
    )
