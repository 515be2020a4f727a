"""Rank-one-sum operators: intertwiners, truncations, and locality probes.

Operators of the form T = sum_gamma |a_gamma><b_gamma| are kept as the two
stacked coefficient families and are never materialized on the full grid
unless explicitly requested for cross-checking.  Norms reduce to
center-indexed Gram eigenproblems; finite propagation and local compactness
are checked by multiplication-operator probes, matching how these
properties are defined in the first place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .grid import Grid, GridFunction, GridMismatchError
from .localization import ORTHONORMALITY_TOL, WannierFamily

PROPAGATION_TOL = 1e-12
NORM_FLOOR = 1e-10
RANK_CUTOFF = 1e-10


def _sym_sqrt(S):
    w, U = np.linalg.eigh(S)
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ np.conj(U).T


def sandwiched_norm(S, M) -> float:
    """Operator norm of sum_ij |b_i> M_ij <b_j| given the Gram matrix S of b.

    Equals the spectral norm of S^(1/2) M S^(1/2); exact in the span of the
    b family, dimension = number of pairs.
    """
    root = _sym_sqrt(S)
    X = root @ M @ root
    if np.allclose(X, np.conj(X).T):
        return float(np.max(np.abs(np.linalg.eigvalsh(X)))) if X.size else 0.0
    return float(np.linalg.norm(X, 2))


class RankOneSumOperator:
    """Finite sum of rank-one operators |a_i><b_i| on a common grid.

    ``lefts`` and ``rights`` are (k, n_points) arrays holding the vectors
    a_i and b_i as rows.  ``centers`` optionally records the localization
    center of each pair, which truncation and targeted propagation probes
    need.  Instances are immutable.
    """

    __slots__ = ("grid", "lefts", "rights", "centers", "left_support_radius",
                 "truncation_radius")

    def __init__(self, grid: Grid, lefts, rights, centers=None,
                 left_support_radius: float | None = None,
                 truncation_radius: float | None = None):
        lefts = np.atleast_2d(np.asarray(lefts, dtype=complex))
        rights = np.atleast_2d(np.asarray(rights, dtype=complex))
        if lefts.shape != rights.shape or lefts.shape[1] != grid.n_points:
            raise ValueError("lefts and rights must both be (k, n_points)")
        if centers is not None:
            centers = np.atleast_2d(np.asarray(centers, dtype=float))
            if centers.shape != (lefts.shape[0], grid.d):
                raise ValueError("centers must be (k, d)")
            centers.flags.writeable = False
        for arr in (lefts, rights):
            arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "lefts", lefts)
        object.__setattr__(self, "rights", rights)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "left_support_radius", left_support_radius)
        object.__setattr__(self, "truncation_radius", truncation_radius)

    def __setattr__(self, name, value):
        raise AttributeError("RankOneSumOperator is immutable")

    @property
    def k(self) -> int:
        return self.lefts.shape[0]

    # --- algebra ---------------------------------------------------------

    def apply(self, phi: GridFunction) -> GridFunction:
        if phi.grid is not self.grid and not phi.grid.compatible(self.grid):
            raise GridMismatchError("operator and argument grids differ")
        coeff = self.grid.weight * (np.conj(self.rights) @ phi.values)
        return GridFunction(self.grid, self.lefts.T @ coeff)

    def adjoint(self) -> "RankOneSumOperator":
        return RankOneSumOperator(self.grid, self.rights, self.lefts,
                                  centers=self.centers)

    def compose(self, other: "RankOneSumOperator") -> "RankOneSumOperator":
        """(self o other) contracted through the cross Gram matrix.

        The result keeps one pair per pair of ``other``: the rank cannot
        grow under composition, and propagation radii add.
        """
        if not self.grid.compatible(other.grid):
            raise GridMismatchError("operators live on different grids")
        cross = self.grid.weight * (np.conj(self.rights) @ other.lefts.T)
        new_lefts = cross.T @ self.lefts
        return RankOneSumOperator(self.grid, new_lefts, other.rights,
                                  centers=other.centers)

    def __add__(self, other: "RankOneSumOperator") -> "RankOneSumOperator":
        if not self.grid.compatible(other.grid):
            raise GridMismatchError("operators live on different grids")
        return RankOneSumOperator(
            self.grid,
            np.vstack([self.lefts, other.lefts]),
            np.vstack([self.rights, other.rights]),
        )

    def __neg__(self) -> "RankOneSumOperator":
        return RankOneSumOperator(self.grid, -self.lefts, self.rights,
                                  centers=self.centers)

    def __sub__(self, other: "RankOneSumOperator") -> "RankOneSumOperator":
        return self + (-other)

    # --- norms -------------------------------------------------------------

    def norm(self) -> float:
        """Operator norm via the Gram reduction ||T||^2 = ||S_b^(1/2) G_a S_b^(1/2)||."""
        S_b = self.grid.weight * (np.conj(self.rights) @ self.rights.T)
        G_a = self.grid.weight * (np.conj(self.lefts) @ self.lefts.T)
        return float(np.sqrt(max(sandwiched_norm(S_b, G_a), 0.0)))

    def materialize(self, max_points: int = 8192):
        """Dense matrix of the operator; only for small cross-check instances."""
        n = self.grid.n_points
        if n > max_points:
            raise ValueError(f"refusing to materialize on {n} grid points")
        return self.lefts.T @ (self.grid.weight * np.conj(self.rights))


def power_iteration_norm(matrix, rng: np.random.Generator,
                         tol: float = 1e-12, max_iter: int = 20000) -> float:
    """Largest singular value by power iteration on A*A; independent of the
    Gram-based route, used as its oracle."""
    n = matrix.shape[1]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(max_iter):
        w = np.conj(matrix.T) @ (matrix @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        if abs(norm_w - prev) <= tol * max(norm_w, 1.0):
            prev = norm_w
            break
        prev = norm_w
    return float(np.sqrt(prev))


# --- intertwiners ------------------------------------------------------------

def projection_from_family(family: WannierFamily) -> RankOneSumOperator:
    """P = sum |psi_gamma><psi_gamma| for an orthonormal family."""
    if not family.is_orthonormal:
        raise ValueError(
            f"family orthonormality residual {family.orthonormality_residual:.3e} "
            f"exceeds {ORTHONORMALITY_TOL}"
        )
    return RankOneSumOperator(family.grid, family.values, family.values,
                              centers=family.centers.points,
                              left_support_radius=family.support_radius)


def build_intertwiner(left_family: WannierFamily,
                      right_family: WannierFamily) -> RankOneSumOperator:
    """V = sum |phi_gamma><psi_gamma| over a shared center set.

    Both families must be orthonormal within tolerance and indexed by the
    same centers in the same order; V then implements the partial isometry
    with V*V and VV* the two family projections.
    """
    if not left_family.grid.compatible(right_family.grid):
        raise GridMismatchError("families live on different grids")
    if left_family.n != right_family.n:
        raise ValueError("families must have the same number of members")
    if not np.allclose(left_family.centers.points, right_family.centers.points,
                       atol=1e-12):
        raise ValueError("families must share the same centers, in order")
    for fam, side in ((left_family, "left"), (right_family, "right")):
        if not fam.is_orthonormal:
            raise ValueError(
                f"{side} family orthonormality residual "
                f"{fam.orthonormality_residual:.3e} exceeds {ORTHONORMALITY_TOL}"
            )
    return RankOneSumOperator(
        left_family.grid, left_family.values, right_family.values,
        centers=left_family.centers.points,
        left_support_radius=left_family.support_radius,
    )


def truncate_intertwiner(V: RankOneSumOperator, R: float) -> RankOneSumOperator:
    """V^R: every right vector cut to the open ball B_R around its center."""
    if V.centers is None:
        raise ValueError("operator carries no centers; cannot truncate")
    if R < 0:
        raise ValueError("R must be nonnegative")
    rights = np.array(V.rights)
    for i, c in enumerate(V.centers):
        mask = V.grid.distances_to(c) < R
        rights[i] = np.where(mask, rights[i], 0.0)
    return RankOneSumOperator(V.grid, V.lefts, rights, centers=V.centers,
                              left_support_radius=V.left_support_radius,
                              truncation_radius=R)


def norm_of_difference(V: RankOneSumOperator, V_R: RankOneSumOperator) -> float:
    """||V - V^R|| via the Gram matrix of the truncated-away tails.

    Valid because the shared left family is orthonormal:
    ||(V - V^R) phi||^2 = sum_gamma |<psi_gamma - psi^R_gamma, phi>|^2, so the
    squared norm is the top eigenvalue of the tail Gram matrix.  Refuses when
    the left families differ or are not orthonormal within 1e-8.
    """
    if not V.grid.compatible(V_R.grid):
        raise GridMismatchError("operators live on different grids")
    if V.k != V_R.k or not np.array_equal(V.lefts, V_R.lefts):
        raise ValueError("operators must share the identical left family")
    G_left = V.grid.weight * (np.conj(V.lefts) @ V.lefts.T)
    resid = float(np.max(np.abs(G_left - np.eye(V.k))))
    if resid > ORTHONORMALITY_TOL:
        raise ValueError(
            f"left family orthonormality residual {resid:.3e} exceeds "
            f"{ORTHONORMALITY_TOL}; the Gram reduction does not apply"
        )
    delta = V.rights - V_R.rights
    G = V.grid.weight * (np.conj(delta) @ delta.T)
    top = float(np.max(np.linalg.eigvalsh(G))) if G.size else 0.0
    return float(np.sqrt(max(top, 0.0)))


@dataclass(frozen=True)
class DecayFit:
    """Slope of log||V - V^R|| against log(1 + R) over a cutoff sweep."""

    slope: float
    target: float        # (d - 2s)/2
    tolerance: float
    R_values: tuple
    norms: tuple

    @property
    def passed(self) -> bool:
        return self.slope <= self.target + self.tolerance


def decay_fit(V: RankOneSumOperator, R_values, s: float,
              tolerance: float = 0.15) -> DecayFit:
    """Truncation-error decay exponent of an intertwiner.

    Computes ||V - V^R|| for each cutoff and fits the decay in log-log
    coordinates; passes when the fitted slope is at least as steep as the
    (d - 2s)/2 rate the localization certificate guarantees.  Cutoffs whose
    norm underflows the quadrature floor are dropped from the fit; at least
    four must survive.
    """
    R_values = tuple(float(R) for R in R_values)
    if len(R_values) < 4:
        raise ValueError("need at least four cutoffs for a stable fit")
    if any(b <= a for a, b in zip(R_values, R_values[1:])):
        raise ValueError("cutoffs must be strictly increasing")
    d = V.grid.d
    if not s > d / 2.0:
        raise ValueError("need s > d/2")
    kept, norms = [], []
    for R in R_values:
        nrm = norm_of_difference(V, truncate_intertwiner(V, R))
        if nrm < NORM_FLOOR:
            continue
        kept.append(R)
        norms.append(nrm)
    if len(kept) < 4:
        raise ValueError(
            f"only {len(kept)} of {len(R_values)} cutoffs sit above the "
            f"quadrature floor {NORM_FLOOR}; shrink the cutoffs"
        )
    u = np.log1p(kept)
    y = np.log(norms)
    A = np.vstack([u, np.ones_like(u)]).T
    (slope, _), *_ = np.linalg.lstsq(A, y, rcond=None)
    return DecayFit(slope=float(slope), target=(d - 2.0 * s) / 2.0,
                    tolerance=tolerance, R_values=tuple(kept),
                    norms=tuple(float(v) for v in norms))


# --- locality probes ----------------------------------------------------------

@dataclass(frozen=True)
class PropagationProbe:
    """Worst residual ||f T g|| seen over support pairs at a given separation."""

    separation: float
    residual: float
    tolerance: float
    pairs_tested: int

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


def _support_pairs(grid: Grid, separation: float, rng: np.random.Generator,
                   trials: int, centers, edge_offset: float | None = None) -> list:
    """Masks (f, g) with d(supp f, supp g) > separation.

    Random ball pairs plus deterministic extremes: axis-aligned slabs and,
    when centers are known, small balls hugging a center from opposite
    sides, which is where truncated intertwiners reach the farthest.  When
    the operator's left support radius is known, additional pairs put the
    f ball at that support edge so the full reach (left radius plus right
    truncation) is exercised.
    """
    pts = grid.points
    pairs = []

    def ball(c, rho):
        return np.sum((pts - c) ** 2, axis=1) < rho * rho

    # random ball pairs
    lo, hi = 2.0 * grid.h, max(grid.L / 6.0, 4.0 * grid.h)
    for _ in range(trials):
        for _ in range(64):
            c1 = rng.uniform(-grid.L, grid.L, size=grid.d)
            c2 = rng.uniform(-grid.L, grid.L, size=grid.d)
            r1 = rng.uniform(lo, hi)
            r2 = rng.uniform(lo, hi)
            if np.linalg.norm(c1 - c2) - r1 - r2 > separation:
                m1, m2 = ball(c1, r1), ball(c2, r2)
                if m1.any() and m2.any():
                    pairs.append((m1, m2, None))
                    break

    # axis-aligned slab extremes
    for axis in range(grid.d):
        x = pts[:, axis]
        for t in (-grid.L / 2.0, 0.0):
            m1 = x <= t
            m2 = x >= t + separation + grid.h
            if m1.any() and m2.any():
                pairs.append((m1, m2, None))

    # directed pairs hugging each center
    if centers is not None:
        rho = 2.0 * grid.h
        idx = np.arange(len(centers))
        if len(idx) > 16:
            idx = rng.choice(idx, size=16, replace=False)
        offsets = [0.0]
        if edge_offset is not None and edge_offset - rho > 0.0:
            offsets.append(edge_offset - rho)
        for i in idx:
            c = centers[i]
            for axis in range(grid.d):
                for sign in (+1.0, -1.0):
                    e = np.zeros(grid.d)
                    e[axis] = sign
                    for off in offsets:
                        back = separation - off + 2.0 * rho + grid.h
                        if back <= 0.0:
                            continue
                        c1 = c + e * off
                        c2 = c - e * back
                        m1, m2 = ball(c1, rho), ball(c2, rho)
                        if m1.any() and m2.any():
                            pairs.append((m1, m2, int(i)))
    return pairs


def probe_propagation(op, separation: float, rng: np.random.Generator | None = None,
                      trials: int = 8, tol: float = PROPAGATION_TOL) -> PropagationProbe:
    """Statistical + deterministic check that f T g = 0 beyond a separation.

    ``op`` needs ``.grid`` and ``.apply``; rank-one-sum operators also get
    targeted probes at their centers with the right vectors as test inputs.
    """
    grid = op.grid
    if rng is None:
        rng = np.random.default_rng(0)
    centers = getattr(op, "centers", None)
    rights = getattr(op, "rights", None)
    edge = getattr(op, "left_support_radius", None)
    worst = 0.0
    pairs = _support_pairs(grid, separation, rng, trials, centers, edge)
    if not pairs:
        raise ValueError("no support pairs fit the box at this separation")
    for m1, m2, center_idx in pairs:
        probes = []
        v = rng.standard_normal(grid.n_points) + 1j * rng.standard_normal(grid.n_points)
        probes.append(v)
        if center_idx is not None and rights is not None:
            probes.append(np.array(rights[center_idx]))
        for raw in probes:
            gv = np.where(m2, raw, 0.0)
            nrm = np.sqrt(np.sum(np.abs(gv) ** 2) * grid.weight)
            if nrm == 0.0:
                continue
            out = op.apply(GridFunction(grid, gv / nrm))
            fout = np.where(m1, out.values, 0.0)
            worst = max(worst, float(np.sqrt(np.sum(np.abs(fout) ** 2) * grid.weight)))
    return PropagationProbe(separation=separation, residual=worst, tolerance=tol,
                            pairs_tested=len(pairs))


def propagation_profile(op, separations, rng: np.random.Generator | None = None,
                        trials: int = 8, tol: float = PROPAGATION_TOL) -> list:
    if rng is None:
        rng = np.random.default_rng(0)
    return [probe_propagation(op, float(sep), rng=rng, trials=trials, tol=tol)
            for sep in sorted(separations)]


def first_clean_separation(profile) -> float:
    """Smallest probed separation from which every larger probe also passes."""
    clean = float("inf")
    for probe in sorted(profile, key=lambda p: p.separation, reverse=True):
        if probe.passed:
            clean = probe.separation
        else:
            break
    return clean


@dataclass(frozen=True)
class CompactnessProbe:
    """Numerical rank of f T (or T f) for a compactly supported multiplier f."""

    rank: int
    singular_values: tuple
    cutoff: float


def _rank_from_svals(svals: np.ndarray) -> CompactnessProbe:
    if svals.size == 0 or svals[0] == 0.0:
        return CompactnessProbe(rank=0, singular_values=tuple(svals), cutoff=0.0)
    cutoff = RANK_CUTOFF * float(svals[0])
    rank = int(np.sum(svals > cutoff))
    return CompactnessProbe(rank=rank,
                            singular_values=tuple(float(s) for s in svals),
                            cutoff=cutoff)


def _rank_via_columns(T, multiplier: GridFunction, side: str) -> CompactnessProbe:
    """Rank of f T or T f for operators exposing only apply/adjoint.

    T f = T diag(f) has columns T(f_j e_j) over the support of f; for f T we
    use rank(f T) = rank((f T)*) = rank(T* diag(conj f)).
    """
    grid = multiplier.grid
    f = multiplier.values
    support = np.flatnonzero(np.abs(f) > 0.0)
    if support.size == 0:
        return CompactnessProbe(rank=0, singular_values=(), cutoff=0.0)
    if support.size > 4096:
        raise ValueError("multiplier support too large for the column probe")
    op = T.adjoint() if side == "left" else T
    weights = np.conj(f[support]) if side == "left" else f[support]
    cols = np.zeros((grid.n_points, support.size), dtype=complex)
    basis = np.zeros(grid.n_points, dtype=complex)
    for j, (idx, w) in enumerate(zip(support, weights)):
        basis[idx] = w
        cols[:, j] = op.apply(GridFunction(grid, basis)).values
        basis[idx] = 0.0
    return _rank_from_svals(np.linalg.svd(cols, compute_uv=False))


def probe_local_compactness(T, multiplier: GridFunction,
                            side: str = "left") -> CompactnessProbe:
    """Rank of the cut-down operator, via QR-stabilized singular values.

    f T = sum |f a_i><b_i| has rank at most k; the singular values are those
    of R_f R_b* where Q R are the thin QR factors of the two stacked
    families in the grid inner product.  Operators without rank-one
    structure fall back to a column probe over the multiplier support.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if not isinstance(T, RankOneSumOperator):
        return _rank_via_columns(T, multiplier, side)
    f = multiplier.values
    if side == "left":
        A = (T.lefts * f).T
        B = T.rights.T
    else:
        A = T.lefts.T
        B = (T.rights * np.conj(f)).T
    scale = np.sqrt(T.grid.weight)
    Ra = np.linalg.qr(A * scale, mode="r")
    Rb = np.linalg.qr(B * scale, mode="r")
    svals = np.linalg.svd(Ra @ np.conj(Rb).T, compute_uv=False)
    return _rank_from_svals(svals)


# --- convolution --------------------------------------------------------------

class ConvolutionOperator:
    """Convolution against a kernel sampled on the same grid.

    (K phi)(x) = h^d * sum_y k(x - y) phi(y); the difference x - y must land
    on grid coordinates, which requires the axis to contain 0 (odd point
    count).  The kernel's support radius bounds the propagation.
    """

    __slots__ = ("kernel", "support_radius")

    def __init__(self, kernel: GridFunction):
        if kernel.grid.n_per_axis % 2 == 0:
            raise ValueError("convolution needs an odd point count per axis "
                             "so the kernel grid contains 0")
        object.__setattr__(self, "kernel", kernel)
        dist = kernel.grid.distances_to(np.zeros(kernel.grid.d))
        nz = np.abs(kernel.values) > 0.0
        radius = float(dist[nz].max()) if nz.any() else 0.0
        if radius >= kernel.grid.L / 2.0:
            raise ValueError(
                f"kernel support radius {radius:.3g} too large for the box; "
                f"need less than L/2 = {kernel.grid.L / 2.0:.3g}"
            )
        object.__setattr__(self, "support_radius", radius)

    def __setattr__(self, name, value):
        raise AttributeError("ConvolutionOperator is immutable")

    @property
    def grid(self) -> Grid:
        return self.kernel.grid

    def adjoint(self) -> "ConvolutionOperator":
        # kernel x -> conj(k(-x)); the symmetric axis makes this a flip
        n = self.grid.n_per_axis
        shape = (n,) * self.grid.d
        flipped = np.flip(self.kernel.values.reshape(shape)).reshape(-1)
        return ConvolutionOperator(GridFunction(self.grid, np.conj(flipped)))

    def apply(self, phi: GridFunction) -> GridFunction:
        if not phi.grid.compatible(self.grid):
            raise GridMismatchError("kernel and argument grids differ")
        n = self.grid.n_per_axis
        shape = (n,) * self.grid.d
        k = self.kernel.values.reshape(shape)
        p = phi.values.reshape(shape)
        out = signal.convolve(p, k, mode="same", method="auto") * self.grid.weight
        return GridFunction(self.grid, out.reshape(-1))
