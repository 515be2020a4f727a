"""Gapped Schroedinger models on the grid and deformation of their Wannier bases.

The model zoo is deliberately small: finite-difference Laplacian plus a
lattice-periodic square-well potential (deep wells centered on the integer
points), optionally composed with a volume-distorting bi-Lipschitz
deformation of the underlying space.  From a spectral island the associated
projection and a generalized Wannier basis are extracted by diagonalizing
the projected position operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates

from .discrete_sets import UniformlyDiscreteSet, max_discreteness_radius
from .grid import (
    DEFAULT_ESCAPE_TOL,
    EscapedMassError,
    Grid,
    GridFunction,
)
from .localization import ORTHONORMALITY_TOL, WannierFamily

DENSE_EIGEN_CUTOFF = 3000
NEWTON_TOL = 1e-13
NEWTON_MAX_ITER = 100
ROUNDTRIP_TOL = 1e-10
DEFAULT_CLUSTER_TOL_FACTOR = 1e-6
CENTER_COLLISION_FACTOR = 2.0  # centers closer than this many h are degenerate


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Negative discrete Laplacian, (2d+1)-point stencil, scaled by 1/h^2."""
    n = grid.n_per_axis
    main = 2.0 * np.ones(n)
    off = -np.ones(n - 1)
    T = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if grid.bc == "periodic":
        T[0, n - 1] += -1.0
        T[n - 1, 0] += -1.0
    T = (T / grid.h**2).tocsr()
    if grid.d == 1:
        return T
    eye = sp.identity(n, format="csr")
    return (sp.kron(T, eye) + sp.kron(eye, T)).tocsr()


def kronig_penney_potential(points, v0: float, a: float) -> np.ndarray:
    """Square wells of depth v0 on the cubes of side a centered at Z^d.

    The potential takes the value -v0 on union of R(n) = n + [-a/2, a/2]^d
    and 0 elsewhere, so positive v0 digs wells at the lattice points (the
    gapped regime used throughout); negative v0 turns them into barriers.
    """
    if not 0 < a < 1:
        raise ValueError("need 0 < a < 1")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    frac = np.abs(pts - np.round(pts))
    inside = np.all(frac <= a / 2.0, axis=1)
    return np.where(inside, -v0, 0.0)


@dataclass(frozen=True)
class EigenSolution:
    """Cached eigenpairs of a Hamiltonian, complete below a known energy."""

    hamiltonian: "Hamiltonian"
    eigenvalues: np.ndarray
    vectors: np.ndarray        # (n_points, m), unit l2 columns, ascending
    complete_below: float


class Hamiltonian:
    """Sparse finite-difference Schroedinger operator -Laplacian + V."""

    def __init__(self, grid: Grid, potential, label: str = ""):
        pot = np.asarray(potential, dtype=float).reshape(-1)
        if pot.size != grid.n_points:
            raise ValueError("potential size does not match the grid")
        pot = pot.copy()
        pot.flags.writeable = False
        self.grid = grid
        self.potential = pot
        self.label = label
        self.matrix = (laplacian_matrix(grid) + sp.diags(pot)).tocsr()
        self._solution: EigenSolution | None = None

    def eigensolve(self, energy_cap: float | None = None,
                   count: int | None = None) -> EigenSolution:
        """Eigenpairs, guaranteed complete below ``energy_cap`` when given.

        Small problems are solved densely (complete spectrum); large ones use
        shift-invert Lanczos from below the spectrum bottom, growing the
        subspace until the cap is cleared.
        """
        sol = self._solution
        if sol is not None:
            if energy_cap is not None and sol.complete_below > energy_cap:
                return sol
            if energy_cap is None and count is not None and len(sol.eigenvalues) >= count:
                return sol
            if energy_cap is None and count is None:
                return sol
        n = self.grid.n_points
        if n <= DENSE_EIGEN_CUTOFF:
            w, v = scipy.linalg.eigh(self.matrix.toarray())
            sol = EigenSolution(self, w, v, complete_below=float("inf"))
        else:
            k = min(max(count or 0, 48), n - 2)
            sigma = float(self.potential.min()) - 1.0
            # fixed start vector keeps repeated runs byte-identical
            start = np.full(n, 1.0 / np.sqrt(n))
            while True:
                w, v = spla.eigsh(self.matrix, k=k, sigma=sigma, which="LM",
                                  v0=start)
                order = np.argsort(w)
                w, v = w[order], v[:, order]
                top = float(w[-1])
                enough_cap = energy_cap is None or top > energy_cap
                enough_count = count is None or len(w) >= count
                if (enough_cap and enough_count) or k >= n - 2:
                    break
                k = min(2 * k, n - 2)
            sol = EigenSolution(self, w, v, complete_below=top)
        self._solution = sol
        return sol


def build_kronig_penney(grid: Grid, v0: float, a: float) -> Hamiltonian:
    """Lattice-periodic square-well Hamiltonian; the grid must resolve the wells."""
    if grid.h > a / 8.0:
        raise ValueError(f"grid too coarse for well width {a}: need h <= a/8")
    pot = kronig_penney_potential(grid.points, v0, a)
    return Hamiltonian(grid, pot, label=f"kronig-penney(v0={v0}, a={a})")


def add_uniform_potential(H: Hamiltonian, c: float) -> Hamiltonian:
    """Same model with a constant background added; shifts the spectrum by c."""
    return Hamiltonian(H.grid, H.potential + c, label=f"{H.label}+uniform({c})")


@dataclass(frozen=True)
class SpectralIsland:
    """Maximal run of eigenvalues separated from the rest by gaps > gap_tol."""

    solution: EigenSolution
    start: int
    stop: int           # exclusive
    gap_below: float
    gap_above: float
    gap_tol: float

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.solution.eigenvalues[self.start:self.stop]

    @property
    def size(self) -> int:
        return self.stop - self.start

    @property
    def interval(self) -> tuple[float, float]:
        ev = self.eigenvalues
        return float(ev[0]), float(ev[-1])


def find_spectral_islands(H: Hamiltonian, gap_tol: float,
                          energy_cap: float) -> list[SpectralIsland]:
    """Group the spectrum below ``energy_cap`` into gap-separated islands.

    A trailing run whose gap above cannot be certified (its closing gap
    falls beyond the solved part of the spectrum) is dropped rather than
    reported with an unverified margin.
    """
    if gap_tol <= 0:
        raise ValueError("gap_tol must be positive")
    sol = H.eigensolve(energy_cap=energy_cap + 2.0 * gap_tol)
    ev = sol.eigenvalues
    below = np.flatnonzero(ev <= energy_cap)
    islands: list[SpectralIsland] = []
    if below.size == 0:
        return islands
    start = 0
    for i in range(1, below.size + 1):
        closes = i == below.size or ev[below[i]] - ev[below[i - 1]] > gap_tol
        if not closes:
            continue
        lo, hi = below[start], below[i - 1]
        gap_below = float("inf") if lo == 0 else float(ev[lo] - ev[lo - 1])
        if hi + 1 < len(ev):
            gap_above = float(ev[hi + 1] - ev[hi])
        elif np.isinf(sol.complete_below):
            gap_above = float("inf")
        else:
            gap_above = float("nan")  # not certifiable, drop below
        if not np.isnan(gap_above) and gap_above > gap_tol:
            islands.append(SpectralIsland(
                solution=sol, start=int(lo), stop=int(hi) + 1,
                gap_below=gap_below, gap_above=gap_above, gap_tol=gap_tol,
            ))
        start = i
    return islands


def spectral_projection(H: Hamiltonian, island: SpectralIsland):
    """Projection onto the island eigenspace, as a rank-one sum."""
    from .roe_ops import RankOneSumOperator

    if island.solution.hamiltonian is not H:
        raise ValueError("island does not belong to this Hamiltonian (stale island)")
    vecs = island.solution.vectors[:, island.start:island.stop]
    rows = (vecs / np.sqrt(H.grid.weight)).T.astype(complex)
    return RankOneSumOperator(H.grid, rows, rows)


def _position_expectations(grid: Grid, rows: np.ndarray) -> np.ndarray:
    dens = np.abs(rows) ** 2 * grid.weight
    return dens @ grid.points


def _diagonalize_position(grid: Grid, rows: np.ndarray,
                          cluster_tol: float) -> np.ndarray:
    """Rotate an orthonormal row family to diagonalize projected position."""
    k = rows.shape[0]
    x1 = grid.points[:, 0]
    X1 = grid.weight * (np.conj(rows) * x1) @ rows.T
    mu, W = np.linalg.eigh(X1)
    rows = W.T @ rows

    if grid.d == 2:
        x2 = grid.points[:, 1]
        # split runs of near-equal first coordinates, then order within each
        breaks = np.flatnonzero(np.diff(mu) > cluster_tol)
        bounds = [0, *(breaks + 1).tolist(), k]
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            if hi - lo < 2:
                continue
            block = rows[lo:hi]
            X2 = grid.weight * (np.conj(block) * x2) @ block.T
            _, W2 = np.linalg.eigh(X2)
            rows[lo:hi] = W2.T @ block
    return rows


def _family_from_rows(grid: Grid, rows: np.ndarray, kind: str) -> WannierFamily:
    """Package rotated rows as a family centered at their position expectations."""
    centers = _position_expectations(grid, rows)
    if rows.shape[0] > 1:
        radius = max_discreteness_radius(centers)
        if 2.0 * radius < CENTER_COLLISION_FACTOR * grid.h:
            raise ValueError(
                f"degenerate centers: two localization centers are "
                f"{2 * radius:.3e} apart (< {CENTER_COLLISION_FACTOR} h)"
            )
    else:
        radius = grid.L
    ds = UniformlyDiscreteSet(centers, radius=radius, verify=False)
    return WannierFamily(grid, ds, rows, kind=kind)


def extract_gwb(H: Hamiltonian, island: SpectralIsland,
                cluster_tol: float | None = None) -> WannierFamily:
    """Generalized Wannier basis of an island by projected-position diagonalization.

    Diagonalizes P x_1 P within the island's eigenspace; in d = 2 the
    near-degenerate first-coordinate clusters are then split by
    diagonalizing P x_2 P inside each cluster.  Centers are the position
    expectations of the resulting members; two centers closer than 2h are
    reported as degenerate.
    """
    if island.solution.hamiltonian is not H:
        raise ValueError("island does not belong to this Hamiltonian (stale island)")
    grid = H.grid
    if cluster_tol is None:
        cluster_tol = DEFAULT_CLUSTER_TOL_FACTOR * 2.0 * grid.L
    vecs = island.solution.vectors[:, island.start:island.stop]
    rows = (vecs / np.sqrt(grid.weight)).T.astype(complex)
    rows = _diagonalize_position(grid, rows, float(cluster_tol))
    return _family_from_rows(grid, rows, kind="model-gwb")


def wannier_from_projection(P, cluster_tol: float | None = None) -> WannierFamily:
    """Generalized Wannier basis of a finite-rank orthogonal projection.

    Same construction as :func:`extract_gwb` but starting from the
    projection itself (as a rank-one sum with coinciding orthonormal left
    and right families) instead of a Hamiltonian plus island, so it also
    applies to projections that never came from an eigensolve.
    """
    from .roe_ops import RankOneSumOperator

    if not isinstance(P, RankOneSumOperator):
        raise TypeError("expected a rank-one sum operator")
    if P.lefts is not P.rights and not np.array_equal(P.lefts, P.rights):
        raise ValueError("not a projection: left and right families differ")
    rows = P.lefts.astype(complex)
    gram = P.grid.weight * np.conj(rows) @ rows.T
    if np.abs(gram - np.eye(rows.shape[0])).max() > ORTHONORMALITY_TOL:
        raise ValueError("not a projection: family is not orthonormal")
    grid = P.grid
    if cluster_tol is None:
        cluster_tol = DEFAULT_CLUSTER_TOL_FACTOR * 2.0 * grid.L
    rows = _diagonalize_position(grid, rows, float(cluster_tol))
    return _family_from_rows(grid, rows, kind="projection-gwb")


def subfamily(family: WannierFamily, keep) -> WannierFamily:
    """Family restricted to a subset of members (e.g. away from the box edge)."""
    keep = np.asarray(keep)
    if keep.dtype == bool:
        keep = np.flatnonzero(keep)
    if keep.size == 0:
        raise ValueError("subfamily must keep at least one member")
    pts = family.centers.points[keep]
    labels = family.centers.labels[keep] if family.centers.labels is not None else None
    radius = family.centers.radius if keep.size == 1 else min(
        family.centers.radius, max_discreteness_radius(pts))
    ds = UniformlyDiscreteSet(pts, radius=radius, labels=labels, verify=False)
    return WannierFamily(family.grid, ds, family.values[keep],
                         kind=family.kind, support_radius=family.support_radius)


# --- bi-Lipschitz deformations -------------------------------------------------

class GubanovMap:
    """Deformation f = id + g with certified small derivatives.

    ``kind`` selects g: "zero" (g = 0), "linear" (g(x) = amplitude * x) or
    "sin" (g(x) = amplitude * sin(x) in d = 1 and the cross-coupled
    amplitude * (sin x_2, sin x_1) in d = 2, which keeps the Jacobian
    genuinely non-constant).  For all three, xi = sup over the box of the
    absolute first, second and third partials equals |amplitude| exactly,
    and the map is invertible with Lipschitz bounds (1 +- 2 xi)^(+-1) as
    soon as xi < 1/2.
    """

    __slots__ = ("d", "kind", "amplitude")

    _KINDS = ("zero", "linear", "sin")

    def __init__(self, d: int, kind: str, amplitude: float = 0.0):
        if d not in (1, 2):
            raise ValueError("d must be 1 or 2")
        if kind not in self._KINDS:
            raise ValueError(f"kind must be one of {self._KINDS}")
        if kind == "zero":
            amplitude = 0.0
        xi = abs(float(amplitude))
        if xi >= 0.5:
            raise ValueError(
                f"deformation too strong: xi = {xi} must stay below 1/2"
            )
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "amplitude", float(amplitude))

    def __setattr__(self, name, value):
        raise AttributeError("GubanovMap is immutable")

    @property
    def xi(self) -> float:
        """Exact sup bound on all partials of g up to third order."""
        return abs(self.amplitude)

    @property
    def lipschitz_forward(self) -> float:
        return 1.0 + 2.0 * self.xi

    @property
    def lipschitz_inverse(self) -> float:
        return 1.0 / (1.0 - 2.0 * self.xi)

    def displacement_bound(self, L: float) -> float:
        """Sup of |g| over the box [-L, L]^d."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "sin":
            return abs(self.amplitude) * (1.0 if self.d == 1 else np.sqrt(2.0))
        return abs(self.amplitude) * L * np.sqrt(self.d)

    def g(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        a = self.amplitude
        if self.kind == "zero":
            return np.zeros_like(pts)
        if self.kind == "linear":
            return a * pts
        if self.d == 1:
            return a * np.sin(pts)
        return a * np.stack([np.sin(pts[:, 1]), np.sin(pts[:, 0])], axis=1)

    def jacobian_g(self, pts: np.ndarray) -> np.ndarray:
        """Dg at each point, shape (n, d, d)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        a = self.amplitude
        J = np.zeros((n, self.d, self.d))
        if self.kind == "zero":
            return J
        if self.kind == "linear":
            for i in range(self.d):
                J[:, i, i] = a
            return J
        if self.d == 1:
            J[:, 0, 0] = a * np.cos(pts[:, 0])
        else:
            J[:, 0, 1] = a * np.cos(pts[:, 1])
            J[:, 1, 0] = a * np.cos(pts[:, 0])
        return J

    def forward(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return pts + self.g(pts)

    def inverse(self, pts: np.ndarray) -> np.ndarray:
        """Solve f(y) = x by Newton iteration; quadratic since |Dg| < 1."""
        x = np.atleast_2d(np.asarray(pts, dtype=float))
        y = x - self.g(x)  # first fixed-point sweep as the starting guess
        for _ in range(NEWTON_MAX_ITER):
            res = y + self.g(y) - x
            if np.max(np.abs(res)) <= NEWTON_TOL:
                break
            J = np.eye(self.d)[None, :, :] + self.jacobian_g(y)
            y = y - np.linalg.solve(J, res[:, :, None])[:, :, 0]
        else:
            raise RuntimeError("Newton iteration for the inverse map stalled")
        return y

    def jacobian_det(self, pts: np.ndarray) -> np.ndarray:
        J = np.eye(self.d)[None, :, :] + self.jacobian_g(pts)
        if self.d == 1:
            det = J[:, 0, 0]
        else:
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        return np.abs(det)


def build_gubanov(d: int, kind: str, amplitude: float = 0.0,
                  grid: Grid | None = None) -> GubanovMap:
    """Validated deformation map; round-trips h(f(x)) = x on sample points."""
    gmap = GubanovMap(d, kind, amplitude)
    if grid is not None:
        sample = grid.points[:: max(1, grid.n_points // 256)]
    else:
        rng = np.random.default_rng(7)
        sample = rng.uniform(-5.0, 5.0, size=(128, d))
    back = gmap.inverse(gmap.forward(sample))
    err = float(np.max(np.abs(back - sample)))
    if err > ROUNDTRIP_TOL:
        raise RuntimeError(f"inverse map round-trip error {err:.3e}")
    return gmap


def _interpolate(phi: GridFunction, targets: np.ndarray) -> np.ndarray:
    """Cubic interpolation of a grid function at arbitrary points, zero outside."""
    grid = phi.grid
    ax = grid.axis
    if grid.d == 1:
        t = targets[:, 0]
        spline = CubicSpline(ax, phi.values, extrapolate=False)
        vals = spline(t)
        return np.where(np.isnan(vals), 0.0, vals)
    n = grid.n_per_axis
    coords = (targets - ax[0]) / grid.h    # fractional indices per axis
    field = phi.values.reshape(n, n)
    re = map_coordinates(field.real, coords.T, order=3, mode="constant", cval=0.0)
    im = map_coordinates(field.imag, coords.T, order=3, mode="constant", cval=0.0)
    return re + 1j * im


def apply_Y(gmap: GubanovMap, phi: GridFunction, inverse: bool = False,
            margin: float | None = None,
            truncation_tol: float = DEFAULT_ESCAPE_TOL) -> GridFunction:
    """Unitary change of variables (Y phi)(x) = J(x)^(1/2) phi(f(x)).

    The inverse direction computes J(h(x))^(-1/2) phi(h(x)).  Mapped sample
    points can exit the box; values there are treated as zero, which is only
    sound when phi carries negligible mass near the boundary, so the
    escaped-mass guard runs first with a margin covering the displacement.
    """
    grid = phi.grid
    if gmap.d != grid.d:
        raise ValueError("map and grid dimension differ")
    disp = gmap.displacement_bound(grid.L)
    margin_eff = max(margin if margin is not None else 0.0,
                     disp + 2.0 * grid.h)
    escaped = phi.frame_mass(margin_eff)
    if escaped > truncation_tol:
        raise EscapedMassError(
            f"mapped points exit the box where phi still carries mass "
            f"{escaped:.3e} (tolerance {truncation_tol:.1e})"
        )
    pts = grid.points
    if inverse:
        y = gmap.inverse(pts)
        amp = gmap.jacobian_det(y) ** -0.5
    else:
        y = gmap.forward(pts)
        amp = gmap.jacobian_det(pts) ** 0.5
    return GridFunction(grid, amp * _interpolate(phi, y))


def build_deformed_hamiltonian(gmap: GubanovMap, grid: Grid, v0: float,
                               a: float) -> Hamiltonian:
    """Wells composed with the deformation: potential V0(x + g(x)).

    The potential is evaluated analytically at the mapped points, so no
    interpolation error enters the operator itself.
    """
    if grid.h > a / 8.0:
        raise ValueError(f"grid too coarse for well width {a}: need h <= a/8")
    pot = kronig_penney_potential(gmap.forward(grid.points), v0, a)
    return Hamiltonian(grid, pot,
                       label=f"deformed-kronig-penney(v0={v0}, a={a}, "
                             f"{gmap.kind}, xi={gmap.xi})")


@dataclass(frozen=True)
class DeformationResult:
    """Transported family plus the residuals the transport itself incurred."""

    family: WannierFamily
    raw_orthonormality_residual: float
    polish_magnitude: float


def deform_gwb(gmap: GubanovMap, family: WannierFamily,
               orthonormalize: bool = True,
               truncation_tol: float = DEFAULT_ESCAPE_TOL) -> DeformationResult:
    """Transport a localized family through Y: members Y psi_n, centers h(n).

    Y is unitary in the continuum, but cubic interpolation perturbs
    orthonormality at the interpolation-error level; a symmetric polish
    restores it so the result can feed intertwiner constructions.  The
    polish magnitude is reported and must stay within the interpolation
    budget.
    """
    grid = family.grid
    new_pts = gmap.inverse(family.centers.points)
    radius = (max_discreteness_radius(new_pts) if family.n > 1
              else family.centers.radius / gmap.lipschitz_forward)
    ds = UniformlyDiscreteSet(new_pts, radius=radius,
                              labels=family.centers.labels, verify=False)
    rows = np.zeros_like(family.values)
    for i in range(family.n):
        rows[i] = apply_Y(gmap, family.member(i),
                          truncation_tol=truncation_tol).values
    gram = grid.weight * (np.conj(rows) @ rows.T)
    raw_resid = float(np.max(np.abs(gram - np.eye(family.n))))
    polish = 0.0
    if orthonormalize:
        w, U = np.linalg.eigh(gram)
        if w[0] <= 0:
            raise RuntimeError("transported family lost linear independence")
        inv_sqrt = (U * (w ** -0.5)) @ np.conj(U).T
        polished = inv_sqrt @ rows
        polish = float(np.max(np.sqrt(
            np.sum(np.abs(polished - rows) ** 2, axis=1) * grid.weight)))
        rows = polished
    norms = np.sqrt(np.sum(np.abs(rows) ** 2, axis=1) * grid.weight)
    rows = rows / norms[:, None]
    out = WannierFamily(grid, ds, rows, kind=f"deformed({family.kind})")
    return DeformationResult(family=out, raw_orthonormality_residual=raw_resid,
                             polish_magnitude=polish)
