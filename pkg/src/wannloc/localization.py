"""Localization moments and certified bounds for families of grid functions.

A family {psi_gamma} indexed by a uniformly discrete center set is
s-localized with constant M when

    integral (1 + |x - gamma|^2)^s |psi_gamma(x)|^2 dx <= M   for all gamma,

and exponentially localized at rate alpha when the weight is
exp(2 alpha |x - gamma|).  Certificates here are computed with the grid
quadrature, guarded against mass truncated by the finite box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .discrete_sets import UniformlyDiscreteSet, fits_grid
from .grid import (
    DEFAULT_ESCAPE_TOL,
    DEFAULT_MARGIN_FRACTION,
    EscapedMassError,
    Grid,
    GridFunction,
)

UNIT_NORM_TOL = 1e-10
ORTHONORMALITY_TOL = 1e-8
# Relative floor on Gram eigenvalues below which a frame is treated as
# degenerate rather than orthonormalized.
FRAME_CONDITION_FLOOR = 1e-12


class FrameDegenerateError(RuntimeError):
    """Raised when a raw frame is numerically rank deficient."""


def _weight_values(grid: Grid, center, kind: str, parameter: float) -> NDArray[np.float64]:
    dist = grid.distances_to(center)
    if kind == "power":
        return (1.0 + dist * dist) ** parameter
    if kind == "exponential":
        return np.exp(2.0 * parameter * dist)
    raise ValueError(f"unknown weight kind {kind!r}")


def _frame_weight(grid: Grid, margin: float, kind: str, parameter: float) -> float:
    """Worst-case moment weight on the boundary frame, for the guard."""
    inner = grid.L - margin
    if kind == "power":
        return (1.0 + inner * inner) ** parameter
    return float(np.exp(2.0 * parameter * inner))


def _guarded_moment(
    psi: GridFunction,
    center,
    kind: str,
    parameter: float,
    margin: float | None,
    truncation_tol: float,
) -> tuple[float, float]:
    """Moment plus the weighted escaped mass that was checked against the guard."""
    grid = psi.grid
    if margin is None:
        margin = DEFAULT_MARGIN_FRACTION * grid.L
    escaped = psi.frame_mass(margin) * _frame_weight(grid, margin, kind, parameter)
    if escaped > truncation_tol:
        raise EscapedMassError(
            f"weighted escaped mass {escaped:.3e} exceeds {truncation_tol:.1e}; "
            "the finite box under-counts this moment (enlarge the box or relax "
            "the truncation tolerance explicitly)"
        )
    weight = _weight_values(grid, center, kind, parameter)
    moment = float(np.sum(weight * np.abs(psi.values) ** 2) * grid.weight)
    return moment, escaped


def localization_moment(
    psi: GridFunction,
    center,
    s: float,
    margin: float | None = None,
    truncation_tol: float = DEFAULT_ESCAPE_TOL,
) -> float:
    """Polynomial localization moment of a single function about a center."""
    moment, _ = _guarded_moment(psi, center, "power", s, margin, truncation_tol)
    return moment


def exponential_moment(
    psi: GridFunction,
    center,
    alpha: float,
    margin: float | None = None,
    truncation_tol: float = DEFAULT_ESCAPE_TOL,
) -> float:
    """Exponential localization moment of a single function about a center."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    moment, _ = _guarded_moment(psi, center, "exponential", alpha, margin, truncation_tol)
    return moment


@dataclass(frozen=True)
class LocalizationCertificate:
    """Certified uniform moment bound for a family."""

    kind: str            # "power" or "exponential"
    parameter: float     # s, respectively alpha
    bound: float         # M = max over members of the moment
    weighted_escape: float
    margin: float
    truncation_tol: float


class WannierFamily:
    """Orthonormal-by-construction family of grid functions with centers.

    Rows of ``values`` are the members, aligned with ``centers.points``.
    ``support_radius`` is set for families whose members are supported in
    balls of that radius around their centers (extremely localized case)
    and None otherwise.
    """

    def __init__(
        self,
        grid: Grid,
        centers: UniformlyDiscreteSet,
        values,
        kind: str = "",
        support_radius: float | None = None,
    ):
        vals = np.asarray(values, dtype=complex)
        if vals.ndim != 2 or vals.shape != (centers.n, grid.n_points):
            raise ValueError(
                f"values must have shape (n_centers, n_points) = "
                f"({centers.n}, {grid.n_points}), got {vals.shape}"
            )
        if centers.d != grid.d:
            raise ValueError("center set and grid dimension differ")
        if not fits_grid(centers, grid):
            raise ValueError("some centers lie outside the grid box")
        vals = vals.copy()
        vals.flags.writeable = False
        self.grid = grid
        self.centers = centers
        self.values = vals
        self.kind = kind
        self.support_radius = support_radius
        self._certificates: dict[tuple[str, float], LocalizationCertificate] = {}
        norms = np.sqrt(np.sum(np.abs(vals) ** 2, axis=1) * grid.weight)
        worst = float(np.max(np.abs(norms - 1.0)))
        if worst > UNIT_NORM_TOL:
            raise ValueError(f"member norms deviate from 1 by {worst:.3e}")
        gram = self.gram()
        self.orthonormality_residual = float(
            np.max(np.abs(gram - np.eye(centers.n)))
        )

    @property
    def n(self) -> int:
        return self.centers.n

    def member(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.values[i])

    def __len__(self) -> int:
        return self.n

    def gram(self) -> NDArray[np.complex128]:
        return self.grid.weight * (np.conj(self.values) @ self.values.T)

    @property
    def is_orthonormal(self) -> bool:
        return self.orthonormality_residual <= ORTHONORMALITY_TOL

    def certificate(self, kind: str, parameter: float) -> LocalizationCertificate | None:
        return self._certificates.get((kind, float(parameter)))

    def certificates(self) -> tuple[LocalizationCertificate, ...]:
        return tuple(self._certificates.values())

    def _record(self, cert: LocalizationCertificate) -> LocalizationCertificate:
        self._certificates[(cert.kind, float(cert.parameter))] = cert
        return cert

    def manifest(self) -> dict:
        """JSON-ready description: centers, norms, residual, certificates."""
        norms = np.sqrt(np.sum(np.abs(self.values) ** 2, axis=1) * self.grid.weight)
        return {
            "kind": self.kind,
            "n_members": self.n,
            "discreteness_radius": self.centers.radius,
            "support_radius": self.support_radius,
            "orthonormality_residual": self.orthonormality_residual,
            "centers": [list(map(float, c)) for c in self.centers.points],
            "member_norms": [float(v) for v in norms],
            "certificates": [
                {
                    "kind": c.kind,
                    "parameter": c.parameter,
                    "bound": c.bound,
                    "weighted_escape": c.weighted_escape,
                    "margin": c.margin,
                    "truncation_tol": c.truncation_tol,
                }
                for c in self._certificates.values()
            ],
        }


def _certify(
    family: WannierFamily,
    kind: str,
    parameter: float,
    margin: float | None,
    truncation_tol: float,
) -> LocalizationCertificate:
    if margin is None:
        margin = DEFAULT_MARGIN_FRACTION * family.grid.L
    worst_moment = 0.0
    worst_escape = 0.0
    for i in range(family.n):
        moment, escaped = _guarded_moment(
            family.member(i), family.centers.points[i], kind, parameter,
            margin, truncation_tol,
        )
        worst_moment = max(worst_moment, moment)
        worst_escape = max(worst_escape, escaped)
    cert = LocalizationCertificate(
        kind=kind, parameter=float(parameter), bound=worst_moment,
        weighted_escape=worst_escape, margin=margin,
        truncation_tol=truncation_tol,
    )
    return family._record(cert)


def certify_s_localized(
    family: WannierFamily,
    s: float,
    margin: float | None = None,
    truncation_tol: float = DEFAULT_ESCAPE_TOL,
) -> LocalizationCertificate:
    """Uniform s-moment bound M(s) over the family (cached on the family)."""
    if s <= 0:
        raise ValueError("s must be positive")
    cached = family.certificate("power", s)
    if cached is not None and cached.truncation_tol == truncation_tol:
        return cached
    return _certify(family, "power", s, margin, truncation_tol)


def certify_exponential(
    family: WannierFamily,
    alpha: float,
    margin: float | None = None,
    truncation_tol: float = DEFAULT_ESCAPE_TOL,
) -> LocalizationCertificate:
    """Uniform exponential moment bound at rate alpha (cached on the family)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    cached = family.certificate("exponential", alpha)
    if cached is not None and cached.truncation_tol == truncation_tol:
        return cached
    return _certify(family, "exponential", alpha, margin, truncation_tol)


def power_bound_from_exponential(alpha: float, M: float, s: float) -> float:
    """Bound M(s) <= M_exp * sup_t (1+t^2)^s exp(-2 alpha t), in closed form.

    The supremum over t >= 0 sits at the larger root of
    alpha t^2 - s t + alpha = 0 when s >= 2 alpha, and at t = 0 otherwise.
    """
    if alpha <= 0 or s <= 0:
        raise ValueError("alpha and s must be positive")
    sup = 1.0
    if s >= 2.0 * alpha:
        t = (s + np.sqrt(s * s - 4.0 * alpha * alpha)) / (2.0 * alpha)
        sup = max(sup, float((1.0 + t * t) ** s * np.exp(-2.0 * alpha * t)))
    return M * sup


# --- builders ----------------------------------------------------------------

def build_extremely_localized_family(
    ds: UniformlyDiscreteSet,
    grid: Grid,
    radius: float | None = None,
) -> WannierFamily:
    """Normalized ball indicators strictly inside the disjoint balls B_r(gamma).

    The indicator profile uses radius r - h so grid rounding can never leak
    support across the ball boundary; this requires r >= 2h so every ball
    still contains grid points.
    """
    r = ds.radius if radius is None else float(radius)
    if radius is not None and radius > ds.radius:
        raise ValueError("requested radius exceeds the certified discreteness radius")
    if r < 2.0 * grid.h:
        raise ValueError(f"need r >= 2h, got r = {r}, h = {grid.h}")
    rows = np.zeros((ds.n, grid.n_points), dtype=complex)
    for i, c in enumerate(ds.points):
        mask = grid.distances_to(c) < (r - grid.h)
        count = int(mask.sum())
        if count == 0:
            raise ValueError(f"ball around {c} contains no grid points")
        rows[i, mask] = 1.0 / np.sqrt(count * grid.weight)
    return WannierFamily(grid, ds, rows, kind="extremely-localized",
                         support_radius=r - grid.h)


def build_power_law_family(
    ds: UniformlyDiscreteSet,
    grid: Grid,
    p: float,
) -> WannierFamily:
    """Symmetric (Loewdin) orthonormalization of power-law profiles.

    Raw profiles are c_p (1 + |x - gamma|^2)^(-p/2), grid-normalized, and
    the family is S^(-1/2) applied to them, which is the orthonormal family
    closest to the raw frame in least-squares sense.  Requires p > d/2 so
    the profiles are square-summable at the box scale in a meaningful way.
    """
    if p <= ds.d / 2.0:
        raise ValueError("need p > d/2 for square-integrable profiles")
    raw = np.zeros((ds.n, grid.n_points), dtype=complex)
    for i, c in enumerate(ds.points):
        dist = grid.distances_to(c)
        raw[i] = (1.0 + dist * dist) ** (-p / 2.0)
    norms = np.sqrt(np.sum(np.abs(raw) ** 2, axis=1) * grid.weight)
    raw /= norms[:, None]
    gram = grid.weight * (np.conj(raw) @ raw.T)
    w, U = np.linalg.eigh(gram)
    if w[0] <= FRAME_CONDITION_FLOOR * w[-1]:
        raise FrameDegenerateError(
            f"raw power-law frame is numerically degenerate "
            f"(Gram eigenvalue ratio {w[0] / w[-1]:.3e})"
        )
    inv_sqrt = (U * (w ** -0.5)) @ np.conj(U).T
    members = inv_sqrt @ raw
    # Loewdin output is orthonormal up to roundoff; renormalize rows so the
    # unit-norm invariant holds exactly at the family boundary.
    mnorms = np.sqrt(np.sum(np.abs(members) ** 2, axis=1) * grid.weight)
    members /= mnorms[:, None]
    return WannierFamily(grid, ds, members, kind=f"power-law(p={p})")
