"""
Curved flats in SO(n+k+1, C): vacuum frames, dressing and the
constant-curvature immersions read off from a frame column.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .birkhoff import DEFAULT_TOL, DEFAULT_TRUNCATION
from .errors import (
    DegenerateMetric,
    FormViolation,
    GridPointFailure,
    NoAbelianFamily,
    NormCertificateFailure,
    ParameterViolation,
    SignatureFailure,
    SymmetryResidual,
    TruncationResidual,
    TwistLoopError,
    WrongSidedInput,
)
from .involutions import (
    CatalogEntry,
    algebra_residual,
    curved_flat_form,
    curved_flat_matrices,
    fixed_residual,
    generated_group,
)
from .iwasawa import iwasawa_factor
from .loops import LaurentLoop, evaluate, exp_loop, invert, window_hull

logger = logging.getLogger(__name__)

FRAME_TOL = 1e-8
FLATNESS_TOL = 1e-12
HYPERBOLIC_TOL = 1e-7
METRIC_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class GridFrame:
    """Loop values of a frame on a regular grid, stored in row-major order."""

    origin: Tuple[float, ...]
    h: float
    counts: Tuple[int, ...]
    values: Tuple[LaurentLoop, ...]
    entry: CatalogEntry
    n: int
    k: int

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.origin) != len(self.counts):
            raise ParameterViolation("Grid origin and counts differ in dimension")
        if self.h <= 0:
            raise ParameterViolation(f"Grid spacing must be positive, got {self.h}")
        if len(self.values) != int(np.prod(self.counts)):
            raise ParameterViolation(
                f"Grid {self.counts} needs {int(np.prod(self.counts))} values, "
                f"got {len(self.values)}"
            )

    @property
    def dimension(self) -> int:
        return len(self.counts)

    @property
    def form(self):
        return self.entry.form

    @property
    def tau(self):
        return self.entry.tau

    @property
    def size(self) -> int:
        return self.n + self.k + 1

    def points(self) -> Iterator[Tuple[int, ...]]:
        return np.ndindex(*self.counts)

    def coordinates(self, point: Sequence[int]) -> np.ndarray:
        return np.asarray(self.origin) + self.h * np.asarray(point, dtype=float)

    def value(self, point: Sequence[int]) -> LaurentLoop:
        return self.values[int(np.ravel_multi_index(tuple(point), self.counts))]

    def with_values(self, values: Sequence[LaurentLoop]) -> "GridFrame":
        return replace(self, values=tuple(values))


@dataclass(frozen=True, eq=False)
class MaurerCartanSample:
    """alphas[p][axis] holds the coefficients of degrees -1, 0, 1."""

    h: float
    counts: Tuple[int, ...]
    alphas: np.ndarray
    leakage: np.ndarray
    central: np.ndarray

    @property
    def max_leakage(self) -> float:
        return float(self.leakage.max())

    @property
    def interior_leakage(self) -> float:
        """Largest leakage among central-difference stencils (0 if none)."""
        return float(self.leakage[self.central].max()) if self.central.any() else 0.0

    @property
    def constant(self) -> float:
        return self.max_leakage / self.h


@dataclass(frozen=True, eq=False)
class SurfaceSample:
    lam0: complex
    path: str
    points: np.ndarray
    origin: Tuple[float, ...]
    h: float
    counts: Tuple[int, ...]
    certificate: float
    invariant_form: Optional[np.ndarray] = None
    form_values: Optional[np.ndarray] = None
    expected_curvature: Optional[float] = None


@dataclass(frozen=True)
class CurvatureReport:
    mean: float
    stddev: float
    minimum: float
    maximum: float
    count: int
    excluded: int
    expected: Optional[float] = None

    @property
    def relative_spread(self) -> float:
        return self.stddev / abs(self.mean) if self.mean else float("inf")

    def as_dict(self) -> Dict:
        return {
            "mean": self.mean,
            "stddev": self.stddev,
            "min": self.minimum,
            "max": self.maximum,
            "count": self.count,
            "excluded": self.excluded,
            "expected_curvature": self.expected,
        }


def vacuum_generators(
    n: int, k: int, count: Optional[int] = None, seed: Optional[int] = None
) -> List[LaurentLoop]:
    """Commuting generators A_i = i a_i / lam + i Q a_i Q lam.

    a_i = E_{i, n+i} - E_{n+i, i} lies in the off-diagonal block of Ad_P.
    With a seed the a_i get random weights in [0.5, 1.5].
    """
    entry = curved_flat_form(n, k)
    limit = min(n, k + 1)
    count = limit if count is None else count
    if count < 1 or count > limit:
        raise NoAbelianFamily(
            f"Requested {count} commuting generators; the abelian family has "
            f"dimension {limit} for n={n}, k={k}"
        )
    size = n + k + 1
    _, q = curved_flat_matrices(n, k)
    weights = (
        np.ones(count) if seed is None
        else np.random.default_rng(seed).uniform(0.5, 1.5, count)
    )
    generators = []
    for i, weight in enumerate(weights):
        a = np.zeros((size, size))
        a[i, n + i] = weight
        a[n + i, i] = -weight
        generator = LaurentLoop.from_terms({-1: 1j * a, 1: 1j * (q @ a @ q)}, size)
        residual = max(algebra_residual(entry.form, generator),
                       algebra_residual(entry.tau, generator))
        if residual > 1e-13:
            raise ParameterViolation(f"Generator {i} leaves the twisted algebra ({residual:.1e})")
        generators.append(generator)

    points = np.exp(2j * np.pi * np.arange(16) / 16)
    for i in range(count):
        for j in range(i + 1, count):
            for lam in points:
                ai, aj = evaluate(generators[i], lam), evaluate(generators[j], lam)
                if np.linalg.norm(ai @ aj - aj @ ai, 2) > FLATNESS_TOL:
                    raise NoAbelianFamily(f"Generators {i} and {j} do not commute")
    return generators


def integrate_vacuum(
    generators: Sequence[LaurentLoop],
    n: int,
    k: int,
    origin: Sequence[float],
    h: float,
    counts: Sequence[int],
    tol: float = 1e-12,
    radius: float = 1.0,
) -> GridFrame:
    """F(t) = exp(sum t_i A_i) sampled on the grid.

    Each value is truncated so that it stays within ``tol`` on the
    annulus 1/radius <= |lam| <= radius, where immersions are read off.
    """
    if len(generators) != len(counts):
        raise ParameterViolation(
            f"{len(generators)} generators for a {len(counts)}-dimensional grid"
        )
    entry = curved_flat_form(n, k)
    size = n + k + 1
    values = []
    for point in np.ndindex(*counts):
        t = np.asarray(origin, dtype=float) + h * np.asarray(point, dtype=float)
        xi = LaurentLoop(np.zeros((1, size, size)), 0)
        for weight, generator in zip(t, generators):
            xi = xi + generator.scale(weight)
        frame = exp_loop(xi, tol, radius=radius)
        residual = max(fixed_residual(entry.form, frame), fixed_residual(entry.tau, frame))
        if residual > FRAME_TOL:
            raise TruncationResidual(
                f"Vacuum frame at {point} leaves the form by {residual:.2e}",
                residual=residual,
                tol=FRAME_TOL,
            )
        values.append(frame)
    return GridFrame(tuple(origin), h, tuple(counts), tuple(values), entry, n, k)


def vacuum_frame(
    n: int,
    k: int,
    counts: Sequence[int],
    h: float,
    origin: Optional[Sequence[float]] = None,
    seed: Optional[int] = None,
    radius: float = 1.0,
) -> GridFrame:
    """Vacuum on a grid with one axis per commuting generator."""
    generators = vacuum_generators(n, k, count=len(counts), seed=seed)
    origin = origin if origin is not None else [0.0] * len(counts)
    return integrate_vacuum(generators, n, k, origin, h, counts, radius=radius)


def annulus_radius(lam0: complex) -> float:
    """Radius of the annulus around the unit circle that contains lam0."""
    size = abs(complex(lam0))
    if size == 0:
        raise ParameterViolation("lambda0 must be nonzero")
    return max(size, 1.0 / size)


def frame_residual(frame: GridFrame) -> float:
    """Largest fixed residual of the frame values under the form and tau."""
    return max(
        max(fixed_residual(frame.form, value), fixed_residual(frame.tau, value))
        for value in frame.values
    )


def maurer_cartan(frame: GridFrame) -> MaurerCartanSample:
    """Finite-difference F^-1 dF per point and axis.

    Central differences inside the grid, one-sided differences on the
    boundary.  Leakage is the summed norm of degrees outside [-1, 1].
    """
    if min(frame.counts) < 2:
        raise ParameterViolation(f"Maurer-Cartan needs >= 2 points per axis, got {frame.counts}")
    size = frame.size
    shape = frame.counts + (frame.dimension,)
    alphas = np.zeros(shape + (3, size, size), dtype=complex)
    leakage = np.zeros(shape)
    central = np.zeros(shape, dtype=bool)

    for point in frame.points():
        value = frame.value(point)
        inverse = invert(value, window_hull(value, pad=value.width), tol=None)
        for axis in range(frame.dimension):
            index = point[axis]
            last = frame.counts[axis] - 1
            step = np.eye(frame.dimension, dtype=int)[axis]
            forward = tuple(np.asarray(point) + step)
            backward = tuple(np.asarray(point) - step)
            if 0 < index < last:
                diff = (frame.value(forward) - frame.value(backward)).scale(0.5 / frame.h)
                central[point + (axis,)] = True
            elif index < last:
                diff = (frame.value(forward) - value).scale(1.0 / frame.h)
            else:
                diff = (value - frame.value(backward)).scale(1.0 / frame.h)
            alpha = inverse @ diff
            for slot, degree in enumerate((-1, 0, 1)):
                alphas[point + (axis, slot)] = alpha.coeff(degree)
            leakage[point + (axis,)] = sum(
                np.linalg.norm(c, 2)
                for d, c in zip(alpha.degrees, alpha.coeffs)
                if abs(d) > 1
            )
    return MaurerCartanSample(frame.h, frame.counts, alphas, leakage, central)


def _dress_point(task) -> Tuple[Optional[LaurentLoop], Optional[TwistLoopError]]:
    form, tau, x, m, tol = task
    try:
        return iwasawa_factor(form, tau, x, m, tol).z_tau, None
    except TwistLoopError as e:
        return None, e


def dress(
    frame: GridFrame,
    g_minus: LaurentLoop,
    m: int = DEFAULT_TRUNCATION,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
    leakage_tol: Optional[float] = None,
) -> GridFrame:
    """Pointwise canonical split g_minus F(p) = F_hat(p) g_plus(p).

    Grid points are split independently; ``workers`` other than 1 (0 for
    one per CPU) runs them in a process pool.  Results do not depend on
    the worker count.  The dressed frame is checked against the form and
    tau, and against ``leakage_tol`` when given.
    """
    if g_minus.d_max > 0:
        raise WrongSidedInput(f"Dressing element must have degrees <= 0, window {g_minus.window}")
    residual = fixed_residual(frame.form, g_minus)
    if residual > tol:
        raise FormViolation(
            f"Dressing element is not in form {frame.form.name} ({residual:.3e})",
            residual=residual,
        )

    points = list(frame.points())
    tasks = [(frame.form, frame.tau, g_minus @ frame.value(p), m, tol) for p in points]
    if workers == 1:
        results = [_dress_point(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers or None) as pool:
            results = list(pool.map(_dress_point, tasks, chunksize=max(1, len(tasks) // 64)))

    values = []
    for point, (value, error) in zip(points, results):
        if error is not None:
            logger.warning(f"Dressing failed at grid point {point}: {error}")
            raise GridPointFailure(
                f"Dressing failed at grid point {point}: {error}", point=point, cause=error
            ) from error
        values.append(value)
    dressed = frame.with_values(values)

    bound = max(FRAME_TOL, 100 * tol)
    residual = frame_residual(dressed)
    if residual > bound:
        raise SymmetryResidual(
            f"Dressed frame leaves the form or tau by {residual:.3e} > {bound:.1e}",
            residual=residual,
        )
    if leakage_tol is not None:
        leakage = maurer_cartan(dressed).interior_leakage
        if leakage > leakage_tol:
            raise TruncationResidual(
                f"Dressed Maurer-Cartan form leaks {leakage:.3e} outside degrees [-1, 1]",
                residual=leakage,
                tol=leakage_tol,
            )
    return dressed


def coset_gap(first: LaurentLoop, second: LaurentLoop, count: int = 16) -> float:
    """How far first^-1 second is from a constant over the circle."""
    points = np.exp(2j * np.pi * np.arange(count) / count)
    samples = np.array([
        np.linalg.solve(evaluate(first, lam), evaluate(second, lam)) for lam in points
    ])
    return float(np.max(np.linalg.norm(samples - samples.mean(axis=0), ord=2, axis=(1, 2))))


def invariant_hermitian_form(entry: CatalogEntry) -> np.ndarray:
    """Hermitian H with F^+ H F = H on the unit circle.

    Taken from the group element (form and tau) of inverse-conjugate-
    transpose type whose parameter substitution is lam -> 1/conj(lam).
    """
    for element in generated_group(entry.form.involutions + (entry.tau,)):
        auto = element.automorphism
        if (
            element.reflects
            and auto.conjugate
            and auto.inverse_transpose
            and abs(element.rotation - 1.0) <= 1e-12
        ):
            h = auto.matrix_inverse
            return (h + h.conj().T) / 2
    raise SignatureFailure(f"Form {entry.name} has no circle-fixing Hermitian symmetry")


def expected_curvature(lam0: complex) -> Optional[float]:
    """-4 / (1/s - s)^2 for lam0 = i s; None where it degenerates."""
    s = complex(lam0).imag
    if abs(complex(lam0).real) > 1e-14 or s == 0 or abs(abs(s) - 1.0) <= 1e-12:
        return None
    return -4.0 / (1.0 / s - s) ** 2


def extract_immersion(
    frame: GridFrame, lam0: complex, tol: float = FRAME_TOL
) -> SurfaceSample:
    """Column n+1 of F(p)(lam0): sphere points (lam0 in iR) or a
    complex column with an indefinite-form certificate (|lam0| = 1)."""
    lam0 = complex(lam0)
    if lam0 == 0:
        raise ParameterViolation("lambda0 must be nonzero")
    column = frame.n
    shape = frame.counts + (frame.size,)

    if abs(lam0.real) <= 1e-14 * abs(lam0):
        points = np.zeros(shape)
        worst = 0.0
        for point in frame.points():
            vector = evaluate(frame.value(point), lam0)[:, column]
            imaginary = float(np.max(np.abs(vector.imag)))
            length = abs(float(np.linalg.norm(vector.real)) - 1.0)
            if imaginary > tol or length > tol:
                raise NormCertificateFailure(
                    f"Point {point} is not a real unit vector "
                    f"(imaginary part {imaginary:.2e}, length error {length:.2e})"
                )
            worst = max(worst, imaginary, length)
            points[point] = vector.real
        return SurfaceSample(
            lam0, "sphere", points, frame.origin, frame.h, frame.counts, worst,
            expected_curvature=expected_curvature(lam0),
        )

    if abs(abs(lam0) - 1.0) <= 1e-12:
        form = invariant_hermitian_form(frame.entry)
        eigenvalues = np.linalg.eigvalsh(form)
        positive, negative = int(np.sum(eigenvalues > 0)), int(np.sum(eigenvalues < 0))
        if (positive, negative) != (frame.size - 1, 1):
            raise SignatureFailure(
                f"Invariant form has signature ({positive}, {negative}), "
                f"expected ({frame.size - 1}, 1)"
            )
        points = np.zeros(shape, dtype=complex)
        values = np.zeros(frame.counts, dtype=complex)
        worst = 0.0
        for point in frame.points():
            g = evaluate(frame.value(point), lam0)
            residual = float(np.linalg.norm(g.conj().T @ form @ g - form, 2))
            if residual > HYPERBOLIC_TOL:
                raise SignatureFailure(
                    f"Frame at {point} does not preserve the invariant form ({residual:.2e})"
                )
            worst = max(worst, residual)
            points[point] = g[:, column]
            values[point] = g[:, column].conj() @ form @ g[:, column]
        return SurfaceSample(
            lam0, "hyperbolic", points, frame.origin, frame.h, frame.counts, worst,
            invariant_form=form, form_values=values,
        )

    raise ParameterViolation(f"lambda0 = {lam0} is neither on iR nor on the unit circle")


def _central(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    if axis == 0:
        return (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * h)
    return (a[1:-1, 2:] - a[1:-1, :-2]) / (2 * h)


def curvature_report(sample: SurfaceSample, degenerate_tol: float = 1e-8) -> CurvatureReport:
    """Gauss curvature of the induced metric via the Brioschi formula."""
    if sample.path != "sphere":
        raise ParameterViolation("Curvature is computed for sphere-path samples only")
    if len(sample.counts) != 2:
        raise ParameterViolation(f"Curvature needs a 2-dimensional grid, got {sample.counts}")
    if min(sample.counts) < 5:
        raise ParameterViolation(
            f"Grid {sample.counts} is too small for the curvature stencil (need >= 5 per axis)"
        )
    if expected_curvature(sample.lam0) is None:
        raise DegenerateMetric(
            f"lambda0 = {sample.lam0} is a degenerate fibre; no curvature is defined there"
        )
    f, h = sample.points, sample.h
    fu, fv = _central(f, 0, h), _central(f, 1, h)
    e = np.einsum("ijk,ijk->ij", fu, fu)
    g = np.einsum("ijk,ijk->ij", fv, fv)
    f12 = np.einsum("ijk,ijk->ij", fu, fv)

    e_u, e_v = _central(e, 0, h), _central(e, 1, h)
    g_u, g_v = _central(g, 0, h), _central(g, 1, h)
    f_u, f_v = _central(f12, 0, h), _central(f12, 1, h)
    e_vv = (e[1:-1, 2:] - 2 * e[1:-1, 1:-1] + e[1:-1, :-2]) / h ** 2
    g_uu = (g[2:, 1:-1] - 2 * g[1:-1, 1:-1] + g[:-2, 1:-1]) / h ** 2
    f_uv = (f12[2:, 2:] - f12[2:, :-2] - f12[:-2, 2:] + f12[:-2, :-2]) / (4 * h ** 2)
    ec, gc, fc = e[1:-1, 1:-1], g[1:-1, 1:-1], f12[1:-1, 1:-1]

    zero = np.zeros_like(ec)
    first = np.stack([
        np.stack([-e_vv / 2 + f_uv - g_uu / 2, e_u / 2, f_u - e_v / 2], -1),
        np.stack([f_v - g_u / 2, ec, fc], -1),
        np.stack([g_v / 2, fc, gc], -1),
    ], -2)
    second = np.stack([
        np.stack([zero, e_v / 2, g_u / 2], -1),
        np.stack([e_v / 2, ec, fc], -1),
        np.stack([g_u / 2, fc, gc], -1),
    ], -2)
    area = ec * gc - fc ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        curvature = (np.linalg.det(first) - np.linalg.det(second)) / area ** 2

    degenerate = (
        (ec + gc <= METRIC_FLOOR)
        | (area <= degenerate_tol * (ec + gc) ** 2)
        | ~np.isfinite(curvature)
    )
    kept = curvature[~degenerate]
    if kept.size == 0:
        raise DegenerateMetric(
            f"All {curvature.size} interior points are non-immersed at lambda0 = {sample.lam0}"
        )
    if degenerate.any():
        logger.warning(f"Excluded {int(degenerate.sum())} degenerate metric points")
    return CurvatureReport(
        mean=float(np.mean(kept)),
        stddev=float(np.std(kept)),
        minimum=float(np.min(kept)),
        maximum=float(np.max(kept)),
        count=int(kept.size),
        excluded=int(degenerate.sum()),
        expected=sample.expected_curvature,
    )
