"""
Matrix-valued finite Laurent series on the unit circle.

A loop is stored by its coefficients over a contiguous degree window
``[d_min, d_max]``.  Sample values live on the N-th roots of unity and are
related to the coefficients by the discrete Fourier transform pair
``values[j] = sum_d coeff[d] * w**(j*d)`` with ``w = exp(2*pi*i/N)``.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import (
    AmbiguousWinding,
    ParameterViolation,
    SingularSample,
    SizeMismatch,
    TruncationResidual,
)

logger = logging.getLogger(__name__)

Window = Tuple[int, int]

# Relative smallest singular value below which a sample counts as singular.
SINGULAR_RTOL = 1e-13
MIN_SAMPLES = 16
MAX_SAMPLES = 1 << 16
NOISE_FLOOR = 1e-15


def sample_count(width: int, minimum: int = MIN_SAMPLES) -> int:
    """Smallest power of two that is at least 4 * width and ``minimum``."""
    target = max(4 * max(width, 1), minimum)
    return 1 << int(np.ceil(np.log2(target)))


@dataclass(frozen=True, eq=False)
class LaurentLoop:
    """Immutable finite Laurent series sum_d coeffs[d - d_min] * lam**d."""

    coeffs: np.ndarray
    d_min: int

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.ndim != 3 or coeffs.shape[1] != coeffs.shape[2]:
            raise SizeMismatch(
                f"Coefficients must have shape (count, n, n), got {coeffs.shape}"
            )
        if coeffs.shape[0] == 0:
            raise ParameterViolation("A loop needs at least one coefficient")
        if not np.all(np.isfinite(coeffs)):
            raise ParameterViolation("Loop coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "d_min", int(self.d_min))

    @classmethod
    def constant(cls, matrix) -> "LaurentLoop":
        matrix = np.asarray(matrix, dtype=complex)
        return cls(matrix[np.newaxis], 0)

    @classmethod
    def identity(cls, size: int) -> "LaurentLoop":
        return cls.constant(np.eye(size))

    @classmethod
    def monomial(cls, matrix, degree: int) -> "LaurentLoop":
        matrix = np.asarray(matrix, dtype=complex)
        return cls(matrix[np.newaxis], degree)

    @classmethod
    def from_terms(cls, terms: Dict[int, np.ndarray], size: int) -> "LaurentLoop":
        """Build a loop from a sparse ``{degree: matrix}`` mapping."""
        if not terms:
            return cls(np.zeros((1, size, size)), 0)
        low, high = min(terms), max(terms)
        coeffs = np.zeros((high - low + 1, size, size), dtype=complex)
        for degree, matrix in terms.items():
            matrix = np.asarray(matrix, dtype=complex)
            if matrix.shape != (size, size):
                raise SizeMismatch(
                    f"Term of degree {degree} has shape {matrix.shape}, "
                    f"expected ({size}, {size})"
                )
            coeffs[degree - low] = matrix
        return cls(coeffs, low)

    @classmethod
    def diagonal_monomials(cls, exponents: Iterable[int]) -> "LaurentLoop":
        """diag(lam**k_1, ..., lam**k_n)."""
        exponents = list(exponents)
        size = len(exponents)
        terms: Dict[int, np.ndarray] = {}
        for i, k in enumerate(exponents):
            terms.setdefault(k, np.zeros((size, size), dtype=complex))
            terms[k][i, i] = 1.0
        return cls.from_terms(terms, size)

    @property
    def size(self) -> int:
        return self.coeffs.shape[1]

    @property
    def count(self) -> int:
        return self.coeffs.shape[0]

    @property
    def d_max(self) -> int:
        return self.d_min + self.count - 1

    @property
    def window(self) -> Window:
        return (self.d_min, self.d_max)

    @property
    def width(self) -> int:
        return self.count

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.d_min, self.d_max + 1)

    def coeff(self, degree: int) -> np.ndarray:
        """Coefficient of lam**degree (zero outside the window)."""
        if self.d_min <= degree <= self.d_max:
            return self.coeffs[degree - self.d_min]
        return np.zeros((self.size, self.size), dtype=complex)

    def with_coeff(self, degree: int, matrix) -> "LaurentLoop":
        """Copy with one coefficient replaced (window grows if needed)."""
        low = min(self.d_min, degree)
        high = max(self.d_max, degree)
        coeffs = _embed(self, (low, high))
        coeffs[degree - low] = np.asarray(matrix, dtype=complex)
        return LaurentLoop(coeffs, low)

    def map_coeffs(self, func) -> "LaurentLoop":
        """Apply ``func`` to the (count, n, n) coefficient stack."""
        return LaurentLoop(func(self.coeffs), self.d_min)

    def transpose(self) -> "LaurentLoop":
        return self.map_coeffs(lambda c: np.swapaxes(c, 1, 2))

    def scale(self, factor: complex) -> "LaurentLoop":
        return self.map_coeffs(lambda c: c * factor)

    def left(self, matrix) -> "LaurentLoop":
        """Constant matrix times the loop."""
        matrix = np.asarray(matrix, dtype=complex)
        return self.map_coeffs(lambda c: np.matmul(matrix, c))

    def right(self, matrix) -> "LaurentLoop":
        """The loop times a constant matrix."""
        matrix = np.asarray(matrix, dtype=complex)
        return self.map_coeffs(lambda c: np.matmul(c, matrix))

    def reversed(self) -> "LaurentLoop":
        """The loop lam -> x(1/lam): coefficient of degree d moves to -d."""
        return LaurentLoop(self.coeffs[::-1], -self.d_max)

    def trimmed(self, atol: float = 0.0) -> "LaurentLoop":
        """Drop leading and trailing coefficients with norm <= atol."""
        norms = np.abs(self.coeffs).reshape(self.count, -1).max(axis=1)
        keep = np.nonzero(norms > atol)[0]
        if keep.size == 0:
            return LaurentLoop(np.zeros((1, self.size, self.size)), 0)
        first, last = keep[0], keep[-1]
        return LaurentLoop(self.coeffs[first:last + 1], self.d_min + first)

    def __add__(self, other: "LaurentLoop") -> "LaurentLoop":
        _check_sizes(self, other)
        window = (min(self.d_min, other.d_min), max(self.d_max, other.d_max))
        return LaurentLoop(_embed(self, window) + _embed(other, window), window[0])

    def __sub__(self, other: "LaurentLoop") -> "LaurentLoop":
        return self + other.scale(-1.0)

    def __matmul__(self, other: "LaurentLoop") -> "LaurentLoop":
        return multiply(self, other)

    def __repr__(self) -> str:
        return f"LaurentLoop(size={self.size}, window={self.window})"


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Values of a loop at the N-th roots of unity."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        count = values.shape[0]
        if count < 4 or count & (count - 1):
            raise ParameterViolation(
                f"Sample count must be a power of two >= 4, got {count}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def size(self) -> int:
        return self.values.shape[1]

    @property
    def points(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.count) / self.count)

    def map_values(self, func) -> "SampleGrid":
        return SampleGrid(func(self.values))


def _check_sizes(a: LaurentLoop, b: LaurentLoop) -> None:
    if a.size != b.size:
        raise SizeMismatch(f"Matrix sizes differ: {a.size} vs {b.size}")


def _embed(x: LaurentLoop, window: Window) -> np.ndarray:
    """Coefficients of x over ``window`` (zero-padded, clipped)."""
    low, high = window
    out = np.zeros((high - low + 1, x.size, x.size), dtype=complex)
    src_low, src_high = max(low, x.d_min), min(high, x.d_max)
    if src_low <= src_high:
        out[src_low - low:src_high - low + 1] = x.coeffs[
            src_low - x.d_min:src_high - x.d_min + 1
        ]
    return out


def evaluate(x: LaurentLoop, lam: complex) -> np.ndarray:
    """x(lam) = sum_d coeff_d * lam**d for lam != 0."""
    lam = complex(lam)
    if lam == 0:
        raise ParameterViolation("Loops are evaluated at nonzero lambda only")
    powers = lam ** x.degrees.astype(float)
    return np.tensordot(powers, x.coeffs, axes=1)


def multiply(a: LaurentLoop, b: LaurentLoop) -> LaurentLoop:
    """Cauchy product of the coefficient sequences (loop group product)."""
    _check_sizes(a, b)
    out = np.zeros((a.count + b.count - 1, a.size, a.size), dtype=complex)
    for i, coeff in enumerate(a.coeffs):
        out[i:i + b.count] += np.matmul(coeff, b.coeffs)
    return LaurentLoop(out, a.d_min + b.d_min)


def to_samples(x: LaurentLoop, count: Optional[int] = None) -> SampleGrid:
    """Values of x at the ``count``-th roots of unity (inverse DFT)."""
    count = count or sample_count(x.width)
    if count < x.width:
        raise ParameterViolation(
            f"{count} samples cannot resolve a window of width {x.width}"
        )
    buffer = np.zeros((count, x.size, x.size), dtype=complex)
    buffer[x.degrees % count] = x.coeffs
    return SampleGrid(np.fft.ifft(buffer, axis=0) * count)


def from_samples(grid: SampleGrid, window: Optional[Window] = None) -> LaurentLoop:
    """Coefficients over ``window`` from sample values (forward DFT).

    Without a window the full band ``[-N/2, N/2 - 1]`` is returned.
    """
    count = grid.count
    if window is None:
        window = (-(count // 2), count // 2 - 1)
    low, high = window
    if high - low + 1 > count:
        raise ParameterViolation(
            f"Window {window} is wider than the {count} available samples"
        )
    spectrum = np.fft.fft(grid.values, axis=0) / count
    return LaurentLoop(spectrum[np.arange(low, high + 1) % count], low)


def truncate(
    x: LaurentLoop, window: Window, tol: Optional[float] = None
) -> Tuple[LaurentLoop, float]:
    """Restrict x to ``window``; returns the loop and the discarded mass.

    The discarded mass is the sum of spectral norms of dropped
    coefficients, an upper bound for their sup-norm.
    """
    low, high = window
    if low > high:
        raise ParameterViolation(f"Empty degree window {window}")
    dropped = [
        x.coeffs[i]
        for i, d in enumerate(x.degrees)
        if d < low or d > high
    ]
    discarded = float(sum(np.linalg.norm(c, 2) for c in dropped))
    if tol is not None and discarded > tol:
        raise TruncationResidual(
            f"Truncation to {window} discards {discarded:.3e} > tol {tol:.1e}",
            residual=discarded,
            tol=tol,
        )
    return LaurentLoop(_embed(x, window), low), discarded


def sample_norms(grid: SampleGrid) -> np.ndarray:
    """Largest singular value of every sample."""
    return np.linalg.norm(grid.values, ord=2, axis=(1, 2))


def sup_norm(x: LaurentLoop, count: Optional[int] = None) -> float:
    """Operator sup-norm: largest singular value over the sample points."""
    count = count or sample_count(x.width, minimum=64)
    return float(sample_norms(to_samples(x, count)).max())


def check_invertible(grid: SampleGrid) -> None:
    """Raise SingularSample if some sample is numerically singular."""
    singular_values = np.linalg.svd(grid.values, compute_uv=False)
    ratio = singular_values[:, -1] / np.maximum(singular_values[:, 0], 1e-300)
    bad = np.nonzero(ratio <= SINGULAR_RTOL)[0]
    if bad.size:
        index = int(bad[0])
        raise SingularSample(
            f"Loop is singular at sample {index} of {grid.count} "
            f"(lambda = {grid.points[index]:.6f})",
            index=index,
        )


def is_group_valued(x: LaurentLoop) -> bool:
    """Invertibility at max(8n, 4 * width) sample points."""
    count = sample_count(x.width, minimum=8 * x.size)
    try:
        check_invertible(to_samples(x, count))
    except SingularSample:
        return False
    return True


def invert(
    x: LaurentLoop, out_window: Window, tol: Optional[float] = 1e-10
) -> LaurentLoop:
    """Loop inverse by pointwise inversion, inverse DFT and truncation.

    The residual ``||x * y - I||_sup`` is checked against ``tol`` unless
    ``tol`` is None.
    """
    out_width = out_window[1] - out_window[0] + 1
    count = sample_count(max(x.width, out_width))
    grid = to_samples(x, count)
    check_invertible(grid)
    inverse = from_samples(grid.map_values(np.linalg.inv))
    y, _ = truncate(inverse, out_window)
    if tol is not None:
        product = multiply(x, y)
        residual = sup_norm(product - LaurentLoop.identity(x.size))
        if residual > tol:
            raise TruncationResidual(
                f"Inverse truncated to {out_window} leaves residual "
                f"{residual:.3e} > tol {tol:.1e}",
                residual=residual,
                tol=tol,
            )
    return y


def star(x: LaurentLoop, eps: complex = 1) -> LaurentLoop:
    """(x^*)(lam) = conj(x(eps * conj(lam)))^T, degree preserving."""
    factors = np.power(complex(eps), x.degrees.astype(float))
    adjoint = np.conj(np.swapaxes(x.coeffs, 1, 2))
    return LaurentLoop(adjoint * factors[:, np.newaxis, np.newaxis], x.d_min)


def winding_det(x: LaurentLoop, count: Optional[int] = None) -> int:
    """Winding number of det x(lam) around the unit circle."""
    count = count or sample_count(x.width * x.size, minimum=256)
    grid = to_samples(x, count)
    check_invertible(grid)
    dets = np.linalg.det(grid.values)
    steps = np.angle(np.roll(dets, -1) / dets)
    if np.max(np.abs(steps)) > np.pi / 2:
        raise AmbiguousWinding(
            f"Argument of det jumps by {np.max(np.abs(steps)):.3f} rad between "
            f"samples; increase the sample count beyond {count}"
        )
    total = float(np.sum(steps) / (2 * np.pi))
    winding = int(round(total))
    if abs(total - winding) >= 0.25:
        raise AmbiguousWinding(
            f"Winding {total:.4f} is not resolved to an integer"
        )
    return winding


def tail_window(
    x: LaurentLoop,
    tol: float,
    symmetric: bool = True,
    radius: float = 1.0,
    floor: float = 0.0,
) -> Window:
    """Smallest window around degree 0 whose complement has mass <= tol.

    With ``radius`` > 1 the mass is measured on the annulus
    1/radius <= |lam| <= radius: degree d weighs radius**|d|.
    Coefficients at or below ``floor`` count as zero.
    """
    norms = np.linalg.norm(x.coeffs, ord=2, axis=(1, 2))
    norms = np.where(norms > floor, norms, 0.0)
    if radius != 1.0:
        with np.errstate(over="ignore", invalid="ignore"):
            weights = np.power(float(radius), np.abs(x.degrees).astype(float))
            norms = np.where(norms > 0, norms * weights, 0.0)
    degrees = x.degrees
    budget = tol / 2.0

    def reach(mask_degrees, mask_norms):
        # largest |d| whose tail beyond it still exceeds the budget
        order = np.argsort(-np.abs(mask_degrees))
        running = 0.0
        for idx in order:
            running += mask_norms[idx]
            if running > budget:
                return int(abs(mask_degrees[idx]))
        return 0

    negative = degrees < 0
    low = -reach(degrees[negative], norms[negative])
    high = reach(degrees[degrees > 0], norms[degrees > 0])
    if symmetric:
        reach_both = max(-low, high)
        return (-reach_both, reach_both)
    return (low, high)


def exp_loop(
    xi: LaurentLoop,
    tol: float = 1e-13,
    symmetric: bool = True,
    radius: float = 1.0,
) -> LaurentLoop:
    """Pointwise matrix exponential of an algebra-valued loop.

    The sample grid is refined until the spectrum near the band edge is
    negligible; the result is truncated to the smallest window whose
    discarded mass is at most ``tol``, on the unit circle and, for
    ``radius`` > 1, on the annulus 1/radius <= |lam| <= radius.
    """
    if radius < 1.0:
        raise ParameterViolation(f"Annulus radius must be >= 1, got {radius}")
    count = sample_count(4 * xi.width, minimum=64)
    while count <= MAX_SAMPLES:
        grid = to_samples(xi, count).map_values(scipy.linalg.expm)
        full = from_samples(grid)
        window = tail_window(full, tol, symmetric=symmetric)
        if radius > 1.0:
            floor = NOISE_FLOOR * float(np.max(np.linalg.norm(full.coeffs, ord=2, axis=(1, 2))))
            wide = tail_window(full, tol, symmetric, radius, floor)
            window = (min(window[0], wide[0]), max(window[1], wide[1]))
        if max(-window[0], window[1]) < count // 4:
            result, discarded = truncate(full, window, tol)
            logger.debug(
                f"exp_loop: {count} samples, window {window}, "
                f"discarded {discarded:.2e}"
            )
            return result
        count *= 2
    raise TruncationResidual(
        f"Exponential does not decay within {MAX_SAMPLES} samples",
        residual=float("inf"),
        tol=tol,
    )


def window_hull(*loops: LaurentLoop, pad: int = 0) -> Window:
    """Symmetric window covering every argument's window, widened by pad."""
    reach_out = max(max(-x.d_min, x.d_max, 0) for x in loops) + pad
    return (-reach_out, reach_out)
