"""
Birkhoff factorization x = x_minus * x_plus with x_minus(inf) = I.

The unknown Z = x_minus^-1 = I + sum_{j=1..m} Z_{-j} lam^-j is found from
the square finite section of the block-Toeplitz system "all degrees -m..-1
of Z*x vanish".  Solvability of that section (smallest singular value above
``BIG_CELL_THRESHOLD * sup_norm(x)``) together with zero determinant
winding certifies the big cell.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

import numpy as np
import scipy.linalg

from .errors import (
    FactorFormViolation,
    FormViolation,
    NotInBigCell,
    ParameterViolation,
    ResidualTooLarge,
    WrongSidedInput,
)
from .involutions import RealFormSpec, fixed_residual
from .loops import (
    LaurentLoop,
    check_invertible,
    invert,
    multiply,
    sample_count,
    sup_norm,
    to_samples,
    truncate,
    winding_det,
)

logger = logging.getLogger(__name__)

BIG_CELL_THRESHOLD = 1e-10
DEFAULT_TRUNCATION = 16
DEFAULT_TOL = 1e-9
SIDES = ("plus", "minus")


@dataclass(frozen=True)
class CellReport:
    in_big_cell: bool
    det_winding: int
    smallest_singular_value: float
    threshold: float
    truncation: int

    def as_dict(self) -> Dict:
        return {
            "in_big_cell": self.in_big_cell,
            "det_winding": self.det_winding,
            "smallest_singular_value": self.smallest_singular_value,
            "threshold": self.threshold,
            "truncation": self.truncation,
        }


@dataclass(frozen=True, eq=False)
class BirkhoffFactors:
    """x = x_minus * x_plus (order "left") or x_plus * x_minus ("right")."""

    x_minus: LaurentLoop
    x_plus: LaurentLoop
    residual: float
    toeplitz_smallest_singular_value: float
    condition: float
    truncation: int
    indices: Tuple[int, ...] = ()
    membership: Tuple[float, ...] = field(default=())
    order: str = "left"

    @property
    def diagnostics(self) -> Dict:
        return {
            "residual": self.residual,
            "toeplitz_smallest_singular_value": self.toeplitz_smallest_singular_value,
            "condition": self.condition,
            "truncation": self.truncation,
            "indices": list(self.indices),
            "membership": list(self.membership),
            "order": self.order,
        }

    def product(self) -> LaurentLoop:
        if self.order == "left":
            return multiply(self.x_minus, self.x_plus)
        return multiply(self.x_plus, self.x_minus)


def _toeplitz_system(x: LaurentLoop, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Matrices T, R with [Z_-1 ... Z_-m] T = R.

    Block (j, e) of T is x_{j-e}; block e of R is -x_{-e}.
    """
    n = x.size
    system = np.zeros((m * n, m * n), dtype=complex)
    rhs = np.zeros((n, m * n), dtype=complex)
    for e in range(1, m + 1):
        cols = slice((e - 1) * n, e * n)
        rhs[:, cols] = -x.coeff(-e)
        for j in range(1, m + 1):
            system[(j - 1) * n:j * n, cols] = x.coeff(j - e)
    return system, rhs


def _section_singular_values(system: np.ndarray) -> Tuple[float, float]:
    values = scipy.linalg.svdvals(system)
    return float(values[-1]), float(values[0])


def certify_big_cell(x: LaurentLoop, m: int = DEFAULT_TRUNCATION) -> CellReport:
    """Diagnose big-cell membership at truncation ``m``."""
    check_invertible(to_samples(x, sample_count(x.width, minimum=8 * x.size)))
    system, _ = _toeplitz_system(x, m)
    smin, _ = _section_singular_values(system)
    threshold = BIG_CELL_THRESHOLD * sup_norm(x)
    winding = winding_det(x)
    return CellReport(
        in_big_cell=bool(smin > threshold and winding == 0),
        det_winding=winding,
        smallest_singular_value=smin,
        threshold=threshold,
        truncation=m,
    )


def _attempt(x: LaurentLoop, m: int) -> BirkhoffFactors:
    n = x.size
    system, rhs = _toeplitz_system(x, m)
    smin, smax = _section_singular_values(system)
    threshold = BIG_CELL_THRESHOLD * sup_norm(x)
    if smin <= threshold:
        report = certify_big_cell(x, m)
        logger.warning(
            f"Loop not in the big cell: smin={smin:.3e}, winding={report.det_winding}"
        )
        raise NotInBigCell(
            f"Toeplitz section is singular (smallest singular value {smin:.3e} "
            f"<= {threshold:.3e}, det winding {report.det_winding})",
            report=report,
        )

    # U T = R  <=>  T^T U^T = R^T, solved through a QR decomposition
    q, r = scipy.linalg.qr(system.T)
    unknowns = scipy.linalg.solve_triangular(r, q.conj().T @ rhs.T).T
    blocks = [unknowns[:, (j - 1) * n:j * n] for j in range(m, 0, -1)]
    z = LaurentLoop(np.stack(blocks + [np.eye(n)]), -m)

    zx = multiply(z, x)
    x_plus, _ = truncate(zx, (0, max(zx.d_max, 0)))
    x_minus = invert(z, (-2 * m, 0), tol=None).with_coeff(0, np.eye(n)).trimmed(1e-15)
    residual = sup_norm(x - multiply(x_minus, x_plus))
    return BirkhoffFactors(
        x_minus=x_minus,
        x_plus=x_plus,
        residual=residual,
        toeplitz_smallest_singular_value=smin,
        condition=smax / smin,
        truncation=m,
        indices=(0,) * n,
    )


def birkhoff_factor(
    x: LaurentLoop,
    m: int = DEFAULT_TRUNCATION,
    tol: float = DEFAULT_TOL,
    order: str = "left",
) -> BirkhoffFactors:
    """Factor x = x_minus * x_plus with x_minus(inf) = I.

    With ``order="right"`` the splitting is x = x_plus * x_minus with
    x_plus(0) = I, obtained by reversing degrees.
    """
    if order == "right":
        left = birkhoff_factor(x.reversed(), m, tol)
        return replace(
            left,
            x_minus=left.x_plus.reversed(),
            x_plus=left.x_minus.reversed(),
            order="right",
        )
    if order != "left":
        raise ParameterViolation(f"order must be 'left' or 'right', got {order!r}")
    if m < 1:
        raise ParameterViolation(f"Truncation m must be positive, got {m}")

    check_invertible(to_samples(x, sample_count(x.width, minimum=8 * x.size)))
    factors = _attempt(x, m)
    if factors.residual > tol:
        logger.info(
            f"Birkhoff residual {factors.residual:.2e} > {tol:.1e} at m={m}; "
            f"retrying at m={2 * m}"
        )
        factors = _attempt(x, 2 * m)
        if factors.residual > tol:
            raise ResidualTooLarge(
                f"Birkhoff residual {factors.residual:.3e} exceeds tol {tol:.1e} "
                f"at m={2 * m}",
                residual=factors.residual,
                tol=tol,
            )
    return factors


def factor_in_form(
    form: RealFormSpec,
    x: LaurentLoop,
    m: int = DEFAULT_TRUNCATION,
    tol: float = DEFAULT_TOL,
) -> BirkhoffFactors:
    """Birkhoff factorization certified to stay inside the real form."""
    residual = fixed_residual(form, x)
    if residual > tol:
        raise FormViolation(
            f"Input is not in form {form.name} (residual {residual:.3e} > {tol:.1e})",
            residual=residual,
        )
    factors = birkhoff_factor(x, m, tol)
    membership = (
        fixed_residual(form, factors.x_minus),
        fixed_residual(form, factors.x_plus),
    )
    if max(membership) > 10 * tol:
        raise FactorFormViolation(
            f"Factors leave form {form.name}: residuals "
            f"{membership[0]:.3e}, {membership[1]:.3e}",
            residuals=membership,
        )
    return replace(factors, membership=membership)


def retraction(x: LaurentLoop, t: float, side: str = "plus") -> LaurentLoop:
    """gamma_t(lam) = x(t lam) (plus side) or x(lam / t) (minus side)."""
    if side not in SIDES:
        raise ParameterViolation(f"side must be one of {SIDES}, got {side!r}")
    if not 0.0 <= t <= 1.0:
        raise ParameterViolation(f"Retraction parameter must lie in [0, 1], got {t}")
    if side == "plus" and x.d_min < 0:
        raise WrongSidedInput(f"Plus-side retraction needs degrees >= 0, window {x.window}")
    if side == "minus" and x.d_max > 0:
        raise WrongSidedInput(f"Minus-side retraction needs degrees <= 0, window {x.window}")
    factors = np.power(float(t), np.abs(x.degrees).astype(float))
    return LaurentLoop(x.coeffs * factors[:, np.newaxis, np.newaxis], x.d_min)


def retract_factors(factors: BirkhoffFactors, t: float) -> LaurentLoop:
    """gamma_t applied to both factors of a left splitting, multiplied back."""
    if factors.order != "left":
        raise ParameterViolation("retract_factors expects a left splitting")
    return multiply(
        retraction(factors.x_minus, t, "minus"),
        retraction(factors.x_plus, t, "plus"),
    )


def uniqueness_gap(
    x: LaurentLoop, m: int = DEFAULT_TRUNCATION, step: int = 4, tol: float = DEFAULT_TOL
) -> float:
    """Coefficient distance between the x_minus factors at m and m + step."""
    first = birkhoff_factor(x, m, tol).x_minus
    second = birkhoff_factor(x, m + step, tol).x_minus
    return float(np.max(np.abs((first - second).coeffs)))

