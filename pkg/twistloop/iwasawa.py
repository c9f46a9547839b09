"""
Splitting x = z_tau * y_plus against a second-kind involution tau.

One Birkhoff factorization of u = tau(x)^-1 x reduces the problem to a
constant c with tau(c) = c^-1, which is split by the principal square
root b = exp(log(c) / 2).  Canonical representatives fix the remaining
right-multiplication freedom by the tau-fixed constants.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np
import scipy.linalg

from .birkhoff import DEFAULT_TOL, DEFAULT_TRUNCATION, birkhoff_factor
from .errors import (
    BirkhoffSingular,
    LogBranchFailure,
    NonCanonical,
    NotConstant,
    NotInBigCell,
    NotInForm,
    ParameterViolation,
    ResidualTooLarge,
    SymmetryResidual,
)
from .involutions import (
    COMMUTATION_TOL,
    InvolutionSpec,
    RealFormSpec,
    apply,
    commutation_residual,
    fixed_residual,
)
from .loops import LaurentLoop, evaluate, invert, sup_norm, truncate, window_hull

logger = logging.getLogger(__name__)

UNIQUENESS_TOL = 1e-8
UNIQUENESS_POINTS = 16


@dataclass(frozen=True, eq=False)
class IwasawaFactors:
    z_tau: LaurentLoop
    y_plus: LaurentLoop
    c: np.ndarray
    b: np.ndarray
    residual: float
    z_fixed_residual: float
    truncation: int

    @property
    def diagnostics(self) -> Dict:
        return {
            "residual": self.residual,
            "z_fixed_residual": self.z_fixed_residual,
            "truncation": self.truncation,
            "c_spectrum": [[z.real, z.imag] for z in np.linalg.eigvals(self.c)],
        }


def _on_negative_axis(spectrum: np.ndarray) -> bool:
    scale = np.maximum(1.0, np.abs(spectrum))
    return bool(np.any((spectrum.real <= 0) & (np.abs(spectrum.imag) <= 1e-12 * scale)))


def principal_log(c: np.ndarray, what: str = "c") -> np.ndarray:
    """Principal matrix logarithm; LogBranchFailure on the closed negative axis."""
    spectrum = np.linalg.eigvals(c)
    if _on_negative_axis(spectrum):
        logger.warning(f"Spectrum of {what} touches the negative real axis: {spectrum}")
        raise LogBranchFailure(
            f"{what} has an eigenvalue on the closed negative real axis; "
            f"no principal logarithm",
            spectrum=spectrum,
        )
    return scipy.linalg.logm(c)


def check_partner(form: RealFormSpec, tau: InvolutionSpec) -> None:
    if tau.kind != "second":
        raise ParameterViolation(f"{tau.name or 'tau'} must be of the second kind")
    for spec in form.involutions:
        residual = commutation_residual(spec, tau)
        if residual > COMMUTATION_TOL:
            raise NotInForm(
                f"{tau.name or 'tau'} does not commute with {spec.name} "
                f"(residual {residual:.2e})",
                residual=residual,
            )


def iwasawa_factor(
    form: RealFormSpec,
    tau: InvolutionSpec,
    x: LaurentLoop,
    m: int = DEFAULT_TRUNCATION,
    tol: float = DEFAULT_TOL,
    birkhoff_m: Optional[int] = None,
) -> IwasawaFactors:
    """Canonical splitting x = z_tau * y_plus with tau(z_tau) = z_tau.

    The Birkhoff step on u = tau(x)^-1 x uses truncation ``birkhoff_m``
    (default 2 * m).
    """
    check_partner(form, tau)
    residual = fixed_residual(form, x)
    if residual > tol:
        raise NotInForm(
            f"Input is not in form {form.name} (residual {residual:.3e} > {tol:.1e})",
            residual=residual,
        )

    tx = apply(tau, x, tol)
    u = (invert(tx, window_hull(tx, pad=tx.width), tol) @ x).trimmed(1e-15)
    symmetry = sup_norm(apply(tau, u, tol) @ u - LaurentLoop.identity(x.size))
    if symmetry > 10 * tol:
        raise SymmetryResidual(
            f"tau(u) u differs from I by {symmetry:.3e}", residual=symmetry
        )

    birkhoff_m = birkhoff_m or 2 * m
    try:
        w = birkhoff_factor(u, birkhoff_m, tol)
    except NotInBigCell as e:
        raise BirkhoffSingular(f"Birkhoff step failed: {e}", report=e.report)

    auto = tau.automorphism
    c = auto.on_matrix(w.x_plus.coeff(0))
    c_symmetry = float(np.linalg.norm(auto.on_matrix(c) @ c - np.eye(x.size), 2))
    if c_symmetry > 10 * tol * max(1.0, np.linalg.norm(c, 2) ** 2):
        raise SymmetryResidual(
            f"tau(c) c differs from I by {c_symmetry:.3e}", residual=c_symmetry
        )

    log_c = principal_log(c)
    log_symmetry = float(np.linalg.norm(auto.on_algebra(log_c) + log_c, 2))
    if log_symmetry > 10 * tol * max(1.0, np.linalg.norm(log_c, 2)):
        raise SymmetryResidual(
            f"tau(log c) differs from -log c by {log_symmetry:.3e}",
            residual=log_symmetry,
        )
    b = scipy.linalg.expm(log_c / 2)

    y_plus = w.x_plus.left(b)
    reach = max(-x.d_min, x.d_max, 0)
    y_inverse = invert(y_plus, (0, 2 * birkhoff_m), tol=None)
    z_tau, _ = truncate(x @ y_inverse, (-reach, reach))

    residual = sup_norm(x - z_tau @ y_plus)
    if residual > tol:
        raise ResidualTooLarge(
            f"Iwasawa residual {residual:.3e} exceeds tol {tol:.1e}",
            residual=residual,
            tol=tol,
        )
    z_residual = fixed_residual(tau, z_tau)
    if z_residual > tol:
        raise SymmetryResidual(
            f"z_tau is not fixed by {tau.name or 'tau'} ({z_residual:.3e})",
            residual=z_residual,
        )
    factors = IwasawaFactors(
        z_tau=z_tau,
        y_plus=y_plus,
        c=c,
        b=b,
        residual=residual,
        z_fixed_residual=z_residual,
        truncation=birkhoff_m,
    )
    return coset_representative(factors, tau)


def coset_representative(
    fac: IwasawaFactors, tau: InvolutionSpec, tol: float = UNIQUENESS_TOL
) -> IwasawaFactors:
    """Normalize so that y_plus(0) = s with s^2 = tau(a0)^-1 a0 (principal root).

    Moves the tau-fixed constant h = a0 s^-1 from y_plus to z_tau.
    """
    auto = tau.automorphism
    a0 = fac.y_plus.coeff(0)
    square = np.linalg.solve(auto.on_matrix(a0), a0)
    try:
        s = scipy.linalg.expm(principal_log(square, "tau(a0)^-1 a0") / 2)
    except LogBranchFailure as e:
        raise NonCanonical(f"Cannot normalize the constant part: {e}")
    h = a0 @ np.linalg.inv(s)
    drift = float(np.linalg.norm(auto.on_matrix(h) - h, 2))
    if drift > tol * max(1.0, np.linalg.norm(h, 2)):
        raise NonCanonical(f"Normalizing constant is not tau-fixed (drift {drift:.3e})")
    s_inverse = np.linalg.inv(s)
    return replace(
        fac,
        z_tau=fac.z_tau.right(h),
        y_plus=fac.y_plus.left(np.linalg.inv(h)),
        c=s_inverse @ s_inverse,
        b=s_inverse,
    )


def perturb(fac: IwasawaFactors, h: np.ndarray) -> IwasawaFactors:
    """(z h, h^-1 y): the same splitting with a different coset choice."""
    return replace(
        fac, z_tau=fac.z_tau.right(h), y_plus=fac.y_plus.left(np.linalg.inv(h))
    )


def verify_uniqueness(
    x: LaurentLoop,
    fac1: IwasawaFactors,
    fac2: IwasawaFactors,
    tau: InvolutionSpec,
    form: Optional[RealFormSpec] = None,
    tol: float = UNIQUENESS_TOL,
) -> np.ndarray:
    """The constant h with fac2.z_tau = fac1.z_tau * h.

    Both factorizations must reproduce x (ResidualTooLarge otherwise).
    Raises NotConstant unless h is independent of lambda, tau-fixed and
    (when ``form`` is given) in the constant subgroup of the form.
    """
    bound = tol * max(1.0, sup_norm(x))
    for label, fac in (("first", fac1), ("second", fac2)):
        residual = sup_norm(x - fac.z_tau @ fac.y_plus)
        if residual > bound:
            raise ResidualTooLarge(
                f"The {label} factorization does not reproduce x (residual {residual:.3e})",
                residual=residual,
                tol=bound,
            )
    points = np.exp(2j * np.pi * np.arange(UNIQUENESS_POINTS) / UNIQUENESS_POINTS)
    samples = np.array([
        np.linalg.solve(evaluate(fac1.z_tau, lam), evaluate(fac2.z_tau, lam))
        for lam in points
    ])
    h = samples.mean(axis=0)
    scale = max(1.0, float(np.linalg.norm(h, 2)))
    variation = float(np.max(np.linalg.norm(samples - h, ord=2, axis=(1, 2))))
    if variation > tol * scale:
        raise NotConstant(
            f"z_tau factors differ by a non-constant loop (variation {variation:.3e})",
            variation=variation,
        )
    drift = float(np.linalg.norm(tau.automorphism.on_matrix(h) - h, 2))
    if drift > tol * scale:
        raise NotConstant(f"Connecting constant is not tau-fixed ({drift:.3e})", variation=drift)
    if form is not None:
        residual = fixed_residual(form, LaurentLoop.constant(h))
        if residual > tol * scale:
            raise NotConstant(
                f"Connecting constant is not in form {form.name} ({residual:.3e})",
                variation=residual,
            )
    return h
