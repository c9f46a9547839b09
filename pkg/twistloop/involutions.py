"""
Finite-order automorphisms of matrix groups and their loop-group extensions.

Every automorphism is kept in the normal form ``g -> M c(g) M^-1`` where
``c`` is a composition of entrywise conjugation and inverse-transpose.
An involution of the loop group combines such an automorphism with a
substitution of the loop parameter: ``lam -> w lam`` (first kind) or
``lam -> w / lam`` (second kind), conjugated when the automorphism is
antilinear.
"""

import itertools
import logging
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .errors import (
    FormViolation,
    ParameterViolation,
    SizeMismatch,
    TruncationResidual,
)
from .loops import LaurentLoop, exp_loop, invert, sup_norm, window_hull

logger = logging.getLogger(__name__)

MAX_ORDER = 12
COMMUTATION_TOL = 1e-12
RANDOM_FORM_TOL = 1e-9
KINDS = ("first", "second")


@dataclass(frozen=True, eq=False)
class FiniteAutomorphism:
    """g -> M conj^a((g^T)^-1 if b else g) M^-1."""

    matrix: np.ndarray
    conjugate: bool = False
    inverse_transpose: bool = False
    label: str = ""

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise SizeMismatch(f"Automorphism matrix must be square, got {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def identity(cls, size: int) -> "FiniteAutomorphism":
        return cls(np.eye(size), label="id")

    @classmethod
    def adjoint(cls, q, label: str = "adq") -> "FiniteAutomorphism":
        """Conjugation g -> Q g Q^-1 by a matrix with Q^2 = I."""
        q = np.asarray(q, dtype=complex)
        if not np.allclose(q @ q, np.eye(q.shape[0]), atol=1e-12):
            raise ParameterViolation("Conjugation matrix must satisfy Q^2 = I")
        return cls(q, label=label)

    @classmethod
    def entrywise_conjugation(cls, size: int) -> "FiniteAutomorphism":
        return cls(np.eye(size), conjugate=True, label="conj")

    @classmethod
    def inverse_conjugate_transpose(cls, size: int) -> "FiniteAutomorphism":
        return cls(np.eye(size), conjugate=True, inverse_transpose=True, label="ict")

    @classmethod
    def transpose_inverse(cls, size: int) -> "FiniteAutomorphism":
        return cls(np.eye(size), inverse_transpose=True, label="it")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def antilinear(self) -> bool:
        return self.conjugate

    @cached_property
    def matrix_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def _core(self, g: np.ndarray) -> np.ndarray:
        if self.inverse_transpose:
            g = np.swapaxes(np.linalg.inv(g), -1, -2)
        if self.conjugate:
            g = np.conj(g)
        return g

    def on_matrix(self, g) -> np.ndarray:
        """Action on a group element (or a stack of them)."""
        return self.matrix @ self._core(np.asarray(g, dtype=complex)) @ self.matrix_inverse

    def on_algebra(self, xi) -> np.ndarray:
        """Induced action on Lie algebra elements (or stacks)."""
        xi = np.asarray(xi, dtype=complex)
        if self.inverse_transpose:
            xi = -np.swapaxes(xi, -1, -2)
        if self.conjugate:
            xi = np.conj(xi)
        return self.matrix @ xi @ self.matrix_inverse

    def then(self, inner: "FiniteAutomorphism") -> "FiniteAutomorphism":
        """The composition ``self o inner``."""
        if inner.size != self.size:
            raise SizeMismatch(f"Cannot compose sizes {self.size} and {inner.size}")
        return FiniteAutomorphism(
            self.matrix @ self._core(inner.matrix),
            conjugate=self.conjugate != inner.conjugate,
            inverse_transpose=self.inverse_transpose != inner.inverse_transpose,
            label=f"{self.label}*{inner.label}",
        )

    def is_identity(self, atol: float = 1e-12) -> bool:
        if self.conjugate or self.inverse_transpose:
            return False
        scale = self.matrix[0, 0]
        return abs(scale) > atol and np.allclose(
            self.matrix / scale, np.eye(self.size), atol=atol
        )

    @cached_property
    def order(self) -> int:
        """Smallest r with theta^r = id on 20 random matrices."""
        rng = np.random.default_rng(0)
        samples = np.eye(self.size) + 0.3 * (
            rng.standard_normal((20, self.size, self.size))
            + 1j * rng.standard_normal((20, self.size, self.size))
        )
        current = samples
        for r in range(1, MAX_ORDER + 1):
            current = self.on_matrix(current)
            if np.max(np.abs(current - samples)) <= 1e-12 * np.max(np.abs(samples)):
                return r
        raise ParameterViolation(
            f"Automorphism {self.label} has no finite order up to {MAX_ORDER}"
        )


@dataclass(frozen=True, eq=False)
class InvolutionSpec:
    """A loop-group automorphism of the first or second kind."""

    automorphism: FiniteAutomorphism
    kind: str = "first"
    rotation: complex = 1.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterViolation(f"Kind must be one of {KINDS}, got {self.kind!r}")
        rotation = complex(self.rotation)
        if abs(abs(rotation) - 1.0) > 1e-12:
            raise ParameterViolation(f"Rotation {rotation} is not on the unit circle")
        object.__setattr__(self, "rotation", rotation)

    @property
    def size(self) -> int:
        return self.automorphism.size

    @property
    def conjugates_lambda(self) -> bool:
        return self.automorphism.antilinear

    @property
    def reflects(self) -> bool:
        return self.kind == "second"

    def is_identity(self) -> bool:
        return (
            self.kind == "first"
            and abs(self.rotation - 1.0) <= 1e-12
            and self.automorphism.is_identity()
        )

    @cached_property
    def order(self) -> int:
        current = self
        for r in range(1, MAX_ORDER + 1):
            if current.is_identity():
                return r
            current = compose_specs(self, current)
        raise ParameterViolation(
            f"Involution {self.name or self.automorphism.label} has no finite order"
        )

    def __repr__(self) -> str:
        return (
            f"InvolutionSpec({self.name or self.automorphism.label}, "
            f"kind={self.kind}, rotation={self.rotation:.3g})"
        )


def identity_spec(size: int) -> InvolutionSpec:
    return InvolutionSpec(FiniteAutomorphism.identity(size), name="id")


def compose_specs(outer: InvolutionSpec, inner: InvolutionSpec) -> InvolutionSpec:
    """The loop-group automorphism ``outer o inner`` in normal form."""
    rotation_outer = outer.rotation
    if inner.conjugates_lambda:
        rotation_outer = np.conj(rotation_outer)
    inner_sign = -1 if inner.reflects else 1
    reflects = outer.reflects != inner.reflects
    return InvolutionSpec(
        outer.automorphism.then(inner.automorphism),
        kind="second" if reflects else "first",
        rotation=inner.rotation * rotation_outer ** inner_sign,
        name=f"{outer.name}*{inner.name}",
    )


@dataclass(frozen=True, eq=False)
class RealFormSpec:
    """A commuting family of first-kind involutions, at least one antilinear."""

    name: str
    involutions: Tuple[InvolutionSpec, ...]
    size: int

    def __post_init__(self):
        object.__setattr__(self, "involutions", tuple(self.involutions))
        if not self.involutions:
            raise ParameterViolation(f"Real form {self.name} has no involutions")
        for spec in self.involutions:
            if spec.size != self.size:
                raise SizeMismatch(
                    f"Involution {spec.name} has size {spec.size}, form has {self.size}"
                )
            if spec.kind != "first":
                raise ParameterViolation(
                    f"Real form {self.name} admits first-kind involutions only"
                )
        if not any(spec.conjugates_lambda for spec in self.involutions):
            raise ParameterViolation(
                f"Real form {self.name} needs an antilinear base involution"
            )
        for a, b in itertools.combinations(self.involutions, 2):
            residual = commutation_residual(a, b)
            if residual > COMMUTATION_TOL:
                raise ParameterViolation(
                    f"Involutions {a.name} and {b.name} do not commute "
                    f"(residual {residual:.2e})"
                )

    @property
    def base(self) -> InvolutionSpec:
        return next(s for s in self.involutions if s.conjugates_lambda)

    @cached_property
    def group(self) -> Tuple[InvolutionSpec, ...]:
        return generated_group(self.involutions)


@dataclass(frozen=True)
class CatalogEntry:
    """A real form together with its second-kind partner."""

    name: str
    form: RealFormSpec
    tau: Optional[InvolutionSpec] = None


Involutive = Union[InvolutionSpec, RealFormSpec]


def _check_size(spec, x: LaurentLoop) -> None:
    if spec.size != x.size:
        raise SizeMismatch(f"Involution acts on size {spec.size}, loop has size {x.size}")


def substitute(spec: InvolutionSpec, x: LaurentLoop) -> LaurentLoop:
    """Holomorphic part of the parameter substitution: c_d -> w**d c_d,
    moved to degree -d for the second kind."""
    factors = np.power(spec.rotation, x.degrees.astype(float))
    scaled = LaurentLoop(x.coeffs * factors[:, np.newaxis, np.newaxis], x.d_min)
    return scaled.reversed() if spec.reflects else scaled


def apply(spec: InvolutionSpec, x: LaurentLoop, tol: Optional[float] = None) -> LaurentLoop:
    """Action of a loop-group automorphism on a group-valued loop.

    Inverse-transpose types go through a sampled loop inverse; pass
    ``tol`` to have its residual checked.
    """
    _check_size(spec, x)
    auto = spec.automorphism
    z = substitute(spec, x)
    if auto.conjugate:
        z = z.map_coeffs(np.conj)
    if auto.inverse_transpose:
        z = invert(z.transpose(), window_hull(z, pad=2 * z.width), tol)
    return z.left(auto.matrix).right(auto.matrix_inverse)


def apply_algebra(spec: InvolutionSpec, xi: LaurentLoop) -> LaurentLoop:
    """Linearized action on a Lie-algebra-valued loop (coefficient-local)."""
    _check_size(spec, xi)
    return substitute(spec, xi).map_coeffs(spec.automorphism.on_algebra)


def fixed_residual(spec: Involutive, x: LaurentLoop) -> float:
    """sup-norm distance from being fixed; the max over a real form."""
    if isinstance(spec, RealFormSpec):
        return max(fixed_residual(s, x) for s in spec.involutions)
    _check_size(spec, x)
    auto = spec.automorphism
    if not auto.inverse_transpose:
        return sup_norm(apply(spec, x) - x)
    # theta(x) = x  <=>  T(z) M^-1 x M = I, with z the substituted loop
    z = substitute(spec, x)
    if auto.conjugate:
        z = z.map_coeffs(np.conj)
    pulled = x.left(auto.matrix_inverse).right(auto.matrix)
    return sup_norm(z.transpose() @ pulled - LaurentLoop.identity(x.size))


def algebra_residual(spec: Involutive, xi: LaurentLoop) -> float:
    if isinstance(spec, RealFormSpec):
        return max(algebra_residual(s, xi) for s in spec.involutions)
    return sup_norm(apply_algebra(spec, xi) - xi)


def _random_algebra_loops(size: int, count: int, degree: int = 2) -> List[LaurentLoop]:
    rng = np.random.default_rng(0)
    width = 2 * degree + 1
    return [
        LaurentLoop(
            rng.standard_normal((width, size, size))
            + 1j * rng.standard_normal((width, size, size)),
            -degree,
        )
        for _ in range(count)
    ]


def commutation_residual(a: InvolutionSpec, b: InvolutionSpec, count: int = 20) -> float:
    """Largest ||ab(xi) - ba(xi)|| over random algebra loops."""
    worst = 0.0
    for xi in _random_algebra_loops(a.size, count):
        ab = apply_algebra(a, apply_algebra(b, xi))
        ba = apply_algebra(b, apply_algebra(a, xi))
        worst = max(worst, sup_norm(ab - ba) / max(1.0, sup_norm(xi)))
    return worst


def generated_group(specs: Sequence[InvolutionSpec]) -> Tuple[InvolutionSpec, ...]:
    """All products of powers of a commuting family."""
    specs = list(specs)
    size = specs[0].size
    elements = []
    for exponents in itertools.product(*(range(s.order) for s in specs)):
        element = identity_spec(size)
        for spec, power in zip(specs, exponents):
            for _ in range(power):
                element = compose_specs(spec, element)
        elements.append(element)
    return tuple(elements)


def algebra_project(
    form: RealFormSpec,
    xi: LaurentLoop,
    extra: Iterable[InvolutionSpec] = (),
) -> LaurentLoop:
    """Average over the group generated by the linearized actions."""
    extra = tuple(extra)
    group = generated_group(form.involutions + extra) if extra else form.group
    total = None
    for element in group:
        term = apply_algebra(element, xi)
        total = term if total is None else total + term
    return total.scale(1.0 / len(group))


def random_loop(
    form: RealFormSpec,
    degree: int,
    amplitude: float,
    seed: int,
    side: str = "both",
    tol: float = 1e-13,
) -> LaurentLoop:
    """Seeded random element of the twisted loop group of ``form``.

    ``side`` restricts the Lie algebra element to degrees [-d, 0]
    ("minus") or [0, d] ("plus").
    """
    if degree < 1:
        raise ParameterViolation(f"degree must be >= 1, got {degree}")
    if not 0.0 <= amplitude <= 1.0:
        raise ParameterViolation(f"amplitude must lie in [0, 1], got {amplitude}")
    windows = {"both": (-degree, degree), "minus": (-degree, 0), "plus": (0, degree)}
    if side not in windows:
        raise ParameterViolation(f"side must be one of {sorted(windows)}, got {side!r}")
    if amplitude == 0.0:
        return LaurentLoop.identity(form.size)

    low, high = windows[side]
    rng = np.random.default_rng(seed)
    shape = (high - low + 1, form.size, form.size)
    xi = LaurentLoop(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), low)
    xi = algebra_project(form, xi)
    mass = float(sum(np.linalg.norm(c, 2) for c in xi.coeffs))
    if mass <= 1e-14:
        raise ParameterViolation(
            f"Form {form.name} has no algebra elements in window {(low, high)}"
        )
    x = exp_loop(xi.scale(amplitude / mass), tol, symmetric=(side == "both"))
    residual = fixed_residual(form, x)
    if residual > RANDOM_FORM_TOL:
        raise TruncationResidual(
            f"Random loop leaves form {form.name} by {residual:.2e}",
            residual=residual,
            tol=RANDOM_FORM_TOL,
        )
    logger.debug(f"random_loop seed={seed}: window {x.window}, form residual {residual:.1e}")
    return x


def random_constant(
    form: RealFormSpec,
    seed: int,
    amplitude: float = 0.5,
    extra: Iterable[InvolutionSpec] = (),
) -> np.ndarray:
    """Element of the identity component of the constant subgroup.

    With ``extra`` (e.g. a second-kind partner) the constant is also
    fixed by those automorphisms.
    """
    rng = np.random.default_rng(seed)
    shape = (1, form.size, form.size)
    xi = LaurentLoop(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), 0)
    xi = algebra_project(form, xi, extra)
    generator = xi.coeff(0)
    norm = np.linalg.norm(generator, 2)
    if norm <= 1e-14:
        return np.eye(form.size, dtype=complex)
    return scipy.linalg.expm(generator * (amplitude / norm))


def constant_part(form: RealFormSpec, x: LaurentLoop, tol: float = 1e-9) -> np.ndarray:
    """Degree-0 coefficient of x, checked to lie in the constant subgroup."""
    value = x.coeff(0)
    residual = fixed_residual(form, LaurentLoop.constant(value))
    if residual > tol:
        raise FormViolation(
            f"Constant part is not in form {form.name} (residual {residual:.2e})",
            residual=residual,
        )
    return value


def unitary_form(n: int, eps: int = 1) -> RealFormSpec:
    """Loops in U(n): rho(g) = (g^*)^-1 with lam -> eps conj(lam)."""
    if n < 1 or eps not in (1, -1):
        raise ParameterViolation(f"Invalid unitary form parameters n={n}, eps={eps}")
    rho = InvolutionSpec(
        FiniteAutomorphism.inverse_conjugate_transpose(n), "first", eps, name="rho"
    )
    return RealFormSpec(f"un({n},{eps})", (rho,), n)


def real_linear_form(n: int) -> RealFormSpec:
    """Entrywise conjugation with eps = 1 (the non-compact GL(n, R) form)."""
    if n < 1:
        raise ParameterViolation(f"Invalid matrix size n={n}")
    rho = InvolutionSpec(
        FiniteAutomorphism.entrywise_conjugation(n), "first", 1, name="rho"
    )
    return RealFormSpec(f"glr({n})", (rho,), n)


def reflection_tau(n: int, negative: int = 1, name: str = "tau") -> InvolutionSpec:
    """Ad_J o (lam -> 1/lam) with J = diag(I, -I_negative)."""
    j = np.diag([1.0] * (n - negative) + [-1.0] * negative)
    return InvolutionSpec(FiniteAutomorphism.adjoint(j, "adq"), "second", 1, name=name)


def curved_flat_matrices(n: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """P = diag(I_n, -I_{k+1}) and Q = diag(I_{n+1}, -I_k)."""
    p = np.diag([1.0] * n + [-1.0] * (k + 1))
    q = np.diag([1.0] * (n + 1) + [-1.0] * k)
    return p, q


def curved_flat_form(n: int, k: int) -> CatalogEntry:
    """SO(n+k+1, C) twisted by conjugation (eps = -1) and Ad_P (lam -> -lam)."""
    if n < 1 or k < max(n - 1, 0):
        raise ParameterViolation(
            f"Curved flats need n >= 1 and k >= n - 1, got n={n}, k={k}"
        )
    size = n + k + 1
    p, q = curved_flat_matrices(n, k)
    orthogonal = InvolutionSpec(
        FiniteAutomorphism.transpose_inverse(size), "first", 1, name="orthogonal"
    )
    rho = InvolutionSpec(
        FiniteAutomorphism.entrywise_conjugation(size), "first", -1, name="rho"
    )
    sigma = InvolutionSpec(FiniteAutomorphism.adjoint(p, "adp"), "first", -1, name="sigma")
    tau = InvolutionSpec(FiniteAutomorphism.adjoint(q, "adq"), "second", 1, name="tau")
    name = f"so-curved-flat({n},{k})"
    form = RealFormSpec(name, (rho, orthogonal, sigma), size)
    _check_partner(form, tau)
    return CatalogEntry(name, form, tau)


def _check_partner(form: RealFormSpec, tau: InvolutionSpec) -> None:
    for spec in form.involutions:
        residual = commutation_residual(spec, tau)
        if residual > COMMUTATION_TOL:
            raise ParameterViolation(
                f"Partner {tau.name} does not commute with {spec.name} ({residual:.2e})"
            )


def unitary_entry(n: int, eps: int = 1) -> CatalogEntry:
    form = unitary_form(n, eps)
    tau = reflection_tau(n)
    _check_partner(form, tau)
    return CatalogEntry(form.name, form, tau)


def real_linear_entry(n: int) -> CatalogEntry:
    form = real_linear_form(n)
    tau = reflection_tau(n)
    _check_partner(form, tau)
    return CatalogEntry(form.name, form, tau)


def builtin_forms(n: int = 2, k: int = 1) -> Dict[str, CatalogEntry]:
    """Catalog of the supported real forms at the given sizes."""
    entries = [
        unitary_entry(n, 1),
        unitary_entry(n, -1),
        real_linear_entry(n),
        curved_flat_form(n, k),
    ]
    return {entry.name: entry for entry in entries}


_FORM_PATTERN = re.compile(r"^\s*(un|glr|so-curved-flat)\s*(?:\(([^)]*)\))?\s*$")


def form_by_name(name: str, n: int = 2, k: int = 1) -> CatalogEntry:
    """Resolve ``un``, ``un(3,-1)``, ``glr(2)``, ``so-curved-flat(2,1)``.

    Omitted arguments fall back to ``n`` and ``k``.
    """
    match = _FORM_PATTERN.match(name or "")
    if not match:
        raise ParameterViolation(
            f"Unknown form {name!r}; expected un, glr or so-curved-flat"
        )
    family, raw_args = match.groups()
    try:
        args = [int(a) for a in raw_args.split(",")] if raw_args else []
    except ValueError:
        raise ParameterViolation(f"Form arguments must be integers: {name!r}")

    if family == "un":
        if len(args) > 2:
            raise ParameterViolation(f"un takes at most (n, eps): {name!r}")
        size = args[0] if args else n
        eps = args[1] if len(args) > 1 else 1
        return unitary_entry(size, eps)
    if family == "glr":
        if len(args) > 1:
            raise ParameterViolation(f"glr takes at most (n): {name!r}")
        return real_linear_entry(args[0] if args else n)
    if len(args) not in (0, 2):
        raise ParameterViolation(f"so-curved-flat takes (n, k): {name!r}")
    return curved_flat_form(*(args or [n, k]))
