"""
Seeded verification batteries behind ``twistloop verify``.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np

from .birkhoff import certify_big_cell, factor_in_form, retraction
from .errors import LogBranchFailure, ParameterViolation, TwistLoopError
from .integrable import (
    GridFrame,
    coset_gap,
    dress,
    maurer_cartan,
    vacuum_frame,
)
from .involutions import (
    CatalogEntry,
    algebra_project,
    curved_flat_form,
    fixed_residual,
    random_constant,
    random_loop,
    real_linear_form,
    unitary_entry,
)
from .iwasawa import coset_representative, iwasawa_factor, perturb, verify_uniqueness
from .loops import LaurentLoop, evaluate, exp_loop, sup_norm, winding_det
from .utils import RunConfig

FACTOR_TOL = 1e-8
MEMBERSHIP_TOL = 1e-7
REALITY_TOL = 1e-8
RETRACTION_TOL = 1e-11
UNIQUENESS_TOL = 1e-8
LEAKAGE_SPACING = 1e-3
CONTINUITY_RATIO = 50.0
COMPOSITION_TOL = 1e-6
RETRACTION_TIMES = (0.0, 0.25, 0.5, 0.75, 1.0)
SUITES = (
    "thm1", "thm1a", "thm2", "thm2a", "dressing",
    "reality", "winding", "retraction", "contrast",
)


@dataclass
class CheckResult:
    name: str
    trials: int
    failures: int
    worst_residual: float
    tolerance: float
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.worst_residual <= self.tolerance

    def as_dict(self, include_timing: bool = False) -> Dict:
        data = {
            "name": self.name,
            "trials": self.trials,
            "failures": self.failures,
            "worst_residual": self.worst_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }
        if include_timing:
            data["wall_time"] = self.wall_time
        return data


@dataclass
class VerifyReport:
    suite: str
    seed: int
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def as_dict(self, include_timing: bool = False) -> Dict:
        """Machine-readable form; timings are left out unless asked for."""
        return {
            "suite": self.suite,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [c.as_dict(include_timing) for c in self.checks],
        }


class VerificationHarness:
    """Run the named suites at the scale given by a RunConfig."""

    def __init__(self, config: RunConfig):
        """Initialize the harness."""
        if config.seed is None:
            raise ParameterViolation("Verification runs need a seed")
        self.config = config
        self.logger = logging.getLogger(__name__)

    def run(self, suite: str) -> VerifyReport:
        """Run one suite; failing trials become report entries."""
        if suite not in SUITES:
            raise ParameterViolation(f"Unknown suite {suite!r}; choose from {', '.join(SUITES)}")
        self.logger.info(f"Running suite {suite} with {self.config.trials} trials")
        report = VerifyReport(suite, self.config.seed)
        getattr(self, f"_suite_{suite}")(report)
        return report

    def _check(
        self,
        report: VerifyReport,
        name: str,
        tolerance: float,
        trials: int,
        trial: Callable[[int], float],
    ) -> CheckResult:
        """Evaluate ``trial(i)`` for every i; errors count as failures."""
        start = time.perf_counter()
        failures = 0
        worst = 0.0
        for i in range(trials):
            try:
                residual = float(trial(i))
            except TwistLoopError as e:
                self.logger.warning(f"{name}: trial {i} failed: {e}")
                failures += 1
                continue
            if not residual <= tolerance:
                failures += 1
            worst = max(worst, residual)
        result = CheckResult(
            name, trials, failures, worst, tolerance, time.perf_counter() - start
        )
        self.logger.info(
            f"{name}: {failures}/{trials} failures, worst {worst:.2e}"
        )
        report.checks.append(result)
        return result

    def _seed(self, i: int, offset: int = 0) -> int:
        return self.config.seed + 7919 * offset + i

    def _loop(self, entry: CatalogEntry, i: int, offset: int = 0) -> LaurentLoop:
        return random_loop(
            entry.form, self.config.degree, self.config.amplitude, self._seed(i, offset)
        )

    def _unitary_entries(self) -> List[CatalogEntry]:
        return [unitary_entry(self.config.n, 1), unitary_entry(self.config.n, -1)]

    def _curved_flat(self) -> CatalogEntry:
        return curved_flat_form(self.config.n, self.config.k)

    def _factor_checks(self, report: VerifyReport, entries: List[CatalogEntry]) -> None:
        config = self.config
        for offset, entry in enumerate(entries):
            cache: Dict[int, Tuple[float, float]] = {}

            def factor(i: int, entry=entry, offset=offset, cache=cache) -> float:
                factors = factor_in_form(
                    entry.form, self._loop(entry, i, offset), config.trunc, config.tol
                )
                cache[i] = (factors.residual, max(factors.membership))
                return factors.residual

            self._check(report, f"{entry.name}: factorization", FACTOR_TOL, config.trials, factor)
            self._check(
                report,
                f"{entry.name}: factor membership",
                MEMBERSHIP_TOL,
                len(cache),
                lambda j, cache=cache: list(cache.values())[j][1],
            )

    def _suite_thm1(self, report: VerifyReport) -> None:
        self._factor_checks(report, self._unitary_entries())

    def _suite_thm1a(self, report: VerifyReport) -> None:
        self._factor_checks(report, [self._curved_flat()])

    def _suite_winding(self, report: VerifyReport) -> None:
        for offset, entry in enumerate(self._unitary_entries()):
            self._check(
                report,
                f"{entry.name}: det winding",
                0.0,
                self.config.trials,
                lambda i, entry=entry, offset=offset: abs(
                    winding_det(self._loop(entry, i, offset))
                ),
            )

    def _suite_reality(self, report: VerifyReport) -> None:
        checks = [
            (unitary_entry(self.config.n, 1), (1.0, -1.0), False),
            (unitary_entry(self.config.n, -1), (1j, -1j), False),
            (self._curved_flat(), (1j, -1j), True),
        ]
        for offset, (entry, points, real) in enumerate(checks):

            def trial(i: int, entry=entry, offset=offset, points=points, real=real) -> float:
                x = self._loop(entry, i, offset)
                worst = 0.0
                for lam in points:
                    g = evaluate(x, lam)
                    worst = max(worst, np.linalg.norm(g.conj().T @ g - np.eye(x.size), 2))
                    if real:
                        worst = max(worst, float(np.max(np.abs(g.imag))))
                return worst

            self._check(report, f"{entry.name}: reality at {points}", REALITY_TOL,
                        self.config.trials, trial)

    def _suite_retraction(self, report: VerifyReport) -> None:
        config = self.config
        entry = self._curved_flat()

        def trial(i: int) -> float:
            x_plus = factor_in_form(entry.form, self._loop(entry, i), config.trunc, config.tol).x_plus
            base = fixed_residual(entry.form, x_plus)
            worst = 0.0
            for t in RETRACTION_TIMES:
                gamma = retraction(x_plus, t, "plus")
                worst = max(worst, fixed_residual(entry.form, gamma) - base)
            if not np.array_equal(retraction(x_plus, 1.0).coeffs, x_plus.coeffs):
                return float("inf")
            start = retraction(x_plus, 0.0)
            if not np.array_equal(start.coeff(0), x_plus.coeff(0)) or np.any(start.coeffs[1:]):
                return float("inf")
            return max(worst, 0.0)

        self._check(report, f"{entry.name}: retraction stays in form", RETRACTION_TOL,
                    config.trials, trial)

    def _iwasawa_checks(self, report: VerifyReport, entry: CatalogEntry) -> None:
        config = self.config
        m = config.trunc
        branch_failures = []

        def factor(i: int) -> float:
            try:
                fac = iwasawa_factor(entry.form, entry.tau, self._loop(entry, i), m, config.tol)
            except LogBranchFailure:
                branch_failures.append(i)
                raise
            return max(fac.residual, fac.z_fixed_residual)

        def uniqueness(i: int) -> float:
            x = self._loop(entry, i)
            fac = iwasawa_factor(entry.form, entry.tau, x, m, config.tol)
            h0 = random_constant(entry.form, self._seed(i, 1), extra=(entry.tau,))
            moved = perturb(fac, h0)
            h = verify_uniqueness(x, fac, moved, entry.tau, entry.form)
            restored = coset_representative(moved, entry.tau)
            return max(
                float(np.max(np.abs((restored.z_tau - fac.z_tau).coeffs))),
                float(np.linalg.norm(h - h0, 2)) / max(1.0, float(np.linalg.norm(h0, 2))),
            )

        def continuity(i: int) -> float:
            x = self._loop(entry, i)
            rng = np.random.default_rng(self._seed(i, 2))
            shape = (3, x.size, x.size)
            eta = algebra_project(
                entry.form, LaurentLoop(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), -1)
            )
            base = iwasawa_factor(entry.form, entry.tau, x, m, config.tol).z_tau
            worst = 0.0
            for s in (1e-3, 2e-3):
                moved = x @ exp_loop(eta.scale(s))
                z = iwasawa_factor(entry.form, entry.tau, moved, m, config.tol).z_tau
                worst = max(worst, sup_norm(z - base) / sup_norm(moved - x))
            return worst

        self._check(report, f"{entry.name}: iwasawa residuals", FACTOR_TOL, config.trials, factor)
        self._check(report, f"{entry.name}: log branch failures", 0.0, 1,
                    lambda _: float(len(branch_failures)))
        self._check(report, f"{entry.name}: coset uniqueness", UNIQUENESS_TOL,
                    config.trials, uniqueness)
        self._check(report, f"{entry.name}: continuity ratio", CONTINUITY_RATIO,
                    min(config.trials, 5), continuity)

    def _suite_thm2(self, report: VerifyReport) -> None:
        self._iwasawa_checks(report, unitary_entry(self.config.n, 1))

    def _suite_thm2a(self, report: VerifyReport) -> None:
        self._iwasawa_checks(report, self._curved_flat())

    def _suite_dressing(self, report: VerifyReport) -> None:
        config = self.config
        entry = self._curved_flat()
        frame = vacuum_frame(config.n, config.k, config.grid, config.h)
        spot = vacuum_frame(config.n, config.k, (3,) * len(config.grid), LEAKAGE_SPACING)
        vacuum_leakage = maurer_cartan(spot).interior_leakage

        def dressed(g: LaurentLoop, base: GridFrame = frame) -> GridFrame:
            return dress(base, g, config.trunc, config.tol, config.workers)

        def minus(i: int, offset: int) -> LaurentLoop:
            return random_loop(entry.form, 1, config.amplitude, self._seed(i, offset), side="minus")

        def composition(i: int) -> float:
            g, h = minus(i, 3), minus(i, 4)
            stepwise = dressed(g, dressed(h))
            direct = dressed(g @ h)
            return max(
                coset_gap(a, b) for a, b in zip(stepwise.values, direct.values)
            )

        def leakage(i: int) -> float:
            return maurer_cartan(dressed(minus(i, 3), spot)).interior_leakage

        self._check(report, "dressing composition", COMPOSITION_TOL, config.trials, composition)
        self._check(report, "dressed leakage", 10 * vacuum_leakage, config.trials, leakage)

    def _suite_contrast(self, report: VerifyReport) -> None:
        form = real_linear_form(2)
        cases = [
            ("diag(lam, 1/lam)", LaurentLoop.diagonal_monomials([1, -1]), 0),
            ("diag(lam^2, 1)", LaurentLoop.diagonal_monomials([2, 0]), 2),
        ]
        for label, x, winding in cases:

            def trial(_: int, x=x, winding=winding) -> float:
                cell = certify_big_cell(x, self.config.trunc)
                wrong = cell.in_big_cell or cell.det_winding != winding
                return max(fixed_residual(form, x), float(wrong))

            self._check(report, f"{label} outside the big cell, winding {winding}", 0.0, 1, trial)


def run_suite(config: RunConfig, suite: str) -> VerifyReport:
    return VerificationHarness(config).run(suite)

