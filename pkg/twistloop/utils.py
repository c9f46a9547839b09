"""
Utility functions for twistloop.
"""

import logging
import os
import tempfile
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import ParameterViolation

RANDOMIZED_COMMANDS = ("rand", "verify", "demo")


def setup_logging(level: str = "INFO") -> None:
    """Set up logging configuration."""
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one command-line run."""

    command: str
    form: str = "un"
    n: int = 2
    k: int = 1
    degree: int = 2
    amplitude: float = 0.5
    trunc: int = 16
    tol: float = 1e-9
    seed: Optional[int] = None
    grid: Tuple[int, ...] = (11, 11)
    h: float = 0.05
    lambda0: complex = 0.5j
    trials: int = 10
    out: Optional[str] = None
    workers: int = 0


def validate_run_config(config: RunConfig) -> None:
    """Validate run parameters before any computation starts."""
    if config.command in RANDOMIZED_COMMANDS and config.seed is None:
        raise ParameterViolation(f"--seed is required for '{config.command}'")

    if config.tol <= 0:
        raise ParameterViolation("tol must be positive")

    if config.h <= 0:
        raise ParameterViolation("grid spacing h must be positive")

    if config.n < 1:
        raise ParameterViolation("n must be at least 1")

    if config.k < config.n - 1:
        raise ParameterViolation(f"k must be at least n - 1 = {config.n - 1}")

    if config.degree < 1:
        raise ParameterViolation("degree must be at least 1")

    if not 0.0 <= config.amplitude <= 1.0:
        raise ParameterViolation("amplitude must lie in [0, 1]")

    if config.trunc < 1:
        raise ParameterViolation("trunc must be at least 1")

    if config.trials < 1:
        raise ParameterViolation("trials must be at least 1")

    if config.workers < 0:
        raise ParameterViolation("workers must be 0 (one per CPU) or positive")

    if any(count < 2 for count in config.grid):
        raise ParameterViolation("every grid axis needs at least 2 points")


def atomic_write(path: str, text: str) -> None:
    """Write text to path through a temporary file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", dir=directory, prefix=".tmp-", delete=False
    )
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, path)
    except BaseException:
        if os.path.exists(handle.name):
            os.remove(handle.name)
        raise


def format_cell_report(report) -> str:
    """Format a big-cell certificate for console output."""
    output = []
    output.append("BIG CELL CERTIFICATE:")
    output.append("-" * 40)
    output.append(f"In big cell: {'yes' if report.in_big_cell else 'no'}")
    output.append(f"Determinant winding: {report.det_winding}")
    output.append(
        f"Smallest singular value: {report.smallest_singular_value:.3e} "
        f"(threshold {report.threshold:.3e})"
    )
    output.append(f"Truncation m: {report.truncation}")
    return "\n".join(output)


def format_diagnostics(title: str, diagnostics: dict) -> str:
    """Format a factorization's diagnostics for console output."""
    output = []
    output.append("=" * 60)
    output.append(title)
    output.append("=" * 60)
    for key, value in diagnostics.items():
        if isinstance(value, float):
            value = f"{value:.3e}"
        output.append(f"{key}: {value}")
    output.append("=" * 60)
    return "\n".join(output)


def format_verify_report(report, include_timing: bool = True) -> str:
    """Format a verification report for console output."""
    output = []

    output.append("=" * 60)
    output.append(f"VERIFY SUITE: {report.suite} (seed {report.seed})")
    output.append("=" * 60)

    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        line = (
            f"[{status}] {check.name}: {check.trials} trials, "
            f"{check.failures} failures, worst residual "
            f"{check.worst_residual:.3e} (tolerance {check.tolerance:.1e})"
        )
        if include_timing:
            line += f", {check.wall_time:.2f}s"
        output.append(line)

    output.append("-" * 40)
    output.append(f"Overall: {'PASS' if report.passed else 'FAIL'}")
    output.append("=" * 60)

    return "\n".join(output)


def format_curvature_report(report) -> str:
    """Format curvature statistics for console output."""
    output = []
    output.append("CURVATURE OF THE INDUCED METRIC:")
    output.append("-" * 40)
    output.append(f"Mean: {report.mean:.6f}")
    output.append(f"Stddev: {report.stddev:.3e} (relative {report.relative_spread:.3e})")
    output.append(f"Range: [{report.minimum:.6f}, {report.maximum:.6f}]")
    output.append(f"Points: {report.count} used, {report.excluded} excluded")
    if report.expected is not None:
        output.append(f"Expected: {report.expected:.6f}")
    return "\n".join(output)
