"""
Command line interface for twistloop.
"""

import logging
import os
import re
from dataclasses import replace
from typing import Dict, Optional, Tuple

import click

from .birkhoff import DEFAULT_TOL, DEFAULT_TRUNCATION, birkhoff_factor
from .errors import ParameterViolation
from .formats import (
    read_form,
    read_frame,
    read_loop,
    write_birkhoff,
    write_frame,
    write_iwasawa,
    write_json,
    write_loop,
    write_surface,
)
from .integrable import (
    annulus_radius,
    curvature_report,
    dress,
    extract_immersion,
    frame_residual,
    maurer_cartan,
    vacuum_frame,
)
from .involutions import CatalogEntry, fixed_residual, form_by_name, random_loop
from .iwasawa import iwasawa_factor
from .loops import winding_det
from .utils import (
    RunConfig,
    format_curvature_report,
    format_diagnostics,
    format_verify_report,
    setup_logging,
    validate_run_config,
)
from .verify import SUITES, VerificationHarness

logger = logging.getLogger(__name__)

DEMO_GRID = (21, 21)
DEMO_LAMBDA0 = 0.5j


def parse_complex(text: str) -> complex:
    """Parse '0.5j', '0.5i', 'i', '-i' or a 're,im' pair."""
    cleaned = text.strip().replace(" ", "")
    try:
        if "," in cleaned:
            real, imag = cleaned.split(",", 1)
            return complex(float(real), float(imag))
        cleaned = cleaned.replace("i", "j")
        cleaned = re.sub(r"(^|[+-])j", r"\g<1>1j", cleaned)
        return complex(cleaned)
    except ValueError:
        raise ParameterViolation(f"Cannot parse complex number {text!r}")


def parse_grid(text: str) -> Tuple[int, ...]:
    """Parse a grid spec such as '21x21' or '11'."""
    try:
        counts = tuple(int(part) for part in text.lower().split("x"))
    except ValueError:
        raise ParameterViolation(f"Grid must look like '21x21', got {text!r}")
    if not counts:
        raise ParameterViolation("Grid needs at least one axis")
    return counts


def parse_form_name(name: str, n: int, k: int) -> CatalogEntry:
    """Resolve a catalog name, or read a form file when ``name`` is a path."""
    if os.path.isfile(name):
        return read_form(name)
    return form_by_name(name, n, k)


def run_options(func):
    """Flags shared by every subcommand."""
    options = [
        click.option("--form", "form", default="un", show_default=True,
                     help="Real form: un, un(n,eps), glr(n), so-curved-flat(n,k) or a form file"),
        click.option("--n", "n", type=int, default=None, help="Matrix size parameter n"),
        click.option("--k", "k", type=int, default=None,
                     help="Codimension parameter k (default: max(1, n - 1))"),
        click.option("--degree", type=int, default=2, show_default=True,
                     help="Degree of random loops"),
        click.option("--amplitude", type=float, default=0.5, show_default=True,
                     help="Amplitude of random loops, in [0, 1]"),
        click.option("--trunc", type=int, default=DEFAULT_TRUNCATION, show_default=True,
                     help="Toeplitz truncation m"),
        click.option("--tol", type=float, default=DEFAULT_TOL, show_default=True,
                     help="Residual tolerance"),
        click.option("--seed", type=int, default=None,
                     help="Random seed (required for rand, verify and demo)"),
        click.option("--grid", default=None, help="Grid point counts, e.g. 21x21"),
        click.option("--h", "h", type=float, default=None, help="Grid spacing"),
        click.option("--lambda0", default=None, help="Spectral parameter, e.g. 0.5i or 0,0.5"),
        click.option("--out", default=None, type=click.Path(file_okay=False),
                     help="Output directory"),
        click.option("--workers", type=int, default=0, show_default=True,
                     help="Processes for per-point dressing (0: one per CPU)"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_config(
    command: str,
    params: Dict,
    n_default: int = 2,
    grid_default: Optional[Tuple[int, ...]] = None,
    lambda0_default: complex = DEMO_LAMBDA0,
    **extra,
) -> RunConfig:
    """Turn parsed flags into a validated RunConfig."""
    n = params["n"] if params["n"] is not None else n_default
    k = params["k"] if params["k"] is not None else max(1, n - 1)
    config = RunConfig(command=command, n=n, k=k, **extra)
    config = replace(
        config,
        form=params["form"],
        degree=params["degree"],
        amplitude=params["amplitude"],
        trunc=params["trunc"],
        tol=params["tol"],
        seed=params["seed"],
        out=params["out"],
        workers=params["workers"],
    )
    if params["grid"] is not None:
        config = replace(config, grid=parse_grid(params["grid"]))
    elif grid_default is not None:
        config = replace(config, grid=grid_default)
    if params["h"] is not None:
        config = replace(config, h=params["h"])
    lambda0 = parse_complex(params["lambda0"]) if params["lambda0"] else lambda0_default
    config = replace(config, lambda0=lambda0)
    validate_run_config(config)
    logger.debug(f"Run configuration: {config}")
    return config


def output_dir(config: RunConfig) -> str:
    return config.out or "."


@click.group()
@click.option("--log-level", default="WARNING", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              help="Logging level")
def cli(log_level):
    """Factorizations in twisted loop groups and curved-flat frames."""
    setup_logging(log_level)


@cli.command()
@click.argument("kind", type=click.Choice(["birkhoff", "iwasawa"]))
@click.argument("loop_file", type=click.Path(exists=True, dir_okay=False))
@run_options
def factor(kind, loop_file, **params):
    """Split the loop in LOOP_FILE and write its factors."""
    x = read_loop(loop_file)
    config = build_config("factor", params, n_default=x.size)
    entry = parse_form_name(config.form, config.n, config.k)
    out = output_dir(config)

    if kind == "birkhoff":
        factors = birkhoff_factor(x, config.trunc, config.tol)
        membership = (
            fixed_residual(entry.form, factors.x_minus),
            fixed_residual(entry.form, factors.x_plus),
        )
        factors = replace(factors, membership=membership)
        write_birkhoff(out, factors, winding_det(x))
        click.echo(format_diagnostics("BIRKHOFF FACTORIZATION", factors.diagnostics))
        return

    if entry.tau is None:
        raise ParameterViolation(f"Form {entry.name} has no second-kind partner")
    factors = iwasawa_factor(entry.form, entry.tau, x, config.trunc, config.tol)
    write_iwasawa(out, factors)
    click.echo(format_diagnostics("IWASAWA FACTORIZATION", factors.diagnostics))


@cli.command()
@click.argument("suite", type=click.Choice(SUITES))
@click.option("--trials", type=int, default=10, show_default=True, help="Trials per check")
@run_options
@click.pass_context
def verify(ctx, suite, trials, **params):
    """Run the named verification SUITE."""
    config = build_config("verify", params, trials=trials)
    report = VerificationHarness(config).run(suite)
    click.echo(format_verify_report(report))
    if config.out:
        write_json(os.path.join(config.out, "report.json"), report.as_dict())
    if not report.passed:
        ctx.exit(1)


@cli.command()
@run_options
def rand(**params):
    """Write a seeded random loop of the chosen form."""
    config = build_config("rand", params)
    entry = parse_form_name(config.form, config.n, config.k)
    x = random_loop(entry.form, config.degree, config.amplitude, config.seed)
    path = os.path.join(output_dir(config), "loop.json")
    write_loop(path, x)
    click.echo(
        f"Wrote {path}: window {x.window}, "
        f"form residual {fixed_residual(entry.form, x):.3e}"
    )


@cli.command("dress")
@click.argument("frame_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("g_minus_file", type=click.Path(exists=True, dir_okay=False))
@run_options
def dress_frame(frame_file, g_minus_file, **params):
    """Dress the frame in FRAME_FILE by the loop in G_MINUS_FILE."""
    config = build_config("dress", params)
    frame = read_frame(frame_file)
    dressed = dress(frame, read_loop(g_minus_file), config.trunc, config.tol, config.workers)
    path = os.path.join(output_dir(config), "frame.json")
    write_frame(path, dressed)
    click.echo(f"Wrote {path}: {len(dressed.values)} points, "
               f"frame residual {frame_residual(dressed):.3e}")


@cli.command()
@click.argument("what", type=click.Choice(["flat", "surface"]))
@run_options
def demo(what, **params):
    """Vacuum curved flat, or a dressed constant-curvature surface."""
    config = build_config("demo", params, grid_default=DEMO_GRID)
    out = output_dir(config)
    radius = annulus_radius(config.lambda0) if what == "surface" else 1.0
    frame = vacuum_frame(config.n, config.k, config.grid, config.h, radius=radius)

    if what == "flat":
        sample = maurer_cartan(frame)
        write_frame(os.path.join(out, "frame.json"), frame)
        click.echo(format_diagnostics("VACUUM CURVED FLAT", {
            "grid": "x".join(str(c) for c in config.grid),
            "frame_residual": frame_residual(frame),
            "max_leakage": sample.max_leakage,
            "interior_leakage": sample.interior_leakage,
            "leakage_constant": sample.constant,
        }))
        return

    g_minus = random_loop(frame.form, 1, config.amplitude, config.seed, side="minus")
    dressed = dress(frame, g_minus, config.trunc, config.tol, config.workers)
    write_frame(os.path.join(out, "frame.json"), dressed)
    sample = extract_immersion(dressed, config.lambda0)
    written = write_surface(out, sample, frame.n)
    click.echo(f"Wrote {', '.join(written)} ({sample.path} path, "
               f"certificate {sample.certificate:.3e})")
    if sample.path == "sphere" and len(config.grid) == 2:
        report = curvature_report(sample)
        write_json(os.path.join(out, "curvature.json"), report.as_dict())
        click.echo(format_curvature_report(report))
