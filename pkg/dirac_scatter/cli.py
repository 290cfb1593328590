#!/usr/bin/env python3
"""dirac-scatter CLI - Main entry point."""

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable, TypeVar

import click
from rich.logging import RichHandler
from rich.panel import Panel

from .config import RunConfig, load_config_file, merge_config, parse_alpha
from .core import ScatterRun, console
from .exceptions import (
    ConfigurationError,
    ConvergenceError,
    DiracScatterError,
    NotAFreeEigenvalueError,
    RootCountError,
)
from .hc_bands import branch_limit
from .lattice import FloatArray, as_vector, bz_mesh, bz_path
from .output import write_band_rows, write_json, write_spectrum_rows
from .spectrum import gap_closing

F = TypeVar("F", bound=Callable[..., Any])

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def print_banner() -> None:
    """Print the application banner."""
    banner = """
[bold blue]dirac-scatter[/bold blue]
[dim]Floquet bands of point scatterers on triangular and honeycomb lattices[/dim]
    """
    console.print(Panel(banner, border_style="blue"))


def setup_logging(verbose: bool) -> None:
    """Route library logging through rich on stderr."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def run_options(func: F) -> F:
    """Flags mirroring RunConfig; unset flags fall back to --config, then defaults."""
    options = [
        click.option(
            "--config",
            "config_file",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="key=value settings file; flags override it",
        ),
        click.option(
            "--lattice",
            help="triangular or honeycomb (default: honeycomb)",
        ),
        click.option("--a", "a", type=float, help="Lattice constant (default: 1.0)"),
        click.option("--alpha", help="Coupling strength, or inf (default: 0)"),
        click.option("--jmax", type=int, help="Number of bands (default: 8)"),
        click.option("--mesh-n", type=int, help="Zone mesh size n (default: 20)"),
        click.option(
            "--tolerance", type=float, help="Numerical tolerance (default: 1e-10)"
        ),
        click.option(
            "--format", "output_format", help="csv or json (default: csv)"
        ),
        click.option(
            "--output",
            "output_path",
            type=click.Path(dir_okay=False, path_type=Path),
            help="Output file (default: stdout)",
        ),
        click.option("--workers", type=int, help="Worker processes (default: 1)"),
        click.option("--verbose", "-v", is_flag=True, help="Enable verbose output"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_config(values: dict[str, Any]) -> RunConfig:
    """Merge explicit flags over the config file over the defaults."""
    config_file = values.pop("config_file", None)
    file_values = load_config_file(config_file) if config_file else {}
    flags = {key: value for key, value in values.items() if value is not None}
    if not flags.get("verbose"):
        flags.pop("verbose", None)
    if "alpha" in flags:
        flags["alpha"] = parse_alpha(flags["alpha"])
    return merge_config(file_values, flags)


def parse_vector(text: str) -> FloatArray:
    """Parse "kx,ky" into a momentum."""
    parts = text.split(",")
    try:
        if len(parts) != 2:
            raise ValueError(text)
        return as_vector([float(p) for p in parts])
    except ValueError:
        raise ConfigurationError(f"Expected kx,ky but got {text!r}") from None


def parse_floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigurationError(
            f"Expected comma-separated numbers, got {text!r}"
        ) from None


def handle_errors(func: F) -> F:
    """Map library errors to exit codes with a one-line diagnostic."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        verbose = bool(kwargs.get("verbose"))
        try:
            return func(*args, **kwargs)
        except (ConfigurationError, NotAFreeEigenvalueError) as e:
            console.print(f"[red]❌ Configuration error: {e}[/red]")
            if verbose:
                console.print_exception()
            sys.exit(EXIT_CONFIG)
        except (RootCountError, ConvergenceError, DiracScatterError) as e:
            console.print(f"[red]❌ Numerical failure: {e}[/red]")
            if verbose:
                console.print_exception()
            sys.exit(EXIT_NUMERICAL)
        except KeyboardInterrupt:
            console.print("\n[yellow]⚠️  Run interrupted by user[/yellow]")
            sys.exit(EXIT_CONFIG)
        except Exception as e:
            console.print(f"[red]❌ Unexpected error: {e}[/red]")
            if verbose:
                console.print_exception()
            sys.exit(EXIT_CONFIG)

    return wrapper  # type: ignore[return-value]


@click.group()
@click.version_option(package_name="dirac-scatter")
def main() -> None:
    """Floquet bands, Dirac cones and spectra of periodic point scatterers."""


@main.command()
@run_options
@click.option(
    "--k",
    "kpoints",
    multiple=True,
    help="Momentum kx,ky (repeatable); overrides --path and the mesh",
)
@click.option("--path", help="Waypoints such as G,K,M,G")
@click.option(
    "--steps", type=int, default=20, help="Points per path segment (default: 20)"
)
@click.option(
    "--alpha-at-limit",
    type=float,
    help="Set alpha to the honeycomb branch limit at this free level of the first k",
)
@handle_errors
def bands(
    kpoints: tuple[str, ...],
    path: str | None,
    steps: int,
    alpha_at_limit: float | None,
    **values: Any,
) -> None:
    """Solve the bands at explicit momenta, along a path, or over the zone mesh."""
    config = build_config(values)
    setup_logging(config.verbose)
    print_banner()
    cfg = config.lattice_config()

    if kpoints:
        points = [parse_vector(text) for text in kpoints]
    elif path:
        points = bz_path(cfg, [w.strip() for w in path.split(",")], steps)
    else:
        points = bz_mesh(cfg, config.mesh_n)

    if alpha_at_limit is not None:
        if config.lattice != "honeycomb":
            raise ConfigurationError("--alpha-at-limit applies to the honeycomb lattice")
        config.alpha = branch_limit(
            cfg, points[0], alpha_at_limit, config.jmax, config.tolerance
        )
        console.print(f"[dim]alpha set to the branch limit {config.alpha!r}[/dim]")

    rows = ScatterRun(config).run_bands(points)
    if config.output_format == "json":
        keys = ("k_index", "kx", "ky", "band", "value", "multiplicity", "provenance")
        write_json(
            config,
            {"jmax": config.jmax, "rows": [dict(zip(keys, row)) for row in rows]},
            config.output_path,
        )
    else:
        write_band_rows(config, rows, config.output_path)
    console.print(f"\n[green]✅ Wrote {len(rows)} band rows[/green]")


@main.command("spectrum-scan")
@run_options
@click.option("--alpha-min", type=float, default=-1.0, help="(default: -1.0)")
@click.option("--alpha-max", type=float, default=3.0, help="(default: 3.0)")
@click.option("--steps", type=int, default=40, help="Number of alphas (default: 40)")
@click.option("--polish", is_flag=True, help="Refine band extrema off the mesh")
@handle_errors
def spectrum_scan(
    alpha_min: float, alpha_max: float, steps: int, polish: bool, **values: Any
) -> None:
    """Spectrum intervals and gaps across a range of alphas."""
    config = build_config(values)
    setup_logging(config.verbose)
    print_banner()
    if config.mesh_n < 8:
        raise ConfigurationError(f"mesh_n must be at least 8 for a scan: {config.mesh_n}")

    rows = ScatterRun(config).run_spectrum_scan(alpha_min, alpha_max, steps, polish)
    closing = gap_closing([r["alpha"] for r in rows], [r["gap"] for r in rows])
    if config.output_format == "json":
        write_json(
            config,
            {"mesh_n": config.mesh_n, "gap_closing_alpha": closing, "rows": rows},
            config.output_path,
        )
    else:
        write_spectrum_rows(config, rows, config.output_path)
    console.print(f"\n[green]✅ Scanned {len(rows)} alphas[/green]")
    if closing is not None:
        console.print(f"[dim]First gap closed by alpha={closing!r}[/dim]")


@main.command()
@run_options
@click.option(
    "--deltas",
    default="1e-3,5e-4,2.5e-4",
    help="Descending step sizes (default: 1e-3,5e-4,2.5e-4)",
)
@click.option(
    "--pair",
    "pairs",
    multiple=True,
    help="Honeycomb band pair such as 1,2 (repeatable; default: 1,2)",
)
@click.option("--directions", type=int, default=8, help="(default: 8)")
@handle_errors
def cone(deltas: str, pairs: tuple[str, ...], directions: int, **values: Any) -> None:
    """Dirac cone slope at K against finite differences of the bands."""
    config = build_config(values)
    setup_logging(config.verbose)
    print_banner()
    parsed = []
    for text in pairs or ("1,2",):
        bounds = [int(v) for v in parse_floats(text)]
        if len(bounds) != 2 or bounds[1] <= bounds[0]:
            raise ConfigurationError(f"Expected a band pair such as 1,2: {text!r}")
        parsed.append((bounds[0], bounds[1]))

    report = ScatterRun(config).run_cone(parse_floats(deltas), parsed, directions)
    write_json(config, report, config.output_path)
    console.print("\n[green]✅ Cone report written[/green]")


@main.command("greens-probe")
@run_options
@click.option("--lambda", "lam", type=float, default=-1.0, help="(default: -1.0)")
@click.option("--k", "k_text", default="0,0", help="Momentum kx,ky (default: 0,0)")
@click.option("--offdiag", is_flag=True, help="Also evaluate g at the second site")
@click.option("--pole", type=float, help="Report pole data at this free level")
@click.option(
    "--cutoff-check",
    type=float,
    help="Compare with the symmetric-cutoff sum at this radius",
)
@handle_errors
def greens_probe(
    lam: float,
    k_text: str,
    offdiag: bool,
    pole: float | None,
    cutoff_check: float | None,
    **values: Any,
) -> None:
    """Evaluate the Green's function directly (debugging aid)."""
    config = build_config(values)
    setup_logging(config.verbose)
    result = ScatterRun(config).run_greens_probe(
        lam, parse_vector(k_text), offdiag, pole, cutoff_check
    )
    write_json(config, result, config.output_path)


if __name__ == "__main__":
    main()
