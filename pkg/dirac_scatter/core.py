"""Run orchestration: band sweeps, spectrum scans, cone and Green's function probes."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Any, Callable, Iterable, Iterator, Sequence, TypeVar

import numpy as np
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn

from .bands import BandSolution
from .config import LatticeKind, RunConfig
from .exceptions import ConfigurationError, ConvergenceError, RootCountError
from .greens import (
    calibration_check,
    g_diag,
    g_diag_cutoff,
    g_offdiag,
    pole_data,
)
from .hc_bands import cone_report_hc, solve_bands_hc, spectrum_hc
from .lattice import FloatArray, KLike, as_vector, build_lattice
from .spectrum import SpectrumReport
from .tri_bands import cone_report_tri, solve_bands_tri, spectrum_tri

logger = logging.getLogger(__name__)

console = Console(stderr=True)

T = TypeVar("T")
R = TypeVar("R")


def _solve_point(
    lattice: LatticeKind, a: float, alpha: float, jmax: int, tol: float, k: FloatArray
) -> BandSolution:
    cfg = build_lattice(a)
    if lattice == "triangular":
        return solve_bands_tri(cfg, k, alpha, jmax, tol=tol)
    return solve_bands_hc(cfg, k, alpha, jmax, tol=tol)


def _spectrum_at(
    lattice: LatticeKind,
    a: float,
    mesh_n: int,
    jmax: int,
    polish: bool,
    tol: float,
    alpha: float,
) -> SpectrumReport:
    cfg = build_lattice(a)
    if lattice == "triangular":
        return spectrum_tri(cfg, alpha, mesh_n, jmax, polish, tol=tol)
    return spectrum_hc(cfg, alpha, mesh_n, jmax, polish, tol=tol)


class ScatterRun:
    """Main class for running point-scatterer band computations."""

    def __init__(self, config: RunConfig):
        """Initialize ScatterRun with configuration."""
        self.config = config
        self.lattice = config.lattice_config()

    def _map(self, fn: Callable[[T], R], items: Sequence[T]) -> Iterator[R]:
        """Order-preserving map, over a process pool when workers > 1."""
        if self.config.workers == 1 or len(items) < 2:
            yield from map(fn, items)
            return
        with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
            yield from pool.map(fn, items)

    def _progress(self) -> Progress:
        return Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            console=console,
            disable=not console.is_terminal,
        )

    def run_bands(self, kpoints: Sequence[KLike]) -> list[list[Any]]:
        """Band rows (k index, kx, ky, band, value, multiplicity, provenance)."""
        cfg = self.config
        points = [as_vector(k) for k in kpoints]
        console.print(
            f"[bold]📈 Solving {cfg.lattice} bands at {len(points)} momenta "
            f"(alpha={cfg.alpha_label}, jmax={cfg.jmax})[/bold]"
        )
        solve = partial(
            _solve_point, cfg.lattice, cfg.a, cfg.alpha, cfg.jmax, cfg.tolerance
        )

        rows: list[list[Any]] = []
        with self._progress() as progress:
            task = progress.add_task("Solving secular equations...", total=len(points))
            try:
                for index, solution in enumerate(self._map(solve, points)):
                    rows.extend(self._band_rows(index, solution))
                    progress.advance(task)
                progress.update(task, description="✅ Bands solved")
            except (RootCountError, ConvergenceError):
                progress.update(task, description="❌ Band solve failed")
                raise
        return rows

    def _band_rows(self, index: int, solution: BandSolution) -> list[list[Any]]:
        rows = []
        band = 1
        kx, ky = (float(v) for v in solution.k)
        for entry in solution.eigenvalues:
            for _ in range(entry.multiplicity):
                if band > self.config.jmax:
                    return rows
                rows.append(
                    [
                        index,
                        kx,
                        ky,
                        band,
                        float(entry.value),
                        entry.multiplicity,
                        entry.provenance.value,
                    ]
                )
                band += 1
        return rows

    def run_spectrum_scan(
        self, alpha_min: float, alpha_max: float, steps: int, polish: bool = False
    ) -> list[dict[str, Any]]:
        """One row per alpha with predicted intervals, first gap and flags."""
        if not alpha_min < alpha_max:
            raise ConfigurationError(
                f"alpha_min must be below alpha_max: {alpha_min} >= {alpha_max}"
            )
        if steps < 2:
            raise ConfigurationError(f"steps must be at least 2: {steps}")
        cfg = self.config
        alphas = [float(a) for a in np.linspace(alpha_min, alpha_max, steps)]
        console.print(
            f"[bold]🔭 Scanning {cfg.lattice} spectrum over {steps} alphas "
            f"in [{alpha_min}, {alpha_max}] (mesh_n={cfg.mesh_n})[/bold]"
        )
        scan = partial(
            _spectrum_at,
            cfg.lattice,
            cfg.a,
            cfg.mesh_n,
            cfg.jmax,
            polish,
            cfg.tolerance,
        )

        rows: list[dict[str, Any]] = []
        with self._progress() as progress:
            task = progress.add_task("Sweeping the zone...", total=steps)
            try:
                for report in self._map(scan, alphas):
                    rows.append(
                        {
                            "alpha": report.alpha,
                            "intervals": report.intervals,
                            "gap": max(report.first_gap, 0.0),
                            "observed_intervals": report.observed_intervals,
                            "flags": report.discrepancy_flags,
                        }
                    )
                    progress.advance(task)
                progress.update(task, description="✅ Scan complete")
            except (RootCountError, ConvergenceError):
                progress.update(task, description="❌ Scan failed")
                raise
        return rows

    def run_cone(
        self,
        deltas: Sequence[float],
        pairs: Iterable[tuple[int, int]] = ((1, 2),),
        directions: int = 8,
    ) -> dict[str, Any]:
        """Cone slope predictions against finite differences at K."""
        if not deltas or any(d <= 0 for d in deltas):
            raise ConfigurationError(f"deltas must be positive: {list(deltas)}")
        if list(deltas) != sorted(deltas, reverse=True):
            raise ConfigurationError(f"deltas must be descending: {list(deltas)}")
        cfg = self.config
        if cfg.is_free:
            raise ConfigurationError("Cone diagnostics need a finite alpha")

        console.print(f"[bold]📐 Probing Dirac cones at K ({cfg.lattice})[/bold]")
        reports = []
        with self._progress() as progress:
            task = progress.add_task("Finite differences around K...", total=None)
            try:
                if cfg.lattice == "triangular":
                    reports.append(
                        cone_report_tri(
                            self.lattice,
                            cfg.alpha,
                            tuple(deltas),
                            directions,
                            tol=cfg.tolerance,
                        )
                    )
                else:
                    for pair in pairs:
                        reports.append(
                            cone_report_hc(
                                self.lattice,
                                cfg.alpha,
                                pair,
                                tuple(deltas),
                                directions,
                                tol=cfg.tolerance,
                            )
                        )
                progress.update(task, description="✅ Cones measured")
            except (RootCountError, ConvergenceError):
                progress.update(task, description="❌ Cone probe failed")
                raise

        return {
            "cones": [
                {
                    "bands": list(r.bands),
                    "lambda_prime": r.lambda_prime,
                    "c_formula": r.c_formula,
                    "deltas": list(r.deltas),
                    "directions": list(r.directions),
                    "c_fd": [[list(pair) for pair in row] for row in r.c_fd],
                    "isotropy_spread": r.isotropy_spread,
                    "convergence_order": r.convergence_order,
                }
                for r in reports
            ]
        }

    def run_greens_probe(
        self,
        lam: float,
        k: KLike,
        offset: bool = False,
        pole: float | None = None,
        cutoff_radius: float | None = None,
    ) -> dict[str, Any]:
        """Direct evaluation of g at one (lambda, k) for debugging."""
        cfg = self.lattice
        tol = self.config.tolerance
        vector = as_vector(k)
        result: dict[str, Any] = {"lambda": lam, "k": vector.tolist()}

        result["calibration_gap"] = calibration_check(cfg, max(tol, 1e-9))
        if pole is not None:
            data = pole_data(cfg, vector, pole, tol)
            result["pole"] = {
                "lambda_pole": data.lambda_pole,
                "mu": data.mu,
                "phase_sum_abs": data.phase_sum_abs,
                "regular_diag": data.regular_diag,
                "regular_offdiag": data.regular_offdiag,
                "left_limit_minus": data.left_limit_minus,
            }
            return result

        diag = g_diag(cfg, lam, vector, max(tol, 1e-9))
        result["g_diag"] = diag.real
        result["g_diag_tail_bound"] = diag.tail_bound
        if offset:
            off = g_offdiag(cfg, lam, vector, tol=max(tol, 1e-9))
            result["g_offdiag"] = complex(off.value)
            result["g_offdiag_tail_bound"] = off.tail_bound
        if cutoff_radius is not None:
            cut = g_diag_cutoff(cfg, lam, vector, cutoff_radius)
            result["g_diag_cutoff"] = cut.real
            result["cutoff_difference"] = abs(cut.real - diag.real)
        if not math.isfinite(result["g_diag"]):
            raise ConvergenceError(f"g_diag is not finite at lambda={lam}")
        return result
