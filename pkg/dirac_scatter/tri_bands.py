"""Band functions for one point scatterer per cell of the triangular lattice.

Each gap between consecutive free levels holds exactly one root of
g_lambda(0, k) = alpha, because g is strictly increasing there and runs from
-inf to +inf. A free level of multiplicity mu stays an eigenvalue with
multiplicity mu - 1.
"""

import logging
import math

from .bands import (
    BandEntry,
    BandSolution,
    ConeReport,
    Provenance,
    Workspace,
    approach_pole,
    bisect_root,
    cached_workspace,
    cone_report,
    deep_root,
    free_entries,
    trim,
)
from .exceptions import ConfigurationError, RootCountError
from .lattice import KLike, LatticeConfig, as_vector, bz_mesh
from .spectrum import Mapper, SpectrumReport, build_report, mesh_extrema

logger = logging.getLogger(__name__)

MAX_RETRIES = 2


def _solve(ws: Workspace, alpha: float, jmax: int) -> BandSolution:
    fs = ws.floquet
    levels = ws.levels

    def f(lam: float) -> float:
        return fs.diag(lam, guard=False) - alpha

    entries: list[BandEntry] = []
    top = approach_pole(f, levels[0].value, -1, want_positive=True)
    if fs.diag(ws.deep_energy) > alpha:
        root = deep_root(alpha)
    else:
        root = bisect_root(f, ws.deep_energy, top)
    entries.append(BandEntry(root, 1, Provenance.PERTURBED))

    for lower, upper in zip(levels, levels[1:]):
        lo = approach_pole(f, lower.value, +1, want_positive=False)
        hi = approach_pole(f, upper.value, -1, want_positive=True)
        entries.append(BandEntry(bisect_root(f, lo, hi), 1, Provenance.PERTURBED))

    for level in levels:
        if level.mu > 1:
            entries.append(BandEntry(level.value, level.mu - 1, Provenance.UNPERTURBED))

    found = sum(e.multiplicity for e in entries)
    if found < jmax:
        raise RootCountError(
            f"only {found} eigenvalues below {levels[-1].value:.6g}, need {jmax}",
            (-math.inf, levels[-1].value),
        )
    return BandSolution(k=ws.k, alpha=alpha, eigenvalues=trim(entries, jmax))


def solve_bands_tri(
    cfg: LatticeConfig,
    k: KLike,
    alpha: float,
    jmax: int = 8,
    workspace: Workspace | None = None,
    tol: float | None = None,
) -> BandSolution:
    """The lowest `jmax` eigenvalues of the triangular point-scatterer operator at k.

    alpha = inf returns the free spectrum. `tol` bounds the lattice-sum tails
    (None keeps the default cutoff).
    """
    if jmax < 1:
        raise ConfigurationError(f"jmax must be positive: {jmax}")
    vector = as_vector(k)
    ws = workspace or cached_workspace(cfg, vector, jmax, tol)
    if alpha == math.inf:
        entries = free_entries(ws.levels, jmax)
        return BandSolution(k=vector, alpha=alpha, eigenvalues=entries)

    for attempt in range(MAX_RETRIES + 1):
        try:
            return _solve(ws, alpha, jmax)
        except RootCountError:
            if attempt == MAX_RETRIES:
                raise
            logger.debug("Widening free-level window at k=%s", vector)
            ws = Workspace.build(cfg, vector, jmax + 6 * (attempt + 1), tol)
    raise AssertionError("unreachable")


def cone_slope_tri(cfg: LatticeConfig) -> float:
    """Slope of the cone between bands 2 and 3 at K: 4pi / (3a) = |K|."""
    return 4.0 * math.pi / (3.0 * cfg.a)


def cone_report_tri(
    cfg: LatticeConfig,
    alpha: float,
    deltas: tuple[float, ...] = (1e-3, 5e-4, 2.5e-4),
    directions: int = 8,
    tol: float | None = None,
) -> ConeReport:
    """Slopes of bands 2 and 3 around K against |K|."""
    return cone_report(
        lambda k: solve_bands_tri(cfg, k, alpha, 4, tol=tol),
        cfg,
        (2, 3),
        cone_slope_tri(cfg),
        deltas,
        directions,
    )


def spectrum_tri(
    cfg: LatticeConfig,
    alpha: float,
    mesh_n: int,
    jmax: int = 8,
    polish: bool = False,
    mapper: Mapper = map,
    tol: float | None = None,
) -> SpectrumReport:
    """Predicted and mesh-observed spectrum of the triangular operator.

    The prediction is [nu1(Gamma), nu1(K)] united with [min(nu2(Gamma), nu2(M)), inf).
    """
    if mesh_n < 8:
        raise ConfigurationError(f"mesh_n must be at least 8 for a scan: {mesh_n}")

    def bands(k: KLike) -> list[float]:
        return solve_bands_tri(cfg, k, alpha, jmax, tol=tol).bands(jmax)

    gamma = bands(cfg.gamma_point)
    at_k = bands(cfg.K)
    at_m = bands(cfg.m_point)
    predicted = {
        "band1": (gamma[0], at_k[0]),
        "upper": (min(gamma[1], at_m[1]), math.inf),
    }
    observed = mesh_extrema(bands, bz_mesh(cfg, mesh_n), jmax, cfg, polish, mapper)
    report = build_report("triangular", alpha, predicted, observed, gamma[0])
    logger.info("Triangular spectrum at alpha=%s: %s", alpha, report.intervals)
    return report
