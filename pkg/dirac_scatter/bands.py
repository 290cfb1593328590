"""Band containers and root-finding plumbing shared by both lattices."""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import optimize

from .config import TOLERANCES
from .exceptions import RootCountError
from .greens import FloquetSum, PoleData, converged_sum, pole_data_for_level
from .lattice import (
    FloatArray,
    FreeLevel,
    KLike,
    LatticeConfig,
    as_vector,
    build_lattice,
    expand_levels,
    free_eigenvalues,
)

# Free levels kept above the last requested band.
EXTRA_LEVELS = 6
STANDOFF_HALVINGS = 60


class Provenance(str, Enum):
    """Where an eigenvalue comes from."""

    PERTURBED = "perturbed"
    UNPERTURBED = "unperturbed"
    BRANCH_MINUS = "branch_minus"
    BRANCH_PLUS = "branch_plus"
    UNPERTURBED_CASE1 = "unperturbed_case1"
    UNPERTURBED_CASE2 = "unperturbed_case2"
    UNPERTURBED_CASE3 = "unperturbed_case3"


@dataclass(frozen=True)
class BandEntry:
    value: float
    multiplicity: int
    provenance: Provenance


@dataclass(frozen=True)
class BandSolution:
    """Ascending eigenvalues at one (k, alpha), multiplicities kept separate."""

    k: FloatArray
    alpha: float
    eigenvalues: tuple[BandEntry, ...]

    def expanded(self) -> list[float]:
        """Eigenvalues repeated by multiplicity."""
        return [e.value for e in self.eigenvalues for _ in range(e.multiplicity)]

    def bands(self, jmax: int) -> list[float]:
        """The lowest `jmax` band values."""
        return self.expanded()[:jmax]

    def provenance_of(self, j: int) -> Provenance:
        """Provenance of band j (1-based)."""
        seen = 0
        for entry in self.eigenvalues:
            seen += entry.multiplicity
            if seen >= j:
                return entry.provenance
        raise IndexError(f"band {j} not computed")

    def perturbed(self) -> list[BandEntry]:
        return [
            e
            for e in self.eigenvalues
            if e.provenance
            in (Provenance.PERTURBED, Provenance.BRANCH_MINUS, Provenance.BRANCH_PLUS)
        ]


class HcBandSolution(BandSolution):
    """Honeycomb band solution; provenance carries branch or case tags."""


@dataclass(frozen=True)
class ConeReport:
    """Predicted and finite-difference slopes of a Dirac cone at K."""

    lambda_prime: float
    c_formula: float
    bands: tuple[int, int]
    deltas: tuple[float, ...]
    directions: tuple[float, ...]
    # c_fd[d][i] = (lower slope, upper slope) for deltas[d] along directions[i].
    c_fd: tuple[tuple[tuple[float, float], ...], ...]
    # Relative spread of the symmetric slopes over directions at the finest delta.
    isotropy_spread: float
    convergence_order: float

    def symmetric_slopes(self, d: int = -1) -> tuple[float, ...]:
        """(upper - lower) / (2 delta) per direction for deltas[d]."""
        return tuple(0.5 * (lower + upper) for lower, upper in self.c_fd[d])


@dataclass
class Workspace:
    """Free levels and the Green's function engine at one momentum."""

    cfg: LatticeConfig
    k: FloatArray
    levels: list[FreeLevel]
    floquet: FloquetSum
    tol: float | None = None
    _poles: dict[int, PoleData] = field(default_factory=dict)

    @classmethod
    def build(
        cls, cfg: LatticeConfig, k: KLike, jmax: int, tol: float | None = None
    ) -> "Workspace":
        """Keep the free levels up to the (jmax + EXTRA_LEVELS)-th, with multiplicity.

        `tol` bounds the far-field tail of the Green's function sums; None keeps
        the default cutoff radius.
        """
        vector = as_vector(k)
        wanted = jmax + EXTRA_LEVELS
        lam_max = float(vector @ vector) + cfg.dual_length**2 * (1.0 + wanted / 3.0)
        levels = free_eigenvalues(cfg, vector, lam_max)
        while len(expand_levels(levels)) < wanted:
            lam_max *= 2.0
            levels = free_eigenvalues(cfg, vector, lam_max)
        cutoff = expand_levels(levels)[wanted - 1]
        levels = [level for level in levels if level.value <= cutoff]
        floquet = converged_sum(cfg, vector, 1.25 * max(cutoff, 1.0), tol)
        return cls(cfg=cfg, k=vector, levels=levels, floquet=floquet, tol=tol)

    def pole(self, i: int) -> PoleData:
        """Pole data of level i (0-based), cached."""
        if i not in self._poles:
            self._poles[i] = pole_data_for_level(self.floquet, self.levels[i])
        return self._poles[i]

    @property
    def deep_energy(self) -> float:
        """Energy below which the Bessel corrections to g vanish in double precision."""
        return -((70.0 / self.cfg.a) ** 2)


@lru_cache(maxsize=4096)
def _workspace(
    a: float, kx: float, ky: float, jmax: int, tol: float | None
) -> Workspace:
    return Workspace.build(build_lattice(a), (kx, ky), jmax, tol)


def cached_workspace(
    cfg: LatticeConfig, k: KLike, jmax: int, tol: float | None = None
) -> Workspace:
    """Workspace shared across calls with the same a, k, jmax and tol."""
    vector = as_vector(k)
    return _workspace(cfg.a, float(vector[0]), float(vector[1]), jmax, tol)


def standoff(level: float) -> float:
    return TOLERANCES.pole * max(1.0, abs(level))


def bisect_root(f: Callable[[float], float], lo: float, hi: float) -> float:
    """Bisection on a sign-change bracket, to 1e-3 root tolerance plus 1e-14 relative."""
    root = optimize.bisect(
        f, lo, hi, xtol=1e-3 * TOLERANCES.root, rtol=1e-14, maxiter=200
    )
    return float(root)


def deep_root(alpha: float) -> float:
    """Solution of alpha = -ln(-lambda)/(4pi), the form g takes at very low energy."""
    exponent = -4.0 * math.pi * alpha
    if exponent > 700.0:
        return -math.inf
    return -math.exp(exponent)


def approach_pole(
    f: Callable[[float], float], level: float, side: int, want_positive: bool
) -> float:
    """Move towards `level` from `side` (-1 left, +1 right) until f has the wanted sign.

    The first point sits at twice the pole standoff and later ones halve the
    distance, so f must be evaluated without the pole guard.
    """
    gap = 2.0 * standoff(level)
    for _ in range(STANDOFF_HALVINGS):
        point = level + side * gap
        if point == level:
            break
        if (f(point) > 0) == want_positive:
            return point
        gap *= 0.5
    raise RootCountError(
        f"no sign change next to free level {level:.12g}",
        (level - gap, level) if side < 0 else (level, level + gap),
    )


def scan_grid(lo: float, hi: float, points: int = 64) -> FloatArray:
    """Grid on [lo, hi] clustered towards both ends."""
    t = 0.5 * (1.0 - np.cos(np.pi * np.arange(points) / (points - 1)))
    return lo + (hi - lo) * t


def free_entries(levels: list[FreeLevel], jmax: int) -> tuple[BandEntry, ...]:
    """The alpha = inf spectrum: free levels with their full multiplicities."""
    return trim([BandEntry(l.value, l.mu, Provenance.UNPERTURBED) for l in levels], jmax)


def trim(entries: list[BandEntry], jmax: int) -> tuple[BandEntry, ...]:
    """Sorted entries up to the one that completes band jmax."""
    entries.sort(key=lambda e: e.value)
    kept: list[BandEntry] = []
    count = 0
    for entry in entries:
        if count >= jmax:
            break
        kept.append(entry)
        count += entry.multiplicity
    return tuple(kept)


def cone_report(
    solve: Callable[[FloatArray], BandSolution],
    cfg: LatticeConfig,
    pair: tuple[int, int],
    c_formula: float,
    deltas: tuple[float, ...],
    directions: int,
) -> ConeReport:
    """Forward-difference slopes of bands `pair` around K.

    A central difference of a cone vanishes, so each side is measured from
    the vertex separately.
    """
    lower, upper = pair
    at_k = solve(cfg.K).expanded()
    vertex = 0.5 * (at_k[lower - 1] + at_k[upper - 1])
    angles = tuple(2.0 * math.pi * i / directions for i in range(directions))
    table = []
    for delta in deltas:
        row = []
        for theta in angles:
            point = cfg.K + delta * np.array([math.cos(theta), math.sin(theta)])
            bands = solve(point).expanded()
            row.append(
                (
                    (vertex - bands[lower - 1]) / delta,
                    (bands[upper - 1] - vertex) / delta,
                )
            )
        table.append(tuple(row))

    # The mean of the two one-sided slopes cancels the curvature both bands share.
    symmetric = np.array(table[-1]).mean(axis=1)
    spread = float((symmetric.max() - symmetric.min()) / symmetric.mean())
    errors = [float(np.mean(np.abs(np.array(t) - c_formula))) for t in table]
    order = math.nan
    if len(deltas) >= 2 and errors[-1] > 0 and errors[-2] > 0:
        order = math.log(errors[-2] / errors[-1]) / math.log(deltas[-2] / deltas[-1])
    return ConeReport(
        lambda_prime=vertex,
        c_formula=c_formula,
        bands=pair,
        deltas=tuple(deltas),
        directions=angles,
        c_fd=tuple(table),
        isotropy_spread=spread,
        convergence_order=order,
    )
