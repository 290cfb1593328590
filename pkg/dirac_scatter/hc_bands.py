"""Band functions, Dirac cones and spectra for the honeycomb scatterer pair.

With scatterers at 0 and x0 of equal strength alpha, the perturbed
eigenvalues at k are the roots of

    alpha = g_lambda(0, k) - |g_lambda(x0, k)|   (minus branch)
    alpha = g_lambda(0, k) + |g_lambda(x0, k)|   (plus branch)

away from the free levels. A free level of multiplicity mu remains an
eigenvalue with multiplicity mu - 2, mu - 1 or mu depending on the phase sum
of its plane waves and on where alpha sits relative to the finite branch
limit there.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt

from .bands import (
    EXTRA_LEVELS,
    BandEntry,
    ConeReport,
    HcBandSolution,
    Provenance,
    Workspace,
    approach_pole,
    bisect_root,
    cached_workspace,
    cone_report,
    deep_root,
    free_entries,
    scan_grid,
    standoff,
    trim,
)
from .config import TOLERANCES
from .exceptions import ConfigurationError, PoleProximityError, RootCountError
from .greens import PoleData, find_level, g_diag, g_offdiag
from .lattice import (
    FloatArray,
    KLike,
    LatticeConfig,
    as_vector,
    bz_mesh,
    dual_disc,
    offset_phase,
    rotate_index,
)
from .spectrum import Mapper, SpectrumReport, build_report, mesh_extrema

logger = logging.getLogger(__name__)

MAX_RETRIES = 2
SCAN_POINTS = 64
QUIET_STANDOFF = 1e3
DEFAULT_CONE_CUTOFF = 64

MINUS = -1
PLUS = +1

_BRANCH_TAG = {MINUS: Provenance.BRANCH_MINUS, PLUS: Provenance.BRANCH_PLUS}
_CASE_TAG = {
    1: Provenance.UNPERTURBED_CASE1,
    2: Provenance.UNPERTURBED_CASE2,
    3: Provenance.UNPERTURBED_CASE3,
}


def classify_pole(pole: PoleData, alpha: float) -> tuple[int, int]:
    """(case, multiplicity) of a free level given its pole data."""
    if not pole.balanced:
        return 1, pole.mu - 2
    limit = pole.left_limit_minus
    if abs(alpha - limit) <= TOLERANCES.discriminant * max(1.0, abs(limit)):
        return 3, pole.mu
    return 2, pole.mu - 1


def solver_pole(
    cfg: LatticeConfig,
    k: KLike,
    lambda_pole: float,
    jmax: int = 8,
    tol: float | None = None,
) -> PoleData:
    """Pole data of a free level from the engine `solve_bands_hc` uses at (k, jmax, tol).

    Case 3 is an equality test at the discriminant tolerance, so a branch
    limit meant to trigger it has to come from the same lattice sums.
    """
    level = find_level(cfg, k, lambda_pole)
    slack = TOLERANCES.degeneracy * max(1.0, abs(level.value))
    ws = cached_workspace(cfg, k, jmax, tol)
    while ws.levels[-1].value < level.value - slack:
        jmax += EXTRA_LEVELS
        ws = cached_workspace(cfg, k, jmax, tol)
    for i, candidate in enumerate(ws.levels):
        if abs(candidate.value - level.value) <= slack:
            return ws.pole(i)
    raise AssertionError("unreachable")


def branch_limit(
    cfg: LatticeConfig,
    k: KLike,
    lambda_pole: float,
    jmax: int = 8,
    tol: float | None = None,
) -> float:
    """The finite limit of g - |g(x0)| at a balanced level, as the solver sees it."""
    pole = solver_pole(cfg, k, lambda_pole, jmax, tol)
    if not pole.balanced:
        raise ConfigurationError(
            f"free level {pole.lambda_pole:.12g} has no finite branch limit"
        )
    return pole.left_limit_minus


def classify_unperturbed(
    cfg: LatticeConfig,
    k: KLike,
    lambda_pole: float,
    alpha: float,
    jmax: int = 8,
    tol: float | None = None,
) -> tuple[int, int]:
    """Case 1, 2 or 3 of a free level and the multiplicity it keeps."""
    return classify_pole(solver_pole(cfg, k, lambda_pole, jmax, tol), alpha)


def _right_wants(pole: PoleData, alpha: float, branch: int) -> bool | None:
    """Sign f takes just left of a level, or None when no root is forced there."""
    if branch == PLUS or not pole.balanced:
        return True
    case, _ = classify_pole(pole, alpha)
    if case == 2 and alpha < pole.left_limit_minus:
        return True
    return None


def _left_wants(pole: PoleData, alpha: float, branch: int) -> bool | None:
    """Sign f takes just right of a level, or None when no root is forced there."""
    if branch == MINUS or not pole.balanced:
        return False
    case, _ = classify_pole(pole, alpha)
    if case == 2 and alpha > pole.right_limit_plus:
        return False
    return None


class _Branches:
    """Scalar and vectorized branch functions g(0) +- |g(x0)| - alpha."""

    def __init__(self, ws: Workspace, alpha: float) -> None:
        self.fs = ws.floquet
        self.alpha = alpha

    def scalar(self, branch: int) -> Callable[[float], float]:
        def f(lam: float) -> float:
            value = self.fs.diag(lam, guard=False)
            return value + branch * abs(self.fs.offdiag(lam, guard=False)) - self.alpha

        return f

    def many(self, branch: int, grid: FloatArray) -> FloatArray:
        values = self.fs.diag_many(grid) + branch * np.abs(self.fs.offdiag_many(grid))
        return np.asarray(values - self.alpha, dtype=float)


def _first_interval(
    ws: Workspace, branches: _Branches, branch: int
) -> list[tuple[float, int]]:
    f = branches.scalar(branch)
    level = ws.levels[0].value
    wants = _right_wants(ws.pole(0), branches.alpha, branch)
    if wants is None:
        return []
    top = approach_pole(f, level, -1, want_positive=True)
    if f(ws.deep_energy) > 0:
        return [(deep_root(branches.alpha), branch)]
    return [(bisect_root(f, ws.deep_energy, top), branch)]


def _gap_roots(
    ws: Workspace, branches: _Branches, i: int, branch: int
) -> list[tuple[float, int]]:
    """Roots of one branch strictly between levels i and i + 1."""
    f = branches.scalar(branch)
    lower, upper = ws.levels[i].value, ws.levels[i + 1].value
    alpha = branches.alpha

    # A branch whose finite limit lies on the far side of alpha moves away
    # from alpha, so the scan may keep clear of the cancelling pole terms.
    clearance = min(QUIET_STANDOFF * standoff(lower), 0.1 * (upper - lower))
    wants = _left_wants(ws.pole(i), alpha, branch)
    lo = lower + max(clearance, standoff(lower))
    if wants is not None:
        lo = approach_pole(f, lower, +1, want_positive=wants)
    wants = _right_wants(ws.pole(i + 1), alpha, branch)
    hi = upper - max(clearance, standoff(upper))
    if wants is not None:
        hi = approach_pole(f, upper, -1, want_positive=wants)
    if hi <= lo:
        raise RootCountError(f"gap ({lower:.12g}, {upper:.12g}) closed", (lower, upper))

    grid = scan_grid(lo, hi, SCAN_POINTS)
    values = branches.many(branch, grid)
    roots = []
    for j in np.flatnonzero(np.signbit(values[:-1]) != np.signbit(values[1:])):
        roots.append((bisect_root(f, float(grid[j]), float(grid[j + 1])), branch))
    return roots


def _offdiag_vanishes(ws: Workspace, lam: float) -> bool:
    if not math.isfinite(lam) or lam < ws.deep_energy:
        return True
    try:
        return abs(ws.floquet.offdiag(lam)) < TOLERANCES.discriminant
    except PoleProximityError:
        return False


def _merge_doubles(ws: Workspace, roots: list[tuple[float, int]]) -> list[BandEntry]:
    """Pair minus/plus roots that coincide where g(x0) vanishes."""
    roots.sort()
    entries = []
    i = 0
    while i < len(roots):
        value, branch = roots[i]
        if i + 1 < len(roots):
            other, other_branch = roots[i + 1]
            close = value == other or abs(value - other) <= 1e3 * TOLERANCES.root * max(
                1.0, abs(value)
            )
            if other_branch != branch and close and _offdiag_vanishes(ws, value):
                entries.append(BandEntry(value, 2, Provenance.BRANCH_MINUS))
                i += 2
                continue
        entries.append(BandEntry(value, 1, _BRANCH_TAG[branch]))
        i += 1
    return entries


def _check_sandwich(ws: Workspace, entries: list[BandEntry]) -> None:
    """Counts below each level must lie in [N_free, N_free + 2]."""
    free_below = 0
    for level in ws.levels:
        found = sum(e.multiplicity for e in entries if e.value < level.value)
        if not free_below <= found <= free_below + 2:
            raise RootCountError(
                f"{found} eigenvalues below free level {level.value:.12g}, "
                f"expected between {free_below} and {free_below + 2}",
                (-math.inf, level.value),
            )
        free_below += level.mu


def _solve(ws: Workspace, alpha: float, jmax: int) -> HcBandSolution:
    branches = _Branches(ws, alpha)
    roots: list[tuple[float, int]] = []
    for branch in (MINUS, PLUS):
        roots.extend(_first_interval(ws, branches, branch))
        for i in range(len(ws.levels) - 1):
            roots.extend(_gap_roots(ws, branches, i, branch))

    entries = _merge_doubles(ws, roots)
    for i, level in enumerate(ws.levels):
        case, multiplicity = classify_pole(ws.pole(i), alpha)
        if multiplicity > 0:
            entries.append(BandEntry(level.value, multiplicity, _CASE_TAG[case]))
    _check_sandwich(ws, entries)

    found = sum(e.multiplicity for e in entries)
    if found < jmax:
        raise RootCountError(
            f"only {found} eigenvalues below {ws.levels[-1].value:.6g}, need {jmax}",
            (-math.inf, ws.levels[-1].value),
        )
    return HcBandSolution(k=ws.k, alpha=alpha, eigenvalues=trim(entries, jmax))


def solve_bands_hc(
    cfg: LatticeConfig,
    k: KLike,
    alpha: float,
    jmax: int = 8,
    workspace: Workspace | None = None,
    tol: float | None = None,
) -> HcBandSolution:
    """The lowest `jmax` eigenvalues of the honeycomb operator at k, with multiplicity.

    `tol` bounds the lattice-sum tails (None keeps the default cutoff).
    """
    if jmax < 1:
        raise ConfigurationError(f"jmax must be positive: {jmax}")
    vector = as_vector(k)
    ws = workspace or cached_workspace(cfg, vector, jmax, tol)
    if alpha == math.inf:
        return HcBandSolution(
            k=vector, alpha=alpha, eigenvalues=free_entries(ws.levels, jmax)
        )

    for attempt in range(MAX_RETRIES + 1):
        try:
            return _solve(ws, alpha, jmax)
        except RootCountError as e:
            if attempt == MAX_RETRIES:
                raise
            logger.debug("Retrying k=%s with more free levels: %s", vector, e)
            ws = Workspace.build(cfg, vector, jmax + 6 * (attempt + 1), tol)
    raise AssertionError("unreachable")


def gamma_matrix(
    cfg: LatticeConfig, lam: float, k: KLike, alpha: float
) -> npt.NDArray[np.complex128]:
    """The 2x2 boundary matrix whose kernel carries the perturbed eigenvalues."""
    g0 = g_diag(cfg, lam, k).real
    gx = complex(g_offdiag(cfg, lam, k).value)
    return np.array(
        [[alpha - g0, -gx], [-gx.conjugate(), alpha - g0]], dtype=np.complex128
    )


def _cone_sums(
    cfg: LatticeConfig, lambda_prime: float, radius: float
) -> tuple[complex, float]:
    """Orbit-grouped numerator and plain denominator of the cone slope."""
    m1, m2 = dual_disc(cfg, cfg.K, radius)
    r1, r2 = rotate_index(m1, m2)
    s1, s2 = rotate_index(r1, r2)
    # One representative per orbit: the lexicographically smallest index.
    rep = ((m1 < r1) | ((m1 == r1) & (m2 < r2))) & (
        (m1 < s1) | ((m1 == s1) & (m2 < s2))
    )
    q = cfg.xi(m1, m2) + cfg.K
    q2 = np.einsum("ij,ij->i", q, q)
    weights = 1.0 / (q2 - lambda_prime) ** 2
    numerator = complex(0.0)
    for a1, a2 in ((m1, m2), (r1, r2), (s1, s2)):
        numerator += complex(np.sum((a1 * offset_phase(a1, a2) * weights)[rep]))
    return numerator, float(np.sum(weights))


def cone_slope_hc(
    cfg: LatticeConfig, lambda_prime: float, cutoff: int = DEFAULT_CONE_CUTOFF
) -> float:
    """Slope c of the Dirac cone at a perturbed double eigenvalue of K.

    `cutoff` is the truncation radius in units of |k1|; the sums at the
    cutoff and half of it are extrapolated with a 1/r^2 tail model.
    """
    level = float(np.min(np.abs(_free_norms(cfg, lambda_prime) - lambda_prime)))
    if level < TOLERANCES.pole * max(1.0, abs(lambda_prime)):
        raise PoleProximityError(
            f"lambda'={lambda_prime:.12g} sits on a free level at K", lambda_prime
        )
    radius = cutoff * cfg.dual_length
    num_full, den_full = _cone_sums(cfg, lambda_prime, radius)
    num_half, den_half = _cone_sums(cfg, lambda_prime, 0.5 * radius)
    numerator = num_full + (num_full - num_half) / 3.0
    denominator = den_full + (den_full - den_half) / 3.0
    return 4.0 * math.pi / cfg.a * abs(numerator) / denominator


def _free_norms(cfg: LatticeConfig, lam: float) -> FloatArray:
    radius = math.sqrt(max(lam, 0.0)) + 2.0 * cfg.dual_length
    m1, m2 = dual_disc(cfg, cfg.K, radius)
    q = cfg.xi(m1, m2) + cfg.K
    return np.einsum("ij,ij->i", q, q)


def cone_report_hc(
    cfg: LatticeConfig,
    alpha: float,
    pair: tuple[int, int] = (1, 2),
    deltas: tuple[float, ...] = (1e-3, 5e-4, 2.5e-4),
    directions: int = 8,
    cutoff: int = DEFAULT_CONE_CUTOFF,
    tol: float | None = None,
) -> ConeReport:
    """Finite-difference slopes of a degenerate pair at K against cone_slope_hc."""
    jmax = pair[1] + 1
    at_k = solve_bands_hc(cfg, cfg.K, alpha, jmax, tol=tol).expanded()
    vertex = at_k[pair[0] - 1]
    return cone_report(
        lambda k: solve_bands_hc(cfg, k, alpha, jmax, tol=tol),
        cfg,
        pair,
        cone_slope_hc(cfg, vertex, cutoff),
        deltas,
        directions,
    )


def spectrum_hc(
    cfg: LatticeConfig,
    alpha: float,
    mesh_n: int,
    jmax: int = 8,
    polish: bool = False,
    mapper: Mapper = map,
    tol: float | None = None,
) -> SpectrumReport:
    """Three-interval prediction against the mesh-observed honeycomb bands."""
    if mesh_n < 8:
        raise ConfigurationError(f"mesh_n must be at least 8 for a scan: {mesh_n}")
    if jmax < 4:
        raise ConfigurationError(f"jmax must be at least 4 for a scan: {jmax}")

    def bands(k: FloatArray) -> list[float]:
        return solve_bands_hc(cfg, k, alpha, jmax, tol=tol).bands(jmax)

    observed = mesh_extrema(bands, bz_mesh(cfg, mesh_n), jmax, cfg, polish, mapper)
    gamma = bands(cfg.gamma_point)
    predicted = {
        "I1": (gamma[0], observed[1].hi),
        "I2": (observed[2].lo, observed[2].hi),
        "I3": (observed[3].lo, math.inf),
    }
    report = build_report("honeycomb", alpha, predicted, observed, gamma[0], upper_from=4)
    logger.info("Honeycomb spectrum at alpha=%s: %s", alpha, report.intervals)
    return report


@dataclass
class AsymptoticsTable:
    """Bands at one k over a descending alpha sweep, with the limit checks."""

    k: FloatArray
    alphas: list[float]
    rows: list[list[float]]
    free: list[float]
    nondecreasing: bool
    lower_limit_errors: list[float]
    upper_limit_errors: list[float]
    convergence_monotone: bool
    above_lowest_free: bool


def asymptotics_check(
    cfg: LatticeConfig,
    k: KLike,
    alphas: Sequence[float],
    jmax: int = 8,
    tol: float | None = None,
) -> AsymptoticsTable:
    """Sweep alpha and compare against the free limits at both ends."""
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ConfigurationError("alphas must be strictly decreasing")
    vector = as_vector(k)
    ws = Workspace.build(cfg, vector, jmax + 2, tol)
    free = [
        e.value
        for e in free_entries(ws.levels, jmax + 2)
        for _ in range(e.multiplicity)
    ]
    rows = [
        solve_bands_hc(cfg, vector, alpha, jmax, ws).bands(jmax) for alpha in alphas
    ]

    nondecreasing = all(
        later[j] <= earlier[j] + 1e-9 * max(1.0, abs(earlier[j]))
        for earlier, later in zip(rows, rows[1:])
        for j in range(jmax)
        if math.isfinite(later[j])
    )
    lowest = rows[-1]
    highest = rows[0]
    lower_errors = [abs(lowest[j + 2] - free[j]) for j in range(jmax - 2)]
    upper_errors = [abs(highest[j] - free[j]) for j in range(jmax)]

    # Distance of lambda_3 to the first free level for negative alpha, of
    # lambda_1 for positive alpha; both shrink as |alpha| grows.
    negative = [abs(r[2] - free[0]) for a, r in zip(alphas, rows) if a < 0]
    positive = [abs(r[0] - free[0]) for a, r in zip(alphas, rows) if a > 0]
    monotone = all(b <= a + 1e-12 for a, b in zip(negative, negative[1:])) and all(
        a <= b + 1e-12 for a, b in zip(positive, positive[1:])
    )
    above = all(r[j] >= free[0] - 1e-9 for r in rows for j in range(2, jmax))
    return AsymptoticsTable(
        k=vector,
        alphas=list(alphas),
        rows=rows,
        free=free[:jmax],
        nondecreasing=nondecreasing,
        lower_limit_errors=lower_errors,
        upper_limit_errors=upper_errors,
        convergence_monotone=monotone,
        above_lowest_free=above,
    )
