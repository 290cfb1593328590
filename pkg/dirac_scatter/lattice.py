"""Triangular, honeycomb and dual lattice geometry."""

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import numpy.typing as npt

from .config import TOLERANCES
from .exceptions import ConfigurationError

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

SQRT3 = math.sqrt(3.0)

# 2pi/3 rotation; R @ R @ R is the identity.
ROTATION: FloatArray = 0.5 * np.array([[-1.0, -SQRT3], [SQRT3, -1.0]])

# Cube roots of unity indexed by (m1 + m2) mod 3: exp(i xi_m . x0).
_OFFSET_PHASES = np.exp(1j * 4.0 * np.pi / 3.0 * np.arange(3))


@dataclass(frozen=True, eq=False)
class LatticeConfig:
    """Geometry of the triangular lattice, its dual and the honeycomb offset."""

    a: float
    v1: FloatArray
    v2: FloatArray
    k1: FloatArray
    k2: FloatArray
    x0: FloatArray
    K: FloatArray

    @property
    def cell_area(self) -> float:
        """Area of the fundamental domain of the direct lattice."""
        return float(abs(self.v1[0] * self.v2[1] - self.v1[1] * self.v2[0]))

    @property
    def zone_area(self) -> float:
        """Area of the Brillouin zone."""
        return (2.0 * math.pi) ** 2 / self.cell_area

    @property
    def dual_length(self) -> float:
        """Common length of k1 and k2."""
        return 4.0 * math.pi / (self.a * SQRT3)

    @property
    def gamma_point(self) -> FloatArray:
        return np.zeros(2)

    @property
    def m_point(self) -> FloatArray:
        """Edge midpoint (k1 + k2) / 2."""
        return 0.5 * (self.k1 + self.k2)

    def xi(self, m1: npt.ArrayLike, m2: npt.ArrayLike) -> FloatArray:
        """Dual lattice vectors m1 k1 + m2 k2, stacked on the last axis."""
        m1a = np.asarray(m1, dtype=float)[..., None]
        m2a = np.asarray(m2, dtype=float)[..., None]
        return m1a * self.k1 + m2a * self.k2

    def real_vectors(self, n1: npt.ArrayLike, n2: npt.ArrayLike) -> FloatArray:
        """Direct lattice vectors n1 v1 + n2 v2, stacked on the last axis."""
        n1a = np.asarray(n1, dtype=float)[..., None]
        n2a = np.asarray(n2, dtype=float)[..., None]
        return n1a * self.v1 + n2a * self.v2


class DualIndex(NamedTuple):
    """Integer pair labelling the dual lattice vector m1 k1 + m2 k2."""

    m1: int
    m2: int


@dataclass(frozen=True)
class Momentum:
    """Quasi-momentum in the Brillouin zone."""

    kx: float
    ky: float

    def as_array(self) -> FloatArray:
        return np.array([self.kx, self.ky])


KLike = Momentum | Sequence[float] | FloatArray


def as_vector(k: KLike) -> FloatArray:
    """Coerce a momentum-like value to a float 2-vector."""
    if isinstance(k, Momentum):
        return k.as_array()
    vector = np.asarray(k, dtype=float)
    if vector.shape != (2,):
        raise ConfigurationError(f"Momentum must be a 2-vector, got shape {vector.shape}")
    return vector


def build_lattice(a: float = 1.0) -> LatticeConfig:
    """Construct the lattice geometry for lattice constant `a`."""
    if not a > 0 or not math.isfinite(a):
        raise ConfigurationError(f"Lattice constant must be positive: {a}")

    v1 = a * np.array([SQRT3 / 2.0, 0.5])
    v2 = a * np.array([SQRT3 / 2.0, -0.5])
    scale = 4.0 * math.pi / (a * SQRT3)
    k1 = scale * np.array([0.5, SQRT3 / 2.0])
    k2 = scale * np.array([0.5, -SQRT3 / 2.0])
    x0 = (2.0 / 3.0) * (v1 + v2)
    K = (2.0 / 3.0) * k1 + (1.0 / 3.0) * k2
    return LatticeConfig(a=a, v1=v1, v2=v2, k1=k1, k2=k2, x0=x0, K=K)


def offset_phase(m1: npt.ArrayLike, m2: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    """exp(i xi_m . x0), exact because xi_m . x0 = (4pi/3)(m1 + m2)."""
    residue = np.mod(np.asarray(m1, dtype=np.int64) + np.asarray(m2, dtype=np.int64), 3)
    return _OFFSET_PHASES[residue]


def rotate_index(m1: npt.ArrayLike, m2: npt.ArrayLike) -> tuple[IntArray, IntArray]:
    """Index action of the rotation about -K: (m1, m2) -> (-m1+m2-1, -m1-1)."""
    m1a = np.asarray(m1, dtype=np.int64)
    m2a = np.asarray(m2, dtype=np.int64)
    return -m1a + m2a - 1, -m1a - 1


def rotation_orbit(m: DualIndex | tuple[int, int]) -> tuple[DualIndex, DualIndex, DualIndex]:
    """The orbit (m, Rm, R^2 m) of a dual index under the rotation about -K."""
    first = DualIndex(int(m[0]), int(m[1]))
    r1, r2 = rotate_index(first.m1, first.m2)
    second = DualIndex(int(r1), int(r2))
    s1, s2 = rotate_index(second.m1, second.m2)
    return first, second, DualIndex(int(s1), int(s2))


def rotate_momentum(k: KLike, times: int = 1) -> FloatArray:
    """Apply the 2pi/3 rotation to a momentum `times` times."""
    vector = as_vector(k)
    for _ in range(times % 3):
        vector = ROTATION @ vector
    return vector


def dual_disc(
    cfg: LatticeConfig, center: FloatArray, radius: float
) -> tuple[IntArray, IntArray]:
    """Indices m with |xi_m + center| <= radius, in row-major index order."""
    reach = math.sqrt(2.0) * (radius + float(np.linalg.norm(center))) / cfg.dual_length
    bound = int(math.ceil(reach)) + 1
    span = np.arange(-bound, bound + 1, dtype=np.int64)
    m1, m2 = np.meshgrid(span, span, indexing="ij")
    m1 = m1.ravel()
    m2 = m2.ravel()
    shifted = cfg.xi(m1, m2) + center
    q2 = np.einsum("ij,ij->i", shifted, shifted)
    keep = q2 <= radius * radius * (1.0 + 1e-12)
    return m1[keep], m2[keep]


@dataclass(frozen=True)
class FreeLevel:
    """A distinct free eigenvalue |xi_m + k|^2 and the indices that attain it."""

    value: float
    indices: tuple[DualIndex, ...]

    @property
    def mu(self) -> int:
        return len(self.indices)


def free_eigenvalues(cfg: LatticeConfig, k: KLike, lam_max: float) -> list[FreeLevel]:
    """Distinct free eigenvalues up to `lam_max`, grouped into degeneracy classes."""
    vector = as_vector(k)
    if lam_max < 0:
        raise ConfigurationError(f"lam_max must be non-negative: {lam_max}")

    m1, m2 = dual_disc(cfg, vector, math.sqrt(lam_max))
    shifted = cfg.xi(m1, m2) + vector
    q2 = np.einsum("ij,ij->i", shifted, shifted)
    keep = q2 <= lam_max
    m1, m2, q2 = m1[keep], m2[keep], q2[keep]
    if q2.size == 0:
        raise ConfigurationError(
            f"No free eigenvalue below lam_max={lam_max}; it must exceed |k|^2"
        )

    order = np.lexsort((m2, m1, q2))
    levels: list[FreeLevel] = []
    group: list[DualIndex] = []
    anchor = float(q2[order[0]])
    total = 0.0
    for i in order:
        value = float(q2[i])
        if group and abs(value - anchor) > TOLERANCES.degeneracy * max(1.0, abs(anchor)):
            levels.append(FreeLevel(total / len(group), tuple(group)))
            group, total, anchor = [], 0.0, value
        group.append(DualIndex(int(m1[i]), int(m2[i])))
        total += value
    levels.append(FreeLevel(total / len(group), tuple(group)))
    return levels


def expand_levels(levels: Sequence[FreeLevel]) -> list[float]:
    """Free eigenvalues repeated by multiplicity, ascending."""
    return [level.value for level in levels for _ in range(level.mu)]


def in_brillouin_zone(cfg: LatticeConfig, k: KLike) -> bool:
    """Hexagon test: |k . u| <= |u|^2 / 2 for u in k1, k2, k1 + k2."""
    vector = as_vector(k)
    limit = 0.5 * cfg.dual_length**2 * (1.0 + TOLERANCES.hexagon)
    return all(abs(float(vector @ u)) <= limit for u in (cfg.k1, cfg.k2, cfg.k1 + cfg.k2))


def fold_to_zone(cfg: LatticeConfig, k: KLike) -> FloatArray:
    """Translate `k` by the nearest dual lattice vector into the zone."""
    vector = as_vector(k)
    basis = np.column_stack([cfg.k1, cfg.k2])
    coords = np.linalg.solve(basis, vector)
    base = np.floor(coords)
    best = vector
    best_norm = math.inf
    for d1 in (-1.0, 0.0, 1.0, 2.0):
        for d2 in (-1.0, 0.0, 1.0, 2.0):
            candidate = vector - basis @ (base + np.array([d1, d2]))
            norm = float(candidate @ candidate)
            if norm < best_norm - 1e-14:
                best, best_norm = candidate, norm
    return best


def bz_mesh(cfg: LatticeConfig, n: int) -> list[FloatArray]:
    """n x n parallelogram grid folded into the zone, followed by Gamma, K and M.

    Special points the grid already holds are not repeated.
    """
    if n < 1:
        raise ConfigurationError(f"Mesh size must be at least 1: {n}")
    grid = -0.5 + np.arange(n) / n
    points = [fold_to_zone(cfg, s * cfg.k1 + t * cfg.k2) for s in grid for t in grid]
    grid_points = np.array(points)
    reach = 1e-9 * cfg.dual_length
    for special in (cfg.gamma_point, cfg.K.copy(), cfg.m_point):
        if np.min(np.linalg.norm(grid_points - special, axis=1)) > reach:
            points.append(special)
    return points


def bz_path(
    cfg: LatticeConfig, waypoints: Sequence[KLike | str], steps: int
) -> list[FloatArray]:
    """Piecewise-linear path with `steps` points per segment, endpoints shared.

    Waypoints may be momenta or the names G, K and M.
    """
    if not waypoints:
        raise ConfigurationError("A path needs at least one waypoint")
    if steps < 2:
        raise ConfigurationError(f"steps must be at least 2: {steps}")
    named = high_symmetry_points(cfg)
    corners = []
    for w in waypoints:
        if isinstance(w, str):
            if w.upper() not in named:
                raise ConfigurationError(f"Unknown waypoint: {w}")
            corners.append(named[w.upper()])
        else:
            corners.append(as_vector(w))
    path = [corners[0]]
    for start, end in zip(corners, corners[1:]):
        for t in np.linspace(0.0, 1.0, steps)[1:]:
            path.append((1.0 - t) * start + t * end)
    return path


def high_symmetry_points(cfg: LatticeConfig) -> dict[str, FloatArray]:
    """Named high-symmetry momenta accepted in path specifications."""
    return {"G": cfg.gamma_point, "K": cfg.K.copy(), "M": cfg.m_point}
