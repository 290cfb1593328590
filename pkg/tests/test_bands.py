"""Tests for the shared band plumbing."""

import math
from typing import Callable

import numpy as np
import pytest

from dirac_scatter.bands import (
    BandEntry,
    BandSolution,
    Provenance,
    Workspace,
    approach_pole,
    cone_report,
    standoff,
)
from dirac_scatter.exceptions import RootCountError
from dirac_scatter.greens import DEFAULT_RADIUS_INDEX
from dirac_scatter.lattice import FloatArray, LatticeConfig, build_lattice


@pytest.fixture(scope="module")
def cfg() -> LatticeConfig:
    return build_lattice(1.0)


class TestApproachPole:
    """Test cases for the sign search next to a free level."""

    def test_first_point_clears_the_guard(self) -> None:
        """Test that a sign already present returns twice the standoff away."""
        level = 0.9325

        point = approach_pole(lambda lam: 1.0, level, -1, want_positive=True)

        assert level - point == pytest.approx(2.0 * standoff(level))
        assert level - point > standoff(level)

    def test_goes_inside_the_standoff(self) -> None:
        """Test that the search keeps halving past the pole guard distance."""
        level = 10.0
        edge = level + 1e-3 * standoff(level)

        point = approach_pole(lambda lam: lam - edge, level, +1, want_positive=False)

        assert level < point < edge
        assert point - level < standoff(level)

    def test_gives_up_at_the_level(self) -> None:
        """Test a root-count failure once the distance underflows."""
        with pytest.raises(RootCountError, match="no sign change"):
            approach_pole(lambda lam: 1.0, 3.0, +1, want_positive=False)


def _cone_solver(
    cfg: LatticeConfig, c: float, curvature: float
) -> Callable[[FloatArray], BandSolution]:
    """Bands 1 and 2 of an exact cone at K with a shared quadratic term."""

    def solve(k: FloatArray) -> BandSolution:
        q = float(np.linalg.norm(np.asarray(k) - cfg.K))
        shift = curvature * q * q
        return BandSolution(
            k=np.asarray(k, dtype=float),
            alpha=0.0,
            eigenvalues=(
                BandEntry(10.0 - c * q + shift, 1, Provenance.PERTURBED),
                BandEntry(10.0 + c * q + shift, 1, Provenance.PERTURBED),
            ),
        )

    return solve


class TestConeReport:
    """Test cases for the finite-difference cone report."""

    def test_shared_curvature_cancels(self, cfg: LatticeConfig) -> None:
        """Test that a quadratic term common to both bands leaves the spread at zero."""
        report = cone_report(
            _cone_solver(cfg, 4.0, 300.0), cfg, (1, 2), 4.0, (1e-3,), 8
        )

        lower, upper = np.array(report.c_fd[-1]).T
        assert not np.allclose(lower, upper, rtol=0.05)
        assert report.isotropy_spread == pytest.approx(0.0, abs=1e-9)
        assert report.symmetric_slopes() == pytest.approx([4.0] * 8, rel=1e-9)

    def test_vertex_and_order(self, cfg: LatticeConfig) -> None:
        """Test the vertex value and first-order convergence of one-sided slopes."""
        report = cone_report(
            _cone_solver(cfg, 4.0, 300.0), cfg, (1, 2), 4.0, (1e-3, 5e-4), 4
        )

        assert report.lambda_prime == pytest.approx(10.0)
        assert report.convergence_order == pytest.approx(1.0, abs=1e-6)
        assert len(report.directions) == 4


class TestWorkspaceTolerance:
    """Test cases for the tail-bound driven cutoff."""

    def test_default_radius_without_tolerance(self, cfg: LatticeConfig) -> None:
        """Test that no tolerance keeps the default radius."""
        ws = Workspace.build(cfg, np.array([0.9, 0.35]), 3)

        assert ws.floquet.radius_index == DEFAULT_RADIUS_INDEX
        assert ws.tol is None

    def test_radius_grows_for_tight_tolerance(self, cfg: LatticeConfig) -> None:
        """Test that a tolerance below the default bound enlarges the cutoff."""
        k = np.array([0.9, 0.35])
        loose = Workspace.build(cfg, k, 3)
        target = 0.5 * loose.floquet.tail_bound()

        tight = Workspace.build(cfg, k, 3, tol=target)

        assert tight.floquet.radius_index > DEFAULT_RADIUS_INDEX
        assert tight.floquet.tail_bound() < loose.floquet.tail_bound()
        assert tight.tol == target

    def test_bound_is_finite(self, cfg: LatticeConfig) -> None:
        """Test that the tail bound is a small non-negative number."""
        bound = Workspace.build(cfg, cfg.K, 3).floquet.tail_bound()

        assert math.isfinite(bound)
        assert 0.0 <= bound < 1e-4
