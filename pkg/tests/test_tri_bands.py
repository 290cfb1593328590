"""Tests for the triangular lattice band solver."""

import math

import numpy as np
import pytest

from dirac_scatter.bands import Provenance
from dirac_scatter.exceptions import ConfigurationError
from dirac_scatter.greens import g_diag
from dirac_scatter.lattice import (
    LatticeConfig,
    build_lattice,
    expand_levels,
    free_eigenvalues,
    rotate_momentum,
)
from dirac_scatter.spectrum import gap_closing
from dirac_scatter.tri_bands import (
    cone_report_tri,
    cone_slope_tri,
    solve_bands_tri,
    spectrum_tri,
)

GENERIC_K = np.array([0.9, 0.35])


@pytest.fixture(scope="module")
def cfg() -> LatticeConfig:
    return build_lattice(1.0)


@pytest.fixture(scope="module")
def k_squared(cfg: LatticeConfig) -> float:
    return float(cfg.K @ cfg.K)


class TestSolveBandsTri:
    """Test cases for solve_bands_tri."""

    def test_free_operator(self, cfg: LatticeConfig) -> None:
        """Test that alpha = inf returns the free spectrum."""
        solution = solve_bands_tri(cfg, GENERIC_K, math.inf, 6)
        free = expand_levels(free_eigenvalues(cfg, GENERIC_K, 80.0))

        assert solution.bands(6) == pytest.approx(free[:6])

    def test_dirac_point_structure(self, cfg: LatticeConfig, k_squared: float) -> None:
        """Test the eigenvalue pattern at K for alpha = 0."""
        solution = solve_bands_tri(cfg, cfg.K, 0.0, 12)
        bands = solution.bands(12)

        assert bands[0] < k_squared
        assert bands[1] == pytest.approx(k_squared, rel=1e-12)
        assert bands[2] == pytest.approx(k_squared, rel=1e-12)
        assert k_squared < bands[3] < 4 * k_squared
        assert bands[4:6] == pytest.approx([4 * k_squared] * 2, rel=1e-12)
        assert 4 * k_squared < bands[6] < 7 * k_squared
        assert bands[7:12] == pytest.approx([7 * k_squared] * 5, rel=1e-12)

    def test_unperturbed_multiplicity(self, cfg: LatticeConfig, k_squared: float) -> None:
        """Test that a level of multiplicity mu keeps mu - 1."""
        solution = solve_bands_tri(cfg, cfg.K, 0.0, 8)
        at_level = [e for e in solution.eigenvalues if e.value == pytest.approx(k_squared)]

        assert len(at_level) == 1
        assert at_level[0].multiplicity == 2
        assert at_level[0].provenance == Provenance.UNPERTURBED

    def test_roots_solve_secular_equation(self, cfg: LatticeConfig) -> None:
        """Test g_lambda(0, k) = alpha at every perturbed eigenvalue."""
        alpha = 0.3
        solution = solve_bands_tri(cfg, GENERIC_K, alpha, 6)

        for entry in solution.perturbed():
            assert g_diag(cfg, entry.value, GENERIC_K).real == pytest.approx(
                alpha, abs=1e-6
            )

    def test_interlacing(self, cfg: LatticeConfig) -> None:
        """Test nu_{j-1}^inf <= nu_j <= nu_j^inf."""
        bands = solve_bands_tri(cfg, GENERIC_K, -0.5, 8).bands(8)
        free = expand_levels(free_eigenvalues(cfg, GENERIC_K, 300.0))

        for j in range(8):
            assert bands[j] <= free[j]
            if j >= 1:
                assert free[j - 1] <= bands[j]

    def test_increasing_in_alpha(self, cfg: LatticeConfig) -> None:
        """Test that perturbed eigenvalues grow with alpha."""
        low = solve_bands_tri(cfg, GENERIC_K, 0.0, 6).bands(6)
        high = solve_bands_tri(cfg, GENERIC_K, 1.0, 6).bands(6)

        assert all(b > a for a, b in zip(low, high))

    def test_lowest_root_for_very_negative_alpha(self, cfg: LatticeConfig) -> None:
        """Test the closed form -exp(-4 pi alpha) far below the spectrum."""
        solution = solve_bands_tri(cfg, GENERIC_K, -1.0, 3)

        assert solution.bands(1)[0] == pytest.approx(-math.exp(4 * math.pi), rel=1e-9)

    def test_overflowing_root(self, cfg: LatticeConfig) -> None:
        """Test that alpha = -100 sends the lowest band to -inf."""
        bands = solve_bands_tri(cfg, GENERIC_K, -100.0, 3).bands(3)

        assert bands[0] == -math.inf
        assert math.isfinite(bands[1])

    def test_rotation_symmetry(self, cfg: LatticeConfig) -> None:
        """Test equal bands at k and Rk."""
        base = solve_bands_tri(cfg, GENERIC_K, 0.2, 6).bands(6)
        rotated = solve_bands_tri(cfg, rotate_momentum(GENERIC_K), 0.2, 6).bands(6)

        assert rotated == pytest.approx(base, abs=1e-8)

    @pytest.mark.parametrize("point", ["gamma", "K", "M", "generic"])
    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
    def test_solves_at_special_and_generic_points(
        self, cfg: LatticeConfig, point: str, alpha: float
    ) -> None:
        """Test a full ascending band list at Gamma, K, M and a generic momentum."""
        k = {
            "gamma": cfg.gamma_point,
            "K": cfg.K,
            "M": cfg.m_point,
            "generic": GENERIC_K,
        }[point]

        bands = solve_bands_tri(cfg, k, alpha, 6).bands(6)

        assert len(bands) == 6
        assert all(math.isfinite(v) for v in bands)
        assert bands == sorted(bands)

    def test_symmetry_over_random_momenta(self, cfg: LatticeConfig) -> None:
        """Test equal bands at k, Rk and -k for 20 random momenta."""
        rng = np.random.default_rng(2024)
        for k in rng.uniform(-0.5, 0.5, size=(20, 2)) @ np.array([cfg.k1, cfg.k2]):
            base = solve_bands_tri(cfg, k, 0.2, 5).bands(5)
            for image in (rotate_momentum(k), -k):
                assert solve_bands_tri(cfg, image, 0.2, 5).bands(5) == pytest.approx(
                    base, rel=1e-9, abs=1e-9
                )

    def test_invalid_jmax(self, cfg: LatticeConfig) -> None:
        """Test that jmax must be positive."""
        with pytest.raises(ConfigurationError, match="jmax"):
            solve_bands_tri(cfg, GENERIC_K, 0.0, 0)


class TestConeTri:
    """Test cases for the triangular Dirac cone."""

    def test_slope_value(self, cfg: LatticeConfig) -> None:
        """Test c = 4 pi / 3a."""
        assert cone_slope_tri(cfg) == pytest.approx(4.18879, abs=1e-5)
        assert cone_slope_tri(build_lattice(2.0)) == pytest.approx(4.18879 / 2, abs=1e-5)

    @pytest.mark.parametrize("alpha", [-1.0, 0.0, 1.0])
    def test_finite_differences(self, cfg: LatticeConfig, alpha: float) -> None:
        """Test finite-difference slopes of bands 2 and 3 against |K|."""
        report = cone_report_tri(cfg, alpha, deltas=(1e-3,), directions=8)
        one_sided = np.array(report.c_fd[-1])
        symmetric = np.array(report.symmetric_slopes())

        assert report.lambda_prime == pytest.approx(float(cfg.K @ cfg.K))
        assert np.all(np.abs(one_sided - report.c_formula) < 0.02 * report.c_formula)
        assert np.all(np.abs(symmetric - report.c_formula) < 0.01 * report.c_formula)
        assert report.isotropy_spread <= 0.005


class TestSpectrumTri:
    """Test cases for the triangular spectrum report."""

    def test_structure(self, cfg: LatticeConfig) -> None:
        """Test at most two intervals with the band-1 minimum at Gamma."""
        report = spectrum_tri(cfg, 0.5, mesh_n=8, jmax=3)

        assert len(report.intervals) <= 2
        assert "band1_min_not_at_gamma" not in report.discrepancy_flags
        assert report.observed[0].lo == pytest.approx(report.predicted["band1"][0])
        assert report.observed[0].hi == pytest.approx(report.predicted["band1"][1])

    @pytest.mark.parametrize("alpha", [-2.0, -0.07, 2.0, 10.0])
    def test_second_band_minimum(self, cfg: LatticeConfig, alpha: float) -> None:
        """Test that the band-2 minimum sits at Gamma or M across couplings."""
        report = spectrum_tri(cfg, alpha, mesh_n=8, jmax=3)

        assert len(report.intervals) <= 2
        assert "band1_min_not_at_gamma" not in report.discrepancy_flags
        assert report.observed[1].lo == pytest.approx(
            report.predicted["upper"][0], abs=1e-3
        )

    def test_gap_closes_between_half_and_one(self, cfg: LatticeConfig) -> None:
        """Test an open first gap at alpha = -1 and 0.5 that has closed by alpha = 1."""
        alphas = [-1.0, 0.5, 1.0]
        gaps = [
            max(spectrum_tri(cfg, alpha, mesh_n=8, jmax=3).first_gap, 0.0)
            for alpha in alphas
        ]

        assert gaps[0] > 0.0
        assert gaps[1] > 0.0
        assert gaps[2] == 0.0
        assert gap_closing(alphas, gaps) == 1.0

    def test_small_mesh_rejected(self, cfg: LatticeConfig) -> None:
        """Test the minimum mesh size of a scan."""
        with pytest.raises(ConfigurationError, match="mesh_n"):
            spectrum_tri(cfg, 0.0, mesh_n=4)
