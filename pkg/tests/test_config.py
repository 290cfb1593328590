"""Tests for the configuration module."""

import math
from pathlib import Path

import pytest

from dirac_scatter.config import (
    DEFAULTS,
    TOLERANCES,
    RunConfig,
    load_config_file,
    merge_config,
    parse_alpha,
)
from dirac_scatter.exceptions import ConfigurationError


def make_config(**overrides: object) -> RunConfig:
    values = dict(DEFAULTS)
    values.update(overrides)
    return RunConfig(**values)  # type: ignore[arg-type]


class TestRunConfig:
    """Test cases for RunConfig."""

    def test_valid_config_creation(self) -> None:
        """Test creating a valid configuration."""
        config = make_config(lattice="triangular", a=2.0, alpha=0.5, jmax=5)

        assert config.lattice == "triangular"
        assert config.a == 2.0
        assert config.alpha == 0.5
        assert config.jmax == 5
        assert config.mesh_n == 20
        assert config.output_format == "csv"
        assert config.output_path is None
        assert config.workers == 1

    def test_free_alpha_label(self) -> None:
        """Test that alpha = inf is reported as the free operator."""
        config = make_config(alpha=math.inf)

        assert config.is_free is True
        assert config.alpha_label == "inf"

    def test_finite_alpha_label(self) -> None:
        """Test that finite alphas are spelled with full precision."""
        config = make_config(alpha=0.1)

        assert config.is_free is False
        assert config.alpha_label == "0.1"

    def test_lattice_config(self) -> None:
        """Test that the lattice geometry follows the lattice constant."""
        config = make_config(a=2.0)

        assert config.lattice_config().a == 2.0

    @pytest.mark.parametrize(
        "overrides, message",
        [
            ({"lattice": "square"}, "Invalid lattice"),
            ({"a": 0.0}, "Lattice constant"),
            ({"a": -1.0}, "Lattice constant"),
            ({"jmax": 0}, "jmax"),
            ({"jmax": 25}, "jmax"),
            ({"mesh_n": 3}, "mesh_n"),
            ({"mesh_n": 513}, "mesh_n"),
            ({"tolerance": 1e-3}, "tolerance"),
            ({"tolerance": 1e-13}, "tolerance"),
            ({"output_format": "xml"}, "output format"),
            ({"workers": 0}, "workers"),
            ({"alpha": -math.inf}, "Invalid alpha"),
        ],
    )
    def test_invalid_values(self, overrides: dict[str, object], message: str) -> None:
        """Test that out-of-range values are rejected."""
        with pytest.raises(ConfigurationError, match=message):
            make_config(**overrides)

    def test_configuration_error_is_value_error(self) -> None:
        """Test that configuration errors can be caught as ValueError."""
        with pytest.raises(ValueError):
            make_config(jmax=100)


class TestParseAlpha:
    """Test cases for alpha parsing."""

    @pytest.mark.parametrize("text", ["inf", "INF", "+inf", "Infinity"])
    def test_infinity_spellings(self, text: str) -> None:
        """Test the accepted spellings of the free operator."""
        assert parse_alpha(text) == math.inf

    def test_float_literal(self) -> None:
        """Test a plain number."""
        assert parse_alpha(" -0.07 ") == -0.07

    def test_numbers_pass_through(self) -> None:
        """Test numeric input."""
        assert parse_alpha(2) == 2.0

    @pytest.mark.parametrize("text", ["abc", "nan", "-inf", ""])
    def test_rejected(self, text: str) -> None:
        """Test that anything else is a configuration error."""
        with pytest.raises(ConfigurationError, match="Invalid alpha"):
            parse_alpha(text)


class TestConfigFile:
    """Test cases for the key=value config file and merging."""

    def test_load_typed_values(self, tmp_path: Path) -> None:
        """Test reading keys with comments and blank lines."""
        path = tmp_path / "run.cfg"
        path.write_text(
            "# honeycomb run\n"
            "lattice = triangular\n"
            "\n"
            "alpha = inf   # free\n"
            "mesh-n = 12\n"
            "tolerance = 1e-9\n"
        )

        values = load_config_file(path)

        assert values == {
            "lattice": "triangular",
            "alpha": math.inf,
            "mesh_n": 12,
            "tolerance": 1e-9,
        }

    def test_unknown_key_names_line(self, tmp_path: Path) -> None:
        """Test that unknown keys are reported with their line number."""
        path = tmp_path / "run.cfg"
        path.write_text("a = 1\ncolour = blue\n")

        with pytest.raises(ConfigurationError, match=r"run.cfg:2: unknown key"):
            load_config_file(path)

    def test_malformed_line(self, tmp_path: Path) -> None:
        """Test that lines without '=' are rejected."""
        path = tmp_path / "run.cfg"
        path.write_text("jmax 5\n")

        with pytest.raises(ConfigurationError, match=r"run.cfg:1: expected key=value"):
            load_config_file(path)

    def test_bad_number(self, tmp_path: Path) -> None:
        """Test that unparsable values are configuration errors."""
        path = tmp_path / "run.cfg"
        path.write_text("jmax = many\n")

        with pytest.raises(ConfigurationError, match=r"run.cfg:1"):
            load_config_file(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test reading a file that does not exist."""
        with pytest.raises(ConfigurationError, match="Cannot read config file"):
            load_config_file(tmp_path / "absent.cfg")

    def test_flags_override_file_override_defaults(self) -> None:
        """Test the precedence flags > file > defaults."""
        config = merge_config({"jmax": 4, "a": 2.0}, {"jmax": 6})

        assert config.jmax == 6
        assert config.a == 2.0
        assert config.mesh_n == DEFAULTS["mesh_n"]

    def test_merge_parses_alpha_text(self) -> None:
        """Test that alpha given as text is parsed."""
        assert merge_config(None, {"alpha": "inf"}).is_free

    def test_merge_rejects_unknown(self) -> None:
        """Test that unknown settings are rejected."""
        with pytest.raises(ConfigurationError, match="Unknown settings: colour"):
            merge_config({"colour": "blue"})


class TestTolerances:
    """Test cases for the shared tolerances."""

    def test_defaults(self) -> None:
        """Test the documented default thresholds."""
        assert TOLERANCES.degeneracy == 1e-8
        assert TOLERANCES.pole == 1e-7
        assert TOLERANCES.root == 1e-10
        assert TOLERANCES.discriminant == 1e-9
        assert TOLERANCES.hexagon == 1e-12
