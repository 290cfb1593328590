"""Configuration and data models for dirac-scatter."""

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal, Mapping

from .exceptions import ConfigurationError

if TYPE_CHECKING:
    from .lattice import LatticeConfig

# Type aliases
LatticeKind = Literal["triangular", "honeycomb"]
OutputFormat = Literal["csv", "json"]

FORMAT_VERSION = "dirac-scatter v1"


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by the solvers.

    `degeneracy` and `pole` are relative to max(1, |value|); `root` is the
    bisection tolerance relative to max(1, |lambda|).
    """

    degeneracy: float = 1e-8
    pole: float = 1e-7
    root: float = 1e-10
    discriminant: float = 1e-9
    hexagon: float = 1e-12


TOLERANCES = Tolerances()


def parse_alpha(text: str | float) -> float:
    """Parse a coupling strength, accepting "inf" for the free operator."""
    if isinstance(text, (int, float)):
        value = float(text)
    else:
        cleaned = text.strip().lower()
        if cleaned in {"inf", "+inf", "infinity", "+infinity"}:
            return math.inf
        try:
            value = float(cleaned)
        except ValueError:
            raise ConfigurationError(f"Invalid alpha: {text!r}")
    if math.isnan(value) or value == -math.inf:
        raise ConfigurationError(f"Invalid alpha: {text!r}")
    return value


@dataclass
class RunConfig:
    """Configuration for a dirac-scatter run."""

    lattice: LatticeKind
    a: float
    alpha: float
    jmax: int
    mesh_n: int
    tolerance: float
    output_format: OutputFormat
    output_path: Path | None
    workers: int = 1
    verbose: bool = False

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        self._validate()

    def _validate(self) -> None:
        """Validate configuration values."""
        if self.lattice not in ("triangular", "honeycomb"):
            raise ConfigurationError(f"Invalid lattice: {self.lattice}")

        if not self.a > 0 or not math.isfinite(self.a):
            raise ConfigurationError(f"Lattice constant must be positive: {self.a}")

        if math.isnan(self.alpha) or self.alpha == -math.inf:
            raise ConfigurationError(f"Invalid alpha: {self.alpha}")

        if not 1 <= self.jmax <= 24:
            raise ConfigurationError(f"jmax must lie in [1, 24]: {self.jmax}")

        if not 4 <= self.mesh_n <= 512:
            raise ConfigurationError(f"mesh_n must lie in [4, 512]: {self.mesh_n}")

        if not 1e-12 <= self.tolerance <= 1e-4:
            raise ConfigurationError(
                f"tolerance must lie in [1e-12, 1e-4]: {self.tolerance}"
            )

        if self.output_format not in ("csv", "json"):
            raise ConfigurationError(f"Invalid output format: {self.output_format}")

        if self.workers < 1:
            raise ConfigurationError(f"workers must be at least 1: {self.workers}")

    @property
    def is_free(self) -> bool:
        """Whether the scatterers are switched off (alpha = inf)."""
        return self.alpha == math.inf

    @property
    def alpha_label(self) -> str:
        """Get alpha as it is spelled in output headers."""
        return "inf" if self.is_free else repr(self.alpha)

    def lattice_config(self) -> "LatticeConfig":
        """Build the lattice geometry for this run."""
        from .lattice import build_lattice

        return build_lattice(self.a)


DEFAULTS: dict[str, Any] = {
    "lattice": "honeycomb",
    "a": 1.0,
    "alpha": 0.0,
    "jmax": 8,
    "mesh_n": 20,
    "tolerance": 1e-10,
    "output_format": "csv",
    "output_path": None,
    "workers": 1,
    "verbose": False,
}

_CONVERTERS: dict[str, Any] = {
    "lattice": str,
    "a": float,
    "alpha": parse_alpha,
    "jmax": int,
    "mesh_n": int,
    "tolerance": float,
    "output_format": str,
    "output_path": Path,
    "workers": int,
    "verbose": lambda text: str(text).strip().lower() in {"1", "true", "yes", "on"},
}


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a key=value config file into typed values."""
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}")

    values: dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{number}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigurationError(f"{path}:{number}: unknown key {key!r}")
        try:
            values[key] = _CONVERTERS[key](value.strip())
        except ValueError as e:
            raise ConfigurationError(f"{path}:{number}: {e}")
    return values


def merge_config(
    file_values: Mapping[str, Any] | None = None,
    flag_values: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Build a RunConfig; flags override the file, the file overrides defaults."""
    merged = dict(DEFAULTS)
    merged.update(file_values or {})
    merged.update(flag_values or {})
    known = {f.name for f in fields(RunConfig)}
    unknown = set(merged) - known
    if unknown:
        raise ConfigurationError(f"Unknown settings: {', '.join(sorted(unknown))}")
    merged["alpha"] = parse_alpha(merged["alpha"])
    return RunConfig(**merged)
