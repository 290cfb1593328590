"""CSV and JSON writers for band, spectrum and probe results."""

import csv
import json
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Sequence, TextIO

from .config import FORMAT_VERSION, RunConfig
from .exceptions import ConfigurationError

BAND_COLUMNS = ("k_index", "kx", "ky", "band", "value", "multiplicity", "provenance")
SPECTRUM_COLUMNS = (
    "alpha",
    "n_intervals",
    "intervals",
    "gap",
    "observed_intervals",
    "flags",
)


def format_float(value: float) -> str:
    """Full-precision scientific notation; infinities spelled inf / -inf."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return "%.16e" % value


def format_intervals(intervals: Sequence[tuple[float, float]]) -> str:
    return ";".join(f"[{format_float(lo)},{format_float(hi)}]" for lo, hi in intervals)


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return format_float(value)
    return str(value)


@contextmanager
def open_output(path: Path | None) -> Iterator[TextIO]:
    """Yield the target stream; stdout when no path is given."""
    if path is None:
        yield sys.stdout
        return
    try:
        handle = path.open("w", encoding="utf-8", newline="")
    except OSError as e:
        raise ConfigurationError(f"Cannot write {path}: {e}") from e
    with handle:
        yield handle


def _header(config: RunConfig, stream: TextIO, **extra: Any) -> None:
    meta = {
        "lattice": config.lattice,
        "a": format_float(config.a),
        "alpha": config.alpha_label,
        "tolerance": format_float(config.tolerance),
        **{key: _cell(value) for key, value in extra.items()},
    }
    stream.write(f"# {FORMAT_VERSION}\n")
    stream.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")


def write_band_rows(
    config: RunConfig, rows: Sequence[Sequence[Any]], path: Path | None = None
) -> None:
    """Write one line per (k, band) in BAND_COLUMNS order."""
    with open_output(path) as stream:
        _header(config, stream, jmax=config.jmax)
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(BAND_COLUMNS)
        writer.writerows([_cell(v) for v in row] for row in rows)


def write_spectrum_rows(
    config: RunConfig, rows: Sequence[dict[str, Any]], path: Path | None = None
) -> None:
    """Write one line per alpha of a spectrum scan."""
    with open_output(path) as stream:
        _header(config, stream, jmax=config.jmax, mesh_n=config.mesh_n)
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(SPECTRUM_COLUMNS)
        for row in rows:
            cells = [
                format_float(row["alpha"]),
                str(len(row["intervals"])),
                format_intervals(row["intervals"]),
                format_float(row["gap"]),
                format_intervals(row["observed_intervals"]),
                "|".join(row["flags"]),
            ]
            writer.writerow(cells)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return format_float(value)
    if isinstance(value, complex):
        return {"re": _json_safe(value.real), "im": _json_safe(value.imag)}
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if hasattr(value, "tolist"):
        return _json_safe(value.tolist())
    return value


def write_json(config: RunConfig, payload: dict[str, Any], path: Path | None = None) -> None:
    """Write a JSON document tagged with the format version and run metadata."""
    document = {
        "format": FORMAT_VERSION,
        "lattice": config.lattice,
        "a": config.a,
        "alpha": config.alpha_label,
        "tolerance": config.tolerance,
        **payload,
    }
    with open_output(path) as stream:
        json.dump(_json_safe(document), stream, indent=2, allow_nan=False)
        stream.write("\n")
