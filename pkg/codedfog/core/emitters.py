"""
CSV and JSON writers for experiment outputs
"""
import csv
import io
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

from codedfog.config import settings
from codedfog.core.progress_emitter import NumpyJsonEncoder


def format_float(value: float, digits: Optional[int] = None) -> str:
    """Fixed significant-digit rendering used in every CSV"""
    return format(float(value), f".{digits or settings.FLOAT_DIGITS}g")


def format_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return format_fraction(value)
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def render_csv(
    columns: Sequence[str],
    rows: Iterable[Dict[str, Any]],
    config: Optional[Dict[str, Any]] = None,
) -> str:
    """
    Render rows as CSV text.

    The resolved configuration is echoed as leading `# key=value` lines.
    """
    buffer = io.StringIO()
    if config:
        for key in sorted(config):
            buffer.write(f"# {key}={_cell(config[key])}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[column]) for column in columns])
    return buffer.getvalue()


def render_json(document: Dict[str, Any]) -> str:
    return json.dumps(document, cls=NumpyJsonEncoder, indent=2, sort_keys=True) + "\n"


def render_json_lines(records: Iterable[Dict[str, Any]]) -> str:
    return "".join(
        json.dumps(record, cls=NumpyJsonEncoder, sort_keys=True) + "\n"
        for record in records
    )


def write_output(text: str, out: Optional[Path]) -> None:
    """Write to the requested file, or stdout when no path was given"""
    if out is None:
        print(text, end="")
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")


def sidecar_path(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)
