"""
Shared command plumbing: output flags, seed resolution, config echo and table output
"""
import argparse
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Type, TypeVar

from pydantic import BaseModel

from codedfog.config import settings
from codedfog.core.emitters import render_csv, render_json, sidecar_path, write_output

RequestT = TypeVar("RequestT", bound=BaseModel)


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


def int_auto(value: str) -> int:
    """Decimal or 0x-prefixed integer"""
    return int(value, 0)


def int_list(value: str) -> List[int]:
    """'1..10', '1-10' or '2,5,7'"""
    value = value.strip()
    for separator in ("..", "-"):
        if separator in value:
            low, high = value.split(separator, 1)
            return list(range(int(low), int(high) + 1))
    return [int(item) for item in value.split(",") if item.strip()]


def add_output_flags(parser: argparse.ArgumentParser, default_format: OutputFormat = OutputFormat.CSV) -> None:
    parser.add_argument("--seed", type=int_auto, default=None, help="defaults to CODEDFOG_SEED")
    parser.add_argument("--out", type=Path, default=None, help="output file (stdout when omitted)")
    parser.add_argument(
        "--format",
        choices=[item.value for item in OutputFormat],
        default=default_format.value,
    )


def resolve_seed(seed: Optional[int]) -> int:
    return settings.CODEDFOG_SEED if seed is None else seed


def request_from(args: argparse.Namespace, model: Type[RequestT]) -> RequestT:
    """Build a request model from parsed flags; unset flags fall back to model defaults"""
    values = {
        name: value
        for name, value in vars(args).items()
        if name in model.model_fields and value is not None
    }
    return model(**values)


def config_echo(command: str, request: BaseModel, seed: Optional[int] = None) -> Dict[str, Any]:
    config = request.model_dump(mode="json", exclude={"out", "format", "trace", "plan_out"})
    config["command"] = command
    config["artifact_version"] = settings.ARTIFACT_VERSION
    if seed is not None:
        config["seed"] = seed
    return config


def emit_table(
    columns: Sequence[str],
    rows: List[Dict[str, Any]],
    config: Dict[str, Any],
    out: Optional[Path],
    output_format: OutputFormat,
    extra: Optional[Dict[str, Any]] = None,
) -> None:
    """CSV (with a JSON sidecar for `extra` when writing to a file) or one JSON document"""
    if OutputFormat(output_format) == OutputFormat.JSON:
        document = {"config": config, "rows": rows}
        document.update(extra or {})
        write_output(render_json(document), out)
        return
    write_output(render_csv(columns, rows, config), out)
    if extra:
        document = {"config": config}
        document.update(extra)
        if out is None:
            write_output("\n" + render_json(document), None)
        else:
            write_output(render_json(document), sidecar_path(out, "_summary.json"))
