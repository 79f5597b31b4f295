"""CSV tables with fixed schemas.

Floats are written with 17 significant digits so a parse-back reproduces
them bit-exactly; lines end in CRLF as in RFC 4180.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

SCHEMAS: dict[str, tuple[str, ...]] = {
    "approx": ("kappa", "kappa_bar", "mode", "n_used", "a", "b", "error", "bound_f", "bound_demko", "bound_shin"),
    "bounds": ("omega", "f1", "f2", "demko", "shin"),
    "decay": ("V1", "V2", "distance", "measured", "bound"),
    "saddle": (
        "instance",
        "theta1",
        "theta2",
        "theta3",
        "theta4",
        "lo",
        "hi",
        "sigma_min_actual",
        "sigma_max_actual",
        "contained",
    ),
    "profile": ("t", "s_norm", "u_norm", "lambda_norm"),
    "stability": ("N", "h", "inv_norm", "two_dtilde"),
    "consistency": ("N", "h", "residual"),
    "decay_rate": ("N", "window_lo", "window_hi", "direction", "rate"),
    "ocp_decay": ("I1_lo", "I1_hi", "response", "bound"),
    "violations": ("axiom", "witness", "detail"),
}


class SchemaError(ValueError):
    pass


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return format_cell(value.item())
    return str(value)


def _schema(schema) -> tuple[str, ...]:
    if isinstance(schema, str):
        if schema not in SCHEMAS:
            raise SchemaError(f"unknown schema {schema!r}")
        return SCHEMAS[schema]
    return tuple(schema)


def render_table(rows: Iterable[Mapping], schema) -> str:
    """CSV text for ``rows``; every row must have exactly the schema's keys."""
    cols = _schema(schema)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(cols)
    for i, row in enumerate(rows):
        if set(row) != set(cols):
            extra = sorted(set(row) - set(cols))
            missing = sorted(set(cols) - set(row))
            raise SchemaError(f"row {i} does not match schema: extra {extra}, missing {missing}")
        writer.writerow([format_cell(row[c]) for c in cols])
    return buf.getvalue()


def emit_table(rows: Iterable[Mapping], schema, path) -> Path:
    """Write ``rows`` as CSV to ``path`` and return the path."""
    path = Path(path)
    text = render_table(rows, schema)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    return path


def parse_cell(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path, schema: str | Sequence[str] | None = None) -> list[dict]:
    """Parse a CSV written by :func:`emit_table`; checks the header when ``schema`` is given."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if schema is not None and tuple(header) != _schema(schema):
            raise SchemaError(f"header {header} does not match schema {_schema(schema)}")
        return [dict(zip(header, (parse_cell(c) for c in line))) for line in reader]
