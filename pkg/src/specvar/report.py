"""Artifact writers: versioned JSON/CSV reports that land whole or not at all.

Every artifact embeds the resolved run configuration and a format version,
so a report file is self-describing and reruns are exactly specifiable
from the file alone.  Writers stage to a sibling temp file and rename,
which on POSIX replaces atomically: consumers never observe partial
output.  Serialization is deterministic (sorted keys, repr floats), so
identical configs and seeds produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Sequence

FORMAT_VERSION = "specvar/1"


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _jsonable(value):
    """Coerce report values to plain JSON types (tuples become lists)."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return value.item()
    return value


def json_report(path: str, config: dict, result: dict) -> None:
    doc = {
        "format": FORMAT_VERSION,
        "config": _jsonable(config),
        "result": _jsonable(result),
    }
    _atomic_write(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _cell(value) -> str:
    # repr round-trips float decimals exactly; locale never enters
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_report(
    path: str, config: dict, header: Sequence[str], rows: Iterable[Sequence]
) -> None:
    lines = [
        f"# format={FORMAT_VERSION}",
        "# config=" + json.dumps(_jsonable(config), sort_keys=True),
        ",".join(header),
    ]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row width {len(row)} != header width {len(header)}")
        lines.append(",".join(_cell(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")
