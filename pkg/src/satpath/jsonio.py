"""Canonical JSON reading and writing.

Reports and game files are emitted with sorted keys and a fixed indent so a
fixed seed reproduces byte-identical output.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import StructureError


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_dumps(obj), encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StructureError(f"{path}: not valid JSON ({exc})") from exc
