"""JSON reading/writing shared by the file formats."""
from __future__ import annotations

import json
from pathlib import Path

from .errors import ParseError


def loads(text: str, source: str = "<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        byte_offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(
            f"{source}: invalid JSON at byte offset {byte_offset} "
            f"(line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc


def read_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read file ({exc.strerror})") from exc
    return loads(text, source=str(path))


def dumps(obj) -> str:
    # Stable text so reruns are byte-identical.
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")
