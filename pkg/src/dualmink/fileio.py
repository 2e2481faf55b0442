"""Reading and writing the package's structured text files.

Every file is JSON preceded by comment header lines starting with '#'.
The first header line carries a timestamp and is the only part of a file
allowed to differ between reruns with identical inputs; payloads embed the
config hash and seed needed to reproduce them.  Readers skip headers,
validate against the pydantic schemas and reject violations with
diagnostics naming the file, the JSON line and the offending field.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, TypeAdapter, ValidationError

from .errors import ConfigurationError

M = TypeVar("M", bound=BaseModel)

_FORMAT_LINE = "# dualmink-file v1"


def dump_document(payload: dict) -> str:
    """Header lines plus canonical JSON; deterministic below the first line."""
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    body = json.dumps(payload, sort_keys=True, indent=2)
    return f"# generated: {stamp}\n{_FORMAT_LINE}\n{body}\n"


def write_document(path: str | Path, payload: dict) -> None:
    Path(path).write_text(dump_document(payload))


def comparable_text(text: str) -> str:
    """Document text with the timestamp header dropped, for idempotence checks."""
    lines = text.splitlines()
    kept = [ln for ln in lines if not ln.startswith("# generated:")]
    return "\n".join(kept)


def load_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}")
    payload_lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    try:
        return json.loads("\n".join(payload_lines))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")


def _field_path(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def validate_model(path: str | Path, payload, model: type[M] | TypeAdapter) -> M:
    adapter = model if isinstance(model, TypeAdapter) else TypeAdapter(model)
    try:
        return adapter.validate_python(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigurationError(
            f"{path}: invalid field '{_field_path(first['loc'])}': {first['msg']}")


def load_model(path: str | Path, model: type[M] | TypeAdapter) -> M:
    return validate_model(path, load_json(path), model)
