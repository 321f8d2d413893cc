"""Versioned JSON containers used by the on-disk file formats.

Every file is a JSON object carrying ``kind`` and ``format_version``
fields; readers reject unknown kinds and versions. Writers emit sorted
keys and a fixed layout so identical payloads produce identical bytes.
"""

import json
from pathlib import Path

from .errors import FormatError


def write_container(path, kind, version, payload):
    data = dict(payload)
    data["kind"] = kind
    data["format_version"] = version
    text = json.dumps(data, sort_keys=True, indent=1)
    Path(path).write_text(text + "\n")


def read_container(path, kind, supported_versions):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path}: expected a JSON object")
    if data.get("kind") != kind:
        raise FormatError(f"{path}: expected kind {kind!r}, got {data.get('kind')!r}")
    version = data.get("format_version")
    if version not in supported_versions:
        raise FormatError(
            f"{path}: unknown format_version {version!r} for {kind!r} "
            f"(supported: {sorted(supported_versions)})"
        )
    return data
