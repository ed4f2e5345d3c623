"""Small shared helpers."""

from __future__ import annotations

import dataclasses
import os
import tempfile
from pathlib import Path
from typing import Any, TypeVar

from .errors import ConfigError

T = TypeVar("T")


def dataclass_from_dict(cls: type[T], data: dict[str, Any], where: str = "") -> T:
    """Build a (possibly nested) dataclass from a dict, rejecting unknown keys."""
    if not dataclasses.is_dataclass(cls):
        raise TypeError(f"{cls} is not a dataclass")
    if not isinstance(data, dict):
        raise ConfigError(f"{where or cls.__name__}: expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        loc = f" in {where}" if where else ""
        raise ConfigError(f"unknown config key(s){loc}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, value in data.items():
        ftype = fields[name].type
        target = _resolve_dataclass(ftype, cls)
        if target is not None and isinstance(value, dict):
            value = dataclass_from_dict(target, value, where=f"{where}.{name}" if where else name)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    return cls(**kwargs)


def _resolve_dataclass(annotation: Any, owner: type) -> type | None:
    """Map a field annotation (possibly a string under PEP 563) to a dataclass."""
    if isinstance(annotation, str):
        import sys
        module = sys.modules.get(owner.__module__)
        annotation = getattr(module, annotation.split("|")[0].strip(), None) if module else None
    return annotation if dataclasses.is_dataclass(annotation) else None


def atomic_write_bytes(path: str | Path, write_fn) -> None:
    """Write a file via temp-then-rename so readers never see partial content.

    ``write_fn`` receives the temporary path and must create the file there.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
