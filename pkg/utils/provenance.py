#!/usr/bin/env python3
"""
Output Provenance
=================

Version stamps and writers for the JSON and CSV files the command line
emits. CSV files carry their schema version and provenance as leading
'#' comment lines.
"""

import csv
import io
import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from _version import __title__, __version__

PathLike = Union[str, Path]


def environment_versions() -> Dict[str, str]:
    """Versions of the interpreter and the numerical stack."""
    import pydantic
    import scipy

    return {
        __title__: __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps(document: Any) -> str:
    return json.dumps(document, indent=2, default=_json_default)


def _write_text(text: str, path: Optional[PathLike]) -> Optional[Path]:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text)
    return target


def write_json(document: Any, path: Optional[PathLike] = None) -> Optional[Path]:
    """Write a JSON document to path, or to stdout when path is None."""
    return _write_text(dumps(document) + "\n", path)


def format_csv(header: Sequence[str], rows: Iterable[Sequence[Any]],
               comments: Optional[Dict[str, Any]] = None, delimiter: str = ",") -> str:
    buffer = io.StringIO()
    for key, value in (comments or {}).items():
        rendered = value if isinstance(value, (str, int, float)) else json.dumps(value, default=_json_default)
        buffer.write(f"# {key}: {rendered}\n")
    writer = csv.writer(buffer, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buffer.getvalue()


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]],
              path: Optional[PathLike] = None,
              comments: Optional[Dict[str, Any]] = None, delimiter: str = ",") -> Optional[Path]:
    return _write_text(format_csv(header, rows, comments, delimiter), path)


def read_csv_rows(text: str, delimiter: str = ",") -> List[List[str]]:
    """Data rows of an emitted CSV, header included, comments skipped."""
    lines = [line for line in text.splitlines() if line and not line.startswith("#")]
    return list(csv.reader(lines, delimiter=delimiter))


def read_csv_comments(text: str) -> Dict[str, str]:
    """The '# key: value' lines at the top of an emitted CSV."""
    comments = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        key, _, value = line[1:].partition(":")
        comments[key.strip()] = value.strip()
    return comments
