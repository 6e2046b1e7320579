"""
Utility functions shared across the engine.
"""

import json
import os
from typing import Any


class FileFormatError(ValueError):
    """A schema, monoid or program file could not be read or decoded."""


def load_file(path):
    """Load the contents of a file and return as string.

    Args:
        path: Path to the file to load

    Returns:
        str: File contents, or empty string if path is None or file doesn't exist
    """
    if path is None:
        return ""

    if not os.path.exists(path):
        return ""

    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError:
        return ""


def load_text(path) -> str:
    """Read a file that must exist; unlike load_file, absence is an error.

    Args:
        path: Path to the text file

    Returns:
        str: File contents (possibly empty)
    """
    if path is None or not os.path.isfile(path):
        raise FileFormatError(f"{path}: no such file")
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except (OSError, UnicodeDecodeError) as e:
        raise FileFormatError(f"{path}: cannot be read ({e})") from e


def load_json(path) -> Any:
    """Load a JSON document, raising FileFormatError on any failure.

    Args:
        path: Path to the JSON file

    Returns:
        The decoded document
    """
    text = load_file(path)
    if not text:
        raise FileFormatError(f"{path}: file is missing or empty")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}: invalid JSON ({e})") from e


def dump_json(document: Any) -> str:
    """Serialize a document with sorted keys so equal reports are byte-identical."""
    return json.dumps(document, indent=2, sort_keys=True)


def value_key(value: Any) -> tuple:
    """Sort key for attribute values of mixed type (numbers before strings)."""
    if isinstance(value, bool):
        return (0, int(value), "")
    if isinstance(value, int | float):
        return (0, value, "")
    return (1, 0, str(value))


def tuple_key(t: tuple) -> tuple:
    """Lexicographic sort key for a relation tuple."""
    return tuple(value_key(v) for v in t)
