"""Identifier helpers shared by every module.

Router, agent and node ids are either ints or strings. Numeric-looking
strings read from files become ints so that ``10`` sorts after ``9``.
"""

from __future__ import annotations

from typing import Hashable, Iterable

Id = Hashable


def parse_id(text: str) -> Id:
    text = text.strip()
    if not text:
        raise ValueError("empty identifier")
    try:
        return int(text)
    except ValueError:
        return text


def id_key(value: Id) -> tuple:
    """Total order over mixed ids: ints numerically, then strings."""
    if isinstance(value, bool):
        return (2, str(value))
    if isinstance(value, int):
        return (0, value, "")
    return (1, 0, str(value))


def sorted_ids(values: Iterable[Id]) -> list:
    return sorted(values, key=id_key)


def format_ids(values: Iterable[Id], sep: str = ",") -> str:
    return sep.join(str(v) for v in sorted_ids(values))
