"""Append-only knowledge-graph store over a single ternary relation."""

from .core import (
    BOOTSTRAP_LABELS,
    C,
    Document,
    DocumentId,
    IdSource,
    Kind,
    Payload,
    Triple,
    constant_id,
    constant_table,
    fresh_id,
    int_key,
    parse_id,
    render_id,
)
from .errors import GilError
from .store import Domain

__all__ = [
    "BOOTSTRAP_LABELS",
    "C",
    "Document",
    "DocumentId",
    "Domain",
    "GilError",
    "IdSource",
    "Kind",
    "Payload",
    "Triple",
    "constant_id",
    "constant_table",
    "fresh_id",
    "int_key",
    "parse_id",
    "render_id",
]
