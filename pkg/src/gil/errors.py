"""Exception hierarchy.

Every error a domain operation can raise derives from ``GilError`` so the CLI
can map the whole family to exit code 1 in one place.
"""

from __future__ import annotations


class GilError(Exception):
    """Base class for domain-level failures."""


class ReservedEpoch(GilError):
    pass


class MalformedId(GilError, ValueError):
    pass


class PayloadConflict(GilError):
    """The same id was seen with two different payloads."""

    def __init__(self, doc_id, existing, incoming):
        self.doc_id = doc_id
        self.existing = existing
        self.incoming = incoming
        super().__init__(f"payload conflict on {doc_id}: {existing!r} != {incoming!r}")


class DanglingReference(GilError):
    pass


class UnknownActor(GilError):
    pass


class UnknownDocument(GilError):
    pass


class UnknownObservation(GilError):
    pass


class ForbiddenCombination(GilError):
    pass


class KeyAlreadyBound(GilError):
    pass


class KeyNotBound(GilError):
    pass


class MalformedContainer(GilError):
    pass


class EmptyRelation(GilError, ValueError):
    pass


class MalformedRevision(GilError):
    pass


class UnknownCheck(GilError):
    pass


class ParseError(GilError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ProtocolError(GilError):
    pass


class BindFailure(GilError):
    pass


class HierarchyCycle(GilError):
    """Binding would make a document its own ancestor."""
