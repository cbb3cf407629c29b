"""Identities, payloads, the ternary relation and bootstrap constants."""

from __future__ import annotations

import base64
import binascii
import hashlib
import re
import secrets
import time
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Final, Union

from .errors import MalformedId, ReservedEpoch

SPACE_BITS: Final[int] = 128
_SPACE_MAX: Final[int] = (1 << SPACE_BITS) - 1
_TIME_MAX: Final[int] = (1 << 64) - 1
_ID_RE: Final[re.Pattern[str]] = re.compile(r"([0-9a-f]{16})-([0-9a-f]{32})")
_DECIMAL_RE: Final[re.Pattern[str]] = re.compile(r"[+-]?([0-9]+(\.[0-9]*)?|\.[0-9]+)([eE][+-]?[0-9]+)?")
CONSTANT_NAMESPACE: Final[str] = "gil:const:"
_KNOWN_LABELS: dict[DocumentId, str] = {}


@dataclass(frozen=True, order=True)
class DocumentId:
    """Permanent identity: birth time in ms plus a 128-bit pseudo-space coordinate.

    Field order gives the lexicographic (birth_time, space_coord) total order,
    which coincides with the order of the rendered strings.
    """

    birth_time: int
    space_coord: int

    def __post_init__(self):
        if not 0 <= self.birth_time <= _TIME_MAX:
            raise MalformedId(f"birth_time out of range: {self.birth_time}")
        if not 0 <= self.space_coord <= _SPACE_MAX:
            raise MalformedId(f"space_coord out of range: {self.space_coord}")

    @property
    def is_constant(self) -> bool:
        return self.birth_time == 0

    def __str__(self) -> str:
        return render_id(self)

    def __repr__(self) -> str:
        return f"DocumentId({render_id(self)})"


def render_id(doc_id: DocumentId) -> str:
    return f"{doc_id.birth_time:016x}-{doc_id.space_coord:032x}"


def parse_id(s: str) -> DocumentId:
    m = _ID_RE.fullmatch(s) if isinstance(s, str) else None
    if m is None:
        raise MalformedId(f"malformed document id: {s!r}")
    return DocumentId(int(m.group(1), 16), int(m.group(2), 16))


def fresh_id(clock_ms: int, entropy: int) -> DocumentId:
    if clock_ms == 0:
        raise ReservedEpoch("birth time 0 is reserved for bootstrap constants")
    if clock_ms < 0:
        raise MalformedId(f"negative clock value: {clock_ms}")
    return DocumentId(clock_ms, entropy)


@lru_cache(maxsize=65536)
def constant_id(label: str) -> DocumentId:
    """Deterministic id of a bootstrap constant, shared by every domain."""
    if not label:
        raise ValueError("constant label must be non-empty")
    digest = hashlib.sha256((CONSTANT_NAMESPACE + label).encode("utf-8")).digest()
    cid = DocumentId(0, int.from_bytes(digest[:16], "big"))
    _KNOWN_LABELS.setdefault(cid, label)
    return cid


def constant_label(doc_id: DocumentId) -> str | None:
    """Label of a constant derived earlier in this process, if any."""
    return _KNOWN_LABELS.get(doc_id)


def int_key(k: int) -> DocumentId:
    """The integer-key constant ``int:k`` used for list indices and relation slots."""
    if k < 0:
        raise ValueError(f"integer key must be non-negative, got {k}")
    return constant_id(f"int:{k}")


class IdSource:
    """Supplies fresh ids from a millisecond clock and a 128-bit entropy source.

    Defaults to the wall clock and ``secrets``. Tests pass a seeded source via
    :meth:`seeded` so that whole domains can be rebuilt bit-for-bit.
    """

    def __init__(
        self,
        clock: Callable[[], int] | None = None,
        entropy: Callable[[], int] | None = None,
    ):
        self.clock = clock or (lambda: time.time_ns() // 1_000_000)
        self.entropy = entropy or (lambda: secrets.randbits(SPACE_BITS))

    @classmethod
    def seeded(cls, seed: int, start_ms: int = 1_700_000_000_000) -> IdSource:
        import random

        rng = random.Random(seed)
        tick = [start_ms]

        def clock() -> int:
            tick[0] += 1
            return tick[0]

        return cls(clock, lambda: rng.getrandbits(SPACE_BITS))

    def now(self) -> int:
        return self.clock()

    def __call__(self) -> DocumentId:
        return fresh_id(self.clock(), self.entropy())


class Kind(Enum):
    EMPTY = "E"
    INTEGER = "I"
    REAL = "R"
    COMPLEX = "C"
    TEXT = "T"
    BLOB = "B"


PayloadValue = Union[None, int, str, tuple, bytes]


@dataclass(frozen=True)
class Payload:
    """Immutable elementary content of a document.

    Reals and complex parts are kept as decimal strings so the export is
    bit-exact; they compare as strings, so ``"1.0"`` and ``"1.00"`` differ.
    """

    kind: Kind
    value: PayloadValue = None

    def __post_init__(self):
        k, v = self.kind, self.value
        if k is Kind.EMPTY:
            ok = v is None
        elif k is Kind.INTEGER:
            ok = isinstance(v, int) and not isinstance(v, bool)
        elif k is Kind.REAL:
            ok = isinstance(v, str) and bool(_DECIMAL_RE.fullmatch(v))
        elif k is Kind.COMPLEX:
            ok = (
                isinstance(v, tuple)
                and len(v) == 2
                and all(isinstance(p, str) and _DECIMAL_RE.fullmatch(p) for p in v)
            )
        elif k is Kind.TEXT:
            ok = isinstance(v, str)
        else:
            ok = isinstance(v, bytes)
        if not ok:
            raise ValueError(f"invalid {k.name} payload: {v!r}")

    @classmethod
    def empty(cls) -> Payload:
        return EMPTY

    @classmethod
    def integer(cls, v: int) -> Payload:
        return cls(Kind.INTEGER, v)

    @classmethod
    def real(cls, v: str) -> Payload:
        return cls(Kind.REAL, v)

    @classmethod
    def complex(cls, re_part: str, im_part: str) -> Payload:
        return cls(Kind.COMPLEX, (re_part, im_part))

    @classmethod
    def text(cls, v: str) -> Payload:
        return cls(Kind.TEXT, v)

    @classmethod
    def blob(cls, v: bytes) -> Payload:
        return cls(Kind.BLOB, bytes(v))

    def encode(self) -> str:
        """Payload field of a GILT ``D`` line (may be empty)."""
        k, v = self.kind, self.value
        if k is Kind.EMPTY:
            return ""
        if k is Kind.INTEGER:
            return str(v)
        if k is Kind.REAL:
            return v
        if k is Kind.COMPLEX:
            return f"{v[0]},{v[1]}"
        if k is Kind.TEXT:
            return base64.b64encode(v.encode("utf-8")).decode("ascii")
        return base64.b64encode(v).decode("ascii")

    @classmethod
    def decode(cls, kind_code: str, field: str) -> Payload:
        try:
            kind = Kind(kind_code)
        except ValueError:
            raise ValueError(f"unknown payload kind {kind_code!r}") from None
        if kind is Kind.EMPTY:
            if field:
                raise ValueError("empty payload carries data")
            return EMPTY
        if kind is Kind.INTEGER:
            if not re.fullmatch(r"-?[0-9]+", field):
                raise ValueError(f"bad integer {field!r}")
            return cls(kind, int(field))
        if kind is Kind.REAL:
            return cls(kind, field)
        if kind is Kind.COMPLEX:
            parts = field.split(",")
            if len(parts) != 2:
                raise ValueError(f"bad complex {field!r}")
            return cls(kind, (parts[0], parts[1]))
        try:
            raw = base64.b64decode(field.encode("ascii"), validate=True)
        except (binascii.Error, UnicodeEncodeError) as exc:
            raise ValueError(f"bad base64: {exc}") from None
        if kind is Kind.TEXT:
            return cls(kind, raw.decode("utf-8"))
        return cls(kind, raw)

    def display(self) -> str:
        """Human-readable value, used by ``show``."""
        k, v = self.kind, self.value
        if k is Kind.EMPTY:
            return ""
        if k is Kind.COMPLEX:
            return f"{v[0]},{v[1]}"
        if k is Kind.BLOB:
            return v.hex()
        return str(v)


EMPTY: Final[Payload] = Payload(Kind.EMPTY)


@dataclass(frozen=True)
class Document:
    id: DocumentId
    payload: Payload = EMPTY


@dataclass(frozen=True, order=True)
class Triple:
    """One instance of the universal ternary relation."""

    marker: DocumentId
    first: DocumentId
    second: DocumentId

    def render(self) -> str:
        return f"T {render_id(self.marker)} {render_id(self.first)} {render_id(self.second)}"


# Named bootstrap constants. ``int:k`` keys are derived on demand by int_key().
BOOTSTRAP_LABELS: Final[tuple[str, ...]] = (
    "IsADictionaryAnchorOf",
    "IsAListAnchorOf",
    "IsASetAnchorOf",
    "IsAnElementOf",
    "IsARevisionOf",
    "HasRevisionContext",
    "Unit",
    "ActorKey",
    "TimeKey",
    "PlaceKey",
    "MicroModelRegistry",
)


class C:
    """Attribute access to the named constants, e.g. ``C.Unit``."""

    IsADictionaryAnchorOf = constant_id("IsADictionaryAnchorOf")
    IsAListAnchorOf = constant_id("IsAListAnchorOf")
    IsASetAnchorOf = constant_id("IsASetAnchorOf")
    IsAnElementOf = constant_id("IsAnElementOf")
    IsARevisionOf = constant_id("IsARevisionOf")
    HasRevisionContext = constant_id("HasRevisionContext")
    Unit = constant_id("Unit")
    ActorKey = constant_id("ActorKey")
    TimeKey = constant_id("TimeKey")
    PlaceKey = constant_id("PlaceKey")
    MicroModelRegistry = constant_id("MicroModelRegistry")


def constant_table(int_keys: int = 0) -> dict[str, DocumentId]:
    """Bootstrap manifest: every named constant plus ``int:0 .. int:(int_keys-1)``."""
    table = {label: constant_id(label) for label in BOOTSTRAP_LABELS}
    for k in range(int_keys):
        table[f"int:{k}"] = int_key(k)
    return table
