"""Append-only domain store: documents, triples, positional indexes, audit log."""

from __future__ import annotations

import threading
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping

from .core import (
    BOOTSTRAP_LABELS,
    EMPTY,
    DocumentId,
    IdSource,
    Payload,
    Triple,
    constant_id,
    constant_label,
    render_id,
)
from .errors import DanglingReference, PayloadConflict, UnknownActor


class AuditKind(Enum):
    DOC_INSERT = "DocInsert"
    TRIPLE_INSERT = "TripleInsert"
    COLLECT = "Collect"


@dataclass(frozen=True)
class AuditEntry:
    sequence: int
    kind: AuditKind
    subject: str
    source: str = ""


@dataclass
class ActorRecord:
    actor_id: DocumentId
    attributes: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ObservationRecord:
    observation_id: DocumentId
    actor: DocumentId
    target: DocumentId
    created: int


class Domain:
    """A materialized, independently operating part of the knowledge graph.

    Documents and triples only grow, except through an explicit garbage
    collection. Mutations are serialized through ``writer``; readers take
    :meth:`snapshot` copies when they need a stable view.
    """

    def __init__(self, ids: IdSource | None = None, source: str = ""):
        self.ids = ids or IdSource()
        self.source = source
        self.documents: dict[DocumentId, Payload] = {}
        self.triples: set[Triple] = set()
        self.by_marker: dict[DocumentId, set[Triple]] = defaultdict(set)
        self.by_first: dict[DocumentId, set[Triple]] = defaultdict(set)
        self.by_second: dict[DocumentId, set[Triple]] = defaultdict(set)
        self.audit: list[AuditEntry] = []
        self.observations: dict[DocumentId, ObservationRecord] = {}
        self.actors: dict[DocumentId, ActorRecord] = {}
        # Labels of constants known to this domain, exported as the #CONST manifest.
        self.labels: dict[DocumentId, str] = {}
        self.writer = threading.RLock()

    @classmethod
    def bootstrapped(cls, ids: IdSource | None = None, source: str = "") -> Domain:
        """A domain holding exactly the named bootstrap constants."""
        d = cls(ids, source)
        for label in BOOTSTRAP_LABELS:
            d.constant(label)
        return d

    def __len__(self) -> int:
        return len(self.documents)

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self.documents

    def new_id(self) -> DocumentId:
        return self.ids()

    def now(self) -> int:
        return self.ids.now()

    def _log(self, kind: AuditKind, subject: str) -> None:
        seq = self.audit[-1].sequence + 1 if self.audit else 1
        self.audit.append(AuditEntry(seq, kind, subject, self.source))

    # -- writes -----------------------------------------------------------

    def insert_document(self, doc_id: DocumentId, payload: Payload = EMPTY) -> None:
        with self.writer:
            existing = self.documents.get(doc_id)
            if existing is not None:
                if existing != payload:
                    raise PayloadConflict(doc_id, existing, payload)
                return
            self.documents[doc_id] = payload
            self._log(AuditKind.DOC_INSERT, render_id(doc_id))

    def constant(self, label: str) -> DocumentId:
        """Materialize a labelled bootstrap constant and return its id."""
        cid = constant_id(label)
        with self.writer:
            self.insert_document(cid, EMPTY)
            self.labels.setdefault(cid, label)
        return cid

    def create(self, payload: Payload = EMPTY) -> DocumentId:
        doc_id = self.new_id()
        self.insert_document(doc_id, payload)
        return doc_id

    def _resolve(self, doc_id: DocumentId) -> None:
        if doc_id in self.documents:
            return
        if doc_id.is_constant:
            self.insert_document(doc_id, EMPTY)
            label = constant_label(doc_id)
            if label is not None:
                self.labels.setdefault(doc_id, label)
            return
        raise DanglingReference(f"unknown document {render_id(doc_id)}")

    def insert_triple(self, t: Triple) -> None:
        with self.writer:
            if t in self.triples:
                return
            for endpoint in (t.marker, t.first, t.second):
                if endpoint not in self.documents and not endpoint.is_constant:
                    raise DanglingReference(f"unknown document {render_id(endpoint)}")
            for endpoint in (t.marker, t.first, t.second):
                self._resolve(endpoint)
            self.triples.add(t)
            self.by_marker[t.marker].add(t)
            self.by_first[t.first].add(t)
            self.by_second[t.second].add(t)
            self._log(AuditKind.TRIPLE_INSERT, t.render()[2:])

    def link(self, marker: DocumentId, first: DocumentId, second: DocumentId) -> Triple:
        t = Triple(marker, first, second)
        self.insert_triple(t)
        return t

    def remove(self, doc_ids: Iterable[DocumentId]) -> tuple[int, int]:
        """Drop documents and every triple touching them. Garbage collection only."""
        with self.writer:
            doomed = {d for d in doc_ids if d in self.documents}
            dead_triples = set()
            for d in doomed:
                dead_triples |= self.by_marker.get(d, set())
                dead_triples |= self.by_first.get(d, set())
                dead_triples |= self.by_second.get(d, set())
            for t in dead_triples:
                self._unindex(t)
            for d in doomed:
                del self.documents[d]
                self.labels.pop(d, None)
            self._log(AuditKind.COLLECT, f"{len(doomed)} {len(dead_triples)}")
            return len(doomed), len(dead_triples)

    def _unindex(self, t: Triple) -> None:
        self.triples.discard(t)
        for index, key in ((self.by_marker, t.marker), (self.by_first, t.first), (self.by_second, t.second)):
            bucket = index.get(key)
            if bucket is not None:
                bucket.discard(t)
                if not bucket:
                    del index[key]

    # -- reads ------------------------------------------------------------

    def payload(self, doc_id: DocumentId) -> Payload | None:
        return self.documents.get(doc_id)

    def query(
        self,
        marker: DocumentId | None = None,
        first: DocumentId | None = None,
        second: DocumentId | None = None,
    ) -> list[Triple]:
        """Triples matching every bound position, in (marker, first, second) order."""
        return sorted(self.match(marker, first, second))

    def match(
        self,
        marker: DocumentId | None = None,
        first: DocumentId | None = None,
        second: DocumentId | None = None,
    ) -> Iterator[Triple]:
        """Unordered variant of :meth:`query` for internal hot paths."""
        buckets = []
        if marker is not None:
            buckets.append(self.by_marker.get(marker, ()))
        if first is not None:
            buckets.append(self.by_first.get(first, ()))
        if second is not None:
            buckets.append(self.by_second.get(second, ()))
        if not buckets:
            return iter(list(self.triples))
        smallest = min(buckets, key=len)
        return (
            t
            for t in list(smallest)
            if (marker is None or t.marker == marker)
            and (first is None or t.first == first)
            and (second is None or t.second == second)
        )

    # -- actors -----------------------------------------------------------

    def register_actor(self, attributes: Mapping[str, str] | None = None) -> ActorRecord:
        with self.writer:
            actor_id = self.create(EMPTY)
            rec = ActorRecord(actor_id, dict(attributes or {}))
            self.actors[actor_id] = rec
            return rec

    def update_actor(self, actor_id: DocumentId, attributes: Mapping[str, str]) -> None:
        with self.writer:
            rec = self.actors.get(actor_id)
            if rec is None:
                raise UnknownActor(f"unknown actor {render_id(actor_id)}")
            rec.attributes.update(attributes)

    def find_actor(self, name: str) -> ActorRecord | None:
        matches = sorted(
            (r for r in self.actors.values() if r.attributes.get("name") == name),
            key=lambda r: r.actor_id,
        )
        return matches[0] if matches else None

    # -- copies -----------------------------------------------------------

    def copy(self) -> Domain:
        """Independent deep copy sharing only immutable values."""
        with self.writer:
            other = Domain(self.ids, self.source)
            other.documents = dict(self.documents)
            other.triples = set(self.triples)
            for src, dst in (
                (self.by_marker, other.by_marker),
                (self.by_first, other.by_first),
                (self.by_second, other.by_second),
            ):
                for k, v in src.items():
                    dst[k] = set(v)
            other.audit = list(self.audit)
            other.observations = dict(self.observations)
            other.actors = {k: ActorRecord(v.actor_id, dict(v.attributes)) for k, v in self.actors.items()}
            other.labels = dict(self.labels)
            return other

    snapshot = copy

    def graph_equal(self, other: Domain) -> bool:
        return self.documents == other.documents and self.triples == other.triples


def insert_document(domain: Domain, doc_id: DocumentId, payload: Payload) -> None:
    domain.insert_document(doc_id, payload)


def insert_triple(domain: Domain, t: Triple) -> None:
    domain.insert_triple(t)


def query(
    domain: Domain,
    marker: DocumentId | None = None,
    first: DocumentId | None = None,
    second: DocumentId | None = None,
) -> list[Triple]:
    return domain.query(marker, first, second)


def register_actor(domain: Domain, attributes: Mapping[str, str] | None = None) -> ActorRecord:
    return domain.register_actor(attributes)


def update_actor(domain: Domain, actor_id: DocumentId, attributes: Mapping[str, str]) -> None:
    domain.update_actor(actor_id, attributes)
