"""Observations and mark-and-sweep collection.

Roots are observed targets, stored constants and registered actors. Marking
follows anchors and their bindings (key and value), and a live anchor keeps
its owner. Relation triples that merely mention a live document never keep
anything else alive.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import DocumentId, render_id
from .errors import UnknownDocument, UnknownObservation
from .revision import world_curve
from .store import Domain, ObservationRecord
from .structure import KIND_OF_MARKER


@dataclass(frozen=True)
class CollectReport:
    documents: int
    triples: int

    def __str__(self) -> str:
        return f"collected {self.documents} documents, {self.triples} triples"


def observe(domain: Domain, actor: DocumentId, target: DocumentId) -> ObservationRecord:
    with domain.writer:
        for d in (actor, target):
            if d not in domain.documents:
                raise UnknownDocument(f"unknown document {render_id(d)}")
        for rec in domain.observations.values():
            if rec.actor == actor and rec.target == target:
                return rec
        rec = ObservationRecord(domain.new_id(), actor, target, domain.now())
        domain.observations[rec.observation_id] = rec
        return rec


def observe_curve(domain: Domain, actor: DocumentId, target: DocumentId) -> list[ObservationRecord]:
    """Observe every document on ``target``'s world curve, keeping its history."""
    return [observe(domain, actor, d) for d in world_curve(domain, target)]


def release(domain: Domain, observation_id: DocumentId) -> None:
    with domain.writer:
        if domain.observations.pop(observation_id, None) is None:
            raise UnknownObservation(f"unknown observation {render_id(observation_id)}")


def roots(domain: Domain) -> set[DocumentId]:
    out = {rec.target for rec in domain.observations.values()}
    out |= {d for d in domain.documents if d.is_constant}
    out |= set(domain.actors)
    return out & domain.documents.keys()


def live_set(domain: Domain) -> set[DocumentId]:
    live = set(roots(domain))
    stack = list(live)
    while stack:
        d = stack.pop()
        # a live anchor pins its owner; sweeping the owner would unmake the anchor
        reached = [a.second for a in domain.match(first=d) if a.marker in KIND_OF_MARKER]
        is_anchor = bool(reached)
        for t in domain.match(second=d):
            if t.marker in KIND_OF_MARKER:
                reached.append(t.first)  # anchor of a live owner
            elif is_anchor:
                reached += (t.marker, t.first)  # binding on a live anchor
        for r in reached:
            if r not in live and r in domain.documents:
                live.add(r)
                stack.append(r)
    return live


def collect(domain: Domain) -> CollectReport:
    with domain.writer:
        live = live_set(domain)
        dead = [d for d in domain.documents if d not in live]
        n_docs, n_triples = domain.remove(dead)
        return CollectReport(n_docs, n_triples)
