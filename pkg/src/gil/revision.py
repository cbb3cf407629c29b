"""Document life cycle: revisions propagate to every ancestor of the edited node."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .core import EMPTY, C, DocumentId, Payload, render_id
from .errors import ForbiddenCombination, KeyNotBound, MalformedRevision, UnknownActor, UnknownDocument
from .store import Domain
from .structure import (
    ContainerKind,
    anchors_of,
    bindings,
    dict_get,
    dict_put,
    is_anchor,
    parents,
)


@dataclass(frozen=True)
class RevisionContext:
    actor: DocumentId
    time: int
    place: str


@dataclass(frozen=True)
class RevisionResult:
    mapping: dict[DocumentId, DocumentId]
    record: DocumentId

    def __getitem__(self, old: DocumentId) -> DocumentId:
        return self.mapping[old]


def ancestors(domain: Domain, d: DocumentId) -> set[DocumentId]:
    seen: set[DocumentId] = set()
    queue = deque(parents(domain, d))
    while queue:
        p = queue.popleft()
        if p in seen:
            continue
        seen.add(p)
        queue.extend(parents(domain, p))
    seen.discard(d)
    return seen


def _check(domain: Domain, target: DocumentId, ctx: RevisionContext) -> None:
    if target not in domain.documents:
        raise UnknownDocument(f"unknown document {render_id(target)}")
    if ctx.actor not in domain.actors:
        raise UnknownActor(f"unknown actor {render_id(ctx.actor)}")
    if is_anchor(domain, target):
        # IsARevisionOf pointing at an anchor would read back as a binding on it
        raise ForbiddenCombination(f"{render_id(target)} is a container anchor; revise its owner")


def _record(domain: Domain, ctx: RevisionContext) -> DocumentId:
    rec = domain.create(EMPTY)
    dict_put(domain, rec, C.ActorKey, ctx.actor)
    dict_put(domain, rec, C.TimeKey, domain.create(Payload.integer(ctx.time)))
    dict_put(domain, rec, C.PlaceKey, domain.create(Payload.text(ctx.place)))
    return rec


def _propagate(
    domain: Domain,
    target: DocumentId,
    new_payload: Payload,
    ctx: RevisionContext,
    rebind: tuple[DocumentId, DocumentId] | None = None,
) -> RevisionResult:
    affected = sorted(ancestors(domain, target) | {target})
    mapping = {old: domain.new_id() for old in affected}
    # Snapshot the old structure before any new triple lands.
    plan = {old: [(b, bindings(domain, b.anchor)) for b in anchors_of(domain, old)] for old in affected}
    for old in affected:
        payload = new_payload if old == target else domain.documents[old]
        domain.insert_document(mapping[old], payload)
    for old in affected:
        new = mapping[old]
        anchor_by_kind = {}
        for b, triples in plan[old]:
            if b.container_kind in anchor_by_kind:
                continue  # malformed source with duplicate anchors; copy the first
            anchor = domain.create(EMPTY)
            anchor_by_kind[b.container_kind] = anchor
            domain.link(b.container_kind.marker, anchor, new)
            for t in triples:
                value = mapping.get(t.first, t.first)
                if (
                    rebind is not None
                    and old == target
                    and b.container_kind is ContainerKind.DICTIONARY
                    and t.marker == rebind[0]
                ):
                    value = rebind[1]
                domain.link(t.marker, value, anchor)
    record = _record(domain, ctx)
    for old in affected:
        domain.link(C.IsARevisionOf, mapping[old], old)
        domain.link(C.HasRevisionContext, mapping[old], record)
    return RevisionResult(mapping, record)


def revise_payload(
    domain: Domain, target: DocumentId, new_payload: Payload, ctx: RevisionContext
) -> RevisionResult:
    with domain.writer:
        _check(domain, target, ctx)
        return _propagate(domain, target, new_payload, ctx)


def revise_attribute(
    domain: Domain,
    owner: DocumentId,
    key: DocumentId,
    new_value: DocumentId,
    ctx: RevisionContext,
) -> RevisionResult:
    with domain.writer:
        _check(domain, owner, ctx)
        if dict_get(domain, owner, key) is None:
            raise KeyNotBound(f"key {render_id(key)} is not bound on {render_id(owner)}")
        domain._resolve(new_value)
        return _propagate(domain, owner, domain.documents[owner], ctx, rebind=(key, new_value))


def predecessor(domain: Domain, d: DocumentId) -> DocumentId | None:
    preds = sorted(t.second for t in domain.match(marker=C.IsARevisionOf, first=d))
    if len(preds) > 1:
        raise MalformedRevision(f"{render_id(d)} has {len(preds)} revision predecessors")
    return preds[0] if preds else None


def world_curve(domain: Domain, d: DocumentId) -> list[DocumentId]:
    """The revision chain ending at ``d``, oldest first."""
    if d not in domain.documents:
        raise UnknownDocument(f"unknown document {render_id(d)}")
    curve = [d]
    seen = {d}
    cur = predecessor(domain, d)
    while cur is not None:
        if cur in seen:
            raise MalformedRevision(f"revision cycle through {render_id(cur)}")
        seen.add(cur)
        curve.append(cur)
        cur = predecessor(domain, cur)
    curve.reverse()
    return curve


def successors(domain: Domain, d: DocumentId) -> set[DocumentId]:
    return {t.first for t in domain.match(marker=C.IsARevisionOf, second=d)}
