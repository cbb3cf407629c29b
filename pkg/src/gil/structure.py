"""Containers and n-ary relations encoded over the ternary relation.

An owner document gets at most one anchor per container kind, attached by
``(IsA<Kind>AnchorOf, anchor, owner)``. Bindings hang off the anchor:

* dictionary: ``(key, value, anchor)``
* list:       ``(int:n, value, anchor)``
* set:        ``(IsAnElementOf, member, anchor)``
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .core import EMPTY, C, DocumentId, Payload, Triple, constant_id, int_key, render_id
from .errors import (
    EmptyRelation,
    ForbiddenCombination,
    HierarchyCycle,
    KeyAlreadyBound,
    MalformedContainer,
)
from .store import Domain


class ContainerKind(Enum):
    DICTIONARY = "Dictionary"
    LIST = "List"
    SET = "Set"

    @property
    def marker(self) -> DocumentId:
        return ANCHOR_MARKERS[self]


ANCHOR_MARKERS: dict[ContainerKind, DocumentId] = {
    ContainerKind.DICTIONARY: C.IsADictionaryAnchorOf,
    ContainerKind.LIST: C.IsAListAnchorOf,
    ContainerKind.SET: C.IsASetAnchorOf,
}
KIND_OF_MARKER: dict[DocumentId, ContainerKind] = {v: k for k, v in ANCHOR_MARKERS.items()}


@dataclass(frozen=True)
class AnchorBinding:
    owner: DocumentId
    anchor: DocumentId
    container_kind: ContainerKind


@dataclass(frozen=True)
class Subgraph:
    documents: dict[DocumentId, Payload]
    triples: frozenset[Triple]

    def canonical(self) -> bytes:
        lines = [
            f"D {render_id(d)} {p.kind.value} {p.encode()}".rstrip(" ")
            for d, p in sorted(self.documents.items())
        ]
        lines += [t.render() for t in sorted(self.triples)]
        return "".join(line + "\n" for line in lines).encode("utf-8")


# -- anchors --------------------------------------------------------------


def anchors_of(domain: Domain, owner: DocumentId) -> list[AnchorBinding]:
    """Every anchor attached to ``owner``, in (kind, anchor) order."""
    out = []
    for t in domain.match(second=owner):
        kind = KIND_OF_MARKER.get(t.marker)
        if kind is not None:
            out.append(AnchorBinding(owner, t.first, kind))
    out.sort(key=lambda b: (list(ContainerKind).index(b.container_kind), b.anchor))
    return out


def find_anchor(domain: Domain, owner: DocumentId, kind: ContainerKind) -> DocumentId | None:
    found = sorted(t.first for t in domain.match(marker=kind.marker, second=owner))
    if len(found) > 1:
        raise MalformedContainer(f"{render_id(owner)} has {len(found)} {kind.value} anchors")
    return found[0] if found else None


def owner_of(domain: Domain, anchor: DocumentId) -> AnchorBinding | None:
    """Reverse lookup: which owner (and kind) ``anchor`` belongs to."""
    for t in sorted(domain.match(first=anchor)):
        kind = KIND_OF_MARKER.get(t.marker)
        if kind is not None:
            return AnchorBinding(t.second, anchor, kind)
    return None


def is_anchor(domain: Domain, d: DocumentId) -> bool:
    return owner_of(domain, d) is not None


def ensure_anchor(domain: Domain, owner: DocumentId, kind: ContainerKind) -> DocumentId:
    with domain.writer:
        existing = find_anchor(domain, owner, kind)
        if existing is not None:
            return existing
        if is_anchor(domain, owner):
            raise ForbiddenCombination(f"{render_id(owner)} is a container anchor and cannot own containers")
        if kind is not ContainerKind.DICTIONARY:
            other = ContainerKind.SET if kind is ContainerKind.LIST else ContainerKind.LIST
            if find_anchor(domain, owner, other) is not None:
                raise ForbiddenCombination(
                    f"{render_id(owner)} already carries a {other.value}; cannot add a {kind.value}"
                )
        domain._resolve(owner)
        if owner.is_constant:
            # Constant owners exist in every domain; a derived anchor keeps merges single-anchored.
            anchor = constant_id(f"anchor:{kind.value}:{render_id(owner)}")
            domain._resolve(anchor)
        else:
            anchor = domain.create(EMPTY)
        domain.link(kind.marker, anchor, owner)
        return anchor


def _guard_cycle(domain: Domain, owner: DocumentId, child: DocumentId) -> None:
    """Refuse a parent edge owner -> child when child is owner or one of its ancestors."""
    seen = {owner}
    queue = deque([owner])
    while queue:
        cur = queue.popleft()
        if cur == child:
            raise HierarchyCycle(
                f"binding {render_id(child)} under {render_id(owner)} would create a cycle"
            )
        for p in parents(domain, cur):
            if p not in seen:
                seen.add(p)
                queue.append(p)


def bindings(domain: Domain, anchor: DocumentId) -> list[Triple]:
    """Binding triples hanging off ``anchor`` (anchor-of triples excluded)."""
    return sorted(t for t in domain.match(second=anchor) if t.marker not in KIND_OF_MARKER)


# -- dictionary -----------------------------------------------------------


def dict_items(domain: Domain, owner: DocumentId) -> dict[DocumentId, DocumentId]:
    anchor = find_anchor(domain, owner, ContainerKind.DICTIONARY)
    if anchor is None:
        return {}
    out: dict[DocumentId, DocumentId] = {}
    for t in bindings(domain, anchor):
        if t.marker in out:
            raise MalformedContainer(
                f"key {render_id(t.marker)} bound twice on {render_id(owner)}"
            )
        out[t.marker] = t.first
    return out


def dict_get(domain: Domain, owner: DocumentId, key: DocumentId) -> DocumentId | None:
    anchor = find_anchor(domain, owner, ContainerKind.DICTIONARY)
    if anchor is None:
        return None
    values = sorted(t.first for t in domain.match(marker=key, second=anchor))
    if len(values) > 1:
        raise MalformedContainer(f"key {render_id(key)} bound twice on {render_id(owner)}")
    return values[0] if values else None


def dict_put(domain: Domain, owner: DocumentId, key: DocumentId, value: DocumentId) -> None:
    """Bind ``key -> value`` on ``owner``. Bindings are write-once."""
    with domain.writer:
        current = dict_get(domain, owner, key)
        if current is not None:
            if current == value:
                return
            raise KeyAlreadyBound(
                f"key {render_id(key)} already bound on {render_id(owner)}; use revise_attribute"
            )
        for endpoint in (key, value):
            domain._resolve(endpoint)
        _guard_cycle(domain, owner, value)
        anchor = ensure_anchor(domain, owner, ContainerKind.DICTIONARY)
        domain.link(key, value, anchor)


# -- list -----------------------------------------------------------------


def _list_bindings(domain: Domain, owner: DocumentId, anchor: DocumentId) -> list[DocumentId]:
    entries = bindings(domain, anchor)
    n = len(entries)
    slots: list[DocumentId | None] = [None] * n
    index_of = {int_key(i): i for i in range(n)}
    for t in entries:
        i = index_of.get(t.marker)
        if i is None or slots[i] is not None:
            raise MalformedContainer(f"list on {render_id(owner)} has a gap or duplicate index")
        slots[i] = t.first
    return slots  # type: ignore[return-value]


def list_items(domain: Domain, owner: DocumentId) -> list[DocumentId]:
    anchor = find_anchor(domain, owner, ContainerKind.LIST)
    if anchor is None:
        return []
    return _list_bindings(domain, owner, anchor)


def list_append(domain: Domain, owner: DocumentId, value: DocumentId) -> int:
    with domain.writer:
        domain._resolve(value)
        _guard_cycle(domain, owner, value)
        anchor = ensure_anchor(domain, owner, ContainerKind.LIST)
        n = len(_list_bindings(domain, owner, anchor))
        domain.link(int_key(n), value, anchor)
        return n


# -- set ------------------------------------------------------------------


def set_members(domain: Domain, owner: DocumentId) -> list[DocumentId]:
    anchor = find_anchor(domain, owner, ContainerKind.SET)
    if anchor is None:
        return []
    return sorted(t.first for t in domain.match(marker=C.IsAnElementOf, second=anchor))


def set_add(domain: Domain, owner: DocumentId, member: DocumentId) -> None:
    with domain.writer:
        domain._resolve(member)
        _guard_cycle(domain, owner, member)
        anchor = ensure_anchor(domain, owner, ContainerKind.SET)
        domain.link(C.IsAnElementOf, member, anchor)


# -- relations ------------------------------------------------------------


def assert_relation(domain: Domain, marker: DocumentId, args: list[DocumentId]) -> DocumentId:
    """Record ``marker(args...)``; returns ``Unit`` for native triples, else the instance document."""
    if not args:
        raise EmptyRelation("a relation instance needs at least one argument")
    with domain.writer:
        if len(args) == 1:
            domain.link(marker, args[0], C.Unit)
            return C.Unit
        if len(args) == 2:
            if is_anchor(domain, args[1]):
                # (m, a, anchor) would read back as a container binding
                raise ForbiddenCombination(f"{render_id(args[1])} is a container anchor")
            domain.link(marker, args[0], args[1])
            return C.Unit
        for d in (marker, *args):
            domain._resolve(d)
        instance = domain.create(EMPTY)
        for k, d in enumerate((marker, *args)):
            dict_put(domain, instance, int_key(k), d)
        return instance


def relation_instances(domain: Domain, marker: DocumentId) -> list[tuple[DocumentId, ...]]:
    out: list[tuple[DocumentId, ...]] = []
    for t in domain.match(marker=marker):
        if t.second == C.Unit:
            out.append((t.first,))
        elif not is_anchor(domain, t.second):  # else a binding keyed by ``marker``
            out.append((t.first, t.second))
    for t in domain.match(marker=int_key(0), first=marker):
        binding = owner_of(domain, t.second)
        if binding is None or binding.container_kind is not ContainerKind.DICTIONARY:
            continue
        attrs = dict_items(domain, binding.owner)
        args = []
        k = 1
        while int_key(k) in attrs:
            args.append(attrs[int_key(k)])
            k += 1
        out.append(tuple(args))
    out.sort()
    return out


# -- hierarchy ------------------------------------------------------------


def child_values(domain: Domain, d: DocumentId) -> list[DocumentId]:
    """Dictionary values, list elements and set members: the parent-edge targets."""
    out = set()
    for b in anchors_of(domain, d):
        for t in bindings(domain, b.anchor):
            out.add(t.first)
    return sorted(out)


def children(domain: Domain, d: DocumentId) -> list[DocumentId]:
    """Like :func:`child_values` plus dictionary keys."""
    out = set()
    for b in anchors_of(domain, d):
        for t in bindings(domain, b.anchor):
            out.add(t.first)
            if b.container_kind is ContainerKind.DICTIONARY:
                out.add(t.marker)
    return sorted(out)


def parents(domain: Domain, c: DocumentId) -> list[DocumentId]:
    out = set()
    for t in domain.match(first=c):
        if t.marker in KIND_OF_MARKER:
            continue
        binding = owner_of(domain, t.second)
        if binding is not None:
            out.add(binding.owner)
    return sorted(out)


def reconstruct(domain: Domain, d: DocumentId) -> Subgraph:
    """Everything aggregated in ``d``: descendants, their anchors and binding triples."""
    seen = {d}
    triples: set[Triple] = set()
    queue = deque([d])
    while queue:
        cur = queue.popleft()
        for b in anchors_of(domain, cur):
            seen.add(b.anchor)
            triples.add(Triple(b.container_kind.marker, b.anchor, cur))
            for t in bindings(domain, b.anchor):
                triples.add(t)
                nxt = [t.first]
                if b.container_kind is ContainerKind.DICTIONARY:
                    nxt.append(t.marker)
                for n in nxt:
                    if n not in seen:
                        seen.add(n)
                        queue.append(n)
    docs = {x: domain.documents[x] for x in seen if x in domain.documents}
    return Subgraph(docs, frozenset(triples))
