"""Micro-models: document-registered bundles of built-in well-formedness checks."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable

import networkx as nx

from .core import C, DocumentId, Kind, Payload, int_key, parse_id, render_id
from .errors import MalformedContainer, UnknownCheck
from .store import AuditKind, Domain
from .structure import (
    KIND_OF_MARKER,
    ContainerKind,
    bindings,
    list_append,
    list_items,
    set_add,
    set_members,
)

REGISTRY = C.MicroModelRegistry


@dataclass(frozen=True)
class Violation:
    check: str
    subjects: tuple[DocumentId, ...]
    message: str

    def __str__(self) -> str:
        return f"{self.check} {','.join(render_id(s) for s in self.subjects)} {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        return [str(v) for v in self.violations]


@dataclass(frozen=True)
class MicroModel:
    model_doc: DocumentId
    check_ids: tuple[str, ...]


# -- built-in checks ------------------------------------------------------


def check_containers(domain: Domain) -> Iterable[Violation]:
    name = "containers-wf"
    anchors: dict[tuple[DocumentId, ContainerKind], list[DocumentId]] = defaultdict(list)
    owners_of_anchor: dict[DocumentId, set[DocumentId]] = defaultdict(set)
    for marker, kind in KIND_OF_MARKER.items():
        for t in domain.match(marker=marker):
            anchors[(t.second, kind)].append(t.first)
            owners_of_anchor[t.first].add(t.second)
    for (owner, kind), found in sorted(anchors.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        if len(found) > 1:
            yield Violation(name, (owner, *sorted(found)), f"{len(found)} {kind.value} anchors on one owner")
    for anchor, owners in sorted(owners_of_anchor.items()):
        if len(owners) > 1:
            yield Violation(name, (anchor, *sorted(owners)), "anchor attached to several owners")
    for owner in sorted({o for o, k in anchors if k is ContainerKind.LIST}):
        if (owner, ContainerKind.SET) in anchors:
            yield Violation(name, (owner,), "list and set on the same owner")
    for (owner, kind), found in sorted(anchors.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        for anchor in sorted(found):
            entries = bindings(domain, anchor)
            if kind is ContainerKind.DICTIONARY:
                per_key: dict[DocumentId, list[DocumentId]] = defaultdict(list)
                for t in entries:
                    per_key[t.marker].append(t.first)
                for key, values in sorted(per_key.items()):
                    if len(values) > 1:
                        yield Violation(name, (owner, key), f"key bound to {len(values)} values")
            elif kind is ContainerKind.LIST:
                expected = {int_key(i) for i in range(len(entries))}
                if {t.marker for t in entries} != expected:
                    yield Violation(name, (owner, anchor), "list indices are not contiguous from 0")
            else:
                stray = [t for t in entries if t.marker != C.IsAnElementOf]
                if stray:
                    yield Violation(name, (owner, anchor), f"{len(stray)} non-membership triples on set anchor")


def parent_graph(domain: Domain) -> nx.DiGraph:
    """Edges parent -> child over dictionary values, list elements and set members."""
    g = nx.DiGraph()
    for marker in KIND_OF_MARKER:
        for anchor_t in domain.match(marker=marker):
            owner, anchor = anchor_t.second, anchor_t.first
            for t in bindings(domain, anchor):
                g.add_edge(owner, t.first)
    return g


def _cycles(g: nx.DiGraph) -> list[tuple[DocumentId, ...]]:
    out = []
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(n, n) for n in comp):
            out.append(tuple(sorted(comp)))
    return sorted(out)


def check_hierarchy(domain: Domain) -> Iterable[Violation]:
    for cycle in _cycles(parent_graph(domain)):
        yield Violation("hierarchy-acyclic", cycle, "documents are their own ancestors")


def check_revisions(domain: Domain) -> Iterable[Violation]:
    name = "revision-wf"
    g = nx.DiGraph()
    preds: dict[DocumentId, list[DocumentId]] = defaultdict(list)
    for t in domain.match(marker=C.IsARevisionOf):
        g.add_edge(t.first, t.second)
        preds[t.first].append(t.second)
    for d, ps in sorted(preds.items()):
        if len(ps) > 1:
            yield Violation(name, (d, *sorted(ps)), f"{len(ps)} revision predecessors")
    for cycle in _cycles(g):
        yield Violation(name, cycle, "revision cycle")
    for d in sorted(preds):
        if not any(True for _ in domain.match(marker=C.HasRevisionContext, first=d)):
            yield Violation(name, (d,), "revision without a context record")


def check_growth(domain: Domain) -> Iterable[Violation]:
    """Replay the audit log; anything inserted since the last Collect must still exist."""
    name = "growth-monotone"
    docs: set[DocumentId] = set()
    triples: set[tuple[DocumentId, ...]] = set()
    last = None
    for e in domain.audit:
        if last is not None and e.sequence <= last:
            yield Violation(name, (REGISTRY,), f"audit sequence {e.sequence} does not increase")
        last = e.sequence
        if e.kind is AuditKind.COLLECT:
            docs.clear()
            triples.clear()
        elif e.kind is AuditKind.DOC_INSERT:
            docs.add(parse_id(e.subject))
        else:
            triples.add(tuple(parse_id(p) for p in e.subject.split(" ")))
    for d in sorted(docs - domain.documents.keys()):
        yield Violation(name, (d,), "document vanished without a Collect entry")
    present = {(t.marker, t.first, t.second) for t in domain.triples}
    for t in sorted(triples - present):
        yield Violation(name, t, "triple vanished without a Collect entry")


BUILTIN_CHECKS: dict[str, Callable[[Domain], Iterable[Violation]]] = {
    "containers-wf": check_containers,
    "hierarchy-acyclic": check_hierarchy,
    "revision-wf": check_revisions,
    "growth-monotone": check_growth,
}


# -- registry -------------------------------------------------------------


def registered_micromodels(domain: Domain) -> list[MicroModel]:
    out = []
    try:
        members = set_members(domain, REGISTRY)
    except MalformedContainer:
        return out  # containers-wf reports the damage
    for doc in members:
        checks = []
        try:
            items = list_items(domain, doc)
        except MalformedContainer:
            items = []
        for c in items:
            p = domain.documents.get(c)
            if p is not None and p.kind is Kind.TEXT:
                checks.append(p.value)
        out.append(MicroModel(doc, tuple(checks)))
    return out


def register_micromodel(domain: Domain, label: str, check_ids: Iterable[str]) -> MicroModel:
    checks = tuple(check_ids)
    unknown = [c for c in checks if c not in BUILTIN_CHECKS]
    if unknown:
        raise UnknownCheck(f"unknown check(s): {', '.join(unknown)}")
    with domain.writer:
        for model in registered_micromodels(domain):
            if domain.documents[model.model_doc] == Payload.text(label):
                return model
        doc = domain.create(Payload.text(label))
        for c in checks:
            list_append(domain, doc, domain.create(Payload.text(c)))
        set_add(domain, REGISTRY, doc)
        return MicroModel(doc, checks)


def validate(domain: Domain, checks: Iterable[str] | None = None) -> ValidationReport:
    """Run every check of every registered micro-model, or ``checks`` if given."""
    snap = domain.snapshot()
    if checks is None:
        # Labels this build does not know (e.g. merged in from elsewhere) are skipped.
        wanted = {c for m in registered_micromodels(snap) for c in m.check_ids}
    else:
        wanted = set(checks)
        unknown = wanted - BUILTIN_CHECKS.keys()
        if unknown:
            raise UnknownCheck(f"unknown check(s): {', '.join(sorted(unknown))}")
    report = ValidationReport()
    for name in BUILTIN_CHECKS:
        if name in wanted:
            report.violations.extend(BUILTIN_CHECKS[name](snap))
    return report
