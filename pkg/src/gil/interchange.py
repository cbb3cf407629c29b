"""GILT v1 canonical text format, graph digest and conflict-free merge.

Layout::

    GILT 1
    #CONST                      (optional) C <id> <label>
    D <id> <kind> <payload>     sorted by id
    T <marker> <first> <second> sorted by the three ids
    #ACTORS                     (optional) A <id> <json attributes>
    #OBS                        (optional) O <obs> <actor> <target> <created>
    #AUDIT                      (optional) U <seq> <kind> <source> <subject>

Only the D and T lines carry graph content; the digest covers exactly those.
"""

from __future__ import annotations

import hashlib
import json
from typing import Iterable

from .core import DocumentId, IdSource, Payload, Triple, constant_id, parse_id, render_id
from .errors import GilError, ParseError, PayloadConflict
from .store import ActorRecord, AuditEntry, AuditKind, Domain, ObservationRecord

HEADER = "GILT 1"
SECTIONS = ("#CONST", "#ACTORS", "#OBS", "#AUDIT")


def document_line(doc_id: DocumentId, payload: Payload) -> str:
    enc = payload.encode()
    return f"D {render_id(doc_id)} {payload.kind.value}" + (f" {enc}" if enc else "")


def graph_lines(domain: Domain) -> list[str]:
    with domain.writer:
        docs = sorted(domain.documents.items())
        triples = sorted(domain.triples)
    return [document_line(d, p) for d, p in docs] + [t.render() for t in triples]


def _joined(lines: Iterable[str]) -> bytes:
    return "".join(line + "\n" for line in lines).encode("utf-8")


def export_canonical(domain: Domain, extras: bool = True) -> bytes:
    """Serialize ``domain``; equal domains give byte-identical output.

    ``extras=False`` drops the actor, observation and audit sections.
    """
    with domain.writer:
        lines = [HEADER]
        if domain.labels:
            lines.append("#CONST")
            lines += [f"C {render_id(d)} {label}" for d, label in sorted(domain.labels.items())]
        lines += graph_lines(domain)
        if extras and domain.actors:
            lines.append("#ACTORS")
            for actor_id, rec in sorted(domain.actors.items()):
                attrs = json.dumps(rec.attributes, sort_keys=True, separators=(",", ":"))
                lines.append(f"A {render_id(actor_id)} {attrs}")
        if extras and domain.observations:
            lines.append("#OBS")
            for rec in sorted(domain.observations.values(), key=lambda r: r.observation_id):
                lines.append(
                    f"O {render_id(rec.observation_id)} {render_id(rec.actor)} "
                    f"{render_id(rec.target)} {rec.created}"
                )
        if extras and domain.audit:
            lines.append("#AUDIT")
            for e in domain.audit:
                lines.append(f"U {e.sequence} {e.kind.value} {e.source or '-'} {e.subject}")
    return _joined(lines)


def domain_digest(domain: Domain) -> bytes:
    """SHA-256 over the D and T lines; equal iff graph content is equal."""
    return hashlib.sha256(_joined(graph_lines(domain))).digest()


def import_canonical(data: bytes | str, ids: IdSource | None = None) -> Domain:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != HEADER:
        raise ParseError(1, f"expected header {HEADER!r}")
    domain = Domain(ids)
    audit: list[AuditEntry] = []
    section = "#GRAPH"
    seen_graph = False
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            if line in SECTIONS:
                if line == "#CONST" and (seen_graph or section != "#GRAPH"):
                    raise ValueError("#CONST must directly follow the header")
                section = line
                continue
            tag, _, rest = line.partition(" ")
            if tag in ("D", "T") and section in ("#GRAPH", "#CONST"):
                section = "#GRAPH"
                seen_graph = True
                if tag == "D":
                    _read_document(domain, rest)
                else:
                    _read_triple(domain, rest)
            elif tag == "C" and section == "#CONST":
                id_s, _, label = rest.partition(" ")
                cid = parse_id(id_s)
                if not label or constant_id(label) != cid:
                    raise ValueError(f"constant label {label!r} does not derive {id_s}")
                domain.labels[cid] = label
            elif tag == "A" and section == "#ACTORS":
                id_s, _, attrs = rest.partition(" ")
                actor_id = parse_id(id_s)
                parsed = json.loads(attrs)
                if not isinstance(parsed, dict) or not all(
                    isinstance(k, str) and isinstance(v, str) for k, v in parsed.items()
                ):
                    raise ValueError("actor attributes must be a string map")
                domain.actors[actor_id] = ActorRecord(actor_id, parsed)
            elif tag == "O" and section == "#OBS":
                obs, actor, target, created = rest.split(" ")
                rec = ObservationRecord(parse_id(obs), parse_id(actor), parse_id(target), int(created))
                domain.observations[rec.observation_id] = rec
            elif tag == "U" and section == "#AUDIT":
                seq, kind, source, subject = rest.split(" ", 3)
                audit.append(
                    AuditEntry(int(seq), AuditKind(kind), subject, "" if source == "-" else source)
                )
            else:
                raise ValueError(f"unexpected line in section {section}: {line[:40]!r}")
        except PayloadConflict:
            raise
        except (ValueError, GilError) as exc:
            raise ParseError(lineno, str(exc)) from exc
    domain.labels = {d: label for d, label in domain.labels.items() if d in domain.documents}
    if audit:
        domain.audit = audit
    return domain


def _read_document(domain: Domain, rest: str) -> None:
    parts = rest.split(" ")
    if len(parts) == 2:
        parts.append("")
    if len(parts) != 3:
        raise ValueError("document line needs id, kind and payload")
    doc_id = parse_id(parts[0])
    domain.insert_document(doc_id, Payload.decode(parts[1], parts[2]))


def _read_triple(domain: Domain, rest: str) -> None:
    parts = rest.split(" ")
    if len(parts) != 3:
        raise ValueError("triple line needs three ids")
    m, f, s = (parse_id(p) for p in parts)
    for d in (m, f, s):
        if d not in domain.documents:
            raise ValueError(f"triple references undeclared document {render_id(d)}")
    domain.insert_triple(Triple(m, f, s))


def absorb(into: Domain, other: Domain) -> tuple[int, int]:
    """Add ``other``'s content to ``into`` in place; all-or-nothing.

    Returns the number of new documents and new triples.
    """
    snap = other.snapshot()
    with into.writer:
        for d, p in snap.documents.items():
            existing = into.documents.get(d)
            if existing is not None and existing != p:
                raise PayloadConflict(d, existing, p)
        new_docs = new_triples = 0
        for d, p in snap.documents.items():
            if d not in into.documents:
                into.documents[d] = p
                new_docs += 1
        for t in snap.triples:
            if t not in into.triples:
                into.triples.add(t)
                into.by_marker[t.marker].add(t)
                into.by_first[t.first].add(t)
                into.by_second[t.second].add(t)
                new_triples += 1
        for d, label in snap.labels.items():
            into.labels.setdefault(d, label)
        for obs_id, rec in snap.observations.items():
            into.observations.setdefault(obs_id, rec)
        for actor_id, rec in snap.actors.items():
            mine = into.actors.get(actor_id)
            if mine is None:
                into.actors[actor_id] = ActorRecord(actor_id, dict(rec.attributes))
                continue
            for k, v in rec.attributes.items():
                # max() keeps the attribute union commutative.
                mine.attributes[k] = max(v, mine.attributes.get(k, v))
        seq = into.audit[-1].sequence if into.audit else 0
        for e in snap.audit:
            seq += 1
            into.audit.append(AuditEntry(seq, e.kind, e.subject, e.source or snap.source))
        return new_docs, new_triples


def merge(a: Domain, b: Domain) -> Domain:
    """A new domain holding the union of ``a`` and ``b``; inputs are untouched."""
    out = a.copy()
    absorb(out, b)
    return out
