"""Brute-force oracles and random domain builders shared by the test modules.

The oracles work on raw triple sets and re-derive marker ids from labels with
hashlib directly, so they share no code path with the module under test.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque

from gil import C, Domain, DocumentId, IdSource, Payload, Triple
from gil.errors import ForbiddenCombination, HierarchyCycle, KeyAlreadyBound
from gil.revision import RevisionContext, revise_attribute, revise_payload
from gil.structure import assert_relation, dict_put, list_append, set_add


def sha_const(label: str) -> DocumentId:
    digest = hashlib.sha256(("gil:const:" + label).encode()).digest()
    return DocumentId(0, int.from_bytes(digest[:16], "big"))


RAW_DICT = sha_const("IsADictionaryAnchorOf")
RAW_LIST = sha_const("IsAListAnchorOf")
RAW_SET = sha_const("IsASetAnchorOf")
RAW_ANCHOR_MARKERS = {RAW_DICT, RAW_LIST, RAW_SET}
RAW_UNIT = sha_const("Unit")


# -- oracles ----------------------------------------------------------------


def scan(triples, marker=None, first=None, second=None):
    return sorted(
        t
        for t in triples
        if (marker is None or t.marker == marker)
        and (first is None or t.first == first)
        and (second is None or t.second == second)
    )


def raw_anchors(triples, owner):
    return [(t.marker, t.first) for t in triples if t.second == owner and t.marker in RAW_ANCHOR_MARKERS]


def raw_bindings(triples, anchor):
    return [t for t in triples if t.second == anchor and t.marker not in RAW_ANCHOR_MARKERS]


def raw_reconstruct(domain: Domain, d: DocumentId):
    triples = list(domain.triples)
    docs, out = {d}, set()
    frontier = [d]
    while frontier:
        nxt = []
        for node in frontier:
            for marker, anchor in raw_anchors(triples, node):
                docs.add(anchor)
                out.add(Triple(marker, anchor, node))
                for b in raw_bindings(triples, anchor):
                    out.add(b)
                    reach = [b.first, b.marker] if marker == RAW_DICT else [b.first]
                    for r in reach:
                        if r not in docs:
                            docs.add(r)
                            nxt.append(r)
        frontier = nxt
    return {x for x in docs if x in domain.documents}, out


def raw_parents(triples, child):
    anchor_owner = {t.first: t.second for t in triples if t.marker in RAW_ANCHOR_MARKERS}
    return {
        anchor_owner[t.second]
        for t in triples
        if t.first == child and t.marker not in RAW_ANCHOR_MARKERS and t.second in anchor_owner
    }


def raw_ancestors(domain: Domain, d: DocumentId) -> set[DocumentId]:
    triples = list(domain.triples)
    seen: set[DocumentId] = set()
    queue = deque(raw_parents(triples, d))
    while queue:
        p = queue.popleft()
        if p not in seen:
            seen.add(p)
            queue.extend(raw_parents(triples, p))
    seen.discard(d)
    return seen


def raw_live(domain: Domain) -> set[DocumentId]:
    """Fixed-point iteration over the whole triple set until nothing changes."""
    live = {r.target for r in domain.observations.values()}
    live |= {d for d in domain.documents if d.birth_time == 0}
    live |= set(domain.actors)
    live &= set(domain.documents)
    anchors = {t.first for t in domain.triples if t.marker in RAW_ANCHOR_MARKERS}
    changed = True
    while changed:
        changed = False
        for t in domain.triples:
            add = ()
            if t.marker in RAW_ANCHOR_MARKERS and t.second in live:
                add = (t.first,)
            if t.marker in RAW_ANCHOR_MARKERS and t.first in live:
                add += (t.second,)
            elif t.marker not in RAW_ANCHOR_MARKERS and t.second in anchors and t.second in live:
                add = (t.marker, t.first)
            for a in add:
                if a not in live:
                    live.add(a)
                    changed = True
    return live


def raw_relations(domain: Domain, marker: DocumentId):
    """Decode relation instances straight from raw triples."""
    out = []
    anchors = {t.first for t in domain.triples if t.marker in RAW_ANCHOR_MARKERS}
    for t in domain.triples:
        if t.marker == marker and t.second not in anchors:
            out.append((t.first,) if t.second == RAW_UNIT else (t.first, t.second))
    k0 = sha_const("int:0")
    for t in domain.triples:
        if t.marker == k0 and t.first == marker:
            owners = [a.second for a in domain.triples if a.marker == RAW_DICT and a.first == t.second]
            if not owners:
                continue
            attrs = {b.marker: b.first for b in domain.triples if b.second == t.second}
            args, k = [], 1
            while sha_const(f"int:{k}") in attrs:
                args.append(attrs[sha_const(f"int:{k}")])
                k += 1
            out.append(tuple(args))
    return sorted(out)


# -- builders ---------------------------------------------------------------


def random_payload(rng: random.Random) -> Payload:
    r = rng.randrange(6)
    if r == 0:
        return Payload.empty()
    if r == 1:
        return Payload.integer(rng.randint(-(10**30), 10**30))
    if r == 2:
        return Payload.real(f"{rng.randint(-999, 999)}.{rng.randint(0, 999)}")
    if r == 3:
        return Payload.complex(str(rng.randint(-9, 9)), f"{rng.random():.6f}")
    if r == 4:
        return Payload.text("".join(rng.choice("abc xyzé中\n") for _ in range(rng.randint(0, 8))))
    return Payload.blob(bytes(rng.randrange(256) for _ in range(rng.randint(0, 6))))


def grow(domain: Domain, rng: random.Random, n_docs: int, n_ops: int, revisions: bool = True) -> list[DocumentId]:
    """Add ``n_docs`` documents and ``n_ops`` random structure/revision operations."""
    pool = [d for d in domain.documents if not d.is_constant]
    for _ in range(n_docs):
        pool.append(domain.create(random_payload(rng)))
    actor = next(iter(domain.actors), None)
    if actor is None:
        actor = domain.register_actor({"name": f"actor{rng.randrange(1000)}"}).actor_id
    for _ in range(n_ops):
        if not pool:
            break
        op = rng.randrange(6 if revisions else 4)
        a, b, c = (rng.choice(pool) for _ in range(3))
        try:
            if op == 0:
                dict_put(domain, a, b, c)
            elif op == 1:
                list_append(domain, a, b)
            elif op == 2:
                set_add(domain, a, b)
            elif op == 3:
                args = [rng.choice(pool) for _ in range(rng.randint(1, 4))]
                h = assert_relation(domain, a, args)
                if h != C.Unit:
                    pool.append(h)
            elif op == 4:
                ctx = RevisionContext(actor, rng.randint(1, 10**12), "lab")
                pool.extend(revise_payload(domain, a, random_payload(rng), ctx).mapping.values())
            else:
                from gil.structure import dict_items

                items = dict_items(domain, a)
                if items:
                    key = rng.choice(sorted(items))
                    ctx = RevisionContext(actor, rng.randint(1, 10**12), "lab")
                    pool.extend(revise_attribute(domain, a, key, c, ctx).mapping.values())
        except (ForbiddenCombination, KeyAlreadyBound, HierarchyCycle):
            pass
    return pool


def random_domain(seed: int, max_docs: int = 40, revisions: bool = True) -> Domain:
    rng = random.Random(seed)
    d = Domain(IdSource.seeded(seed))
    n = rng.randint(1, max_docs)
    grow(d, rng, n, rng.randint(0, n), revisions)
    return d


def branch(base: Domain, seed: int, max_docs: int = 20) -> Domain:
    """A copy of ``base`` with its own id stream and extra content."""
    rng = random.Random(seed)
    d = base.copy()
    d.ids = IdSource.seeded(seed, start_ms=1_800_000_000_000 + seed * 100_000)
    n = rng.randint(0, max_docs)
    grow(d, rng, n, rng.randint(0, n))
    return d


def chain(domain: Domain, depth: int) -> list[DocumentId]:
    """root -> ... -> leaf through dictionary bindings; returns [root, ..., leaf]."""
    nodes = [domain.create(Payload.text(f"n{i}")) for i in range(depth)]
    key = domain.create(Payload.text("child"))
    for parent, child in zip(nodes, nodes[1:]):
        dict_put(domain, parent, key, child)
    return nodes


def diamond(domain: Domain):
    r, p, q, d = (domain.create(Payload.text(n)) for n in "rpqd")
    kp, kq, kd = (domain.create(Payload.text(n)) for n in ("kp", "kq", "kd"))
    dict_put(domain, r, kp, p)
    dict_put(domain, r, kq, q)
    dict_put(domain, p, kd, d)
    set_add(domain, q, d)
    return r, p, q, d
