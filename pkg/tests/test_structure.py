import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gil import C, Domain, IdSource, Payload, Triple, int_key
from gil.errors import (
    EmptyRelation,
    ForbiddenCombination,
    HierarchyCycle,
    KeyAlreadyBound,
    MalformedContainer,
)
from gil.structure import (
    ContainerKind,
    assert_relation,
    children,
    dict_get,
    dict_items,
    dict_put,
    ensure_anchor,
    find_anchor,
    list_append,
    list_items,
    reconstruct,
    relation_instances,
    set_add,
    set_members,
)

from helpers import raw_reconstruct, raw_relations, scan


@pytest.fixture
def dom():
    return Domain(IdSource.seeded(11))


class TestAnchors:
    def test_idempotent(self, dom):
        owner = dom.create()
        a = ensure_anchor(dom, owner, ContainerKind.DICTIONARY)
        assert ensure_anchor(dom, owner, ContainerKind.DICTIONARY) == a
        assert dom.query(C.IsADictionaryAnchorOf, a, owner) == [Triple(C.IsADictionaryAnchorOf, a, owner)]

    def test_list_then_set_forbidden(self, dom):
        owner = dom.create()
        ensure_anchor(dom, owner, ContainerKind.LIST)
        with pytest.raises(ForbiddenCombination):
            ensure_anchor(dom, owner, ContainerKind.SET)

    def test_dictionary_combines_with_list(self, dom):
        owner = dom.create()
        ensure_anchor(dom, owner, ContainerKind.DICTIONARY)
        ensure_anchor(dom, owner, ContainerKind.LIST)
        assert find_anchor(dom, owner, ContainerKind.LIST) is not None

    def test_constant_owner_gets_derived_anchor(self):
        a, b = Domain(IdSource.seeded(1)), Domain(IdSource.seeded(2))
        assert ensure_anchor(a, C.Unit, ContainerKind.SET) == ensure_anchor(b, C.Unit, ContainerKind.SET)


class TestDictionary:
    def test_put_get(self, dom):
        owner, k, v = dom.create(), dom.create(), dom.create()
        dict_put(dom, owner, k, v)
        assert dict_get(dom, owner, k) == v
        anchor = find_anchor(dom, owner, ContainerKind.DICTIONARY)
        assert len(dom.query(k, None, anchor)) == 1

    def test_rebind_refused(self, dom):
        owner, k, v1, v2 = (dom.create() for _ in range(4))
        dict_put(dom, owner, k, v1)
        dict_put(dom, owner, k, v1)
        with pytest.raises(KeyAlreadyBound):
            dict_put(dom, owner, k, v2)

    def test_absent(self, dom):
        assert dict_get(dom, dom.create(), dom.create()) is None

    def test_raw_double_binding_is_malformed(self, dom):
        owner, k, v1, v2 = (dom.create() for _ in range(4))
        dict_put(dom, owner, k, v1)
        anchor = find_anchor(dom, owner, ContainerKind.DICTIONARY)
        dom.link(k, v2, anchor)
        with pytest.raises(MalformedContainer):
            dict_get(dom, owner, k)

    def test_cycle_refused(self, dom):
        a, b, k = dom.create(), dom.create(), dom.create()
        dict_put(dom, a, k, b)
        with pytest.raises(HierarchyCycle):
            dict_put(dom, b, k, a)
        with pytest.raises(HierarchyCycle):
            set_add(dom, a, a)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 9)), max_size=30))
    def test_write_once_keys(self, ops):
        dom = Domain(IdSource.seeded(5))
        owner = dom.create()
        keys = [dom.create(Payload.integer(i)) for i in range(6)]
        values = [dom.create(Payload.text(str(i))) for i in range(10)]
        for k, v in ops:
            try:
                dict_put(dom, owner, keys[k], values[v])
            except KeyAlreadyBound:
                pass
        anchor = find_anchor(dom, owner, ContainerKind.DICTIONARY)
        for k in keys:
            bound = scan(dom.triples, marker=k, second=anchor) if anchor else []
            assert len(bound) <= 1


class TestList:
    def test_order(self, dom):
        owner, a, b = dom.create(), dom.create(), dom.create()
        assert list_append(dom, owner, a) == 0
        assert list_append(dom, owner, b) == 1
        assert list_items(dom, owner) == [a, b]

    def test_empty(self, dom):
        assert list_items(dom, dom.create()) == []

    def test_gap_is_malformed(self, dom):
        owner, a, b = dom.create(), dom.create(), dom.create()
        anchor = ensure_anchor(dom, owner, ContainerKind.LIST)
        dom.link(int_key(0), a, anchor)
        dom.link(int_key(2), b, anchor)
        with pytest.raises(MalformedContainer):
            list_items(dom, owner)

    def test_set_after_list_forbidden(self, dom):
        owner = dom.create()
        list_append(dom, owner, dom.create())
        with pytest.raises(ForbiddenCombination):
            set_add(dom, owner, dom.create())


class TestSet:
    def test_idempotent(self, dom):
        owner, x = dom.create(), dom.create()
        set_add(dom, owner, x)
        set_add(dom, owner, x)
        assert set_members(dom, owner) == [x]

    def test_sorted(self, dom):
        owner, x, y = dom.create(), dom.create(), dom.create()
        set_add(dom, owner, y)
        set_add(dom, owner, x)
        assert set_members(dom, owner) == sorted([x, y])

    def test_empty(self, dom):
        assert set_members(dom, dom.create()) == []


class TestRelations:
    def test_binary_is_native(self, dom):
        m, a, b = dom.create(), dom.create(), dom.create()
        assert assert_relation(dom, m, [a, b]) == C.Unit
        assert Triple(m, a, b) in dom.triples
        assert relation_instances(dom, m) == [(a, b)]

    def test_unary_pads_with_unit(self, dom):
        m, a = dom.create(), dom.create()
        assert_relation(dom, m, [a])
        assert Triple(m, a, C.Unit) in dom.triples
        assert relation_instances(dom, m) == [(a,)]

    def test_ternary_reduces_to_dictionary(self, dom):
        m, a, b, c = (dom.create() for _ in range(4))
        r = assert_relation(dom, m, [a, b, c])
        assert dict_items(dom, r) == {int_key(0): m, int_key(1): a, int_key(2): b, int_key(3): c}
        assert relation_instances(dom, m) == [(a, b, c)]

    def test_empty_args(self, dom):
        with pytest.raises(EmptyRelation):
            assert_relation(dom, dom.create(), [])

    def test_unknown_marker(self, dom):
        assert relation_instances(dom, dom.create()) == []

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.lists(st.integers(0, 7), min_size=1, max_size=6), max_size=8))
    def test_round_trip(self, tuples):
        dom = Domain(IdSource.seeded(9))
        m = dom.create(Payload.text("marker"))
        pool = [dom.create(Payload.integer(i)) for i in range(8)]
        asserted = []
        for idx in tuples:
            args = [pool[i] for i in idx]
            assert_relation(dom, m, args)
            asserted.append(tuple(args))
        expected = sorted(set(a for a in asserted if len(a) <= 2)) + [a for a in asserted if len(a) > 2]
        assert relation_instances(dom, m) == sorted(expected)
        assert relation_instances(dom, m) == raw_relations(dom, m)


class TestReconstruct:
    def test_leaf(self, dom):
        leaf = dom.create(Payload.text("leaf"))
        sub = reconstruct(dom, leaf)
        assert set(sub.documents) == {leaf} and not sub.triples

    def test_figure_one_shape(self, dom):
        root = dom.create(Payload.text("root"))
        k1, k2 = dom.create(Payload.text("title")), dom.create(Payload.text("body"))
        c1, c2 = dom.create(Payload.text("T")), dom.create(Payload.text("B"))
        dict_put(dom, root, k1, c1)
        dict_put(dom, root, k2, c2)
        sub = reconstruct(dom, root)
        # root, anchor, 2 keys, 2 children; anchor triple + 2 bindings
        assert len(sub.documents) == 6
        assert len(sub.triples) == 3
        assert children(dom, root) == sorted([k1, k2, c1, c2])

    def test_cycle_terminates(self, dom):
        a, b, k = dom.create(), dom.create(), dom.create()
        dict_put(dom, a, k, b)
        anchor_b = ensure_anchor(dom, b, ContainerKind.DICTIONARY)
        dom.link(k, a, anchor_b)  # raw back edge
        sub = reconstruct(dom, a)
        assert {a, b} <= set(sub.documents)

    def test_matches_bfs_on_random_graphs(self):
        for seed in range(5):
            rng = random.Random(seed)
            dom = Domain(IdSource.seeded(seed))
            nodes = [dom.create(Payload.integer(i)) for i in range(1000)]
            keys = nodes[:20]
            for _ in range(1500):
                a, b = rng.choice(nodes), rng.choice(nodes)
                try:
                    r = rng.random()
                    if r < 0.5:
                        dict_put(dom, a, rng.choice(keys), b)
                    elif r < 0.75:
                        list_append(dom, a, b)
                    else:
                        set_add(dom, a, b)
                except (KeyAlreadyBound, ForbiddenCombination, HierarchyCycle):
                    pass
            for root in rng.sample(nodes, 10):
                sub = reconstruct(dom, root)
                docs, triples = raw_reconstruct(dom, root)
                assert set(sub.documents) == docs
                assert set(sub.triples) == triples


class TestAnchorsAreStructural:
    def test_no_container_on_anchor(self, dom):
        anchor = ensure_anchor(dom, dom.create(), ContainerKind.SET)
        with pytest.raises(ForbiddenCombination):
            dict_put(dom, anchor, dom.create(), dom.create())

    def test_no_binary_relation_into_anchor(self, dom):
        anchor = ensure_anchor(dom, dom.create(), ContainerKind.LIST)
        with pytest.raises(ForbiddenCombination):
            assert_relation(dom, dom.create(), [dom.create(), anchor])
        assert_relation(dom, dom.create(), [anchor, dom.create()])

    def test_keyed_binding_is_not_a_relation(self, dom):
        marker, value = dom.create(), dom.create()
        dict_put(dom, dom.create(), marker, value)
        assert relation_instances(dom, marker) == []
