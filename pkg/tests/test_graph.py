"""Task graph construction: region-precise dependency edges."""

import random

import pytest

from clusterq.errors import ValidationError
from clusterq.graph import DepKind, TaskGraph
from clusterq.kernel import parse_kernel
from clusterq.model import (
    Accessor,
    AccessMode,
    Buffer,
    BufferInit,
    Fixed,
    Neighborhood,
    OneToOne,
    Task,
)
from clusterq.region import Box, Region

from helpers import random_workload


def buf(name, n=8, kind="float64", init=None):
    return Buffer(name, Box.from_shape((n,)), kind, init or BufferInit.iota())


def task(name, reads=(), writes=("z",), n=8, read_mappers=None, body_src=None):
    accs = []
    arity = {}
    for r in reads:
        mapper = (read_mappers or {}).get(r, OneToOne())
        accs.append(Accessor(r, AccessMode.READ, mapper, name=f"r_{r}"))
        arity[f"r_{r}"] = 1
    for w in writes:
        accs.append(Accessor(w, AccessMode.WRITE))
    if body_src is None:
        body_src = " + ".join(f"r_{r}[i]" for r in reads) or "1"
    body = {w: parse_kernel(body_src, arity, set(), 1) for w in writes}
    return Task(name=name, global_range=Box.from_shape((n,)), accessors=accs,
                body=body, params={})


def test_submit_assigns_ids_from_one():
    g = TaskGraph({"x": buf("x"), "z": buf("z")})
    t1 = g.submit(task("a", reads=("x",)))
    t2 = g.submit(task("b", reads=("x",)))
    ids = [t.id for t in g.tasks]
    assert ids == [1, 2]
    assert g.task(1).name == "a"
    assert g.task(2).name == "b"


def test_raw_edge_with_region():
    g = TaskGraph({"x": buf("x"), "z": buf("z"), "w": buf("w")})
    g.submit(task("producer", reads=("x",), writes=("z",)))
    g.submit(task("consumer", reads=("z",), writes=("w",)))
    edges = [e for e in g.edges if e.kind == DepKind.RAW]
    assert len(edges) == 1
    e = edges[0]
    assert (e.src, e.dst, e.buffer) == (1, 2, "z")
    assert e.region == Region.from_box(Box.from_shape((8,)))


def test_war_edge():
    g = TaskGraph({"x": buf("x"), "z": buf("z"), "w": buf("w")})
    g.submit(task("reader", reads=("x",), writes=("w",)))
    g.submit(task("writer", reads=(), writes=("x",)))
    kinds = {(e.src, e.dst): e.kind for e in g.edges}
    assert kinds == {(1, 2): DepKind.WAR}


def test_waw_edge():
    g = TaskGraph({"z": buf("z")})
    g.submit(task("w1"))
    g.submit(task("w2"))
    kinds = [e.kind for e in g.edges]
    assert kinds == [DepKind.WAW]


def test_raw_edge_region_follows_fixed_mapper():
    g = TaskGraph({"x": buf("x"), "z": buf("z"), "w": buf("w")})
    lo = Fixed(Region(1, [Box((0,), (4,))]))
    hi = Fixed(Region(1, [Box((4,), (8,))]))
    # declared requirements only; the bodies read nothing
    g.submit(task("writer", writes=("x",)))
    g.submit(task("r_lo", reads=("x",), writes=("z",), read_mappers={"x": lo},
                  body_src="1"))
    g.submit(task("r_hi", reads=("x",), writes=("w",), read_mappers={"x": hi},
                  body_src="2"))
    raw = [e for e in g.edges if e.kind == DepKind.RAW]
    assert {(e.src, e.dst) for e in raw} == {(1, 2), (1, 3)}
    assert raw[0].region == Region(1, [Box((0,), (4,))])
    assert raw[1].region == Region(1, [Box((4,), (8,))])


def test_rar_produces_no_edge():
    g = TaskGraph({"x": buf("x"), "z": buf("z"), "w": buf("w")})
    g.submit(task("r1", reads=("x",), writes=("z",)))
    g.submit(task("r2", reads=("x",), writes=("w",)))
    assert g.edges == []


def test_edge_order_raw_war_waw():
    # one pair of tasks can carry several kinds at once; edges come out
    # grouped by buffer in sorted order, RAW before WAW within a buffer
    g = TaskGraph({"a": buf("a"), "b": buf("b")})
    g.submit(task("t1", reads=("b",), writes=("a",)))
    g.submit(task("t2", reads=("a",), writes=("a", "b")))
    kinds = [(e.kind, e.buffer) for e in g.edges]
    assert kinds == [
        (DepKind.RAW, "a"),
        (DepKind.WAW, "a"),
        (DepKind.WAR, "b"),
    ]


def test_predecessors_sorted_unique():
    g = TaskGraph({"a": buf("a"), "b": buf("b"), "z": buf("z")})
    g.submit(task("p1", writes=("a",)))
    g.submit(task("p2", writes=("b",)))
    g.submit(task("c", reads=("a", "b"), writes=("z",)))
    assert g.predecessors(3) == [1, 2]
    assert g.predecessors(1) == []


def test_stencil_ping_pong_chain():
    g = TaskGraph({"a": buf("a", 16), "b": buf("b", 16, init=BufferInit.zeros())})
    nb = {"a": Neighborhood((1,)), "b": Neighborhood((1,))}
    g.submit(task("s1", reads=("a",), writes=("b",), n=16, read_mappers=nb))
    g.submit(task("s2", reads=("b",), writes=("a",), n=16, read_mappers=nb))
    g.submit(task("s3", reads=("a",), writes=("b",), n=16, read_mappers=nb))
    pairs = {(e.src, e.dst, e.kind) for e in g.edges}
    assert (1, 2, DepKind.RAW) in pairs
    assert (2, 3, DepKind.RAW) in pairs
    assert (1, 2, DepKind.WAR) in pairs  # s2 overwrites what s1 read
    assert (1, 3, DepKind.WAW) in pairs


def test_submit_validates():
    g = TaskGraph({"z": buf("z")})
    bad = task("bad", reads=("missing",), writes=("z",))
    with pytest.raises(ValidationError):
        g.submit(bad)
    assert g.tasks == []  # rejected task must not linger


def test_submit_rejects_footprint_violation():
    g = TaskGraph({"x": buf("x"), "z": buf("z")})
    arity = {"x": 1}
    t = Task(
        name="over", global_range=Box.from_shape((8,)),
        accessors=[Accessor("x", AccessMode.READ, Neighborhood((1,))),
                   Accessor("z", AccessMode.WRITE)],
        body={"z": parse_kernel("x[i-2]", arity, set(), 1)}, params={},
    )
    with pytest.raises(ValidationError, match="footprint"):
        g.submit(t)


def test_topological_order_is_submission_order():
    g = TaskGraph({"a": buf("a"), "z": buf("z")})
    g.submit(task("t1", writes=("a",)))
    g.submit(task("t2", reads=("a",), writes=("z",)))
    g.submit(task("t3", reads=("a",), writes=("a",)))
    assert g.topological_order() == [1, 2, 3]
    # edges only ever point forward, so submission order is topological
    assert all(e.src < e.dst for e in g.edges)


def test_edges_forward_on_random_workloads():
    rng = random.Random(17)
    for _ in range(30):
        buffers, tasks = random_workload(rng)
        g = TaskGraph(buffers)
        for t in tasks:
            g.submit(t)
        assert all(e.src < e.dst for e in g.edges)
        for e in g.edges:
            assert not e.region.is_empty()


def test_to_dot_format():
    g = TaskGraph({"x": buf("x"), "z": buf("z"), "w": buf("w")})
    g.submit(task("make", reads=("x",), writes=("z",)))
    g.submit(task("use", reads=("z",), writes=("w",)))
    dot = g.to_dot()
    assert dot.startswith("digraph tasks {")
    assert 'T1 [label="T1: make"]' in dot
    assert 'T2 [label="T2: use"]' in dot
    assert 'T1 -> T2 [label="RAW z"]' in dot
    assert dot.rstrip().endswith("}")
