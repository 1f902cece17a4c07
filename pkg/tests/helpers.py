"""Shared test utilities: bitmap oracle for region algebra, an independent
command-plan replay checker, and a random workload generator."""

from fractions import Fraction
from heapq import heapify, heappop, heappush

import numpy as np

from clusterq.kernel import BinOp, IdComponent, Neg, Num, Param, Read
from clusterq.model import (
    Accessor,
    AccessMode,
    All,
    Buffer,
    BufferInit,
    Fixed,
    Neighborhood,
    OneToOne,
    Slice,
    Task,
)
from clusterq.region import Box, Region
from clusterq.scheduler import AwaitPushCommand, ExecuteCommand, PushCommand


# ---------------------------------------------------------------- region oracle

def region_bitmap(region, shape):
    """Dense cell-set representation; only valid for regions within [0, shape)."""
    grid = np.zeros(shape, dtype=bool)
    for box in region:
        grid[tuple(slice(lo, hi) for lo, hi in zip(box.mins, box.maxs))] = True
    return grid


def box_bitmap(box, shape):
    grid = np.zeros(shape, dtype=bool)
    grid[tuple(slice(lo, hi) for lo, hi in zip(box.mins, box.maxs))] = True
    return grid


def random_box(rng, shape):
    mins, maxs = [], []
    for n in shape:
        a = rng.randrange(0, n)
        b = rng.randrange(a + 1, n + 1)
        mins.append(a)
        maxs.append(b)
    return Box(tuple(mins), tuple(maxs))


def random_region(rng, shape, max_boxes=4):
    count = rng.randrange(1, max_boxes + 1)
    return Region(len(shape), [random_box(rng, shape) for _ in range(count)])


# ------------------------------------------------------------- plan replay check

def check_plan(plan, buffers):
    """Replay a command plan against dense per-node, per-cell version grids.

    Asserts, independently of the scheduler's own bookkeeping:
      - the command DAG is acyclic and every dep id exists,
      - Push/AwaitPush pairing is a bijection with matching payload fields,
      - every Push captures exactly the version it claims from its source,
        and delivers no cell the destination already holds at that version,
      - every Execute sees each read cell at the version produced by the last
        preceding writer of that cell (pre-task state for in-place tasks),
      - every Execute writes its own chunk at the expected bumped version.

    Replay order is Kahn's algorithm with lowest command id first, matching
    the simulator, so in-place overwrites interact with capture correctly:
    a missing anti-dependency shows up as a version mismatch at the source.
    """
    by_id = {c.id: c for c in plan.commands}
    assert len(by_id) == len(plan.commands), "duplicate command ids"
    for c in plan.commands:
        for d in c.deps:
            assert d in by_id, f"C{c.id} depends on missing C{d}"

    pushes = {c.id: c for c in plan.commands if isinstance(c, PushCommand)}
    awaits = [c for c in plan.commands if isinstance(c, AwaitPushCommand)]
    assert sorted(pushes) == sorted(a.push_id for a in awaits), \
        "push/await_push pairing is not a bijection"
    for a in awaits:
        p = pushes[a.push_id]
        assert a.buffer == p.buffer and a.dst == p.dst and a.version == p.version
        assert a.region == p.region

    # Version oracle from the task list alone: one bump per writing task per
    # buffer, writes cover exactly the one_to_one image of the task range.
    counter = {}
    cur = {}
    for name, buf in buffers.items():
        seed = 1 if buf.init.is_initialized else 0
        counter[name] = seed
        cur[name] = np.full(buf.extent.shape, seed, dtype=np.int64)
    pre = {}   # (task_id, buffer) -> version grid before the task runs
    wver = {}  # (task_id, buffer) -> version the task writes
    for t in plan.graph.tasks:
        rbufs = {a.buffer for a in t.accessors if a.mode is AccessMode.READ}
        wbufs = {a.buffer for a in t.accessors if a.mode is AccessMode.WRITE}
        for b in rbufs:
            pre[(t.id, b)] = cur[b].copy()
        for b in wbufs:
            counter[b] += 1
            wver[(t.id, b)] = counter[b]
            cur[b][box_bitmap(t.global_range, buffers[b].extent.shape)] = counter[b]

    nodever = {}  # (buffer, node) -> int grid, 0 means absent
    def ver(buffer, node):
        key = (buffer, node)
        if key not in nodever:
            nodever[key] = np.zeros(buffers[buffer].extent.shape, dtype=np.int64)
        return nodever[key]

    for name, buf in buffers.items():
        if buf.init.is_initialized:
            ver(name, 0)[...] = 1

    indegree = {c.id: len(c.deps) for c in plan.commands}
    dependents = {c.id: [] for c in plan.commands}
    for c in plan.commands:
        for d in c.deps:
            dependents[d].append(c.id)
    heap = [cid for cid, deg in indegree.items() if deg == 0]
    heapify(heap)
    payload_cells = {}
    processed = 0

    while heap:
        cid = heappop(heap)
        cmd = by_id[cid]
        if isinstance(cmd, PushCommand):
            cells = region_bitmap(cmd.region, buffers[cmd.buffer].extent.shape)
            assert (ver(cmd.buffer, cmd.src)[cells] == cmd.version).all(), \
                f"C{cid} captures {cmd.buffer} at the wrong version on node {cmd.src}"
            assert not (ver(cmd.buffer, cmd.dst)[cells] == cmd.version).any(), \
                f"C{cid} pushes data node {cmd.dst} already holds at v{cmd.version}"
            payload_cells[cid] = cells
        elif isinstance(cmd, AwaitPushCommand):
            ver(cmd.buffer, cmd.dst)[payload_cells[cmd.push_id]] = cmd.version
        elif isinstance(cmd, ExecuteCommand):
            for _name, bufname, region in cmd.reads:
                cells = region_bitmap(region, buffers[bufname].extent.shape)
                expect = pre[(cmd.task_id, bufname)]
                got = ver(bufname, cmd.node)
                assert (got[cells] == expect[cells]).all(), \
                    f"C{cid} reads {bufname} at stale or missing versions " \
                    f"on node {cmd.node}"
            for _name, bufname, region, v in cmd.writes:
                assert v == wver[(cmd.task_id, bufname)], \
                    f"C{cid} writes {bufname} at v{v}, oracle says " \
                    f"v{wver[(cmd.task_id, bufname)]}"
                assert region == Region.from_box(cmd.chunk.box)
                ver(bufname, cmd.node)[
                    region_bitmap(region, buffers[bufname].extent.shape)] = v
        processed += 1
        for nxt in dependents[cid]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heappush(heap, nxt)

    assert processed == len(plan.commands), "command graph has a cycle"
    return nodever


# --------------------------------------------------------------- random workloads

MAPPER_KINDS = ("one_to_one", "neighborhood", "all", "fixed", "slice")


def _random_shape(rng):
    dims = rng.choice((1, 1, 2, 2, 3))
    if dims == 1:
        return (rng.randrange(2, 33),)
    if dims == 2:
        return (rng.randrange(2, 9), rng.randrange(2, 8))
    return (rng.randrange(2, 5), rng.randrange(2, 5), rng.randrange(2, 4))


def _leaf(rng, read_specs, params, dims, integer):
    roll = rng.random()
    if read_specs and roll < 0.55:
        name, offsets = rng.choice(read_specs)
        return Read(name, offsets(rng))
    if params and roll < 0.7:
        return Param(rng.choice(sorted(params)))
    if roll < 0.85:
        return IdComponent(rng.randrange(dims))
    if integer:
        return Num(rng.randrange(-3, 7))
    return Num(rng.choice((0.5, 1.0, 2.0, -1.5, 3.0)))


def _expr(rng, depth, read_specs, params, dims, integer):
    if depth <= 0 or rng.random() < 0.3:
        return _leaf(rng, read_specs, params, dims, integer)
    ops = ("+", "-", "*") if integer else ("+", "-", "*", "/")
    op = rng.choice(ops)
    if rng.random() < 0.1:
        return Neg(_expr(rng, depth - 1, read_specs, params, dims, integer))
    return BinOp(
        op,
        _expr(rng, depth - 1, read_specs, params, dims, integer),
        _expr(rng, depth - 1, read_specs, params, dims, integer),
    )


def random_workload(rng, mapper_counter=None):
    """Buffers plus up to 5 tasks over a shared shape, one element kind.

    Read mappers cycle through all five kinds; write mappers are one_to_one.
    Offsets are kept within each mapper's allowance so runs never trip the
    footprint or runtime region checks.
    """
    shape = _random_shape(rng)
    dims = len(shape)
    extent = Box.from_shape(shape)
    integer = rng.random() < 0.4
    kind = "int64" if integer else "float64"

    names = ["a", "b", "c", "d"][: rng.randrange(2, 5)]
    inits = {}
    for name in names:
        roll = rng.random()
        if roll < 0.4:
            inits[name] = BufferInit.iota()
        elif roll < 0.6:
            inits[name] = BufferInit.zeros()
        elif roll < 0.8:
            inits[name] = BufferInit.constant(rng.randrange(1, 5))
        else:
            vol = extent.volume()
            vals = [rng.randrange(-4, 9) for _ in range(vol)]
            inits[name] = BufferInit.explicit(vals)

    task_count = rng.randrange(1, 6)
    tasks = []
    written_once = set()
    read_before_write = set()
    first_write_full = {}

    for t in range(task_count):
        if rng.random() < 0.3:
            rng_box = random_box(rng, shape)
            rng_box = Box(tuple(0 for _ in shape), rng_box.maxs)
        else:
            rng_box = extent
        full = rng_box == extent

        wcount = 1 if len(names) < 3 or rng.random() < 0.7 else 2
        wbuffers = rng.sample(names, wcount)
        rcount = rng.randrange(0, 4)
        rbuffers = [rng.choice(names) for _ in range(rcount)]

        accessors = []
        read_specs = []
        used = set()
        for j, bname in enumerate(rbuffers):
            mk = MAPPER_KINDS[mapper_counter.pop() if mapper_counter else rng.randrange(5)]
            aname = f"r{j}_{bname}"
            if mk == "one_to_one":
                mapper = OneToOne()
                offsets = lambda r, d=dims: tuple(0 for _ in range(d))
            elif mk == "neighborhood":
                radii = tuple(rng.randrange(0, 3) for _ in range(dims))
                mapper = Neighborhood(radii)
                offsets = lambda r, rad=radii: tuple(
                    r.randrange(-k, k + 1) for k in rad)
            elif mk == "all":
                mapper = All()
                offsets = lambda r, d=dims: tuple(r.randrange(-2, 3) for _ in range(d))
            elif mk == "slice":
                axis = rng.randrange(dims)
                mapper = Slice(axis)
                offsets = lambda r, d=dims, ax=axis: tuple(
                    r.randrange(-2, 3) if k == ax else 0 for k in range(d))
            else:
                # declared data requirement only; the body never reads it
                mapper = Fixed(random_region(rng, shape, 2))
                offsets = None
            accessors.append(Accessor(bname, AccessMode.READ, mapper, name=aname))
            if offsets is not None:
                read_specs.append((aname, offsets))
            if bname not in written_once:
                read_before_write.add(bname)
            used.add(bname)

        body = {}
        params = {}
        if rng.random() < 0.5:
            params["p"] = rng.randrange(1, 5) if integer else rng.choice((0.5, 2.0))
        for bname in wbuffers:
            aname = f"w_{bname}"
            accessors.append(Accessor(bname, AccessMode.WRITE, name=aname))
            body[aname] = _expr(rng, 2, read_specs, params, dims, integer)
            if bname not in written_once:
                written_once.add(bname)
                first_write_full[bname] = full and bname not in read_before_write

        tasks.append(Task(
            name=f"t{t}",
            global_range=rng_box,
            accessors=accessors,
            body=body,
            params=params,
            beta=rng.choice((0.0, 0.0, 0.5)),
        ))

    buffers = {}
    for name in names:
        init = inits[name]
        if first_write_full.get(name) and rng.random() < 0.5:
            init = BufferInit.uninitialized()
        buffers[name] = Buffer(name=name, extent=extent, element_kind=kind, init=init)
    return buffers, tasks
