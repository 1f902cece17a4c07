"""Chunk splitting, data-distribution tracking and command generation.

Tasks are split along dimension 0 into contiguous chunks, one per node (chunk
k runs on node k; sizes differ by at most one with larger chunks first). A
RegionMapTable tracks, per buffer, which nodes hold which sub-regions at which
version. Walking tasks in topological order, the generator compares each
chunk's mapped read requirement against the table and emits a Push from the
lowest-id holder plus a matching AwaitPush for every missing piece, then an
Execute per chunk. After a task, written regions get a bumped version with the
writer as sole holder, and transferred regions gain the destination as holder,
so re-reading resident data never produces a second transfer.

An Execute depends on its AwaitPushes, on every Execute of each task-graph
predecessor, and on same-task Pushes leaving its node whose region overlaps
the Execute's writes (the data must leave before it is overwritten in place).
A Push depends on the command that produced its data on the source node.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .energy import DeviceModel, EnergyTarget, resolve_target, select_frequency
from .errors import UninitializedReadError, ValidationError
from .graph import TaskGraph
from .model import ELEMENT_BYTES, AccessMode, Task, apply_mapper
from .region import Box, Region


@dataclass(frozen=True)
class Chunk:
    task_id: int
    box: Box
    node: int


def split_task(task: Task, node_count: int) -> list[Chunk]:
    """Contiguous split along dimension 0; no empty chunks are produced."""
    if node_count < 1:
        raise ValidationError("node count must be at least 1")
    rng = task.global_range
    n = rng.maxs[0] - rng.mins[0]
    q, r = divmod(n, node_count)
    chunks = []
    lo = rng.mins[0]
    for node in range(node_count):
        size = q + (1 if node < r else 0)
        if size == 0:
            break
        box = Box((lo,) + rng.mins[1:], (lo + size,) + rng.maxs[1:])
        chunks.append(Chunk(task.id, box, node))
        lo += size
    return chunks


@dataclass
class Command:
    id: int
    deps: tuple[int, ...]


@dataclass
class ExecuteCommand(Command):
    chunk: Chunk
    frequency_ghz: float
    # (accessor name, buffer, mapped region) per read accessor
    reads: tuple = ()
    # (accessor name, buffer, mapped region, version written) per write accessor
    writes: tuple = ()

    @property
    def node(self):
        return self.chunk.node

    @property
    def task_id(self):
        return self.chunk.task_id


@dataclass
class PushCommand(Command):
    src: int
    dst: int
    buffer: str
    region: Region
    version: int

    @property
    def node(self):
        return self.src

    @property
    def bytes(self) -> int:
        return ELEMENT_BYTES * self.region.volume()


@dataclass
class AwaitPushCommand(Command):
    dst: int
    buffer: str
    region: Region
    version: int
    push_id: int

    @property
    def node(self):
        return self.dst


@dataclass
class _Entry:
    """One version-uniform piece of a buffer: who holds it and which command
    materialized it on each holder (None for host-initialized data)."""

    region: Region
    version: int
    holders: dict[int, Optional[int]]


class RegionMapTable:
    """Tracks buffer sub-regions to (version, holder nodes)."""

    def __init__(self, buffers):
        self.buffers = dict(buffers)
        self.entries: dict[str, list[_Entry]] = {}
        self.version_counter: dict[str, int] = {}
        for name, buf in self.buffers.items():
            if buf.init.is_initialized:
                full = Region.from_box(buf.extent)
                self.entries[name] = [_Entry(full, 1, {0: None})]
                self.version_counter[name] = 1
            else:
                self.entries[name] = []
                self.version_counter[name] = 0

    def resident_region(self, buffer: str, node: int) -> Region:
        dims = self.buffers[buffer].dims
        out = Region.empty(dims)
        for e in self.entries[buffer]:
            if node in e.holders:
                out = out.union(e.region)
        return out

    def covered_region(self, buffer: str) -> Region:
        dims = self.buffers[buffer].dims
        out = Region.empty(dims)
        for e in self.entries[buffer]:
            out = out.union(e.region)
        return out

    def add_holder(self, buffer: str, region: Region, node: int, producer: Optional[int]):
        """Record that `node` now also holds `region` at its current version."""
        new_entries = []
        for e in self.entries[buffer]:
            part = e.region.intersect(region)
            if part.is_empty():
                new_entries.append(e)
                continue
            rest = e.region.difference(part)
            if not rest.is_empty():
                new_entries.append(_Entry(rest, e.version, dict(e.holders)))
            holders = dict(e.holders)
            holders[node] = producer
            new_entries.append(_Entry(part, e.version, holders))
        self.entries[buffer] = new_entries

    def write(self, buffer: str, region: Region, version: int, node: int, producer: int):
        new_entries = []
        for e in self.entries[buffer]:
            rest = e.region.difference(region)
            if not rest.is_empty():
                new_entries.append(_Entry(rest, e.version, e.holders))
        new_entries.append(_Entry(region, version, {node: producer}))
        self.entries[buffer] = new_entries

    def bump_version(self, buffer: str) -> int:
        self.version_counter[buffer] += 1
        return self.version_counter[buffer]

    def snapshot(self):
        return {
            name: [(e.region, e.version, frozenset(e.holders)) for e in entries]
            for name, entries in self.entries.items()
        }


@dataclass
class Plan:
    """Output of command generation, consumed by the simulator."""

    graph: TaskGraph
    node_count: int
    commands: list[Command]
    devices: list[DeviceModel]
    queue_target: EnergyTarget
    final_locations: dict = field(default_factory=dict)

    def executes(self):
        return [c for c in self.commands if isinstance(c, ExecuteCommand)]

    def pushes(self):
        return [c for c in self.commands if isinstance(c, PushCommand)]

    def await_pushes(self):
        return [c for c in self.commands if isinstance(c, AwaitPushCommand)]


def _resolve_devices(devices, node_count) -> list[DeviceModel]:
    if devices is None:
        devices = DeviceModel()
    if isinstance(devices, DeviceModel):
        return [devices] * node_count
    devices = list(devices)
    if len(devices) == 1:
        return devices * node_count
    if len(devices) != node_count:
        raise ValidationError(
            f"device count must be 1 or equal to the node count ({node_count}), "
            f"got {len(devices)}"
        )
    return devices


def generate_commands(
    graph: TaskGraph,
    node_count: int,
    devices=None,
    queue_target: EnergyTarget = EnergyTarget.MAX_PERF,
    table: Optional[RegionMapTable] = None,
) -> Plan:
    if node_count < 1:
        raise ValidationError("node count must be at least 1")
    devices = _resolve_devices(devices, node_count)
    if table is None:
        table = RegionMapTable(graph.buffers)

    commands: list[Command] = []
    exec_ids_by_task: dict[int, list[int]] = {}

    def new_id():
        return len(commands)

    for tid in graph.topological_order():
        task = graph.task(tid)
        chunks = split_task(task, node_count)
        target = resolve_target(queue_target, task.target)

        pred_exec_ids = []
        for pred in graph.predecessors(tid):
            pred_exec_ids.extend(exec_ids_by_task.get(pred, ()))

        written_buffers = []
        next_version: dict[str, int] = {}
        for acc in task.writes():
            if acc.buffer not in next_version:
                next_version[acc.buffer] = table.version_counter[acc.buffer] + 1
                written_buffers.append(acc.buffer)

        task_pushes: list[PushCommand] = []
        task_execs: list[ExecuteCommand] = []
        pending_gains = []  # (buffer, region, dst node, awaitpush id)

        for chunk in chunks:
            read_specs = []
            need_by_buffer: dict[str, Region] = {}
            for acc in task.reads():
                extent = graph.buffers[acc.buffer].extent
                mapped = apply_mapper(acc.mapper, chunk.box, task.global_range, extent)
                read_specs.append((acc.name, acc.buffer, mapped))
                if acc.buffer in need_by_buffer:
                    need_by_buffer[acc.buffer] = need_by_buffer[acc.buffer].union(mapped)
                else:
                    need_by_buffer[acc.buffer] = mapped

            await_ids = []
            for buffer, need in need_by_buffer.items():
                missing = need.difference(table.resident_region(buffer, chunk.node))
                if missing.is_empty():
                    continue
                uncovered = missing.difference(table.covered_region(buffer))
                if not uncovered.is_empty():
                    raise UninitializedReadError(
                        f"task '{task.name}' (id {tid}) reads {uncovered} of buffer "
                        f"'{buffer}' which was never written or host-initialized"
                    )
                for entry in table.entries[buffer]:
                    part = entry.region.intersect(missing)
                    if part.is_empty():
                        continue
                    src = min(entry.holders)
                    producer = entry.holders[src]
                    push = PushCommand(
                        id=new_id(),
                        deps=(producer,) if producer is not None else (),
                        src=src,
                        dst=chunk.node,
                        buffer=buffer,
                        region=part,
                        version=entry.version,
                    )
                    commands.append(push)
                    task_pushes.append(push)
                    ap = AwaitPushCommand(
                        id=new_id(),
                        deps=(push.id,),
                        dst=chunk.node,
                        buffer=buffer,
                        region=part,
                        version=entry.version,
                        push_id=push.id,
                    )
                    commands.append(ap)
                    await_ids.append(ap.id)
                    pending_gains.append((buffer, part, chunk.node, ap.id))

            write_specs = []
            for acc in task.writes():
                extent = graph.buffers[acc.buffer].extent
                mapped = apply_mapper(acc.mapper, chunk.box, task.global_range, extent)
                write_specs.append((acc.name, acc.buffer, mapped, next_version[acc.buffer]))

            device = devices[chunk.node]
            t_ref = Fraction(chunk.box.volume()) / Fraction(device.throughput_ref)
            freq = select_frequency(device, target, t_ref, task.beta)
            exe = ExecuteCommand(
                id=new_id(),
                deps=tuple(sorted(set(await_ids) | set(pred_exec_ids))),
                chunk=chunk,
                frequency_ghz=freq,
                reads=tuple(read_specs),
                writes=tuple(write_specs),
            )
            commands.append(exe)
            task_execs.append(exe)

        # In-place hazard: data pushed out of a node must leave before the
        # node's own Execute overwrites it within the same task.
        for exe in task_execs:
            extra = set()
            for push in task_pushes:
                if push.src != exe.node:
                    continue
                for _, buffer, region, _v in exe.writes:
                    if buffer == push.buffer and region.intersect(push.region):
                        extra.add(push.id)
                        break
            if extra:
                exe.deps = tuple(sorted(set(exe.deps) | extra))

        for buffer, part, dst, ap_id in pending_gains:
            table.add_holder(buffer, part, dst, ap_id)
        for buffer in written_buffers:
            version = table.bump_version(buffer)
            assert version == next_version[buffer]
            for exe in task_execs:
                for _, wbuf, region, v in exe.writes:
                    if wbuf == buffer:
                        table.write(buffer, region, version, exe.node, exe.id)

        exec_ids_by_task[tid] = [e.id for e in task_execs]

    return Plan(
        graph=graph,
        node_count=node_count,
        commands=commands,
        devices=devices,
        queue_target=queue_target,
        final_locations=table.snapshot(),
    )


def export_command_graph(plan: Plan) -> str:
    lines = ["digraph commands {"]
    for cmd in plan.commands:
        if isinstance(cmd, ExecuteCommand):
            label = (
                f"C{cmd.id}: Execute T{cmd.task_id} {cmd.chunk.box} "
                f"n{cmd.node} @{cmd.frequency_ghz}GHz"
            )
        elif isinstance(cmd, PushCommand):
            label = (
                f"C{cmd.id}: Push {cmd.buffer} {cmd.region} v{cmd.version} "
                f"n{cmd.src}->n{cmd.dst}"
            )
        else:
            label = f"C{cmd.id}: AwaitPush {cmd.buffer} {cmd.region} v{cmd.version} n{cmd.dst}"
        lines.append(f'  C{cmd.id} [label="{label}"];')
    for cmd in plan.commands:
        for dep in sorted(cmd.deps):
            lines.append(f"  C{dep} -> C{cmd.id};")
    lines.append("}")
    return "\n".join(lines) + "\n"
