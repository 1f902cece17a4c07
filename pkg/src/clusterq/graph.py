"""Task dependency graph with region-precise conflict edges.

Submitting a task maps every accessor over the full kernel range and records
an edge to each earlier task whose mapped region conflicts: RAW for an earlier
write overlapping a new read, WAR for an earlier read overlapping a new write,
WAW for overlapping writes. The conflict region is stored on the edge. Edges
always point from an earlier to a later submission, so the graph is acyclic by
construction and submission order is a topological order. Host initialization
is a virtual task with id 0; it seeds the scheduler's region table rather than
appearing as a graph node.
"""

import enum
from dataclasses import dataclass

from .errors import ValidationError
from .model import AccessMode, Task, apply_mapper, static_footprint_check, validate_task
from .region import Region

INIT_TASK_ID = 0


class DepKind(enum.Enum):
    RAW = "RAW"
    WAR = "WAR"
    WAW = "WAW"


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: DepKind
    buffer: str
    region: Region


class TaskGraph:
    def __init__(self, buffers):
        self.buffers = dict(buffers)
        self.tasks: list[Task] = []
        self.edges: list[Edge] = []
        # Full-range mapped regions per task id, split by mode.
        self._reads: dict[int, dict[str, Region]] = {}
        self._writes: dict[int, dict[str, Region]] = {}

    def submit(self, task: Task) -> int:
        validate_task(task, self.buffers)
        violations = static_footprint_check(task, self.buffers)
        if violations:
            detail = "; ".join(str(v) for v in violations)
            raise ValidationError(f"task '{task.name}': footprint violations: {detail}")

        tid = len(self.tasks) + 1
        task.id = tid
        reads: dict[str, Region] = {}
        writes: dict[str, Region] = {}
        for acc in task.accessors:
            extent = self.buffers[acc.buffer].extent
            mapped = apply_mapper(acc.mapper, task.global_range, task.global_range, extent)
            target = reads if acc.mode is AccessMode.READ else writes
            if acc.buffer in target:
                target[acc.buffer] = target[acc.buffer].union(mapped)
            else:
                target[acc.buffer] = mapped

        for earlier in self.tasks:
            eid = earlier.id
            for buffer in sorted(set(self._reads[eid]) | set(self._writes[eid])):
                ew = self._writes[eid].get(buffer)
                er = self._reads[eid].get(buffer)
                if ew is not None and buffer in reads:
                    conflict = ew.intersect(reads[buffer])
                    if conflict:
                        self.edges.append(Edge(eid, tid, DepKind.RAW, buffer, conflict))
                if er is not None and buffer in writes:
                    conflict = er.intersect(writes[buffer])
                    if conflict:
                        self.edges.append(Edge(eid, tid, DepKind.WAR, buffer, conflict))
                if ew is not None and buffer in writes:
                    conflict = ew.intersect(writes[buffer])
                    if conflict:
                        self.edges.append(Edge(eid, tid, DepKind.WAW, buffer, conflict))

        self.tasks.append(task)
        self._reads[tid] = reads
        self._writes[tid] = writes
        return tid

    def task(self, tid: int) -> Task:
        return self.tasks[tid - 1]

    def predecessors(self, tid: int) -> list[int]:
        return sorted({e.src for e in self.edges if e.dst == tid})

    def full_reads(self, tid: int) -> dict[str, Region]:
        return self._reads[tid]

    def full_writes(self, tid: int) -> dict[str, Region]:
        return self._writes[tid]

    def topological_order(self) -> list[int]:
        """Submission order; edges always point forward."""
        return [t.id for t in self.tasks]

    def to_dot(self) -> str:
        lines = ["digraph tasks {"]
        for t in self.tasks:
            lines.append(f'  T{t.id} [label="T{t.id}: {t.name}"];')
        for e in self.edges:
            lines.append(f'  T{e.src} -> T{e.dst} [label="{e.kind.value} {e.buffer}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"
