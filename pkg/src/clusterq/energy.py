"""Device power model, frequency selection and energy accounting.

Power draw at frequency f is P(f) = P_static + P_dyn_ref * (f / f_ref)^alpha.
A chunk whose reference runtime is t_ref takes t(f) = t_ref * (beta +
(1 - beta) * f_ref / f); beta is the frequency-insensitive fraction.

Frequency selection enumerates the device's discrete levels and minimizes the
target objective; ties prefer the higher frequency. Objectives are compared
as exact rationals so ties are decided by value, never by rounding. Energy
accounting likewise runs on exact rationals over the float-valued inputs,
which makes kernel + idle == device energy an identity rather than an
approximation. Transfers draw no dynamic power; static power covers them.
"""

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import ValidationError


class EnergyTarget(enum.Enum):
    MAX_PERF = "MAX_PERF"
    MIN_ENERGY = "MIN_ENERGY"
    MIN_EDP = "MIN_EDP"
    MIN_ED2P = "MIN_ED2P"


def resolve_target(queue_target: EnergyTarget, task_override: Optional[EnergyTarget]):
    """Per-task override wins over the queue-level target."""
    return task_override if task_override is not None else queue_target


@dataclass(frozen=True)
class DeviceModel:
    levels_ghz: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)
    f_ref_ghz: float = 1.0
    p_static_w: float = 10.0
    p_dyn_ref_w: float = 10.0
    alpha_exp: float = 3.0
    throughput_ref: float = 1e9  # elements per second at f_ref
    node: Optional[int] = None

    def __post_init__(self):
        levels = tuple(float(f) for f in self.levels_ghz)
        object.__setattr__(self, "levels_ghz", levels)
        if not levels:
            raise ValidationError("device needs at least one frequency level")
        if any(f <= 0 for f in levels):
            raise ValidationError("frequency levels must be positive")
        if list(levels) != sorted(levels) or len(set(levels)) != len(levels):
            raise ValidationError("frequency levels must be strictly ascending")
        if self.f_ref_ghz not in levels:
            raise ValidationError(f"f_ref {self.f_ref_ghz} is not one of the levels {levels}")
        if self.p_static_w < 0 or self.p_dyn_ref_w < 0:
            raise ValidationError("power terms must be non-negative")
        if self.throughput_ref <= 0:
            raise ValidationError("throughput_ref must be positive")

    def power_watts(self, f_ghz: float) -> float:
        return float(self._power_exact(f_ghz))

    def _power_exact(self, f_ghz: float) -> Fraction:
        ratio = Fraction(f_ghz) / Fraction(self.f_ref_ghz)
        alpha = self.alpha_exp
        if float(alpha) == int(alpha):
            dyn = Fraction(self.p_dyn_ref_w) * ratio ** int(alpha)
        else:
            dyn = Fraction(self.p_dyn_ref_w * float(ratio) ** float(alpha))
        return Fraction(self.p_static_w) + dyn


def exec_time(t_ref, beta, f_ref_ghz, f_ghz) -> Fraction:
    """Exact chunk runtime t_ref * (beta + (1 - beta) * f_ref / f)."""
    t_ref = Fraction(t_ref)
    beta = Fraction(beta)
    return t_ref * (beta + (1 - beta) * Fraction(f_ref_ghz) / Fraction(f_ghz))


def _objective(device: DeviceModel, target: EnergyTarget, t_ref, beta, f_ghz) -> Fraction:
    t = exec_time(t_ref, beta, device.f_ref_ghz, f_ghz)
    e = device._power_exact(f_ghz) * t
    if target is EnergyTarget.MIN_ENERGY:
        return e
    if target is EnergyTarget.MIN_EDP:
        return e * t
    if target is EnergyTarget.MIN_ED2P:
        return e * t * t
    raise ValidationError(f"no objective for target {target}")


def select_frequency(device: DeviceModel, target: EnergyTarget, chunk_t_ref, beta=0.0) -> float:
    """Frequency level minimizing the target objective; ties pick the higher
    level. MAX_PERF always selects the highest level."""
    if Fraction(chunk_t_ref) <= 0:
        raise ValidationError("chunk_t_ref must be positive")
    if target is EnergyTarget.MAX_PERF:
        return device.levels_ghz[-1]
    best = None
    best_obj = None
    for f in device.levels_ghz:  # ascending, so <= keeps the higher level on ties
        obj = _objective(device, target, chunk_t_ref, beta, f)
        if best_obj is None or obj <= best_obj:
            best, best_obj = f, obj
    return best


@dataclass
class TaskEnergy:
    task_id: int
    name: str
    duration_s: Fraction
    energy_j: Fraction
    frequency_ghz_per_node: dict[int, float]


@dataclass
class DeviceEnergy:
    node: int
    energy_j: Fraction
    busy_s: Fraction
    idle_s: Fraction
    static_power_w: float = 0.0

    @property
    def idle_energy_j(self) -> Fraction:
        return Fraction(self.static_power_w) * self.idle_s


@dataclass
class EnergyReport:
    per_task: list[TaskEnergy] = field(default_factory=list)
    per_device: list[DeviceEnergy] = field(default_factory=list)
    makespan_s: Fraction = Fraction(0)

    @property
    def total_kernel_energy(self) -> Fraction:
        return sum((t.energy_j for t in self.per_task), Fraction(0))

    @property
    def total_idle_energy(self) -> Fraction:
        return sum((d.idle_energy_j for d in self.per_device), Fraction(0))

    @property
    def total_device_energy(self) -> Fraction:
        return sum((d.energy_j for d in self.per_device), Fraction(0))


def account_energy(trace, devices, makespan) -> EnergyReport:
    """Aggregate energy from execute events plus static idle draw.

    Kernel energy for an event is P(f) * duration; device energy is the sum of
    its events' kernel energy plus P_static * idle time. Push events charge
    nothing beyond static draw.
    """
    makespan = Fraction(makespan)
    report = EnergyReport(makespan_s=makespan)
    tasks: dict[int, TaskEnergy] = {}
    busy: dict[int, Fraction] = {d: Fraction(0) for d in range(len(devices))}
    busy_energy: dict[int, Fraction] = {d: Fraction(0) for d in range(len(devices))}
    spans: dict[int, tuple[Fraction, Fraction]] = {}

    for ev in trace:
        if ev.kind != "execute":
            continue
        if not 0 <= ev.node < len(devices):
            raise ValidationError(f"trace event references unknown device {ev.node}")
        device = devices[ev.node]
        dur = Fraction(ev.duration)
        energy = device._power_exact(ev.frequency_ghz) * dur
        busy[ev.node] += dur
        busy_energy[ev.node] += energy
        entry = tasks.get(ev.task_id)
        if entry is None:
            entry = TaskEnergy(ev.task_id, ev.task_name or "", Fraction(0), Fraction(0), {})
            tasks[ev.task_id] = entry
        entry.energy_j += energy
        entry.frequency_ghz_per_node[ev.node] = ev.frequency_ghz
        start = Fraction(ev.start)
        lo, hi = spans.get(ev.task_id, (start, start + dur))
        spans[ev.task_id] = (min(lo, start), max(hi, start + dur))

    for tid in sorted(tasks):
        entry = tasks[tid]
        lo, hi = spans[tid]
        entry.duration_s = hi - lo
        entry.frequency_ghz_per_node = dict(sorted(entry.frequency_ghz_per_node.items()))
        report.per_task.append(entry)

    for node, device in enumerate(devices):
        idle = makespan - busy[node]
        energy = busy_energy[node] + Fraction(device.p_static_w) * idle
        report.per_device.append(
            DeviceEnergy(node, energy, busy[node], idle, device.p_static_w)
        )
    return report
