"""Scenario files: JSON descriptions of a machine and a task queue.

A scenario lists buffer declarations, an ordered list of tasks with kernel
bodies as text, and optionally the machine shape (node count, device models,
link) plus a queue-wide frequency target and expected output values for
self-checking runs. Parsing is strict: unknown keys, bad dimensions and
kernel grammar errors are reported with the JSON path of the offending field.
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .energy import DeviceModel, EnergyTarget, account_energy
from .errors import ClusterqError, ScenarioError
from .graph import TaskGraph
from .kernel import format_kernel, parse_kernel
from .model import (
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
from .region import Box, Region
from .scheduler import Plan, generate_commands
from .simulator import LinkModel, RunResult, run


@dataclass
class Scenario:
    buffers: list[Buffer] = field(default_factory=list)
    tasks: list[Task] = field(default_factory=list)
    nodes: Optional[int] = None
    devices: Optional[list[DeviceModel]] = None
    link: Optional[LinkModel] = None
    queue_target: Optional[EnergyTarget] = None
    expectations: list[tuple[str, list]] = field(default_factory=list)


def _type_name(value):
    return type(value).__name__


def _req(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScenarioError(f"{path}: missing required field '{key}'")
    return obj[key]


def _check_keys(obj: dict, allowed: set, path: str):
    for key in obj:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}: unknown field")


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{path}: expected an integer, got {_type_name(value)}")
    return value


def _as_number(value, path: str):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}: expected a number, got {_type_name(value)}")
    return value


def _as_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise ScenarioError(f"{path}: expected a string, got {_type_name(value)}")
    return value


def _as_list(value, path: str) -> list:
    if not isinstance(value, list):
        raise ScenarioError(f"{path}: expected a list, got {_type_name(value)}")
    return value


def _as_dict(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(f"{path}: expected an object, got {_type_name(value)}")
    return value


def _shape_box(value, path: str) -> Box:
    sizes = [_as_int(v, f"{path}[{i}]") for i, v in enumerate(_as_list(value, path))]
    if not 1 <= len(sizes) <= 3:
        raise ScenarioError(f"{path}: expected 1 to 3 sizes, got {len(sizes)}")
    if any(s < 1 for s in sizes):
        raise ScenarioError(f"{path}: sizes must be positive, got {sizes}")
    return Box.from_shape(tuple(sizes))


def _init_from_json(value, path: str) -> BufferInit:
    if value is None:
        return BufferInit.zeros()
    if isinstance(value, str):
        kinds = {
            "zeros": BufferInit.zeros,
            "iota": BufferInit.iota,
            "uninitialized": BufferInit.uninitialized,
        }
        if value not in kinds:
            raise ScenarioError(
                f"{path}: unknown init shorthand '{value}' "
                f"(expected one of {sorted(kinds)})"
            )
        return kinds[value]()
    obj = _as_dict(value, path)
    kind = _as_str(_req(obj, "kind", path), f"{path}.kind")
    if kind == "zeros":
        _check_keys(obj, {"kind"}, path)
        return BufferInit.zeros()
    if kind == "iota":
        _check_keys(obj, {"kind"}, path)
        return BufferInit.iota()
    if kind == "uninitialized":
        _check_keys(obj, {"kind"}, path)
        return BufferInit.uninitialized()
    if kind == "constant":
        _check_keys(obj, {"kind", "value"}, path)
        return BufferInit.constant(_as_number(_req(obj, "value", path), f"{path}.value"))
    if kind == "values":
        _check_keys(obj, {"kind", "values"}, path)
        values = _as_list(_req(obj, "values", path), f"{path}.values")
        vals = [_as_number(v, f"{path}.values[{i}]") for i, v in enumerate(values)]
        return BufferInit.explicit(vals)
    raise ScenarioError(f"{path}.kind: unknown init kind '{kind}'")


def _buffer_from_json(obj, path: str) -> Buffer:
    obj = _as_dict(obj, path)
    _check_keys(obj, {"name", "extent", "element_kind", "init"}, path)
    name = _as_str(_req(obj, "name", path), f"{path}.name")
    extent = _shape_box(_req(obj, "extent", path), f"{path}.extent")
    kind = obj.get("element_kind", "float64")
    kind = _as_str(kind, f"{path}.element_kind")
    init = _init_from_json(obj.get("init"), f"{path}.init")
    try:
        return Buffer(name=name, extent=extent, element_kind=kind, init=init)
    except ClusterqError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _region_from_json(value, path: str) -> Region:
    boxes = []
    for i, item in enumerate(_as_list(value, path)):
        bpath = f"{path}[{i}]"
        obj = _as_dict(item, bpath)
        _check_keys(obj, {"min", "max"}, bpath)
        mins = [_as_int(v, f"{bpath}.min[{j}]")
                for j, v in enumerate(_as_list(_req(obj, "min", bpath), f"{bpath}.min"))]
        maxs = [_as_int(v, f"{bpath}.max[{j}]")
                for j, v in enumerate(_as_list(_req(obj, "max", bpath), f"{bpath}.max"))]
        try:
            boxes.append(Box(tuple(mins), tuple(maxs)))
        except ClusterqError as exc:
            raise ScenarioError(f"{bpath}: {exc}") from exc
    if not boxes:
        raise ScenarioError(f"{path}: fixed region needs at least one box")
    try:
        return Region(boxes[0].dims, boxes)
    except ClusterqError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _mapper_from_json(value, path: str):
    if value is None:
        return OneToOne()
    if isinstance(value, str):
        names = {"one_to_one": OneToOne, "all": All}
        if value not in names:
            raise ScenarioError(
                f"{path}: unknown mapper '{value}' (shorthand accepts "
                f"'one_to_one' or 'all'; others need an object with 'kind')"
            )
        return names[value]()
    obj = _as_dict(value, path)
    kind = _as_str(_req(obj, "kind", path), f"{path}.kind")
    if kind == "one_to_one":
        _check_keys(obj, {"kind"}, path)
        return OneToOne()
    if kind == "all":
        _check_keys(obj, {"kind"}, path)
        return All()
    if kind == "neighborhood":
        _check_keys(obj, {"kind", "radius", "radii"}, path)
        if "radii" in obj:
            radii = [_as_int(v, f"{path}.radii[{i}]")
                     for i, v in enumerate(_as_list(obj["radii"], f"{path}.radii"))]
        elif "radius" in obj:
            radii = [_as_int(obj["radius"], f"{path}.radius")]
        else:
            raise ScenarioError(f"{path}: neighborhood needs 'radius' or 'radii'")
        try:
            return Neighborhood(tuple(radii))
        except ClusterqError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    if kind == "fixed":
        _check_keys(obj, {"kind", "region"}, path)
        return Fixed(_region_from_json(_req(obj, "region", path), f"{path}.region"))
    if kind == "slice":
        _check_keys(obj, {"kind", "dim"}, path)
        dim = _as_int(_req(obj, "dim", path), f"{path}.dim")
        try:
            return Slice(dim)
        except ClusterqError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    raise ScenarioError(f"{path}.kind: unknown mapper kind '{kind}'")


def _accessor_from_json(obj, mode: AccessMode, path: str) -> Accessor:
    if isinstance(obj, str):
        return Accessor(buffer=obj, mode=mode)
    obj = _as_dict(obj, path)
    _check_keys(obj, {"buffer", "name", "mapper"}, path)
    buffer = _as_str(_req(obj, "buffer", path), f"{path}.buffer")
    name = obj.get("name")
    if name is not None:
        name = _as_str(name, f"{path}.name")
    mapper = _mapper_from_json(obj.get("mapper"), f"{path}.mapper")
    return Accessor(buffer=buffer, mode=mode, mapper=mapper, name=name or buffer)


def _task_from_json(obj, path: str, buffers_by_name: dict) -> Task:
    obj = _as_dict(obj, path)
    _check_keys(
        obj, {"name", "range", "reads", "writes", "body", "params", "beta", "target"}, path
    )
    name = _as_str(_req(obj, "name", path), f"{path}.name")
    rng = _shape_box(_req(obj, "range", path), f"{path}.range")
    reads = [
        _accessor_from_json(a, AccessMode.READ, f"{path}.reads[{i}]")
        for i, a in enumerate(_as_list(obj.get("reads", []), f"{path}.reads"))
    ]
    writes = [
        _accessor_from_json(a, AccessMode.WRITE, f"{path}.writes[{i}]")
        for i, a in enumerate(_as_list(_req(obj, "writes", path), f"{path}.writes"))
    ]
    params = {}
    for pname, pval in _as_dict(obj.get("params", {}), f"{path}.params").items():
        params[pname] = _as_number(pval, f"{path}.params.{pname}")
    beta = _as_number(obj.get("beta", 0.0), f"{path}.beta")
    target = None
    if obj.get("target") is not None:
        tname = _as_str(obj["target"], f"{path}.target")
        try:
            target = EnergyTarget(tname)
        except ValueError:
            raise ScenarioError(
                f"{path}.target: unknown target '{tname}' "
                f"(expected one of {[t.value for t in EnergyTarget]})"
            ) from None

    body_json = _req(obj, "body", path)
    if isinstance(body_json, str):
        if len(writes) != 1:
            raise ScenarioError(
                f"{path}.body: a bare expression string needs exactly one "
                f"write accessor, task has {len(writes)}"
            )
        body_json = {writes[0].name: body_json}
    body_json = _as_dict(body_json, f"{path}.body")

    read_arity = {}
    for acc in reads:
        buf = buffers_by_name.get(acc.buffer)
        if buf is None:
            raise ScenarioError(f"{path}.reads: unknown buffer '{acc.buffer}'")
        read_arity[acc.name] = buf.dims
    for acc in writes:
        if acc.buffer not in buffers_by_name:
            raise ScenarioError(f"{path}.writes: unknown buffer '{acc.buffer}'")

    body = {}
    for wname, text in body_json.items():
        text = _as_str(text, f"{path}.body.{wname}")
        try:
            body[wname] = parse_kernel(text, read_arity, set(params), rng.dims)
        except ClusterqError as exc:
            raise ScenarioError(f"{path}.body.{wname}: {exc}") from exc

    return Task(
        name=name,
        global_range=rng,
        accessors=reads + writes,
        body=body,
        params=params,
        beta=beta,
        target=target,
    )


def _device_from_json(obj, path: str) -> DeviceModel:
    obj = _as_dict(obj, path)
    allowed = {
        "levels_ghz", "f_ref_ghz", "p_static_w", "p_dyn_ref_w",
        "alpha_exp", "throughput_ref",
    }
    _check_keys(obj, allowed, path)
    kwargs = {}
    if "levels_ghz" in obj:
        levels = _as_list(obj["levels_ghz"], f"{path}.levels_ghz")
        kwargs["levels_ghz"] = tuple(
            _as_number(v, f"{path}.levels_ghz[{i}]") for i, v in enumerate(levels)
        )
    for key in ("f_ref_ghz", "p_static_w", "p_dyn_ref_w", "alpha_exp", "throughput_ref"):
        if key in obj:
            kwargs[key] = _as_number(obj[key], f"{path}.{key}")
    try:
        return DeviceModel(**kwargs)
    except ClusterqError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def scenario_from_dict(data: dict, path: str = "scenario") -> Scenario:
    data = _as_dict(data, path)
    allowed = {
        "nodes", "device", "devices", "link", "target", "queue_target",
        "buffers", "tasks", "expectations",
    }
    _check_keys(data, allowed, path)

    nodes = None
    if data.get("nodes") is not None:
        nodes = _as_int(data["nodes"], f"{path}.nodes")
        if nodes < 1:
            raise ScenarioError(f"{path}.nodes: must be at least 1, got {nodes}")

    devices = None
    if "device" in data and "devices" in data:
        raise ScenarioError(f"{path}: give either 'device' or 'devices', not both")
    if data.get("device") is not None:
        devices = [_device_from_json(data["device"], f"{path}.device")]
    elif data.get("devices") is not None:
        items = _as_list(data["devices"], f"{path}.devices")
        if not items:
            raise ScenarioError(f"{path}.devices: must not be empty")
        devices = [
            _device_from_json(d, f"{path}.devices[{i}]") for i, d in enumerate(items)
        ]

    link = None
    if data.get("link") is not None:
        lobj = _as_dict(data["link"], f"{path}.link")
        _check_keys(lobj, {"latency_s", "bandwidth_bytes_per_s"}, f"{path}.link")
        try:
            link = LinkModel(
                latency_s=_as_number(lobj.get("latency_s", 1e-6), f"{path}.link.latency_s"),
                bandwidth_bytes_per_s=_as_number(
                    lobj.get("bandwidth_bytes_per_s", 1e9),
                    f"{path}.link.bandwidth_bytes_per_s",
                ),
            )
        except ClusterqError as exc:
            raise ScenarioError(f"{path}.link: {exc}") from exc

    if "target" in data and "queue_target" in data:
        raise ScenarioError(f"{path}: give either 'target' or 'queue_target', not both")
    target_json = data.get("target", data.get("queue_target"))
    queue_target = None
    if target_json is not None:
        tname = _as_str(target_json, f"{path}.target")
        try:
            queue_target = EnergyTarget(tname)
        except ValueError:
            raise ScenarioError(
                f"{path}.target: unknown target '{tname}' "
                f"(expected one of {[t.value for t in EnergyTarget]})"
            ) from None

    buffers = [
        _buffer_from_json(b, f"{path}.buffers[{i}]")
        for i, b in enumerate(_as_list(data.get("buffers", []), f"{path}.buffers"))
    ]
    by_name = {}
    for i, buf in enumerate(buffers):
        if buf.name in by_name:
            raise ScenarioError(f"{path}.buffers[{i}]: duplicate buffer name '{buf.name}'")
        by_name[buf.name] = buf

    tasks = [
        _task_from_json(t, f"{path}.tasks[{i}]", by_name)
        for i, t in enumerate(_as_list(data.get("tasks", []), f"{path}.tasks"))
    ]

    expectations = []
    for i, item in enumerate(_as_list(data.get("expectations", []), f"{path}.expectations")):
        epath = f"{path}.expectations[{i}]"
        obj = _as_dict(item, epath)
        _check_keys(obj, {"buffer", "values"}, epath)
        bname = _as_str(_req(obj, "buffer", epath), f"{epath}.buffer")
        if bname not in by_name:
            raise ScenarioError(f"{epath}.buffer: unknown buffer '{bname}'")
        values = [
            _as_number(v, f"{epath}.values[{j}]")
            for j, v in enumerate(_as_list(_req(obj, "values", epath), f"{epath}.values"))
        ]
        if len(values) != by_name[bname].extent.volume():
            raise ScenarioError(
                f"{epath}.values: expected {by_name[bname].extent.volume()} values "
                f"for buffer '{bname}', got {len(values)}"
            )
        expectations.append((bname, values))

    return Scenario(
        buffers=buffers,
        tasks=tasks,
        nodes=nodes,
        devices=devices,
        link=link,
        queue_target=queue_target,
        expectations=expectations,
    )


def _init_to_json(init: BufferInit):
    if init.kind == "zeros":
        return "zeros"
    if init.kind == "iota":
        return "iota"
    if init.kind == "uninitialized":
        return "uninitialized"
    if init.kind == "constant":
        return {"kind": "constant", "value": init.value}
    return {"kind": "values", "values": list(init.values)}


def _mapper_to_json(mapper):
    if isinstance(mapper, OneToOne):
        return "one_to_one"
    if isinstance(mapper, All):
        return "all"
    if isinstance(mapper, Neighborhood):
        return {"kind": "neighborhood", "radii": list(mapper.radii)}
    if isinstance(mapper, Slice):
        return {"kind": "slice", "dim": mapper.axis}
    if isinstance(mapper, Fixed):
        return {
            "kind": "fixed",
            "region": [
                {"min": list(b.mins), "max": list(b.maxs)} for b in mapper.region
            ],
        }
    raise ScenarioError(f"cannot serialize mapper {type(mapper).__name__}")


def _accessor_to_json(acc: Accessor):
    if acc.name == acc.buffer and isinstance(acc.mapper, OneToOne):
        return acc.buffer
    out = {"buffer": acc.buffer}
    if acc.name != acc.buffer:
        out["name"] = acc.name
    if not isinstance(acc.mapper, OneToOne):
        out["mapper"] = _mapper_to_json(acc.mapper)
    return out


def scenario_to_dict(scenario: Scenario) -> dict:
    data = {}
    if scenario.nodes is not None:
        data["nodes"] = scenario.nodes
    if scenario.devices is not None:
        data["devices"] = [
            {
                "levels_ghz": list(d.levels_ghz),
                "f_ref_ghz": d.f_ref_ghz,
                "p_static_w": d.p_static_w,
                "p_dyn_ref_w": d.p_dyn_ref_w,
                "alpha_exp": d.alpha_exp,
                "throughput_ref": d.throughput_ref,
            }
            for d in scenario.devices
        ]
    if scenario.link is not None:
        data["link"] = {
            "latency_s": scenario.link.latency_s,
            "bandwidth_bytes_per_s": scenario.link.bandwidth_bytes_per_s,
        }
    if scenario.queue_target is not None:
        data["target"] = scenario.queue_target.value
    data["buffers"] = [
        {
            "name": b.name,
            "extent": list(b.extent.shape),
            "element_kind": b.element_kind,
            "init": _init_to_json(b.init),
        }
        for b in scenario.buffers
    ]
    data["tasks"] = []
    for task in scenario.tasks:
        t = {
            "name": task.name,
            "range": list(task.global_range.shape),
            "reads": [_accessor_to_json(a) for a in task.reads()],
            "writes": [_accessor_to_json(a) for a in task.writes()],
            "body": {name: format_kernel(expr) for name, expr in task.body.items()},
        }
        if task.params:
            t["params"] = dict(task.params)
        if task.beta:
            t["beta"] = task.beta
        if task.target is not None:
            t["target"] = task.target.value
        data["tasks"].append(t)
    if scenario.expectations:
        data["expectations"] = [
            {"buffer": name, "values": list(values)}
            for name, values in scenario.expectations
        ]
    return data


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from exc
    return scenario_from_dict(data, path=str(path))


def save_scenario(scenario: Scenario, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2)
        fh.write("\n")


def bundled_scenario_path(name: str):
    """Path to a scenario shipped with the package, or None."""
    if not name.endswith(".json"):
        name = name + ".json"
    candidate = resources.files("clusterq") / "scenarios" / name
    return candidate if candidate.is_file() else None


@dataclass
class RunBundle:
    scenario: Scenario
    plan: Plan
    result: RunResult
    energy: object
    nodes: int
    target: EnergyTarget


def build_graph(scenario: Scenario) -> TaskGraph:
    graph = TaskGraph({b.name: b for b in scenario.buffers})
    for task in scenario.tasks:
        graph.submit(task)
    return graph


def run_scenario(
    scenario: Scenario,
    nodes: Optional[int] = None,
    target: Optional[EnergyTarget] = None,
) -> RunBundle:
    """Flag > scenario field > default (nodes=1, target=MAX_PERF)."""
    nodes_eff = nodes if nodes is not None else (scenario.nodes or 1)
    target_eff = target if target is not None else (
        scenario.queue_target or EnergyTarget.MAX_PERF)
    graph = build_graph(scenario)
    plan = generate_commands(
        graph, nodes_eff, devices=scenario.devices, queue_target=target_eff
    )
    result = run(plan, link=scenario.link)
    energy = account_energy(result.trace, plan.devices, result.makespan)
    return RunBundle(
        scenario=scenario, plan=plan, result=result, energy=energy,
        nodes=nodes_eff, target=target_eff,
    )


def _bits(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == np.float64:
        return arr.view(np.uint64)
    return arr


def check_expectations(scenario: Scenario, buffers: dict) -> list[str]:
    """Compare gathered buffers against declared expected values, bit-exact."""
    failures = []
    by_name = {b.name: b for b in scenario.buffers}
    for name, values in scenario.expectations:
        buf = by_name[name]
        expected = np.array(values, dtype=buf.dtype).reshape(buf.extent.shape)
        got = buffers[name]
        if not np.array_equal(_bits(expected), _bits(got)):
            bad = np.nonzero(_bits(expected) != _bits(got))
            first = tuple(int(a[0]) for a in bad)
            failures.append(
                f"buffer '{name}' differs from expectation at index {first}: "
                f"expected {expected[first]}, got {got[first]}"
            )
    return failures


def validate_against_serial(
    scenario: Scenario, nodes: int, target: Optional[EnergyTarget] = None
) -> list[str]:
    """Run distributed and single-node, compare every buffer bit for bit."""
    serial = run_scenario(scenario, nodes=1, target=target)
    dist = run_scenario(scenario, nodes=nodes, target=target)
    failures = []
    for buf in scenario.buffers:
        a = serial.result.buffers[buf.name]
        b = dist.result.buffers[buf.name]
        if not np.array_equal(_bits(a), _bits(b)):
            bad = np.nonzero(_bits(a) != _bits(b))
            first = tuple(int(x[0]) for x in bad)
            failures.append(
                f"buffer '{buf.name}' diverges at index {first} with {nodes} nodes: "
                f"serial {a[first]}, distributed {b[first]}"
            )
    return failures
