"""Simulator for a distributed task-queue runtime with region-based data
distribution and per-kernel frequency selection."""

from .energy import (
    DeviceModel,
    EnergyReport,
    EnergyTarget,
    account_energy,
    resolve_target,
    select_frequency,
)
from .errors import (
    ClusterqError,
    DimensionError,
    EvalError,
    KernelNameError,
    KernelSyntaxError,
    MapperViolationError,
    ScenarioError,
    UninitializedReadError,
    ValidationError,
)
from .graph import TaskGraph
from .kernel import eval_kernel, format_kernel, parse_kernel
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
from .scenario import (
    Scenario,
    build_graph,
    check_expectations,
    load_scenario,
    run_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate_against_serial,
)
from .scheduler import (
    AwaitPushCommand,
    ExecuteCommand,
    Plan,
    PushCommand,
    RegionMapTable,
    export_command_graph,
    generate_commands,
    split_task,
)
from .simulator import LinkModel, RunResult, TraceEvent, run, trace_to_chrome

__version__ = "0.1.0"
