"""Dataflow-on-multiprocessor toolchain: model, distribute, schedule,
generate code, and simulate control loops against the schedule's timing."""

from .model import (
    AlgorithmGraph,
    ArchitectureGraph,
    Block,
    BlockKind,
    BUILTIN_DTYPES,
    DataType,
    Dependency,
    DepStrength,
    Direction,
    DomainError,
    Finding,
    FlattenError,
    Medium,
    MediumKind,
    Operator,
    Port,
    SELF_NAME,
    ToolError,
    flatten,
    hyperperiod,
    time_convert,
    validate_algorithm,
    validate_architecture,
)
from .parser import (
    ParseError,
    SourceSpan,
    canonicalize,
    parse_algorithm,
    parse_architecture,
    print_model,
)
from .schedule import (
    AdequationError,
    EntryKind,
    Payload,
    ScheduleEntry,
    ScheduleTable,
    SynchroEdge,
    adequate,
    candidate_cost,
    dump_table,
    insert_waits,
    load_table,
    verify_schedule,
)
from .render import RenderOptions, render_svg, render_text
from .macrogen import (
    CommSequencer,
    MacroError,
    MacroProgram,
    MacroStatement,
    SeqOp,
    TargetDefinition,
    dump_program,
    emit_macros,
    expand,
    load_program,
    merge_programs,
    parse_target,
    sequentialize_comm,
)
from .control import (
    ControlError,
    PidParams,
    PidState,
    PlantParams,
    PlantState,
    chr_tune,
    fan_map,
    pid_step,
    plant_step,
    step_response,
)
from .hybrid import (
    Diagram,
    DiagramBuilder,
    HybridAutomaton,
    HybridError,
    HybridTimeBasis,
    OdeEquation,
    SimBlock,
    SimTrace,
    check_synchronism,
    classify_time_basis,
    concat_bases,
    dump_trace,
    infer_activations,
    ode_to_first_order,
    parse_diagram,
    scale_basis,
    simulate,
)
from .execsim import (
    DurationModel,
    ExecError,
    ExecEvent,
    ExecTimeline,
    PeriodRow,
    dump_timeline,
    load_timeline,
    period_report,
    simulate_executive,
)

__version__ = "1.0.0"
