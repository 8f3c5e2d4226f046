"""linlab: a laboratory for message-passing linearizability experiments.

Simulate asynchronous message-passing protocols step by step, check the
operation histories they produce against linearizability, strong
linearizability and write strong linearizability, classify
configurations by the decision values still reachable from them, build
adversarial schedules that stay undecided forever, and audit progress
conditions under crashes.
"""

from .checkers import (
    Counterexample,
    ExecutionTree,
    SizeLimitError,
    Strategy,
    brute_force_strategy_oracle,
    is_linearizable,
    linearizations,
    make_triple_tree,
    strong_linearization_exists,
    write_strong_linearization_exists,
)
from .model import (
    Configuration,
    Effect,
    Message,
    NotApplicable,
    PreconditionViolated,
    SchedulingMode,
    Step,
    apply_history,
    apply_step,
    applicable,
    audit_buffer_conservation,
    commute_check,
    enabled_steps,
    events_equal_mod_interleaving,
    initial_configuration,
    trace_records,
)
from .progress import (
    ClientServerSplit,
    ProgressVerdict,
    ProgressWitness,
    check_1rlf,
    check_nonblocking,
    default_split,
    implication_audit,
)
from .protocols import (
    PROTOCOLS,
    AbdRegisterProtocol,
    BuiltProtocol,
    NaiveTosProtocol,
    RegisterToSAdapter,
    ScriptedSystem,
    TrivialAckProtocol,
    build_protocol,
    make_abd_register,
    make_naive_tos,
    make_tos_from_register,
    make_trivial_ack_object,
)
from .seqspec import (
    DONE,
    REG_SPEC,
    TOS_SPEC,
    IllegalOp,
    MalformedHistory,
    Op,
    OperationEvent,
    OpHistory,
    RegisterSpec,
    SequentialSpec,
    ToSSpec,
    completions,
    op_history_from_json,
)
from .valence import (
    AuditTriple,
    BivalentSuccessor,
    FairRun,
    HbiReport,
    Scenario,
    SuccessorNotFound,
    TIMEOUT,
    Valence,
    ValenceTag,
    bivalent_successor,
    build_hbi,
    build_scenario,
    classify_valence,
    completed_implies_univalent_audit,
    explore_history_tree,
    fair_completion,
    op_history_of,
    staged_probe,
)

__version__ = "0.1.0"

__all__ = [
    "AbdRegisterProtocol",
    "AuditTriple",
    "BivalentSuccessor",
    "BuiltProtocol",
    "ClientServerSplit",
    "Configuration",
    "Counterexample",
    "DONE",
    "Effect",
    "ExecutionTree",
    "FairRun",
    "HbiReport",
    "IllegalOp",
    "MalformedHistory",
    "Message",
    "NaiveTosProtocol",
    "NotApplicable",
    "Op",
    "OpHistory",
    "OperationEvent",
    "PROTOCOLS",
    "PreconditionViolated",
    "ProgressVerdict",
    "ProgressWitness",
    "REG_SPEC",
    "RegisterSpec",
    "RegisterToSAdapter",
    "Scenario",
    "SchedulingMode",
    "ScriptedSystem",
    "SequentialSpec",
    "SizeLimitError",
    "Step",
    "Strategy",
    "SuccessorNotFound",
    "TIMEOUT",
    "TOS_SPEC",
    "ToSSpec",
    "TrivialAckProtocol",
    "Valence",
    "ValenceTag",
    "applicable",
    "apply_history",
    "apply_step",
    "audit_buffer_conservation",
    "bivalent_successor",
    "brute_force_strategy_oracle",
    "build_hbi",
    "build_protocol",
    "build_scenario",
    "check_1rlf",
    "check_nonblocking",
    "classify_valence",
    "commute_check",
    "completed_implies_univalent_audit",
    "completions",
    "default_split",
    "enabled_steps",
    "events_equal_mod_interleaving",
    "explore_history_tree",
    "fair_completion",
    "implication_audit",
    "initial_configuration",
    "is_linearizable",
    "linearizations",
    "make_abd_register",
    "make_naive_tos",
    "make_tos_from_register",
    "make_trivial_ack_object",
    "make_triple_tree",
    "op_history_from_json",
    "op_history_of",
    "staged_probe",
    "strong_linearization_exists",
    "trace_records",
    "write_strong_linearization_exists",
]
