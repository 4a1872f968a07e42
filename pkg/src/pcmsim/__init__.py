"""Cycle-level simulator of a partition-parallel PCM main memory."""

from .addrmap import (
    ConflictClass,
    DecodedAddress,
    MappingScheme,
    conflict_kind,
    decode,
    encode,
)
from .core import AccessKind, Geometry, TimingParams
from .device import (
    BankState,
    Command,
    CommandKind,
    PairKind,
    SwitchConfig,
    command_sequence,
    legal_pairing,
    transistor_config,
    verify_stream,
)
from .engine import run_scripted, run_simulation
from .scheduler import (
    MemoryRequest,
    PowerLedger,
    RwQueue,
    ScheduleDecision,
    SchedulerConfig,
    commit_power,
    estimate_pair_power,
    outstanding_age,
    select_fcfs,
    select_multipartition,
    select_palp,
)
from .stats import RequestOutcome, RunReport, StatsAccumulator
from .trace import SyntheticConfig, TraceRecord, classify_conflicts, generate, parse

__version__ = "0.1.0"
