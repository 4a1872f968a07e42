"""Per-run metrics: queuing delay, access latency, pairing and power figures.

The accumulator ingests one RequestOutcome per completed request and
finalizes into a RunReport serializable as JSON (stable key order) or as a
CSV row. Accumulators over disjoint runs can be merged for sweep aggregation.
"""

import json
from dataclasses import dataclass

from .addrmap import ConflictClass
from .device import PairKind
from .scheduler import PowerLedger


class InconsistentTimestamps(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class RequestOutcome:
    request_id: int
    enqueue_cycle: int
    schedule_cycle: int
    complete_cycle: int
    paired: PairKind

    @property
    def queuing_delay(self) -> int:
        return self.schedule_cycle - self.enqueue_cycle

    @property
    def access_latency(self) -> int:
        return self.complete_cycle - self.enqueue_cycle


_CSV_FIELDS = (
    "policy",
    "requests",
    "truncated",
    "total_cycles",
    "wall_time_us",
    "avg_queuing_delay",
    "max_queuing_delay",
    "avg_access_latency",
    "max_access_latency",
    "conflicts_rr",
    "conflicts_rw",
    "conflicts_ww",
    "conflicts_none",
    "pairs_rww",
    "pairs_rwr",
    "singles",
    "avg_power",
    "peak_power",
    "rapl_limit",
)


@dataclass
class RunReport:
    policy: str
    requests: int
    truncated: bool
    total_cycles: int
    wall_time_us: float
    avg_queuing_delay: float
    max_queuing_delay: int
    avg_access_latency: float
    max_access_latency: int
    conflicts_rr: int
    conflicts_rw: int
    conflicts_ww: int
    conflicts_none: int
    pairs_rww: int
    pairs_rwr: int
    singles: int
    avg_power: float
    peak_power: float
    rapl_limit: float
    config: dict

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in _CSV_FIELDS}
        out["config"] = self.config
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @staticmethod
    def csv_header() -> str:
        return ",".join(_CSV_FIELDS)

    def to_csv_row(self) -> str:
        values = []
        for name in _CSV_FIELDS:
            v = getattr(self, name)
            if isinstance(v, bool):
                v = int(v)
            if isinstance(v, float):
                v = f"{v:.9g}"
            values.append(str(v))
        return ",".join(values)


class StatsAccumulator:
    def __init__(self):
        self.requests = 0
        self.sum_queuing = 0
        self.max_queuing = 0
        self.sum_access = 0
        self.max_access = 0
        self.total_cycles = 0
        self.pair_outcomes = {PairKind.RWW_PAIR: 0, PairKind.RWR_PAIR: 0}
        self.singles = 0
        self.conflicts = {cls: 0 for cls in ConflictClass}

    def record(self, outcome: RequestOutcome) -> "StatsAccumulator":
        if not (outcome.enqueue_cycle <= outcome.schedule_cycle
                <= outcome.complete_cycle):
            raise InconsistentTimestamps(
                f"request {outcome.request_id}: enqueue {outcome.enqueue_cycle}, "
                f"schedule {outcome.schedule_cycle}, complete "
                f"{outcome.complete_cycle}"
            )
        self.requests += 1
        self.sum_queuing += outcome.queuing_delay
        self.max_queuing = max(self.max_queuing, outcome.queuing_delay)
        self.sum_access += outcome.access_latency
        self.max_access = max(self.max_access, outcome.access_latency)
        self.total_cycles = max(self.total_cycles, outcome.complete_cycle)
        if outcome.paired is PairKind.NONE:
            self.singles += 1
        else:
            self.pair_outcomes[outcome.paired] += 1
        return self

    def record_conflict(self, cls: ConflictClass) -> None:
        self.conflicts[cls] += 1

    def merge(self, other: "StatsAccumulator") -> "StatsAccumulator":
        """Combine with an accumulator over a disjoint set of requests."""
        self.requests += other.requests
        self.sum_queuing += other.sum_queuing
        self.max_queuing = max(self.max_queuing, other.max_queuing)
        self.sum_access += other.sum_access
        self.max_access = max(self.max_access, other.max_access)
        self.total_cycles = max(self.total_cycles, other.total_cycles)
        for k in self.pair_outcomes:
            self.pair_outcomes[k] += other.pair_outcomes[k]
        self.singles += other.singles
        for k in self.conflicts:
            self.conflicts[k] += other.conflicts[k]
        return self

    def finalize(
        self,
        policy: str,
        ledger: PowerLedger,
        rapl_limit: float,
        clock_mhz: int = 256,
        config: dict | None = None,
        truncated: bool = False,
    ) -> RunReport:
        n = self.requests
        return RunReport(
            policy=policy,
            requests=n,
            truncated=truncated,
            total_cycles=self.total_cycles,
            wall_time_us=self.total_cycles / clock_mhz if clock_mhz else 0.0,
            avg_queuing_delay=self.sum_queuing / n if n else 0.0,
            max_queuing_delay=self.max_queuing,
            avg_access_latency=self.sum_access / n if n else 0.0,
            max_access_latency=self.max_access,
            conflicts_rr=self.conflicts[ConflictClass.RR],
            conflicts_rw=self.conflicts[ConflictClass.RW],
            conflicts_ww=self.conflicts[ConflictClass.WW],
            conflicts_none=self.conflicts[ConflictClass.NONE],
            pairs_rww=self.pair_outcomes[PairKind.RWW_PAIR] // 2,
            pairs_rwr=self.pair_outcomes[PairKind.RWR_PAIR] // 2,
            singles=self.singles,
            avg_power=ledger.p,
            peak_power=ledger.peak,
            rapl_limit=rapl_limit,
            config=dict(config or {}),
        )
