"""Deterministic event loop driving one simulation run.

Arrivals enter the rwQ in trace order; whenever a bank is free and a queued
request targets it, the configured policy produces a decision, its command
sequence is emitted, the power ledger is charged, and both requests of a
pair complete at the end of the joint transaction. Banks never block each
other. The emitted command stream is kept so a run can self-check through
the replay verifier.
"""

import heapq
from dataclasses import dataclass

from .addrmap import MappingScheme, decode, global_bank
from .core import Geometry, TimingParams
from .device import PairKind, command_sequence, legal_pairing
from .scheduler import (
    MemoryRequest,
    PowerLedger,
    RwQueue,
    SchedulerConfig,
    ScheduleDecision,
    commit_power,
    eligible_requests,
    select,
)
from .stats import RequestOutcome, RunReport, StatsAccumulator
from .trace import conflict_counts


@dataclass(frozen=True, slots=True)
class AuditEntry:
    """Decision-time snapshot used by the property checks."""

    cycle: int
    oldest_id: int
    oldest_age: int
    primary_id: int
    paired_id: int | None
    pair_kind: PairKind
    power_estimate: float | None
    ledger_n: int
    ledger_p: float


@dataclass
class RunResult:
    report: RunReport
    ledger: PowerLedger
    commands: list
    outcomes: list
    decisions: list | None = None
    audit: list | None = None


def build_requests(records, scheme: MappingScheme, g: Geometry):
    requests = []
    for i, r in enumerate(records):
        d = decode(r.address, scheme, g)
        requests.append(
            MemoryRequest(i, r.arrival_cycle, r.kind, d, global_bank(d, g))
        )
    return requests


def _seed_conflict_counts(acc: StatsAccumulator, requests, timing) -> None:
    entries = [(r.arrival_cycle, r.kind, r.bank) for r in requests]
    for cls, n in conflict_counts(entries, timing, None).items():
        acc.conflicts[cls] += n


def run_simulation(
    records,
    geometry: Geometry | None = None,
    timing: TimingParams | None = None,
    scheme: MappingScheme | None = None,
    sched_cfg: SchedulerConfig | None = None,
    p_sa: float = 0.12,
    p_wd: float = 0.24,
    queue_capacity: int | None = None,
    max_cycles: int | None = None,
    collect: bool = False,
    config_echo: dict | None = None,
) -> RunResult:
    g = geometry or Geometry()
    timing = timing or TimingParams()
    scheme = scheme or MappingScheme.for_geometry("DEFAULT_MICRON", g)
    cfg = sched_cfg or SchedulerConfig()
    requests = build_requests(records, scheme, g)

    q = RwQueue(queue_capacity)
    busy: dict[int, int] = {}
    ledger = PowerLedger(p_sa=p_sa, p_wd=p_wd,
                         rwr_cycles=timing.a_rwr_p, rww_cycles=timing.a_rww_p)
    acc = StatsAccumulator()
    _seed_conflict_counts(acc, requests, timing)

    commands: list = []
    outcomes: list = []
    decisions = [] if collect else None
    audit = [] if collect else None

    i = 0
    n = len(requests)
    now = 0
    truncated = False
    free_events: list = []  # min-heap of bank busy_until instants
    while i < n or len(q):
        if max_cycles is not None and now > max_cycles:
            truncated = True
            break
        while i < n and requests[i].arrival_cycle <= now and not q.is_full:
            q.push(requests[i], now)
            i += 1

        while True:
            candidates = eligible_requests(q, busy, now)
            if not candidates:
                break
            decision = select(cfg.policy, q, busy, cfg, ledger, now,
                              candidates=candidates)
            if collect:
                oldest = min(
                    candidates, key=lambda r: (r.enqueue_cycle, r.id)
                )
                audit.append(AuditEntry(
                    cycle=now,
                    oldest_id=oldest.id,
                    oldest_age=now - oldest.enqueue_cycle,
                    primary_id=decision.primary_request.id,
                    paired_id=(decision.paired_request.id
                               if decision.paired_request else None),
                    pair_kind=decision.pair_kind,
                    power_estimate=decision.power_estimate,
                    ledger_n=ledger.n,
                    ledger_p=ledger.p,
                ))
                decisions.append(decision)
            _execute(decision, q, busy, ledger, timing, commands, outcomes, acc)
            heapq.heappush(free_events, busy[decision.primary_request.bank])
            # skipped-over older candidates count one more bypass
            primary = decision.primary_request
            key = (primary.enqueue_cycle, primary.id)
            for r in candidates:
                if r not in decision.requests and (r.enqueue_cycle, r.id) < key:
                    r.bypasses += 1
            while i < n and requests[i].arrival_cycle <= now and not q.is_full:
                q.push(requests[i], now)
                i += 1

        while free_events and free_events[0] <= now:
            heapq.heappop(free_events)
        next_event = free_events[0] if free_events else None
        if i < n and not q.is_full:
            arrival = requests[i].arrival_cycle
            if next_event is None or arrival < next_event:
                next_event = arrival
        if next_event is None:
            break
        now = next_event

    report = acc.finalize(
        cfg.policy, ledger, cfg.rapl_limit,
        clock_mhz=timing.clock_mhz, config=config_echo, truncated=truncated,
    )
    return RunResult(report, ledger, commands, outcomes, decisions, audit)


def _execute(decision, q, busy, ledger, timing, commands, outcomes, acc):
    cmds, total = command_sequence(decision, timing)
    commands.extend(cmds)
    now = decision.decision_cycle
    busy[decision.primary_request.bank] = now + total
    commit_power(ledger, decision, total)
    for r in decision.requests:
        q.remove(r)
        outcome = RequestOutcome(r.id, r.enqueue_cycle, now, now + total,
                                 decision.pair_kind)
        outcomes.append(outcome)
        acc.record(outcome)


def run_scripted(
    records,
    script,
    geometry: Geometry | None = None,
    timing: TimingParams | None = None,
    scheme: MappingScheme | None = None,
    p_sa: float = 0.12,
    p_wd: float = 0.24,
    config_echo: dict | None = None,
) -> RunResult:
    """Replay a fixed decision sequence instead of running a policy.

    `script` lists (primary_id, paired_id_or_None) in issue order; each
    decision waits for its bank to free and its requests to arrive. Used to
    reproduce reference schedules exactly.
    """
    g = geometry or Geometry()
    timing = timing or TimingParams()
    scheme = scheme or MappingScheme.for_geometry("DEFAULT_MICRON", g)
    requests = build_requests(records, scheme, g)
    by_id = {r.id: r for r in requests}
    for r in requests:
        r.enqueue_cycle = r.arrival_cycle

    q = RwQueue()
    for r in requests:
        q.entries.append(r)
    busy: dict[int, int] = {}
    ledger = PowerLedger(p_sa=p_sa, p_wd=p_wd,
                         rwr_cycles=timing.a_rwr_p, rww_cycles=timing.a_rww_p)
    acc = StatsAccumulator()
    _seed_conflict_counts(acc, requests, timing)
    commands: list = []
    outcomes: list = []
    decisions = []

    for primary_id, paired_id in script:
        primary = by_id[primary_id]
        paired = by_id[paired_id] if paired_id is not None else None
        now = max(primary.arrival_cycle, busy.get(primary.bank, 0))
        pair_kind = PairKind.NONE
        if paired is not None:
            now = max(now, paired.arrival_cycle)
            pair_kind = legal_pairing(primary, paired)
        decision = ScheduleDecision(primary, paired, pair_kind, now)
        decisions.append(decision)
        _execute(decision, q, busy, ledger, timing, commands, outcomes, acc)

    report = acc.finalize(
        "SCRIPTED", ledger, rapl_limit=0.0,
        clock_mhz=timing.clock_mhz, config=config_echo,
        truncated=bool(len(q)),
    )
    return RunResult(report, ledger, commands, outcomes, decisions, None)
