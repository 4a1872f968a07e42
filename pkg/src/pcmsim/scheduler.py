"""Request queue, power ledger, and the three scheduling policies.

BASELINE_FCFS serves the oldest schedulable request, always alone.
MULTIPARTITION additionally joins the oldest opposite-kind request from a
different partition of the same bank (read-write pairs only, no power check).
PALP prefers requests that can be paired, joins read-write over read-read
pairs, and vetoes any pairing whose running-average power estimate would
exceed the RAPL limit. A starvation threshold bounds how long the oldest
request may be bypassed in favor of pairable ones.
"""

from dataclasses import dataclass

from .addrmap import DecodedAddress
from .core import AccessKind
from .device import PairKind, legal_pairing


class EmptyQueue(LookupError):
    pass


POLICIES = ("BASELINE_FCFS", "MULTIPARTITION", "PALP")


@dataclass(slots=True)
class MemoryRequest:
    id: int
    arrival_cycle: int
    kind: AccessKind
    address: DecodedAddress
    bank: int  # flat bank index
    enqueue_cycle: int = -1
    bypasses: int = 0  # decisions that skipped over this request

    @property
    def partition(self) -> int:
        return self.address.partition


@dataclass
class SchedulerConfig:
    policy: str = "PALP"
    th_b: int = 8  # starvation threshold
    th_b_unit: str = "cycles"  # "cycles" | "bypass_count"
    rapl_limit: float = 0.3  # pJ/access
    multipartition_starvation_guard: bool = True
    # Ties are always broken oldest first, then lowest request id.

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.th_b < 0:
            raise ValueError("th_b must be >= 0")
        if self.th_b_unit not in ("cycles", "bypass_count"):
            raise ValueError(f"unknown th_b_unit {self.th_b_unit!r}")
        if self.rapl_limit <= 0:
            raise ValueError("rapl_limit must be > 0")


class RwQueue:
    """FIFO read-write queue; removal only through a schedule decision."""

    def __init__(self, capacity: int | None = None):
        self.entries: list[MemoryRequest] = []
        self.capacity = capacity

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def is_full(self) -> bool:
        return self.capacity is not None and len(self.entries) >= self.capacity

    def push(self, request: MemoryRequest, now: int) -> None:
        if self.is_full:
            raise OverflowError("rwQ full")
        request.enqueue_cycle = max(now, request.arrival_cycle)
        self.entries.append(request)

    def remove(self, request: MemoryRequest) -> None:
        self.entries.remove(request)


@dataclass
class ScheduleDecision:
    primary_request: MemoryRequest
    paired_request: MemoryRequest | None
    pair_kind: PairKind
    decision_cycle: int
    power_estimate: float | None = None

    def __post_init__(self):
        if (self.paired_request is not None) != (self.pair_kind is not PairKind.NONE):
            raise ValueError("paired_request present iff pair_kind != NONE")

    @property
    def requests(self):
        if self.paired_request is None:
            return (self.primary_request,)
        return (self.primary_request, self.paired_request)


@dataclass
class PowerLedger:
    """Running-average power state of the scheduler (pJ/access units).

    p_sa / p_wd are the per-cycle sense-amplifier and write-driver energy
    parameters; a pair charges both for the pair's full duration, a single
    access charges only the circuit it uses.
    """

    p_sa: float = 0.12
    p_wd: float = 0.24
    n: int = 0  # memory cycles accounted so far
    p: float = 0.0  # running average power
    peak: float = 0.0
    rwr_cycles: int = 30
    rww_cycles: int = 48


def outstanding_age(request: MemoryRequest, now: int) -> int:
    return now - request.enqueue_cycle


def _age_measure(request: MemoryRequest, now: int, unit: str) -> int:
    if unit == "bypass_count":
        return request.bypasses
    return outstanding_age(request, now)


def estimate_pair_power(kind: PairKind, ledger: PowerLedger) -> float:
    """Running-average power if a pair of this kind were scheduled now.

    Pure estimate; the ledger is not modified.
    """
    if kind is PairKind.NONE:
        raise ValueError("cannot estimate power of a non-pair")
    d = ledger.rwr_cycles if kind is PairKind.RWR_PAIR else ledger.rww_cycles
    return (ledger.n * ledger.p + d * ledger.p_sa + d * ledger.p_wd) / (ledger.n + d)


def commit_power(
    ledger: PowerLedger, decision: ScheduleDecision, service_cycles: int
) -> PowerLedger:
    """Fold a scheduled decision into the running average."""
    if decision.pair_kind is not PairKind.NONE:
        d = (ledger.rwr_cycles if decision.pair_kind is PairKind.RWR_PAIR
             else ledger.rww_cycles)
        ledger.p = estimate_pair_power(decision.pair_kind, ledger)
        ledger.n += d
    else:
        e = (ledger.p_sa if decision.primary_request.kind is AccessKind.READ
             else ledger.p_wd)
        d = service_cycles
        ledger.p = (ledger.n * ledger.p + d * e) / (ledger.n + d)
        ledger.n += d
    ledger.peak = max(ledger.peak, ledger.p)
    return ledger


def eligible_requests(q: RwQueue, busy_until, now: int):
    """Requests that have arrived and whose bank is free at `now`."""
    return [
        r for r in q
        if r.arrival_cycle <= now and busy_until.get(r.bank, 0) <= now
    ]


def _oldest(requests, now: int, unit: str = "cycles"):
    return min(requests, key=lambda r: (-_age_measure(r, now, unit), r.id))


def _oldest_companion(q, primary, now, kinds):
    """Oldest arrived request pairable with `primary` of an allowed kind."""
    best = None
    for r in q:
        if r is primary or r.arrival_cycle > now or r.kind not in kinds:
            continue
        if legal_pairing(primary, r) is PairKind.NONE:
            continue
        if best is None or (r.enqueue_cycle, r.id) < (best.enqueue_cycle, best.id):
            best = r
    return best


def _conflict_redirect(q, candidates, now, unit):
    """Oldest candidate that shares its bank with another outstanding request."""
    counts: dict[int, int] = {}
    for r in q:
        if r.arrival_cycle <= now:
            counts[r.bank] = counts.get(r.bank, 0) + 1
    conflicted = [r for r in candidates if counts.get(r.bank, 0) >= 2]
    if not conflicted:
        return None
    return _oldest(conflicted, now, unit)


def select_fcfs(q: RwQueue, busy_until, now: int, candidates=None):
    """Oldest schedulable request, never paired."""
    if not len(q):
        raise EmptyQueue("rwQ is empty")
    if candidates is None:
        candidates = eligible_requests(q, busy_until, now)
    if not candidates:
        return None
    return ScheduleDecision(_oldest(candidates, now), None, PairKind.NONE, now)


def select_multipartition(
    q: RwQueue, busy_until, cfg: SchedulerConfig, now: int, candidates=None
):
    """Oldest request, joined with the oldest opposite-kind request to a
    different partition of the same bank when one exists. Never pairs two
    reads and performs no power check."""
    if not len(q):
        raise EmptyQueue("rwQ is empty")
    if candidates is None:
        candidates = eligible_requests(q, busy_until, now)
    if not candidates:
        return None
    selected = _oldest(candidates, now, cfg.th_b_unit)
    if (cfg.multipartition_starvation_guard
            and _age_measure(selected, now, cfg.th_b_unit) < cfg.th_b):
        redirected = _conflict_redirect(q, candidates, now, cfg.th_b_unit)
        if redirected is not None:
            selected = redirected
    opposite = (AccessKind.WRITE if selected.kind is AccessKind.READ
                else AccessKind.READ)
    companion = _oldest_companion(q, selected, now, (opposite,))
    if companion is None:
        return ScheduleDecision(selected, None, PairKind.NONE, now)
    return ScheduleDecision(selected, companion, PairKind.RWW_PAIR, now)


def select_palp(
    q: RwQueue,
    busy_until,
    cfg: SchedulerConfig,
    ledger: PowerLedger,
    now: int,
    candidates=None,
):
    """Greedy pairing policy under starvation and RAPL control.

    The oldest schedulable request is primary unless it is not yet critical
    (age below th_b), in which case the oldest request with a bank conflict
    takes its place. A read primary prefers a write companion (RWW) and
    falls back to a read companion (RWR); a write primary can only form RWW.
    A pair whose power estimate exceeds the RAPL limit degrades to scheduling
    the primary alone.
    """
    if not len(q):
        raise EmptyQueue("rwQ is empty")
    if candidates is None:
        candidates = eligible_requests(q, busy_until, now)
    if not candidates:
        return None
    selected = _oldest(candidates, now, cfg.th_b_unit)
    if _age_measure(selected, now, cfg.th_b_unit) < cfg.th_b:
        redirected = _conflict_redirect(q, candidates, now, cfg.th_b_unit)
        if redirected is not None:
            selected = redirected

    if selected.kind is AccessKind.WRITE:
        companion = _oldest_companion(q, selected, now, (AccessKind.READ,))
        pair_kind = PairKind.RWW_PAIR
    else:
        companion = _oldest_companion(q, selected, now, (AccessKind.WRITE,))
        pair_kind = PairKind.RWW_PAIR
        if companion is None:
            companion = _oldest_companion(q, selected, now, (AccessKind.READ,))
            pair_kind = PairKind.RWR_PAIR
    if companion is None:
        return ScheduleDecision(selected, None, PairKind.NONE, now)

    estimate = estimate_pair_power(pair_kind, ledger)
    if estimate <= cfg.rapl_limit:
        return ScheduleDecision(selected, companion, pair_kind, now,
                                power_estimate=estimate)
    return ScheduleDecision(selected, None, PairKind.NONE, now,
                            power_estimate=estimate)


def select(policy: str, q, busy_until, cfg, ledger, now, candidates=None):
    if policy == "BASELINE_FCFS":
        return select_fcfs(q, busy_until, now, candidates)
    if policy == "MULTIPARTITION":
        return select_multipartition(q, busy_until, cfg, now, candidates)
    if policy == "PALP":
        return select_palp(q, busy_until, cfg, ledger, now, candidates)
    raise ValueError(f"unknown policy {policy!r}")
