"""Request traces: file format, synthetic generation, conflict classification.

Trace file format, one request per line:

    <cycle> <R|W> <0xADDR>

Cycles are decimal and nondecreasing; lines starting with `#` are comments.
"""

import random
from dataclasses import dataclass

from .addrmap import (
    ConflictClass,
    DecodedAddress,
    MappingScheme,
    decode,
    encode,
    global_bank,
    kind_pair_class,
)
from .core import AccessKind, Geometry, TimingParams


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class NonMonotonicCycle(ParseError):
    pass


@dataclass(frozen=True, slots=True)
class TraceRecord:
    arrival_cycle: int
    kind: AccessKind
    address: int


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs of the synthetic request generator.

    bank_locality is the probability that a request reuses the previous
    request's bank; partition_spread the probability that such a bank-local
    request moves to a different partition. The seed fully determines the
    generated trace.
    """

    request_count: int = 10000
    read_fraction: float = 0.7
    bank_locality: float = 0.5
    partition_spread: float = 0.5
    inter_arrival: float = 10.0
    seed: int = 1

    def __post_init__(self):
        if self.request_count < 0:
            raise ValueError("request_count must be >= 0")
        for name in ("read_fraction", "bank_locality", "partition_spread"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {v}")
        if self.inter_arrival < 0:
            raise ValueError("inter_arrival must be >= 0")


def parse(source) -> list:
    """Read trace records from a string or an iterable of lines."""
    if isinstance(source, str):
        source = source.splitlines()
    records = []
    last_cycle = None
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(lineno, f"expected `cycle R|W 0xaddr`, got {line!r}")
        try:
            cycle = int(parts[0])
        except ValueError:
            raise ParseError(lineno, f"bad cycle {parts[0]!r}") from None
        if parts[1] not in ("R", "W"):
            raise ParseError(lineno, f"bad kind {parts[1]!r}")
        if not parts[2].lower().startswith("0x"):
            raise ParseError(lineno, f"address {parts[2]!r} must be hex (0x...)")
        try:
            address = int(parts[2], 16)
        except ValueError:
            raise ParseError(lineno, f"bad address {parts[2]!r}") from None
        if cycle < 0 or address < 0:
            raise ParseError(lineno, "cycle and address must be nonnegative")
        if last_cycle is not None and cycle < last_cycle:
            raise NonMonotonicCycle(
                lineno, f"cycle {cycle} below previous {last_cycle}"
            )
        last_cycle = cycle
        records.append(TraceRecord(cycle, AccessKind(parts[1]), address))
    return records


def serialize(records) -> str:
    lines = [
        f"{r.arrival_cycle} {r.kind.value} {r.address:#x}" for r in records
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def generate(cfg: SyntheticConfig, scheme: MappingScheme, g: Geometry) -> list:
    """Deterministic synthetic trace; pure function of (cfg, scheme, g)."""
    rng = random.Random(cfg.seed)
    records = []
    cycle = 0
    prev = None  # (channel, rank, bank, partition) of the previous request
    for _ in range(cfg.request_count):
        kind = (AccessKind.READ if rng.random() < cfg.read_fraction
                else AccessKind.WRITE)
        if prev is not None and rng.random() < cfg.bank_locality:
            channel, rank, bank, partition = prev
            if (g.partitions_per_bank > 1
                    and rng.random() < cfg.partition_spread):
                shifted = rng.randrange(g.partitions_per_bank - 1)
                partition = shifted if shifted < partition else shifted + 1
        else:
            channel = rng.randrange(g.channels)
            rank = rng.randrange(g.ranks_per_channel)
            bank = rng.randrange(g.banks_per_rank)
            partition = rng.randrange(g.partitions_per_bank)
        row = rng.randrange(g.rows_per_partition)
        column = rng.randrange(g.columns_per_row)
        prev = (channel, rank, bank, partition)
        addr = encode(
            DecodedAddress(channel=channel, rank=rank, bank=bank,
                           partition=partition, row=row, column=column),
            scheme, g,
        )
        records.append(TraceRecord(cycle, kind, addr))
        if cfg.inter_arrival > 0:
            cycle += int(rng.expovariate(1.0 / cfg.inter_arrival))
    return records


def thin_writes(records, fraction: float, seed: int = 0) -> list:
    """Drop a fraction of writes, emulating a writes-absorbing cache."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be within [0, 1]")
    rng = random.Random(seed)
    return [
        r for r in records
        if r.kind is AccessKind.READ or rng.random() >= fraction
    ]


def conflict_counts(entries, timing: TimingParams, window: int | None):
    """Conflict counts over (arrival, kind, flat-bank) triples.

    A request conflicts if an older same-bank request arrived within
    `window` cycles; with window=None the older request must instead still
    be unserved at the arrival instant under a reference first-come
    first-served replay (serial per-bank services, banks independent).
    The class comes from the kind pair with the most recent such request.
    """
    if window is not None and window <= 0:
        raise ValueError("window must be > 0")
    counts = {cls: 0 for cls in ConflictClass}
    bank_free: dict[int, int] = {}
    # Per bank, the most recent older request decides: both its arrival and
    # its FCFS completion are maximal among the bank's predecessors, so a
    # single look-back suffices.
    last_by_bank: dict[int, tuple] = {}
    for arrival, kind, bank in entries:
        prev = last_by_bank.get(bank)
        cls = ConflictClass.NONE
        if prev is not None:
            prev_arrival, prev_kind, prev_complete = prev
            if window is not None:
                if arrival - prev_arrival <= window:
                    cls = kind_pair_class(kind, prev_kind)
            elif prev_complete > arrival:
                cls = kind_pair_class(kind, prev_kind)
        counts[cls] += 1
        complete = None
        if window is None:
            start = max(arrival, bank_free.get(bank, 0))
            complete = start + timing.service_cycles(kind)
            bank_free[bank] = complete
        last_by_bank[bank] = (arrival, kind, complete)
    return counts


def classify_conflicts(
    records,
    scheme: MappingScheme,
    g: Geometry,
    window: int | None = None,
    timing: TimingParams | None = None,
):
    """Fractions of requests in each bank-conflict class; fractions sum to 1."""
    timing = timing or TimingParams()
    entries = [
        (r.arrival_cycle, r.kind, global_bank(decode(r.address, scheme, g), g))
        for r in records
    ]
    counts = conflict_counts(entries, timing, window)
    total = sum(counts.values())
    if total == 0:
        return {cls: 0.0 for cls in ConflictClass}
    return {cls: n / total for cls, n in counts.items()}
