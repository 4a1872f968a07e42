"""Shared device vocabulary: memory organization, command timing, access kinds.

Default values describe a 128GB PCM built from 4 channels x 4 ranks x 8 banks,
with 8 partitions per bank, driven by a 256MHz memory clock.
"""

from dataclasses import dataclass
from enum import Enum


def is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


class AccessKind(Enum):
    READ = "R"
    WRITE = "W"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Geometry:
    """Counts of the memory hierarchy levels. All counts are powers of two."""

    channels: int = 4
    ranks_per_channel: int = 4
    banks_per_rank: int = 8
    partitions_per_bank: int = 8
    rows_per_partition: int = 4096
    columns_per_row: int = 512
    line_bits: int = 128  # read/write granularity of one access

    def __post_init__(self):
        for name in (
            "channels",
            "ranks_per_channel",
            "banks_per_rank",
            "partitions_per_bank",
            "rows_per_partition",
            "columns_per_row",
            "line_bits",
        ):
            value = getattr(self, name)
            if not is_pow2(value):
                raise ValueError(f"{name} must be a power of two >= 1, got {value}")

    @property
    def total_banks(self) -> int:
        return self.channels * self.ranks_per_channel * self.banks_per_rank

    def global_bank(self, channel: int, rank: int, bank: int) -> int:
        """Flat bank index, unique across channels and ranks."""
        return (channel * self.ranks_per_channel + rank) * self.banks_per_rank + bank

    def field_bits(self, field: str) -> int:
        counts = {
            "channel": self.channels,
            "rank": self.ranks_per_channel,
            "bank": self.banks_per_rank,
            "partition": self.partitions_per_bank,
            "row": self.rows_per_partition,
            "column": self.columns_per_row,
        }
        return counts[field].bit_length() - 1


@dataclass(frozen=True)
class TimingParams:
    """Bank command timing in memory-clock cycles.

    a_r_p / a_w_p are the end-to-end A-R-P / A-W-P service latencies of a
    single read / write transaction; a_rww_p / a_rwr_p are the joint service
    latencies of the dual-partition transaction kinds. transfer_read_pair is
    the burst-switch-burst data return of a dual read (8+1+8 by default).
    """

    a_r_p: int = 19
    a_w_p: int = 47
    t_rcd: int = 1
    rl: int = 10
    wl: int = 3
    t_wr: int = 35
    a_rww_p: int = 48
    a_rwr_p: int = 30
    transfer_read_pair: int = 17
    clock_mhz: int = 256

    def __post_init__(self):
        for name in (
            "a_r_p",
            "a_w_p",
            "t_rcd",
            "rl",
            "wl",
            "t_wr",
            "a_rww_p",
            "a_rwr_p",
            "transfer_read_pair",
            "clock_mhz",
        ):
            value = getattr(self, name)
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        # Pairing must strictly beat serving the two requests back to back.
        if self.a_rww_p >= self.a_r_p + self.a_w_p:
            raise ValueError(
                f"a_rww_p ({self.a_rww_p}) must be < a_r_p + a_w_p "
                f"({self.a_r_p + self.a_w_p})"
            )
        if self.a_rwr_p >= 2 * self.a_r_p:
            raise ValueError(
                f"a_rwr_p ({self.a_rwr_p}) must be < 2 * a_r_p ({2 * self.a_r_p})"
            )
        # The command schedule must fit inside the advertised totals
        # (activates, access command, data return, then precharge last).
        if self.transfer_read_pair < 3:
            raise ValueError("transfer_read_pair must be >= 3 (burst-switch-burst)")
        if self.a_r_p < self.t_rcd + 2 or self.a_w_p < self.t_rcd + 2:
            raise ValueError("single service latency too short for A, op, P")
        if self.a_rww_p < self.t_rcd + 3:
            raise ValueError("a_rww_p too short for A, A, RWW, P")
        if self.a_rwr_p < self.t_rcd + self.rl + self.first_read_burst + 4:
            raise ValueError("a_rwr_p too short for A, A, D, RWR, T, P")

    @property
    def first_read_burst(self) -> int:
        """Cycles of the first data burst of a dual read (before the switch)."""
        return (self.transfer_read_pair - 1) // 2

    def service_cycles(self, kind: AccessKind) -> int:
        return self.a_r_p if kind is AccessKind.READ else self.a_w_p
