"""Command-driven PCM bank model.

A bank serves one transaction at a time. A transaction is either a single
read  A-R-P, a single write A-W-P, a joint read+write to two partitions
A-A-RWW-P, or a joint read+read A-A-D-RWR-T-P with the write driver's verify
logic decoupled to act as a second sense amplifier. Only two partitions of a
bank can ever be active at once, and only one partition may be connected to
the write pulse shaper.

verify_stream() replays an arbitrary command stream through fresh bank state
machines and reports every timing, sequencing, or switch-configuration
violation as data. It is the cross-check oracle for every scheduler.
"""

from dataclasses import dataclass, field, replace
from enum import Enum

from .core import AccessKind, TimingParams


class IllegalPair(ValueError):
    pass


class InvalidConfig(ValueError):
    pass


class TimingError(ValueError):
    pass


class SequenceError(ValueError):
    pass


class CommandKind(Enum):
    ACTIVATE = "A"
    READ = "R"
    WRITE = "W"
    PRECHARGE = "P"
    RWW = "RWW"
    RWR = "RWR"
    DECOUPLE = "D"
    TRANSFER = "T"

    def __str__(self) -> str:
        return self.value


class PairKind(Enum):
    RWW_PAIR = "RWW"
    RWR_PAIR = "RWR"
    NONE = "NONE"


class DriverMode(Enum):
    WRITE_MODE = "write"
    DECOUPLED_MODE = "decoupled"


@dataclass(frozen=True, slots=True)
class Command:
    kind: CommandKind
    bank_id: int
    issue_cycle: int
    partition: int | None = None  # ACTIVATE only
    row: int | None = None
    column: int | None = None
    # Access kinds in activation order; disambiguates RWW's read/write roles.
    op_kinds: tuple | None = None


@dataclass(frozen=True)
class SwitchConfig:
    """State of the peripheral-structure transistors M0..M6.

    M0/M2 connect partitions i/j to the write driver, M1/M3 to the sense
    amplifier. M4 couples the driver's verify logic to its pulse shaper
    (OFF = decoupled mode). M5/M6 arbitrate the data bus between the two
    read paths of a dual read.
    """

    m0: bool = False
    m1: bool = False
    m2: bool = False
    m3: bool = False
    m4: bool = True
    m5: bool = False
    m6: bool = True

    @classmethod
    def idle(cls) -> "SwitchConfig":
        return cls()

    @classmethod
    def single(cls, kind: AccessKind) -> "SwitchConfig":
        if kind is AccessKind.WRITE:
            return cls(m0=True)
        return cls(m1=True)

    @classmethod
    def pair(cls, first: AccessKind, second: AccessKind) -> "SwitchConfig":
        ops = (first, second)
        if ops == (AccessKind.WRITE, AccessKind.READ):
            return cls(m0=True, m3=True)
        if ops == (AccessKind.READ, AccessKind.WRITE):
            return cls(m1=True, m2=True)
        if ops == (AccessKind.READ, AccessKind.READ):
            # Sense amplifier reads the first partition, the decoupled verify
            # logic reads the second.
            return cls(m1=True, m2=True, m4=False)
        raise InvalidConfig("two write requests cannot share a bank's write driver")


# Legal (m0, m1, m2, m3) rows. Any other combination cross-connects
# partitions into one circuit and corrupts data.
_SINGLE_ROWS = {
    (False, False, False, False),
    (True, False, False, False),
    (False, True, False, False),
    (False, False, True, False),
    (False, False, False, True),
}
_DUAL_ROWS = {
    (True, False, False, True),
    (False, True, True, False),
}


def validate_switch(cfg: SwitchConfig) -> None:
    """Reject any transistor combination outside the legal table rows."""
    row = (cfg.m0, cfg.m1, cfg.m2, cfg.m3)
    if row not in _SINGLE_ROWS and row not in _DUAL_ROWS:
        raise InvalidConfig(f"invalid M0-M3 combination {row}")
    if cfg.m0 and cfg.m2:
        raise InvalidConfig("both partitions connected to the write pulse shaper")
    if not cfg.m4 and row not in _DUAL_ROWS:
        raise InvalidConfig("decoupled mode (M4=OFF) requires a dual-partition row")
    if cfg.m5 and cfg.m6:
        raise InvalidConfig("M5 and M6 drive the data bus simultaneously")


def transistor_config(op_kinds) -> SwitchConfig:
    """Unique legal switch row for the accesses, in partition activation order."""
    ops = tuple(op_kinds)
    if len(ops) == 1:
        cfg = SwitchConfig.single(ops[0])
    elif len(ops) == 2:
        cfg = SwitchConfig.pair(*ops)
    else:
        raise InvalidConfig(f"expected 1 or 2 accesses, got {len(ops)}")
    validate_switch(cfg)
    return cfg


def legal_pairing(a, b) -> PairKind:
    """Pair class of two requests: RWW for read+write and RWR for read+read,
    both only to distinct partitions of one bank. Total function."""
    if a.bank != b.bank or a.partition == b.partition:
        return PairKind.NONE
    kinds = {a.kind, b.kind}
    if kinds == {AccessKind.READ, AccessKind.WRITE}:
        return PairKind.RWW_PAIR
    if kinds == {AccessKind.READ}:
        return PairKind.RWR_PAIR
    return PairKind.NONE


def command_sequence(decision, timing: TimingParams):
    """Commands of one bank transaction, stamped from the decision cycle.

    Returns (commands, total_service_cycles). The bank is busy for the full
    total starting at the first ACTIVATE.
    """
    primary = decision.primary_request
    paired = decision.paired_request
    start = decision.decision_cycle
    bank = primary.bank
    addr = primary.address

    if paired is None:
        total = timing.service_cycles(primary.kind)
        op = CommandKind.READ if primary.kind is AccessKind.READ else CommandKind.WRITE
        cmds = [
            Command(CommandKind.ACTIVATE, bank, start,
                    partition=addr.partition, row=addr.row, column=addr.column),
            Command(op, bank, start + timing.t_rcd),
            Command(CommandKind.PRECHARGE, bank, start + total - 1),
        ]
        return cmds, total

    kind = legal_pairing(primary, paired)
    if kind is PairKind.NONE or kind is not decision.pair_kind:
        raise IllegalPair(
            f"requests {primary.id} and {paired.id} do not form a "
            f"{decision.pair_kind.value} pair"
        )
    roles = (primary.kind, paired.kind)
    paddr = paired.address
    cmds = [
        Command(CommandKind.ACTIVATE, bank, start,
                partition=addr.partition, row=addr.row, column=addr.column),
        Command(CommandKind.ACTIVATE, bank, start + 1,
                partition=paddr.partition, row=paddr.row, column=paddr.column),
    ]
    if kind is PairKind.RWW_PAIR:
        total = timing.a_rww_p
        cmds.append(Command(CommandKind.RWW, bank, start + 1 + timing.t_rcd,
                            op_kinds=roles))
    else:
        total = timing.a_rwr_p
        d_cycle = start + 1 + timing.t_rcd
        cmds.append(Command(CommandKind.DECOUPLE, bank, d_cycle))
        cmds.append(Command(CommandKind.RWR, bank, d_cycle + 1, op_kinds=roles))
        cmds.append(Command(CommandKind.TRANSFER, bank,
                            d_cycle + 1 + timing.rl + timing.first_read_burst))
    cmds.append(Command(CommandKind.PRECHARGE, bank, start + total - 1))
    return cmds, total


@dataclass
class BankState:
    """Per-bank transaction state machine.

    issue() validates each command against the bank's sequencing rules and
    the exact intra-transaction offsets, then applies it. Violations raise
    TimingError / SequenceError / InvalidConfig without mutating state.
    """

    bank_id: int
    busy_until: int = 0
    open_partitions: list = field(default_factory=list)
    switch: SwitchConfig = field(default_factory=SwitchConfig.idle)
    driver_mode: DriverMode = DriverMode.WRITE_MODE
    pending_sequence: list = field(default_factory=list)
    # transaction bookkeeping
    _txn_start: int = -1
    _op_seen: CommandKind | None = None
    _decoupled: bool = False
    _transfer_due: int = -1
    _transferred: bool = False
    _precharge_due: int = -1
    _total: int = 0

    @property
    def in_transaction(self) -> bool:
        return self._txn_start >= 0

    def issue(self, cmd: Command, timing: TimingParams) -> "BankState":
        if cmd.bank_id != self.bank_id:
            raise SequenceError(
                f"command for bank {cmd.bank_id} routed to bank {self.bank_id}"
            )
        handler = {
            CommandKind.ACTIVATE: self._issue_activate,
            CommandKind.READ: self._issue_single_op,
            CommandKind.WRITE: self._issue_single_op,
            CommandKind.RWW: self._issue_rww,
            CommandKind.DECOUPLE: self._issue_decouple,
            CommandKind.RWR: self._issue_rwr,
            CommandKind.TRANSFER: self._issue_transfer,
            CommandKind.PRECHARGE: self._issue_precharge,
        }[cmd.kind]
        handler(cmd, timing)
        if cmd.kind is not CommandKind.PRECHARGE:
            self.pending_sequence.append(cmd)
        return self

    # -- per-command rules ---------------------------------------------------

    def _issue_activate(self, cmd: Command, timing: TimingParams) -> None:
        if cmd.partition is None:
            raise SequenceError("ACTIVATE needs a partition")
        if not self.in_transaction:
            if cmd.issue_cycle < self.busy_until:
                raise TimingError(
                    f"ACTIVATE at {cmd.issue_cycle} before bank free at "
                    f"{self.busy_until}"
                )
            self._txn_start = cmd.issue_cycle
            self.open_partitions = [cmd.partition]
            return
        if len(self.open_partitions) >= 2:
            raise SequenceError("only two partitions can be active at once")
        if self._op_seen is not None:
            raise TimingError("ACTIVATE while a transaction is in flight")
        if cmd.issue_cycle != self._txn_start + 1:
            raise TimingError(
                f"second ACTIVATE must be back-to-back at "
                f"{self._txn_start + 1}, got {cmd.issue_cycle}"
            )
        if cmd.partition in self.open_partitions:
            raise SequenceError(
                f"partition {cmd.partition} activated twice in one transaction"
            )
        self.open_partitions.append(cmd.partition)

    def _issue_single_op(self, cmd: Command, timing: TimingParams) -> None:
        if len(self.open_partitions) != 1 or self._op_seen is not None:
            raise SequenceError(f"{cmd.kind.value} needs exactly one open partition")
        if cmd.issue_cycle != self._txn_start + timing.t_rcd:
            raise TimingError(
                f"{cmd.kind.value} off-schedule: expected "
                f"{self._txn_start + timing.t_rcd}, got {cmd.issue_cycle}"
            )
        kind = AccessKind.READ if cmd.kind is CommandKind.READ else AccessKind.WRITE
        switch = transistor_config((kind,))
        self.switch = switch
        self._op_seen = cmd.kind
        self._total = timing.service_cycles(kind)
        self._precharge_due = self._txn_start + self._total - 1

    def _dual_ready(self, cmd: Command) -> None:
        if len(self.open_partitions) != 2 or self._op_seen is not None:
            raise SequenceError(f"{cmd.kind.value} needs two open partitions")

    def _issue_rww(self, cmd: Command, timing: TimingParams) -> None:
        self._dual_ready(cmd)
        if self._decoupled:
            raise SequenceError("RWW cannot follow DECOUPLE")
        if cmd.issue_cycle != self._txn_start + 1 + timing.t_rcd:
            raise TimingError(
                f"RWW off-schedule: expected {self._txn_start + 1 + timing.t_rcd}, "
                f"got {cmd.issue_cycle}"
            )
        roles = cmd.op_kinds or (AccessKind.READ, AccessKind.WRITE)
        if set(roles) != {AccessKind.READ, AccessKind.WRITE}:
            raise InvalidConfig(f"RWW needs one read and one write, got {roles}")
        self.switch = transistor_config(roles)
        self._op_seen = cmd.kind
        self._total = timing.a_rww_p
        self._precharge_due = self._txn_start + self._total - 1

    def _issue_decouple(self, cmd: Command, timing: TimingParams) -> None:
        self._dual_ready(cmd)
        if self._decoupled:
            raise SequenceError("duplicate DECOUPLE")
        if cmd.issue_cycle != self._txn_start + 1 + timing.t_rcd:
            raise TimingError(
                f"DECOUPLE off-schedule: expected "
                f"{self._txn_start + 1 + timing.t_rcd}, got {cmd.issue_cycle}"
            )
        self._decoupled = True
        self.driver_mode = DriverMode.DECOUPLED_MODE

    def _issue_rwr(self, cmd: Command, timing: TimingParams) -> None:
        self._dual_ready(cmd)
        if not self._decoupled:
            raise SequenceError("RWR without preceding DECOUPLE")
        expected = self._txn_start + 2 + timing.t_rcd
        if cmd.issue_cycle != expected:
            raise TimingError(
                f"RWR off-schedule: expected {expected}, got {cmd.issue_cycle}"
            )
        self.switch = transistor_config((AccessKind.READ, AccessKind.READ))
        self._op_seen = cmd.kind
        self._total = timing.a_rwr_p
        self._transfer_due = cmd.issue_cycle + timing.rl + timing.first_read_burst
        self._precharge_due = self._txn_start + self._total - 1

    def _issue_transfer(self, cmd: Command, timing: TimingParams) -> None:
        if self._op_seen is not CommandKind.RWR or self._transferred:
            raise SequenceError("TRANSFER only follows RWR, once")
        if cmd.issue_cycle != self._transfer_due:
            raise TimingError(
                f"TRANSFER off-schedule: expected {self._transfer_due}, "
                f"got {cmd.issue_cycle}"
            )
        switched = replace(self.switch, m5=True, m6=False)
        validate_switch(switched)
        self.switch = switched
        self._transferred = True

    def _issue_precharge(self, cmd: Command, timing: TimingParams) -> None:
        if self._op_seen is None:
            raise SequenceError("PRECHARGE before any access command")
        if self._op_seen is CommandKind.RWR and not self._transferred:
            raise SequenceError("PRECHARGE before TRANSFER of a dual read")
        if cmd.issue_cycle != self._precharge_due:
            raise TimingError(
                f"PRECHARGE off-schedule: expected {self._precharge_due}, "
                f"got {cmd.issue_cycle}"
            )
        self.busy_until = self._txn_start + self._total
        self.open_partitions = []
        self.switch = SwitchConfig.idle()
        self.driver_mode = DriverMode.WRITE_MODE
        self.pending_sequence = []
        self._txn_start = -1
        self._op_seen = None
        self._decoupled = False
        self._transfer_due = -1
        self._transferred = False
        self._precharge_due = -1
        self._total = 0


@dataclass(frozen=True)
class Violation:
    cycle: int
    bank_id: int
    command: CommandKind
    kind: str  # "timing" | "sequence" | "config"
    message: str

    def __str__(self) -> str:
        return (
            f"cycle {self.cycle} bank {self.bank_id} {self.command.value}: "
            f"[{self.kind}] {self.message}"
        )


_VIOLATION_KINDS = {TimingError: "timing", SequenceError: "sequence",
                    InvalidConfig: "config"}


def replay(commands, timing: TimingParams):
    """Re-issue a command stream on fresh banks.

    Returns (violations, banks). Offending commands are dropped so checking
    continues past the first fault.
    """
    ordered = sorted(
        enumerate(commands), key=lambda ic: (ic[1].issue_cycle, ic[1].bank_id, ic[0])
    )
    banks: dict[int, BankState] = {}
    violations = []
    for _, cmd in ordered:
        bank = banks.get(cmd.bank_id)
        if bank is None:
            bank = banks[cmd.bank_id] = BankState(cmd.bank_id)
        try:
            bank.issue(cmd, timing)
        except (TimingError, SequenceError, InvalidConfig) as exc:
            violations.append(
                Violation(cmd.issue_cycle, cmd.bank_id, cmd.kind,
                          _VIOLATION_KINDS[type(exc)], str(exc))
            )
    return violations, banks


def verify_stream(commands, timing: TimingParams):
    """Violations found when replaying the stream; empty list means legal."""
    return replay(commands, timing)[0]


# -- plain-text command streams (offline checking) ---------------------------

def dump_command_stream(commands) -> str:
    """One command per line: `cycle kind bank [partition row column]`."""
    lines = []
    for cmd in sorted(commands, key=lambda c: (c.issue_cycle, c.bank_id)):
        if cmd.kind is CommandKind.ACTIVATE:
            lines.append(
                f"{cmd.issue_cycle} {cmd.kind.value} {cmd.bank_id} "
                f"{cmd.partition} {cmd.row} {cmd.column}"
            )
        else:
            lines.append(f"{cmd.issue_cycle} {cmd.kind.value} {cmd.bank_id}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_command_stream(text: str):
    kinds = {k.value: k for k in CommandKind}
    commands = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[1:2] and parts[1] in kinds:
            want = 6 if kinds[parts[1]] is CommandKind.ACTIVATE else 3
        else:
            want = -1
        if len(parts) != want:
            raise ValueError(f"line {lineno}: malformed command {line!r}")
        try:
            cycle, bank = int(parts[0]), int(parts[2])
            partition = row = column = None
            if len(parts) == 6:
                partition, row, column = (int(p) for p in parts[3:6])
        except ValueError:
            raise ValueError(f"line {lineno}: malformed command {line!r}") from None
        commands.append(
            Command(kinds[parts[1]], bank, cycle,
                    partition=partition, row=row, column=column)
        )
    return commands
