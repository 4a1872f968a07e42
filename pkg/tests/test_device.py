import random

import pytest

from pcmsim.addrmap import DecodedAddress
from pcmsim.core import AccessKind, TimingParams
from pcmsim.device import (
    BankState,
    Command,
    CommandKind,
    DriverMode,
    IllegalPair,
    InvalidConfig,
    PairKind,
    SequenceError,
    SwitchConfig,
    TimingError,
    command_sequence,
    dump_command_stream,
    legal_pairing,
    load_command_stream,
    replay,
    transistor_config,
    validate_switch,
    verify_stream,
)
from pcmsim.scheduler import MemoryRequest, ScheduleDecision

R = AccessKind.READ
W = AccessKind.WRITE
A = CommandKind.ACTIVATE
P = CommandKind.PRECHARGE


def req(rid, kind, bank, partition, row=0):
    return MemoryRequest(
        rid, 0, kind, DecodedAddress(partition=partition, row=row), bank,
        enqueue_cycle=0,
    )


def decision(a, b=None, cycle=0):
    kind = PairKind.NONE if b is None else legal_pairing(a, b)
    return ScheduleDecision(a, b, kind, cycle)


# -- pairing ------------------------------------------------------------------

def test_legal_pairing_rww():
    assert legal_pairing(req(0, R, 3, 1), req(1, W, 3, 3)) is PairKind.RWW_PAIR
    assert legal_pairing(req(0, W, 3, 3), req(1, R, 3, 1)) is PairKind.RWW_PAIR


def test_legal_pairing_rwr():
    assert legal_pairing(req(0, R, 3, 4), req(1, R, 3, 3)) is PairKind.RWR_PAIR


def test_legal_pairing_none():
    # write-write conflicts are unresolvable by construction
    assert legal_pairing(req(0, W, 0, 2), req(1, W, 0, 5)) is PairKind.NONE
    # same partition cannot be dual-activated
    assert legal_pairing(req(0, R, 3, 1), req(1, R, 3, 1)) is PairKind.NONE
    # different banks do not conflict at all
    assert legal_pairing(req(0, R, 2, 1), req(1, W, 3, 2)) is PairKind.NONE


# -- command sequences --------------------------------------------------------

def test_single_read_sequence(timing):
    cmds, total = command_sequence(decision(req(0, R, 1, 2, row=9)), timing)
    assert total == 19
    assert [(c.kind, c.issue_cycle) for c in cmds] == [
        (A, 0), (CommandKind.READ, 1), (P, 18),
    ]
    assert cmds[0].partition == 2 and cmds[0].row == 9


def test_single_write_sequence(timing):
    cmds, total = command_sequence(decision(req(0, W, 1, 2)), timing)
    assert total == 47
    assert [(c.kind, c.issue_cycle) for c in cmds] == [
        (A, 0), (CommandKind.WRITE, 1), (P, 46),
    ]


def test_rww_sequence(timing):
    d = decision(req(0, R, 3, 1), req(1, W, 3, 3))
    cmds, total = command_sequence(d, timing)
    assert total == 48
    assert total < 19 + 47  # 18 cycles (27%) below serial service
    assert [(c.kind, c.issue_cycle) for c in cmds] == [
        (A, 0), (A, 1), (CommandKind.RWW, 2), (P, 47),
    ]
    assert cmds[2].op_kinds == (R, W)


def test_rwr_sequence(timing):
    d = decision(req(0, R, 3, 4), req(1, R, 3, 3))
    cmds, total = command_sequence(d, timing)
    assert total == 30
    assert total < 2 * 19
    assert [(c.kind, c.issue_cycle) for c in cmds] == [
        (A, 0), (A, 1), (CommandKind.DECOUPLE, 2), (CommandKind.RWR, 3),
        (CommandKind.TRANSFER, 21), (P, 29),
    ]


def test_sequence_offsets_shift_with_decision_cycle(timing):
    d = decision(req(0, R, 3, 4), req(1, R, 3, 3), cycle=100)
    cmds, _ = command_sequence(d, timing)
    assert [c.issue_cycle for c in cmds] == [100, 101, 102, 103, 121, 129]


def test_illegal_pair_rejected(timing):
    a, b = req(0, W, 0, 2), req(1, W, 0, 5)
    d = ScheduleDecision(a, b, PairKind.RWW_PAIR, 0)
    with pytest.raises(IllegalPair):
        command_sequence(d, timing)


def test_pairing_dominance_over_random_timings():
    # For any legal TimingParams, joint service beats serialization.
    rng = random.Random(3)
    accepted = 0
    while accepted < 200:
        t_rcd = rng.randint(1, 3)
        rl = rng.randint(4, 15)
        burst = rng.choice([9, 13, 17, 21])
        try:
            t = TimingParams(
                a_r_p=rng.randint(8, 40),
                a_w_p=rng.randint(20, 90),
                t_rcd=t_rcd,
                rl=rl,
                t_wr=rng.randint(10, 60),
                a_rww_p=rng.randint(20, 120),
                a_rwr_p=rng.randint(10, 70),
                transfer_read_pair=burst,
            )
        except ValueError:
            continue
        accepted += 1
        assert t.a_rww_p < t.a_r_p + t.a_w_p
        assert t.a_rwr_p < 2 * t.a_r_p
        # round-trip legality at these timings
        rww = command_sequence(decision(req(0, R, 0, 1), req(1, W, 0, 2)), t)[0]
        rwr = command_sequence(decision(req(0, R, 0, 1), req(1, R, 0, 2)), t)[0]
        assert verify_stream(rww, t) == []
        assert verify_stream(rwr, t) == []


# -- transistor configurations ------------------------------------------------

def test_table_single_rows():
    assert transistor_config((W,)) == SwitchConfig(m0=True)
    assert transistor_config((R,)) == SwitchConfig(m1=True)


def test_table_pair_rows():
    # write partition i, read partition j
    assert transistor_config((W, R)) == SwitchConfig(m0=True, m3=True)
    # read partition i, write partition j
    assert transistor_config((R, W)) == SwitchConfig(m1=True, m2=True)


def test_decoupled_row():
    cfg = transistor_config((R, R))
    assert (cfg.m1, cfg.m2, cfg.m4) == (True, True, False)


def test_write_write_invalid():
    with pytest.raises(InvalidConfig):
        transistor_config((W, W))


@pytest.mark.parametrize("bad", [
    dict(m0=True, m1=True),   # both circuits on partition i
    dict(m2=True, m3=True),   # both circuits on partition j
    dict(m0=True, m2=True),   # write pulse shaper driving two partitions
    dict(m1=True, m3=True),   # sense amplifier reading two partitions
    dict(m0=True, m1=True, m2=True),
    dict(m0=True, m1=True, m2=True, m3=True),
])
def test_invalid_m0_m3_combinations(bad):
    with pytest.raises(InvalidConfig):
        validate_switch(SwitchConfig(**bad))


def test_invalid_bus_and_mode_combinations():
    with pytest.raises(InvalidConfig):
        validate_switch(SwitchConfig(m1=True, m5=True, m6=True))
    # decoupling is only meaningful with both read paths up
    with pytest.raises(InvalidConfig):
        validate_switch(SwitchConfig(m1=True, m4=False))


def test_every_emitted_switch_is_valid():
    for ops in ((R,), (W,), (R, W), (W, R), (R, R)):
        validate_switch(transistor_config(ops))


# -- the bank state machine ---------------------------------------------------

def activate(bank_id, cycle, partition, row=0, column=0):
    return Command(A, bank_id, cycle, partition=partition, row=row,
                   column=column)


def test_activate_on_free_bank(timing):
    bank = BankState(0)
    bank.issue(activate(0, 0, 3), timing)
    assert bank.open_partitions == [3]


def test_activate_before_busy_until(timing):
    bank = BankState(0, busy_until=50)
    with pytest.raises(TimingError):
        bank.issue(activate(0, 10, 3), timing)


def test_third_partition_rejected(timing):
    bank = BankState(0)
    bank.issue(activate(0, 0, 1), timing)
    bank.issue(activate(0, 1, 2), timing)
    with pytest.raises(SequenceError):
        bank.issue(activate(0, 2, 3), timing)


def test_same_partition_twice_rejected(timing):
    bank = BankState(0)
    bank.issue(activate(0, 0, 1), timing)
    with pytest.raises(SequenceError):
        bank.issue(activate(0, 1, 1), timing)


def test_rww_one_cycle_after_second_activate(timing):
    bank = BankState(0)
    bank.issue(activate(0, 0, 1), timing)
    bank.issue(activate(0, 1, 2), timing)
    bank.issue(Command(CommandKind.RWW, 0, 2, op_kinds=(R, W)), timing)
    assert bank.switch == SwitchConfig(m1=True, m2=True)
    bank.issue(Command(P, 0, 47), timing)
    assert bank.busy_until == 48
    assert bank.open_partitions == []


def test_rwr_needs_decouple(timing):
    bank = BankState(0)
    bank.issue(activate(0, 0, 1), timing)
    bank.issue(activate(0, 1, 2), timing)
    with pytest.raises(SequenceError):
        bank.issue(Command(CommandKind.RWR, 0, 3), timing)


def test_full_rwr_transaction_updates_modes(timing):
    bank = BankState(0)
    bank.issue(activate(0, 0, 1), timing)
    bank.issue(activate(0, 1, 2), timing)
    bank.issue(Command(CommandKind.DECOUPLE, 0, 2), timing)
    assert bank.driver_mode is DriverMode.DECOUPLED_MODE
    bank.issue(Command(CommandKind.RWR, 0, 3), timing)
    assert bank.switch.m4 is False
    bank.issue(Command(CommandKind.TRANSFER, 0, 21), timing)
    assert (bank.switch.m5, bank.switch.m6) == (True, False)
    bank.issue(Command(P, 0, 29), timing)
    assert bank.busy_until == 30
    assert bank.driver_mode is DriverMode.WRITE_MODE


def test_precharge_before_transfer_rejected(timing):
    bank = BankState(0)
    bank.issue(activate(0, 0, 1), timing)
    bank.issue(activate(0, 1, 2), timing)
    bank.issue(Command(CommandKind.DECOUPLE, 0, 2), timing)
    bank.issue(Command(CommandKind.RWR, 0, 3), timing)
    with pytest.raises(SequenceError):
        bank.issue(Command(P, 0, 29), timing)


def test_off_schedule_read_rejected(timing):
    bank = BankState(0)
    bank.issue(activate(0, 0, 1), timing)
    with pytest.raises(TimingError):
        bank.issue(Command(CommandKind.READ, 0, 5), timing)


def test_violation_does_not_corrupt_state(timing):
    bank = BankState(0)
    bank.issue(activate(0, 0, 1), timing)
    before = list(bank.open_partitions)
    with pytest.raises(TimingError):
        bank.issue(Command(CommandKind.READ, 0, 5), timing)
    assert bank.open_partitions == before
    bank.issue(Command(CommandKind.READ, 0, 1), timing)  # still accepted


# -- stream verification ------------------------------------------------------

def seq(d, timing):
    return command_sequence(d, timing)[0]


def test_verify_round_trip_all_decision_kinds(timing):
    cmds = []
    cmds += seq(decision(req(0, R, 0, 1), cycle=0), timing)
    cmds += seq(decision(req(1, W, 0, 2), cycle=19), timing)
    cmds += seq(decision(req(2, R, 0, 1), req(3, W, 0, 2), cycle=66), timing)
    cmds += seq(decision(req(4, R, 0, 1), req(5, R, 0, 2), cycle=114), timing)
    cmds += seq(decision(req(6, W, 1, 0), cycle=3), timing)  # parallel bank
    assert verify_stream(cmds, timing) == []


def test_verify_overlapping_writes(timing):
    # two overlapping write transactions on one bank
    cmds = seq(decision(req(0, W, 0, 1), cycle=0), timing)
    cmds += seq(decision(req(1, W, 0, 2), cycle=10), timing)
    violations = verify_stream(cmds, timing)
    assert any(v.kind == "timing" for v in violations)


def test_verify_reports_are_ordered_and_descriptive(timing):
    cmds = seq(decision(req(0, W, 0, 1), cycle=0), timing)
    cmds += seq(decision(req(1, W, 0, 2), cycle=10), timing)
    violations = verify_stream(cmds, timing)
    assert all(v.bank_id == 0 for v in violations)
    assert "bank 0" in str(violations[0])


def test_verify_joint_schedule_retire_cycle(timing):
    # RWW at 0, RWW at 48, RWR at 96: retires at cycle 126.
    cmds = []
    cmds += seq(decision(req(0, R, 3, 1), req(1, W, 3, 3), cycle=0), timing)
    cmds += seq(decision(req(2, R, 3, 4), req(3, W, 3, 1), cycle=48), timing)
    cmds += seq(decision(req(4, R, 3, 3), req(5, R, 3, 1), cycle=96), timing)
    violations, banks = replay(cmds, timing)
    assert violations == []
    assert banks[3].busy_until == 126


def test_command_stream_text_round_trip(timing):
    cmds = seq(decision(req(0, R, 2, 1), req(1, R, 2, 5), cycle=7), timing)
    text = dump_command_stream(cmds)
    loaded = load_command_stream(text)
    assert [(c.kind, c.bank_id, c.issue_cycle, c.partition) for c in loaded] == [
        (c.kind, c.bank_id, c.issue_cycle, c.partition) for c in cmds
    ]
    assert verify_stream(loaded, timing) == []


def test_load_command_stream_rejects_garbage():
    with pytest.raises(ValueError):
        load_command_stream("0 A 1\n")  # ACTIVATE without partition/row/col
    with pytest.raises(ValueError):
        load_command_stream("0 Q 1\n")
    with pytest.raises(ValueError):
        load_command_stream("x R 1\n")
