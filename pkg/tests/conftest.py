import pytest

from pcmsim.addrmap import DecodedAddress, MappingScheme, encode
from pcmsim.core import AccessKind, Geometry, TimingParams
from pcmsim.trace import TraceRecord

R = AccessKind.READ
W = AccessKind.WRITE


@pytest.fixture(scope="session")
def geometry():
    return Geometry()


@pytest.fixture(scope="session")
def timing():
    return TimingParams()


@pytest.fixture(scope="session")
def scheme(geometry):
    return MappingScheme.for_geometry("DEFAULT_MICRON", geometry)


def make_address(scheme, geometry, *, channel=0, rank=0, bank=0, partition=0,
                 row=0, column=0):
    return encode(
        DecodedAddress(channel=channel, rank=rank, bank=bank,
                       partition=partition, row=row, column=column),
        scheme, geometry,
    )


@pytest.fixture(scope="session")
def six_request_trace(scheme, geometry):
    """Six same-bank requests: R@p1, W@p3, R@p4, W@p1, R@p3, R@p1.

    All arrive at cycle 0; ids follow listing order. Serial FCFS service is
    19+47+19+47+19+19 = 170 cycles.
    """
    def a(partition, row):
        return make_address(scheme, geometry, bank=3, partition=partition,
                            row=row)

    return [
        TraceRecord(0, R, a(1, 127)),
        TraceRecord(0, W, a(3, 120)),
        TraceRecord(0, R, a(4, 12)),
        TraceRecord(0, W, a(1, 89)),
        TraceRecord(0, R, a(3, 7)),
        TraceRecord(0, R, a(1, 22)),
    ]


@pytest.fixture(scope="session")
def conflict_free_records(scheme, geometry):
    """Requests to pairwise-distinct banks (no conflicts possible)."""
    records = []
    cycle = 0
    for i in range(24):
        addr = make_address(
            scheme, geometry,
            channel=i % 4, rank=(i // 4) % 4, bank=(i // 16) % 8,
            partition=i % 8, row=i,
        )
        records.append(TraceRecord(cycle, R if i % 3 else W, addr))
        cycle += 2
    return records
