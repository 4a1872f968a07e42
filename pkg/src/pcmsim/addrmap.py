"""Physical address decoding under configurable interleaving schemes.

The default layout follows a DDR4-style mapping for the default geometry:

    [36:35]=rank [34:23]=row [22:14]=column [13:11]=partition
    [10:8]=bank [7:6]=channel [5:0]=byte

ROW_INTERLEAVED and BLOCK_INTERLEAVED are permutations of the same fields;
see README for the exact layouts.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from .core import AccessKind, Geometry


class AddressOutOfRange(ValueError):
    pass


class SchemeGeometryMismatch(ValueError):
    pass


class FieldOutOfRange(ValueError):
    pass


class ConflictClass(Enum):
    RR = "RR"
    RW = "RW"
    WW = "WW"
    NONE = "no-conflict"

    def __str__(self) -> str:
        return self.value


FIELD_NAMES = ("channel", "rank", "bank", "partition", "row", "column", "byte")

# Field orders, most-significant first. Widths come from the geometry
# (byte width is the scheme's own, 6 bits by default = 64B cache line).
_FIELD_ORDERS = {
    "DEFAULT_MICRON": ("rank", "row", "column", "partition", "bank", "channel", "byte"),
    "ROW_INTERLEAVED": ("rank", "row", "partition", "bank", "channel", "column", "byte"),
    "BLOCK_INTERLEAVED": ("rank", "row", "partition", "column", "bank", "channel", "byte"),
}


@dataclass(frozen=True, slots=True)
class DecodedAddress:
    channel: int = 0
    rank: int = 0
    bank: int = 0
    partition: int = 0
    row: int = 0
    column: int = 0
    byte_in_line: int = 0


@dataclass(frozen=True)
class MappingScheme:
    """Ordered (field, hi, lo) bit slices covering the address width."""

    name: str
    fields: tuple  # of (field, hi_bit, lo_bit), most-significant first

    def __post_init__(self):
        covered = 0
        expect_hi = None
        for field, hi, lo in self.fields:
            if field not in FIELD_NAMES:
                raise ValueError(f"unknown address field {field!r}")
            if hi < lo:
                raise ValueError(f"field {field}: hi bit {hi} below lo bit {lo}")
            if expect_hi is not None and hi != expect_hi:
                raise ValueError(
                    f"field {field}: bit ranges must be contiguous, "
                    f"expected hi bit {expect_hi}, got {hi}"
                )
            expect_hi = lo - 1
            covered += hi - lo + 1
        if expect_hi != -1:
            raise ValueError("bit ranges must extend down to bit 0")
        names = [f for f, _, _ in self.fields]
        if len(names) != len(set(names)):
            raise ValueError("duplicate address fields in scheme")

    @property
    def address_bits(self) -> int:
        return self.fields[0][1] + 1 if self.fields else 0

    def width_of(self, field: str) -> int:
        for name, hi, lo in self.fields:
            if name == field:
                return hi - lo + 1
        return 0

    @classmethod
    def for_geometry(cls, name: str, g: Geometry, byte_bits: int = 6) -> "MappingScheme":
        if name not in _FIELD_ORDERS:
            raise ValueError(f"unknown scheme name {name!r}")
        widths = {f: g.field_bits(f) for f in FIELD_NAMES if f != "byte"}
        widths["byte"] = byte_bits
        slices = []
        lo = sum(widths[f] for f in _FIELD_ORDERS[name])
        for field in _FIELD_ORDERS[name]:
            w = widths[field]
            if w == 0:
                continue
            slices.append((field, lo - 1, lo - w))
            lo -= w
        return cls(name, tuple(slices))

    @classmethod
    def default_micron(cls) -> "MappingScheme":
        return cls.for_geometry("DEFAULT_MICRON", Geometry())

    @classmethod
    def custom(cls, fields) -> "MappingScheme":
        return cls("CUSTOM", tuple((f, int(hi), int(lo)) for f, hi, lo in fields))


@lru_cache(maxsize=64)
def _check_scheme(scheme: MappingScheme, g: Geometry) -> None:
    for field in FIELD_NAMES:
        if field == "byte":
            continue
        want = g.field_bits(field)
        got = scheme.width_of(field)
        if got != want:
            raise SchemeGeometryMismatch(
                f"scheme {scheme.name} gives {got} bits to {field}, "
                f"geometry needs {want}"
            )


@lru_cache(maxsize=64)
def _slices(scheme: MappingScheme):
    return tuple(
        (field, lo, (1 << (hi - lo + 1)) - 1) for field, hi, lo in scheme.fields
    )


def decode(addr: int, scheme: MappingScheme, g: Geometry) -> DecodedAddress:
    """Slice a physical address into its coordinate fields."""
    _check_scheme(scheme, g)
    if addr < 0 or addr >= (1 << scheme.address_bits):
        raise AddressOutOfRange(
            f"address {addr:#x} outside {scheme.address_bits}-bit range"
        )
    values = {"channel": 0, "rank": 0, "bank": 0, "partition": 0,
              "row": 0, "column": 0, "byte": 0}
    for field, lo, mask in _slices(scheme):
        values[field] = (addr >> lo) & mask
    return DecodedAddress(
        values["channel"], values["rank"], values["bank"], values["partition"],
        values["row"], values["column"], values["byte"],
    )


def encode(d: DecodedAddress, scheme: MappingScheme, g: Geometry) -> int:
    """Inverse of decode: decode(encode(d)) == d for in-range inputs."""
    _check_scheme(scheme, g)
    values = {
        "channel": d.channel,
        "rank": d.rank,
        "bank": d.bank,
        "partition": d.partition,
        "row": d.row,
        "column": d.column,
        "byte": d.byte_in_line,
    }
    addr = 0
    for field, hi, lo in scheme.fields:
        v = values[field]
        if v < 0 or v >= (1 << (hi - lo + 1)):
            raise FieldOutOfRange(
                f"{field}={v} does not fit in bits [{hi}:{lo}]"
            )
        addr |= v << lo
    # Zero-width fields (count 1) must hold index 0.
    for field, v in values.items():
        if field != "byte" and scheme.width_of(field) == 0 and v != 0:
            raise FieldOutOfRange(f"{field}={v} but geometry allows only index 0")
    return addr


def global_bank(d: DecodedAddress, g: Geometry) -> int:
    return g.global_bank(d.channel, d.rank, d.bank)


def conflict_kind(
    a: DecodedAddress,
    a_kind: AccessKind,
    b: DecodedAddress,
    b_kind: AccessKind,
    g: Geometry,
) -> ConflictClass:
    """Bank-conflict class of two accesses; partition does not matter here."""
    if global_bank(a, g) != global_bank(b, g):
        return ConflictClass.NONE
    return kind_pair_class(a_kind, b_kind)


def kind_pair_class(a_kind: AccessKind, b_kind: AccessKind) -> ConflictClass:
    reads = (a_kind is AccessKind.READ) + (b_kind is AccessKind.READ)
    return (ConflictClass.WW, ConflictClass.RW, ConflictClass.RR)[reads]
