"""OpenBots v1 wire codec.

Packet layout (all multi-byte integers big-endian):

    offset  size  field
    0       2     magic "OB" (0x4F 0x42)
    2       1     version = 0x01
    3       1     msg_type
    4       1     flags (bit0 = SHA-256 trailer present, other bits reserved 0)
    5       4     sequence
    9       4     counter
    13      4     robot_id
    17      1     speed
    18      1     dir
    19      2     angle
    21      1     sensor
    22      1     actuator
    23      1     ip_ver (4 or 6)
    24      16    ip_addr (IPv4 stored as ::ffff:a.b.c.d)
    40      1     action
    41      2     data_len
    43      n     data (UTF-8, n = data_len, max 1024)
    43+n    4     CRC-32 over bytes [0, 43+n)
    47+n    32    optional SHA-256 over bytes [0, 47+n), iff flags bit0

CRC-32 is the reflected IEEE polynomial, init 0xFFFFFFFF, final xor
0xFFFFFFFF (zlib.crc32). The codec is pure functions over values; it is
safe to call from any number of threads.
"""

from __future__ import annotations

import hashlib
import ipaddress
import struct
import zlib
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Union

MAGIC = b"OB"
WIRE_VERSION = 1
HEADER_LEN = 43
CRC_LEN = 4
HASH_LEN = 32
MAX_DATA_LEN = 1024
FLAG_HASH = 0x01

# header through data_len, without the variable data part
_HEADER_FMT = "!2sBBBIIIBBHBBB16sBH"
assert struct.calcsize(_HEADER_FMT) == HEADER_LEN

IPAddress = Union[ipaddress.IPv4Address, ipaddress.IPv6Address]
_V4_MAPPED_PREFIX = bytes(10) + b"\xff\xff"


class MsgType(IntEnum):
    COMMAND = 1
    TELEMETRY = 2
    ACK = 3
    HELLO = 4
    STATS_REQ = 5
    STATS_REP = 6


class ActionCode(IntEnum):
    NOP = 0
    ON = 1
    OFF = 2
    TOUCH = 3
    GRASP = 4
    DROP = 5
    SEE = 6
    SEND = 7
    RENDEZVOUS = 8


class OpenBotsError(Exception):
    """Base for every codec error; `code` is the machine-readable name."""

    code = "OPENBOTS_ERROR"


class BadMagic(OpenBotsError):
    code = "BAD_MAGIC"


class BadVersion(OpenBotsError):
    code = "BAD_VERSION"


class Truncated(OpenBotsError):
    code = "TRUNCATED"


class ChecksumMismatch(OpenBotsError):
    code = "CHECKSUM_MISMATCH"


class HashMismatch(OpenBotsError):
    code = "HASH_MISMATCH"


class InvalidField(OpenBotsError):
    code = "INVALID_FIELD"


class OversizeData(OpenBotsError):
    code = "OVERSIZE_DATA"


@dataclass(frozen=True)
class FieldViolation:
    """One range violation: which field, what was given, what is allowed."""

    field: str
    value: object
    allowed: str

    def __str__(self) -> str:
        return f"{self.field}={self.value!r} outside {self.allowed}"


@dataclass
class RobotCoefficients:
    """Programmable per-robot parameters carried by every packet.

    speed: 1=stop, 2=normal, 3=accelerated (4-5 reserved).
    dir: 1=forward, 2=backward.
    angle: rotation in degrees, 0..180.
    sensor: 1=touch, 2=proximity, 3=camera.
    actuator: 1=gripper, 2=camera-mounted motor.
    robot_id 0 is reserved for broadcast.
    """

    robot_id: int
    speed: int = 1
    dir: int = 1
    angle: int = 0
    sensor: int = 1
    actuator: int = 1
    ip_addr: IPAddress = ipaddress.IPv4Address("0.0.0.0")
    data: str = ""

    def __post_init__(self) -> None:
        if isinstance(self.ip_addr, str):
            self.ip_addr = ipaddress.ip_address(self.ip_addr)


@dataclass
class PacketStats:
    """Per-packet bookkeeping: sequence/counter are monotonic per session
    and direction. `checksum` is derived on encode and reported on decode,
    so it does not take part in equality."""

    sequence: int = 0
    counter: int = 0
    checksum: int = field(default=0, compare=False)
    hash_present: bool = False


@dataclass
class OpenBotsPacket:
    msg_type: MsgType
    coefficients: RobotCoefficients
    action: ActionCode = ActionCode.NOP
    stats: PacketStats = field(default_factory=PacketStats)


_U8 = "0..255"
_U16 = "0..65535"
_U32 = "0..4294967295"


def _in(value: object, lo: int, hi: int) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and lo <= value <= hi


def validate_coefficients(c: RobotCoefficients) -> list[FieldViolation]:
    """Check every range constraint; empty list means the value is clean.

    Violations come back in field position order (robot_id, speed, dir,
    angle, sensor, actuator, ip_addr, data). Violations are data, not
    errors: out-of-range values are constructible so they can be reported.
    """
    out: list[FieldViolation] = []
    if not _in(c.robot_id, 0, 0xFFFFFFFF):
        out.append(FieldViolation("robot_id", c.robot_id, _U32))
    if not _in(c.speed, 1, 5):
        out.append(FieldViolation("speed", c.speed, "1..5"))
    if not _in(c.dir, 1, 2):
        out.append(FieldViolation("dir", c.dir, "1..2"))
    if not _in(c.angle, 0, 180):
        out.append(FieldViolation("angle", c.angle, "0..180"))
    if not _in(c.sensor, 1, 3):
        out.append(FieldViolation("sensor", c.sensor, "1..3"))
    if not _in(c.actuator, 1, 2):
        out.append(FieldViolation("actuator", c.actuator, "1..2"))
    if not isinstance(c.ip_addr, (ipaddress.IPv4Address, ipaddress.IPv6Address)):
        out.append(FieldViolation("ip_addr", c.ip_addr, "IPv4 or IPv6 address"))
    if not isinstance(c.data, str):
        out.append(FieldViolation("data", c.data, "UTF-8 string"))
    else:
        try:
            encoded = c.data.encode("utf-8")
        except UnicodeEncodeError:
            out.append(FieldViolation("data", c.data, "UTF-8 string"))
        else:
            if len(encoded) > MAX_DATA_LEN:
                out.append(
                    FieldViolation("data", f"{len(encoded)} bytes", f"0..{MAX_DATA_LEN} bytes")
                )
    return out


def validate_packet(pkt: OpenBotsPacket) -> list[FieldViolation]:
    """Coefficient ranges plus packet-level constraints (msg_type, action,
    stats ranges, SEND needs data)."""
    out: list[FieldViolation] = []
    if not _in(int(pkt.msg_type), 1, 6):
        out.append(FieldViolation("msg_type", pkt.msg_type, "1..6"))
    out.extend(validate_coefficients(pkt.coefficients))
    if not _in(int(pkt.action), 0, 8):
        out.append(FieldViolation("action", pkt.action, "0..8"))
    elif ActionCode(pkt.action) is ActionCode.SEND and not pkt.coefficients.data:
        out.append(FieldViolation("data", pkt.coefficients.data, "non-empty for SEND"))
    if not _in(pkt.stats.sequence, 0, 0xFFFFFFFF):
        out.append(FieldViolation("sequence", pkt.stats.sequence, _U32))
    if not _in(pkt.stats.counter, 0, 0xFFFFFFFF):
        out.append(FieldViolation("counter", pkt.stats.counter, _U32))
    return out


def crc32(data: bytes) -> int:
    """IEEE CRC-32 (reflected, init 0xFFFFFFFF, final xor 0xFFFFFFFF)."""
    return zlib.crc32(data) & 0xFFFFFFFF


def _pack_ip(addr: IPAddress) -> tuple[int, bytes]:
    if isinstance(addr, ipaddress.IPv4Address):
        return 4, _V4_MAPPED_PREFIX + addr.packed
    return 6, addr.packed


def encode_packet(pkt: OpenBotsPacket) -> bytes:
    """Serialize a packet to its wire bytes.

    Raises OversizeData when data exceeds 1024 UTF-8 bytes and InvalidField
    for any other range violation.
    """
    violations = validate_packet(pkt)
    for v in violations:
        if v.field == "data" and "bytes" in v.allowed:
            raise OversizeData(str(v))
    if violations:
        raise InvalidField("; ".join(str(v) for v in violations))

    c = pkt.coefficients
    data = c.data.encode("utf-8")
    ip_ver, ip_bytes = _pack_ip(c.ip_addr)
    flags = FLAG_HASH if pkt.stats.hash_present else 0
    head = struct.pack(
        _HEADER_FMT,
        MAGIC,
        WIRE_VERSION,
        int(pkt.msg_type),
        flags,
        pkt.stats.sequence,
        pkt.stats.counter,
        c.robot_id,
        c.speed,
        c.dir,
        c.angle,
        c.sensor,
        c.actuator,
        ip_ver,
        ip_bytes,
        int(pkt.action),
        len(data),
    )
    body = head + data
    body += struct.pack("!I", crc32(body))
    if pkt.stats.hash_present:
        body += hashlib.sha256(body).digest()
    return body


def encoded_length(data_len: int, hash_present: bool) -> int:
    """Length law: 43 + data_len + 4 + (32 if hash_present)."""
    return HEADER_LEN + data_len + CRC_LEN + (HASH_LEN if hash_present else 0)


def decode_packet(buf: bytes) -> OpenBotsPacket:
    """Parse wire bytes back into a packet.

    Total over arbitrary input: every failure raises a specific
    OpenBotsError (BAD_MAGIC, BAD_VERSION, TRUNCATED, CHECKSUM_MISMATCH,
    HASH_MISMATCH, INVALID_FIELD), never anything else. The buffer must
    hold exactly one packet.
    """
    buf = bytes(buf)
    if len(buf) < 2:
        raise Truncated(f"{len(buf)} bytes, need at least 2 for magic")
    if buf[:2] != MAGIC:
        raise BadMagic(f"magic {buf[:2]!r}")
    if len(buf) < 3:
        raise Truncated("missing version byte")
    if buf[2] != WIRE_VERSION:
        raise BadVersion(f"version {buf[2]}, expected {WIRE_VERSION}")
    if len(buf) < HEADER_LEN:
        raise Truncated(f"{len(buf)} bytes, header needs {HEADER_LEN}")

    (
        _magic,
        _version,
        msg_type,
        flags,
        sequence,
        counter,
        robot_id,
        speed,
        dir_,
        angle,
        sensor,
        actuator,
        ip_ver,
        ip_bytes,
        action,
        data_len,
    ) = struct.unpack(_HEADER_FMT, buf[:HEADER_LEN])

    if flags & ~FLAG_HASH:
        raise InvalidField(f"reserved flag bits set: 0x{flags:02x}")
    hash_present = bool(flags & FLAG_HASH)

    expected = encoded_length(data_len, hash_present)
    if len(buf) != expected:
        raise Truncated(f"length mismatch: {len(buf)} bytes, layout says {expected}")

    crc_off = HEADER_LEN + data_len
    (stored_crc,) = struct.unpack("!I", buf[crc_off : crc_off + CRC_LEN])
    actual_crc = crc32(buf[:crc_off])
    if stored_crc != actual_crc:
        raise ChecksumMismatch(f"stored 0x{stored_crc:08x}, computed 0x{actual_crc:08x}")

    if hash_present:
        hashed_end = crc_off + CRC_LEN
        if buf[hashed_end:] != hashlib.sha256(buf[:hashed_end]).digest():
            raise HashMismatch("SHA-256 trailer does not match")

    if data_len > MAX_DATA_LEN:
        raise InvalidField(f"data_len {data_len} exceeds {MAX_DATA_LEN}")
    try:
        data = buf[HEADER_LEN:crc_off].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidField(f"data is not valid UTF-8: {exc}") from None

    if ip_ver == 4:
        if ip_bytes[:12] != _V4_MAPPED_PREFIX:
            raise InvalidField("ip_ver=4 but address is not IPv4-mapped")
        ip_addr: IPAddress = ipaddress.IPv4Address(ip_bytes[12:])
    elif ip_ver == 6:
        ip_addr = ipaddress.IPv6Address(ip_bytes)
    else:
        raise InvalidField(f"ip_ver {ip_ver}, expected 4 or 6")

    try:
        mt = MsgType(msg_type)
    except ValueError:
        raise InvalidField(f"msg_type {msg_type} outside 1..6") from None
    try:
        ac = ActionCode(action)
    except ValueError:
        raise InvalidField(f"action {action} outside 0..8") from None

    pkt = OpenBotsPacket(
        msg_type=mt,
        coefficients=RobotCoefficients(
            robot_id=robot_id,
            speed=speed,
            dir=dir_,
            angle=angle,
            sensor=sensor,
            actuator=actuator,
            ip_addr=ip_addr,
            data=data,
        ),
        action=ac,
        stats=PacketStats(
            sequence=sequence,
            counter=counter,
            checksum=stored_crc,
            hash_present=hash_present,
        ),
    )
    violations = validate_packet(pkt)
    if violations:
        raise InvalidField("; ".join(str(v) for v in violations))
    return pkt


def hexdump(buf: bytes) -> str:
    """Human-oriented dump: hex panel plus decoded fields (or the decode
    error) for one packet. Used by the CLI `packet dump` subcommand."""
    lines = []
    for off in range(0, len(buf), 16):
        chunk = buf[off : off + 16]
        hexpart = " ".join(f"{b:02x}" for b in chunk)
        asciipart = "".join(chr(b) if 32 <= b < 127 else "." for b in chunk)
        lines.append(f"{off:08x}  {hexpart:<47}  |{asciipart}|")
    lines.append("")
    try:
        pkt = decode_packet(buf)
    except OpenBotsError as exc:
        lines.append(f"decode error: {exc.code}: {exc}")
    else:
        c = pkt.coefficients
        lines.append(f"msg_type   {pkt.msg_type.name} ({int(pkt.msg_type)})")
        lines.append(f"action     {pkt.action.name} ({int(pkt.action)})")
        lines.append(f"robot_id   {c.robot_id}")
        lines.append(f"speed      {c.speed}")
        lines.append(f"dir        {c.dir}")
        lines.append(f"angle      {c.angle}")
        lines.append(f"sensor     {c.sensor}")
        lines.append(f"actuator   {c.actuator}")
        lines.append(f"ip_addr    {c.ip_addr}")
        lines.append(f"data       {c.data!r}")
        lines.append(f"sequence   {pkt.stats.sequence}")
        lines.append(f"counter    {pkt.stats.counter}")
        lines.append(f"checksum   0x{pkt.stats.checksum:08x}")
        lines.append(f"hash       {'present' if pkt.stats.hash_present else 'absent'}")
    return "\n".join(lines)


def packet_to_dict(pkt: OpenBotsPacket) -> dict:
    """JSON-friendly view of a packet (CLI --json output)."""
    c = pkt.coefficients
    return {
        "msg_type": pkt.msg_type.name,
        "action": pkt.action.name,
        "robot_id": c.robot_id,
        "speed": c.speed,
        "dir": c.dir,
        "angle": c.angle,
        "sensor": c.sensor,
        "actuator": c.actuator,
        "ip_addr": str(c.ip_addr),
        "data": c.data,
        "sequence": pkt.stats.sequence,
        "counter": pkt.stats.counter,
        "checksum": pkt.stats.checksum,
        "hash_present": pkt.stats.hash_present,
    }
