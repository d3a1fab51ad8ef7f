"""Vendor translation profiles.

A robot stores unified COMMAND packets in its buffer and translates each
one into its manufacturer's instruction strings before execution. Every
profile compiles a row into the same ordered primitive ops; only the
instruction syntax differs, which is what keeps behavior identical across
vendors for the same program.

Primitive ops:

    power <0|1>          power down/up (power-up records the start pose
                         and resets motion to stopped)
    rotate <deg>         relative clockwise turn, applied at row start
    motion <speed> <dir> set cruise parameters (speed 1 = stop)
    await_touch <sensor> block until the front cell holds an object, then
                         continue (the following motion op is what makes
                         "stop on touch" work)
    grip <close|open>    grasp the front/current-cell object / drop it
    see                  emit a 4-neighborhood occupancy report
    send <text>          emit text to the user mailbox
    home <speed>         walk a deterministic Manhattan path back to the
                         start pose, then restore the start heading

Row compilation: the row's angle turns the robot when the row starts and
its speed/dir become the cruise parameters, except that TOUCH applies its
motion only on completion and RENDEZVOUS walks instead of cruising. An ON
row with stop/forward coefficients emits the bare power-up, since power-up
already resets motion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from sdbotics.codec import ActionCode, OpenBotsPacket, RobotCoefficients


class Untranslatable(Exception):
    """A profile's table has no entry for a primitive op: a profile
    construction bug, not a runtime condition."""

    code = "UNTRANSLATABLE"


@dataclass(frozen=True)
class Op:
    kind: str
    args: tuple = ()


def row_ops(action: ActionCode, c: RobotCoefficients) -> list[Op]:
    """Shared semantic emission: the ordered primitives for one row."""
    ops: list[Op] = []

    def rot() -> None:
        if c.angle != 0:
            ops.append(Op("rotate", (c.angle,)))

    def mov() -> None:
        ops.append(Op("motion", (c.speed, c.dir)))

    if action is ActionCode.ON:
        ops.append(Op("power", (1,)))
        rot()
        if (c.speed, c.dir) != (1, 1):
            mov()
    elif action is ActionCode.OFF:
        rot()
        ops.append(Op("power", (0,)))
    elif action is ActionCode.NOP:
        rot()
        mov()
    elif action is ActionCode.TOUCH:
        rot()
        ops.append(Op("await_touch", (c.sensor,)))
        mov()
    elif action is ActionCode.GRASP:
        rot()
        mov()
        ops.append(Op("grip", ("close",)))
    elif action is ActionCode.DROP:
        rot()
        mov()
        ops.append(Op("grip", ("open",)))
    elif action is ActionCode.SEE:
        rot()
        mov()
        ops.append(Op("see"))
    elif action is ActionCode.SEND:
        rot()
        mov()
        ops.append(Op("send", (c.data,)))
    elif action is ActionCode.RENDEZVOUS:
        rot()
        ops.append(Op("home", (c.speed,)))
    else:
        raise Untranslatable(f"no emission rule for action {action!r}")
    return ops


class VendorProfile:
    """Bidirectional instruction table: primitive op -> vendor string, and
    the parser taking a vendor string back to the primitive op."""

    def __init__(
        self,
        name: str,
        table: dict[str, Callable[[Op], str]],
        parser: Callable[[str], Op],
    ) -> None:
        self.name = name
        self._table = table
        self._parser = parser

    def format_op(self, op: Op) -> str:
        fmt = self._table.get(op.kind)
        if fmt is None:
            raise Untranslatable(f"profile {self.name!r} has no entry for op {op.kind!r}")
        return fmt(op)

    def parse(self, instruction: str) -> Op:
        return self._parser(instruction)

    def check_total(self) -> None:
        """Assert the table covers every action; raises Untranslatable."""
        probe = RobotCoefficients(robot_id=1, speed=2, dir=2, angle=90, data="x")
        for action in ActionCode:
            for op in row_ops(action, probe):
                self.format_op(op)


def translate(pkt: OpenBotsPacket, profile: VendorProfile) -> list[str]:
    """Unified mnemonic -> ordered vendor instruction list. Deterministic;
    the resulting behavior is identical for every total profile."""
    return [profile.format_op(op) for op in row_ops(pkt.action, pkt.coefficients)]


# --- VendorA: terse three-letter mnemonics, decimal arguments ---

def _a_motion(op: Op) -> str:
    speed, dir_ = op.args
    return f"MOV {'F' if dir_ == 1 else 'B'} {speed - 1}"


_VENDOR_A_TABLE = {
    "power": lambda op: f"PWR {op.args[0]}",
    "rotate": lambda op: f"ROT {op.args[0]}",
    "motion": _a_motion,
    "await_touch": lambda op: f"TCH {op.args[0]}",
    "grip": lambda op: "GRP CLOSE" if op.args[0] == "close" else "GRP OPEN",
    "see": lambda op: "CAM SNAP",
    "send": lambda op: f"TXD {op.args[0]}",
    "home": lambda op: f"HOM {op.args[0] - 1}",
}


def _parse_vendor_a(instruction: str) -> Op:
    mnemonic, _, rest = instruction.partition(" ")
    if mnemonic == "PWR":
        return Op("power", (int(rest),))
    if mnemonic == "ROT":
        return Op("rotate", (int(rest),))
    if mnemonic == "MOV":
        fb, cells = rest.split(" ")
        return Op("motion", (int(cells) + 1, 1 if fb == "F" else 2))
    if mnemonic == "TCH":
        return Op("await_touch", (int(rest),))
    if mnemonic == "GRP":
        return Op("grip", ("close" if rest == "CLOSE" else "open",))
    if mnemonic == "CAM":
        return Op("see")
    if mnemonic == "TXD":
        return Op("send", (rest,))
    if mnemonic == "HOM":
        return Op("home", (int(rest) + 1,))
    raise Untranslatable(f"VendorA cannot parse {instruction!r}")


# --- VendorB: compact opcodes, space-separated hex bytes ---

_B_OPCODES = {
    "power": 0x10,
    "rotate": 0x20,
    "motion": 0x30,
    "await_touch": 0x40,
    "grip": 0x50,
    "see": 0x60,
    "send": 0x70,
    "home": 0x80,
}


def _b_format(op: Op) -> str:
    code = _B_OPCODES[op.kind]
    if op.kind == "power":
        args = [op.args[0]]
    elif op.kind == "rotate":
        # angle fits a byte (0..180)
        args = [op.args[0]]
    elif op.kind == "motion":
        args = list(op.args)
    elif op.kind == "await_touch":
        args = [op.args[0]]
    elif op.kind == "grip":
        args = [1 if op.args[0] == "close" else 0]
    elif op.kind == "see":
        args = []
    elif op.kind == "send":
        args = list(op.args[0].encode("utf-8"))
    elif op.kind == "home":
        args = [op.args[0]]
    else:
        raise Untranslatable(f"VendorB has no opcode for {op.kind!r}")
    return " ".join(f"0x{b:02x}" for b in [code] + args)


_VENDOR_B_TABLE = {kind: _b_format for kind in _B_OPCODES}


def _parse_vendor_b(instruction: str) -> Op:
    try:
        raw = [int(tok, 16) for tok in instruction.split()]
    except ValueError:
        raise Untranslatable(f"VendorB cannot parse {instruction!r}") from None
    if not raw:
        raise Untranslatable("empty VendorB instruction")
    code, args = raw[0], raw[1:]
    if code == 0x10:
        return Op("power", (args[0],))
    if code == 0x20:
        return Op("rotate", (args[0],))
    if code == 0x30:
        return Op("motion", (args[0], args[1]))
    if code == 0x40:
        return Op("await_touch", (args[0],))
    if code == 0x50:
        return Op("grip", ("close" if args[0] else "open",))
    if code == 0x60:
        return Op("see")
    if code == 0x70:
        return Op("send", (bytes(args).decode("utf-8"),))
    if code == 0x80:
        return Op("home", (args[0],))
    raise Untranslatable(f"VendorB opcode 0x{code:02x} unknown")


# --- generic: primitive ops spelled out verbatim ---

def _generic_format(op: Op) -> str:
    return " ".join([op.kind.upper()] + [repr(a) if " " in str(a) else str(a) for a in op.args])


def _parse_generic(instruction: str) -> Op:
    import ast

    parts = instruction.split(" ", 1)
    kind = parts[0].lower()
    if kind not in _B_OPCODES:
        raise Untranslatable(f"generic cannot parse {instruction!r}")
    if len(parts) == 1:
        return Op(kind)
    if kind == "send":
        raw = parts[1]
        text = ast.literal_eval(raw) if raw.startswith(("'", '"')) else raw
        return Op(kind, (text,))
    if kind == "grip":
        return Op(kind, (parts[1],))
    return Op(kind, tuple(int(tok) for tok in parts[1].split()))


VENDOR_A = VendorProfile("VendorA", _VENDOR_A_TABLE, _parse_vendor_a)
VENDOR_B = VendorProfile("VendorB", _VENDOR_B_TABLE, _parse_vendor_b)
GENERIC = VendorProfile("generic", {kind: _generic_format for kind in _B_OPCODES}, _parse_generic)

PROFILES: dict[str, VendorProfile] = {p.name: p for p in (VENDOR_A, VENDOR_B, GENERIC)}


def get_profile(name: str) -> VendorProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise Untranslatable(f"unknown vendor profile {name!r}") from None
