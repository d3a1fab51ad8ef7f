"""Deterministic 2-D grid world for simulated robot entities.

The world advances in integer ticks. Per tick, each robot (in ascending
id order) runs two phases:

  row phase     if no row is active, dequeue the next buffered COMMAND,
                check its execution gates (power, sensor, actuator),
                translate it through the robot's vendor profile, and run
                the resulting ops until one blocks (await_touch, home) or
                the row is exhausted. Every row occupies at least the
                tick it was dequeued on.
  motion phase  a powered robot cruises speed-1 cells along its cardinal
                heading (dir 2 reverses), clamped at the grid edge. A
                homing step consumes the tick's motion instead.

Geometry: x grows east, y grows north, heading 0 = +x and 90 = +y,
rotation arguments are clockwise. Headings snap to the nearest cardinal
for movement. Grid cells hold at most one object; robots do not collide.

Pose never changes while a robot is powered off.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from sdbotics.codec import (
    ActionCode,
    ChecksumMismatch,
    MsgType,
    OpenBotsError,
    OpenBotsPacket,
    PacketStats,
    RobotCoefficients,
    decode_packet,
    encode_packet,
)
from sdbotics.vendors import Op, VendorProfile, get_profile, translate

BUFFER_CAPACITY = 256
MAILBOX_LIMIT = 1024

# Unit vectors for headings 0/90/180/270.
_CARDINALS = ((1, 0), (0, 1), (-1, 0), (0, -1))


class WorldError(Exception):
    code = "WORLD_INVALID"


def cells_per_tick(speed: int) -> int:
    """Speed code -> cells moved per tick (1 = stop)."""
    return speed - 1


def snap_cardinal(heading: int) -> tuple[int, int]:
    """Nearest cardinal unit vector for an arbitrary heading."""
    return _CARDINALS[((heading + 45) // 90) % 4]


@dataclass
class RowRun:
    """An in-progress row: its ops and the index of the next op."""

    ops: list[Op]
    idx: int = 0
    sequence: int = 0

    def done(self) -> bool:
        return self.idx >= len(self.ops)


@dataclass
class RobotState:
    robot_id: int
    x: int
    y: int
    heading: int
    vendor: str
    ip: str = "0.0.0.0"
    powered: bool = False
    speed: int = 1
    dir: int = 1
    holding: str | None = None
    start_pose: tuple[int, int, int] | None = None
    buffer: deque = field(default_factory=deque)
    active: RowRun | None = None
    faults: list[str] = field(default_factory=list)
    checksum_errors: int = 0
    decode_errors: int = 0
    rows_executed: int = 0
    rows_skipped: int = 0
    out_sequence: int = 0
    out_counter: int = 0

    def profile(self) -> VendorProfile:
        return get_profile(self.vendor)

    def next_stats(self) -> PacketStats:
        self.out_sequence += 1
        self.out_counter += 1
        return PacketStats(sequence=self.out_sequence, counter=self.out_counter)


@dataclass
class WorldState:
    width: int
    height: int
    robots: dict[int, RobotState] = field(default_factory=dict)
    objects: dict[str, tuple[int, int]] = field(default_factory=dict)
    links: list[tuple[str, str, float]] = field(default_factory=list)
    tick: int = 0
    seed: int = 0
    # (robot_id, action, data) events produced during step_world, drained
    # by the transport layer into TELEMETRY packets.
    outbox: list[tuple[int, ActionCode, str]] = field(default_factory=list)

    def object_at(self, x: int, y: int) -> str | None:
        for oid, pos in self.objects.items():
            if pos == (x, y):
                return oid
        return None

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


def load_world(source: str | Path | dict) -> WorldState:
    """Build a WorldState from a world file (or an already-parsed dict).

    Schema: {"grid": {"w", "h"}, "robots": [{"id", "x", "y", "heading",
    "vendor", "ip"?}], "objects": [{"id", "x", "y"}], "links": [{"a",
    "b", "w"}]?, "seed"?}.
    """
    if isinstance(source, (str, Path)):
        raw = json.loads(Path(source).read_text())
    else:
        raw = source
    try:
        grid = raw["grid"]
        w = WorldState(width=int(grid["w"]), height=int(grid["h"]), seed=int(raw.get("seed", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise WorldError(f"bad grid spec: {exc}") from exc
    if w.width < 1 or w.height < 1:
        raise WorldError("grid dimensions must be positive")
    for spec in raw.get("robots", []):
        rid = int(spec["id"])
        if rid in w.robots:
            raise WorldError(f"duplicate robot id {rid}")
        r = RobotState(
            robot_id=rid,
            x=int(spec["x"]),
            y=int(spec["y"]),
            heading=int(spec["heading"]) % 360,
            vendor=str(spec["vendor"]),
            ip=str(spec.get("ip", "0.0.0.0")),
        )
        if not w.in_bounds(r.x, r.y):
            raise WorldError(f"robot {rid} starts outside the grid")
        try:
            get_profile(r.vendor)  # fail fast on unknown vendors
        except Exception as exc:
            raise WorldError(f"robot {rid}: {exc}") from exc
        w.robots[rid] = r
    for spec in raw.get("objects", []):
        oid = str(spec["id"])
        pos = (int(spec["x"]), int(spec["y"]))
        if oid in w.objects:
            raise WorldError(f"duplicate object id {oid}")
        if not w.in_bounds(*pos):
            raise WorldError(f"object {oid} outside the grid")
        if w.object_at(*pos) is not None:
            raise WorldError(f"cell {pos} holds more than one object")
        w.objects[oid] = pos
    for spec in raw.get("links", []):
        w.links.append((str(spec["a"]), str(spec["b"]), float(spec["w"])))
    return w


# --- inbound packets ---

def enqueue(w: WorldState, robot_id: int, pkt: OpenBotsPacket) -> str:
    """FIFO-append a COMMAND to one robot's buffer. Returns the ACK
    status: rejects the newest packet when the buffer is full."""
    r = w.robots[robot_id]
    if len(r.buffer) >= BUFFER_CAPACITY:
        return "BUFFER_FULL"
    r.buffer.append(pkt)
    return "OK"


def make_ack(r: RobotState, acked_sequence: int, status: str) -> OpenBotsPacket:
    """ACK for one received COMMAND. The acked sequence rides in the data
    payload so the ACK's own stats stay on the robot's outbound stream."""
    return OpenBotsPacket(
        msg_type=MsgType.ACK,
        coefficients=RobotCoefficients(robot_id=r.robot_id, ip_addr=r.ip,
                                       data=json.dumps({"ack": acked_sequence, "status": status})),
        action=ActionCode.NOP,
        stats=r.next_stats(),
    )


def deliver(w: WorldState, robot_id: int, frame: bytes) -> bytes | None:
    """Feed one wire frame to a robot. Corrupted frames are counted and
    dropped before they reach the buffer. Returns the encoded ACK for a
    COMMAND, None otherwise."""
    r = w.robots[robot_id]
    try:
        pkt = decode_packet(frame)
    except ChecksumMismatch:
        r.checksum_errors += 1
        return None
    except OpenBotsError:
        r.decode_errors += 1
        return None
    if pkt.msg_type is not MsgType.COMMAND:
        return None
    status = enqueue(w, robot_id, pkt)
    return encode_packet(make_ack(r, pkt.stats.sequence, status))


# --- execution gates ---

def _gate(r: RobotState, pkt: OpenBotsPacket) -> str | None:
    """Why this row must be skipped, or None if it may run."""
    if not r.powered and pkt.action is not ActionCode.ON:
        return "EXEC_WHILE_OFF"
    if pkt.action is ActionCode.TOUCH and pkt.coefficients.sensor != 1:
        return "SENSOR_MISMATCH"
    if pkt.action in (ActionCode.GRASP, ActionCode.DROP) and pkt.coefficients.actuator != 1:
        return "ACTUATOR_MISMATCH"
    return None


# --- per-tick engine ---

def step_world(w: WorldState) -> WorldState:
    """Advance one tick: row phase then motion phase for every robot, in
    ascending id order. Mutates and returns w."""
    w.tick += 1
    for rid in sorted(w.robots):
        _step_robot(w, w.robots[rid])
    return w


def _step_robot(w: WorldState, r: RobotState) -> None:
    if r.active is None and r.buffer:
        pkt = r.buffer.popleft()
        reason = _gate(r, pkt)
        if reason is not None:
            r.faults.append(f"{reason}:{pkt.action.name}:{pkt.stats.sequence}")
            r.rows_skipped += 1
        else:
            instructions = translate(pkt, r.profile())
            ops = [r.profile().parse(s) for s in instructions]
            r.active = RowRun(ops=ops, sequence=pkt.stats.sequence)
            r.rows_executed += 1
    moved = _run_ops(w, r) if r.active is not None else False
    if r.powered and not moved:
        _cruise(w, r)


def _run_ops(w: WorldState, r: RobotState) -> bool:
    """Run the active row until it blocks or finishes. Returns True when a
    homing step consumed this tick's motion."""
    run = r.active
    assert run is not None
    moved = False
    while not run.done():
        op = run.ops[run.idx]
        if op.kind == "await_touch":
            fx, fy = _front_cell(r)
            if w.object_at(fx, fy) is None:
                break  # blocked until an object faces the sensor
            run.idx += 1
        elif op.kind == "home":
            if r.start_pose is None:
                r.faults.append(f"HOME_WITHOUT_START::{run.sequence}")
                run.idx += 1
                continue
            if (r.x, r.y) != r.start_pose[:2]:
                _home_step(w, r, op.args[0])
                moved = True
                if (r.x, r.y) != r.start_pose[:2]:
                    break  # still walking
            # arrived: restore heading, stop, finish the op
            r.heading = r.start_pose[2]
            r.speed, r.dir = 1, 1
            run.idx += 1
        else:
            _apply_instant(w, r, op, run.sequence)
            run.idx += 1
    if run.done():
        r.active = None
    return moved


def _apply_instant(w: WorldState, r: RobotState, op: Op, sequence: int) -> None:
    if op.kind == "power":
        if op.args[0] == 1:
            r.powered = True
            r.start_pose = (r.x, r.y, r.heading)
            r.speed, r.dir = 1, 1
        else:
            r.powered = False
            r.speed, r.dir = 1, 1
    elif op.kind == "rotate":
        r.heading = (r.heading + op.args[0]) % 360
    elif op.kind == "motion":
        r.speed, r.dir = op.args
    elif op.kind == "grip":
        if op.args[0] == "close":
            _grasp(w, r, sequence)
        else:
            _drop(w, r, sequence)
    elif op.kind == "see":
        w.outbox.append((r.robot_id, ActionCode.SEE, _see_json(w, r)))
    elif op.kind == "send":
        w.outbox.append((r.robot_id, ActionCode.SEND, op.args[0]))
    else:
        r.faults.append(f"UNKNOWN_OP:{op.kind}:{sequence}")


def _grasp(w: WorldState, r: RobotState, sequence: int) -> None:
    if r.holding is not None:
        r.faults.append(f"GRASP_WHILE_HOLDING::{sequence}")
        return
    fx, fy = _front_cell(r)
    oid = w.object_at(fx, fy) or w.object_at(r.x, r.y)
    if oid is None:
        r.faults.append(f"GRASP_NOTHING::{sequence}")
        return
    del w.objects[oid]
    r.holding = oid


def _drop(w: WorldState, r: RobotState, sequence: int) -> None:
    if r.holding is None:
        r.faults.append(f"DROP_EMPTY::{sequence}")
        return
    if w.object_at(r.x, r.y) is not None:
        r.faults.append(f"DROP_OCCUPIED::{sequence}")
        return
    w.objects[r.holding] = (r.x, r.y)
    r.holding = None


def _see_json(w: WorldState, r: RobotState) -> str:
    report = {}
    for label, (dx, dy) in zip(("east", "north", "west", "south"), _CARDINALS):
        x, y = r.x + dx, r.y + dy
        report[label] = 1 if (w.in_bounds(x, y) and w.object_at(x, y)) else 0
    return json.dumps({"tick": w.tick, "see": report}, separators=(",", ":"))


def _front_cell(r: RobotState) -> tuple[int, int]:
    dx, dy = snap_cardinal(r.heading)
    return r.x + dx, r.y + dy


def _cruise(w: WorldState, r: RobotState) -> None:
    cells = cells_per_tick(r.speed)
    if cells <= 0:
        return
    dx, dy = snap_cardinal(r.heading)
    if r.dir == 2:
        dx, dy = -dx, -dy
    for _ in range(cells):
        nx, ny = r.x + dx, r.y + dy
        if not w.in_bounds(nx, ny):
            break  # clamp at the grid edge
        r.x, r.y = nx, ny


def _home_step(w: WorldState, r: RobotState, speed: int) -> None:
    """Walk up to speed-1 cells toward start_pose, x before y."""
    assert r.start_pose is not None
    sx, sy = r.start_pose[:2]
    for _ in range(cells_per_tick(speed)):
        if r.x != sx:
            r.x += 1 if sx > r.x else -1
        elif r.y != sy:
            r.y += 1 if sy > r.y else -1
        else:
            break


# --- telemetry ---

def pose_payload(w: WorldState, r: RobotState) -> str:
    return json.dumps(
        {
            "tick": w.tick,
            "x": r.x,
            "y": r.y,
            "heading": r.heading,
            "holding": r.holding,
            "powered": r.powered,
        },
        separators=(",", ":"),
    )


def make_telemetry(r: RobotState, action: ActionCode, data: str) -> OpenBotsPacket:
    # angle is a command-direction field; telemetry carries pose in data
    return OpenBotsPacket(
        msg_type=MsgType.TELEMETRY,
        coefficients=RobotCoefficients(robot_id=r.robot_id, speed=r.speed, dir=r.dir,
                                       ip_addr=r.ip, data=data),
        action=action,
        stats=r.next_stats(),
    )


def drain_telemetry(w: WorldState) -> list[OpenBotsPacket]:
    """One pose TELEMETRY per robot for the current tick, plus any SEND /
    SEE events the tick produced, in robot-id order."""
    events = w.outbox
    w.outbox = []
    packets: list[OpenBotsPacket] = []
    for rid in sorted(w.robots):
        r = w.robots[rid]
        packets.append(make_telemetry(r, ActionCode.NOP, pose_payload(w, r)))
        for erid, action, data in events:
            if erid == rid:
                packets.append(make_telemetry(r, action, data))
    return packets


def trace_record(w: WorldState, r: RobotState) -> dict:
    return {
        "tick": w.tick,
        "id": r.robot_id,
        "x": r.x,
        "y": r.y,
        "heading": r.heading,
        "holding": r.holding,
        "powered": r.powered,
    }


def trace_line(w: WorldState, r: RobotState) -> str:
    return json.dumps(trace_record(w, r), separators=(",", ":"))
