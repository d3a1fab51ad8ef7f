"""Controller core: the registry of robot sessions, groups, topology,
global map, mailboxes and stats, plus program compilation and southbound
dispatch.

All mutations go through one lock so northbound HTTP handlers and
southbound socket readers can call in concurrently; reads return plain
dict/list snapshots that are safe to serialize after the lock is
released.

Frames leave the controller through an injectable send callback
(robot_id, frame-bytes), so the same core drives both live TCP links and
the in-process simulation harness.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from sdbotics.codec import (
    ActionCode,
    ChecksumMismatch,
    FieldViolation,
    MsgType,
    OpenBotsError,
    OpenBotsPacket,
    PacketStats,
    RobotCoefficients,
    decode_packet,
    encode_packet,
    validate_packet,
)
from sdbotics.topology import CONTROLLER_NODE, TopologyGraph, shortest_path
from sdbotics.vendors import PROFILES

LIVENESS_TICKS = 5
MAILBOX_LIMIT = 1024

MODES = ("centralized", "cloud")


class ControllerError(Exception):
    code = "CONTROLLER_ERROR"


class DuplicateId(ControllerError):
    code = "DUPLICATE_ID"


class UnknownVendor(ControllerError):
    code = "UNKNOWN_VENDOR"


class MalformedHello(ControllerError):
    code = "MALFORMED_HELLO"


class UnknownRobot(ControllerError):
    code = "UNKNOWN_ROBOT"


class UnknownGroup(ControllerError):
    code = "UNKNOWN_GROUP"


class UnknownTarget(ControllerError):
    code = "UNKNOWN_TARGET"


class EmptyGroup(ControllerError):
    code = "EMPTY_GROUP"


class MalformedPose(ControllerError):
    code = "MALFORMED_POSE"


class HopDown(ControllerError):
    code = "HOP_DOWN"

    def __init__(self, node: str):
        super().__init__(f"hop {node!r} is down")
        self.node = node


class ValidationFailed(ControllerError):
    code = "VALIDATION_FAILED"

    def __init__(self, issues: list[dict]):
        super().__init__(f"{len(issues)} row(s) failed validation")
        self.issues = issues


@dataclass
class SessionCounters:
    packets_in: int = 0
    packets_out: int = 0
    bytes_in: int = 0
    bytes_out: int = 0
    checksum_errors: int = 0
    relayed: int = 0
    delivered: int = 0
    buffer_full: int = 0
    see_reports: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RobotSession:
    robot_id: int
    vendor: str
    address: str
    link: Any = None
    last_sequence_in: int = 0
    out_sequence: int = 0
    out_counter: int = 0
    last_tick: int = -1
    latest: RobotCoefficients | None = None
    counters: SessionCounters = field(default_factory=SessionCounters)

    def next_stats(self) -> PacketStats:
        self.out_sequence += 1
        self.out_counter += 1
        return PacketStats(sequence=self.out_sequence, counter=self.out_counter)


@dataclass
class DeliveryTrace:
    path: list[str]
    hops: list[dict]
    delivered: bool


# --- program rows ---

ROW_FIELDS = ("robot", "speed", "dir", "angle", "sensor", "actuator", "ip", "data", "action")


def parse_row(row: Any) -> tuple[ActionCode, RobotCoefficients, list[FieldViolation]]:
    """One 9-field row -> (action, coefficients, violations). The leading
    robot field is a placeholder; dispatch rewrites it per target."""
    violations: list[FieldViolation] = []
    if not isinstance(row, (list, tuple)) or len(row) != 9:
        return ActionCode.NOP, RobotCoefficients(robot_id=0), [
            FieldViolation("row", row, "9-field list (robot, speed, dir, angle, sensor, actuator, ip, data, action)")
        ]
    _, speed, dir_, angle, sensor, actuator, ip, data, action_name = row

    def as_int(name: str, value: Any) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            violations.append(FieldViolation(name, value, "integer"))
            return 1
        return value

    speed = as_int("speed", speed)
    dir_ = as_int("dir", dir_)
    angle = as_int("angle", angle)
    sensor = as_int("sensor", sensor)
    actuator = as_int("actuator", actuator)

    try:
        action = ActionCode[str(action_name)]
    except KeyError:
        violations.append(FieldViolation("action", action_name,
                                         "one of " + ", ".join(a.name for a in ActionCode)))
        action = ActionCode.NOP

    try:
        coefficients = RobotCoefficients(
            robot_id=0, speed=speed, dir=dir_, angle=angle,
            sensor=sensor, actuator=actuator, ip_addr=str(ip), data=str(data),
        )
    except ValueError:
        violations.append(FieldViolation("ip", ip, "IPv4 or IPv6 address"))
        coefficients = RobotCoefficients(robot_id=0, speed=speed, dir=dir_, angle=angle,
                                         sensor=sensor, actuator=actuator, data=str(data))
    if not violations:
        probe = OpenBotsPacket(msg_type=MsgType.COMMAND, coefficients=coefficients, action=action)
        violations.extend(v for v in validate_packet(probe) if v.field != "robot_id")
    return action, coefficients, violations


class Controller:
    def __init__(
        self,
        mode: str = "centralized",
        hub: int | None = None,
        links: list[tuple[str, str, float]] | None = None,
        send: Callable[[int, bytes], None] | None = None,
    ) -> None:
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.mode = mode
        self._lock = threading.RLock()
        self._send = send or (lambda rid, frame: None)
        self.robots: dict[int, RobotSession] = {}
        self.groups: dict[str, set[int]] = {}
        self.topology = TopologyGraph()
        self.topology.add_node(CONTROLLER_NODE)
        self._explicit_links = bool(links)
        for a, b, w in links or []:
            self.topology.add_edge(a, b, w)
        self._hub: str | None = str(hub) if hub is not None else None
        self._hub_fixed = hub is not None
        self.global_map: dict[int, dict] = {}
        self.mailboxes: dict[int, deque] = {}
        self.world_tick = 0
        self.dispatches = 0
        self.checksum_errors = 0
        self.protocol_errors = 0
        self.link_counters: dict[str, int] = {}
        # controller-stream stats for packets sent outside any session
        self._ctl_sequence = 0
        self._ctl_counter = 0

    def set_send(self, send: Callable[[int, bytes], None]) -> None:
        """Install the delivery callback (live socket write or harness)."""
        self._send = send

    # --- registration (the set S) ---

    def register_robot(self, hello: OpenBotsPacket, address: str, link: Any = None) -> RobotSession:
        if hello.msg_type is not MsgType.HELLO or not hello.coefficients.data:
            raise MalformedHello("HELLO must carry the vendor name in data")
        vendor = hello.coefficients.data
        rid = hello.coefficients.robot_id
        with self._lock:
            if rid in self.robots:
                raise DuplicateId(f"robot {rid} already registered")
            if vendor not in PROFILES:
                raise UnknownVendor(f"vendor {vendor!r} has no profile")
            session = RobotSession(robot_id=rid, vendor=vendor, address=address, link=link)
            session.last_sequence_in = hello.stats.sequence
            session.latest = hello.coefficients
            self.robots[rid] = session
            self.mailboxes[rid] = deque(maxlen=MAILBOX_LIMIT)
            node = str(rid)
            self.topology.add_node(node)
            if not self._explicit_links:
                self._default_star_edges(node)
            return session

    def _default_star_edges(self, node: str) -> None:
        # cloud: controller talks to every robot directly. centralized:
        # one hosting robot is the hub; everyone else hangs off it.
        if self.mode == "cloud":
            self.topology.add_edge(CONTROLLER_NODE, node, 1)
            return
        if self._hub is None:
            self._hub = node
        if node == self._hub:
            self.topology.add_edge(CONTROLLER_NODE, node, 1)
        else:
            self.topology.add_edge(self._hub, node, 1)

    def deregister_robot(self, robot_id: int) -> None:
        with self._lock:
            if robot_id not in self.robots:
                raise UnknownRobot(f"robot {robot_id} not registered")
            del self.robots[robot_id]
            self.mailboxes.pop(robot_id, None)
            self.global_map.pop(robot_id, None)
            for members in self.groups.values():
                members.discard(robot_id)
            node = str(robot_id)
            self.topology.remove_node(node)
            if self._hub == node and not self._hub_fixed:
                self._hub = None

    # --- groups ---

    def define_group(self, name: str, ids: list[int]) -> None:
        if not name or ":" in name or name == "all":
            raise UnknownTarget(f"invalid group name {name!r}")
        if not ids:
            raise EmptyGroup("a group needs at least one member")
        with self._lock:
            missing = sorted(set(ids) - set(self.robots))
            if missing:
                raise UnknownRobot(f"unregistered robot ids: {missing}")
            self.groups[name] = set(ids)

    def remove_group(self, name: str) -> None:
        with self._lock:
            if name not in self.groups:
                raise UnknownGroup(f"group {name!r} not defined")
            del self.groups[name]

    def resolve_target(self, target: str) -> list[int]:
        with self._lock:
            if target == "all":
                return sorted(self.robots)
            kind, sep, rest = target.partition(":")
            if not sep or not rest:
                raise UnknownTarget(f"target {target!r} is not robot:<id>, group:<name> or all")
            if kind == "robot":
                try:
                    rid = int(rest)
                except ValueError:
                    raise UnknownTarget(f"robot id {rest!r} is not an integer") from None
                if rid not in self.robots:
                    raise UnknownRobot(f"robot {rid} not registered")
                return [rid]
            if kind == "group":
                if rest not in self.groups:
                    raise UnknownGroup(f"group {rest!r} not defined")
                members = sorted(self.groups[rest])
                if not members:
                    raise EmptyGroup(f"group {rest!r} has no members")
                return members
            raise UnknownTarget(f"unknown target kind {kind!r}")

    # --- compile + dispatch ---

    def compile_program(self, target: str, rows: list) -> tuple[list[int], dict[int, list[OpenBotsPacket]]]:
        """Validate rows and build per-robot packet lists with fresh
        session sequence numbers, robot_id rewritten per target."""
        with self._lock:
            ids = self.resolve_target(target)
            parsed = []
            issues = []
            for index, row in enumerate(rows):
                action, coefficients, violations = parse_row(row)
                if violations:
                    issues.append({
                        "row": index,
                        "violations": [
                            {"field": v.field, "value": repr(v.value), "allowed": v.allowed}
                            for v in violations
                        ],
                    })
                parsed.append((action, coefficients))
            if issues:
                raise ValidationFailed(issues)
            per_robot: dict[int, list[OpenBotsPacket]] = {}
            for rid in ids:
                session = self.robots[rid]
                packets = []
                for action, coefficients in parsed:
                    stats = session.next_stats()
                    c = RobotCoefficients(
                        robot_id=rid, speed=coefficients.speed, dir=coefficients.dir,
                        angle=coefficients.angle, sensor=coefficients.sensor,
                        actuator=coefficients.actuator, ip_addr=coefficients.ip_addr,
                        data=coefficients.data,
                    )
                    packets.append(OpenBotsPacket(msg_type=MsgType.COMMAND,
                                                  coefficients=c, action=action, stats=stats))
                per_robot[rid] = packets
            return ids, per_robot

    def dispatch(self, target: str, rows: list) -> dict:
        """compile_program + forward every packet. Returns the dispatch
        report handed back to the northbound caller."""
        with self._lock:
            ids, per_robot = self.compile_program(target, rows)
            report_robots: dict[str, dict] = {}
            total = 0
            for rid in ids:
                packets = per_robot[rid]
                path, _cost = shortest_path(self.topology, CONTROLLER_NODE, str(rid))
                first_sequence = packets[0].stats.sequence if packets else None
                for pkt in packets:
                    self.forward_packet(encode_packet(pkt), path)
                report_robots[str(rid)] = {
                    "packets": len(packets),
                    "first_sequence": first_sequence,
                    "path": path,
                }
                total += len(packets)
            self.dispatches += 1
            return {
                "target": target,
                "rows": len(rows),
                "robots": report_robots,
                "packets_total": total,
            }

    def forward_packet(self, frame: bytes, path: list[str]) -> DeliveryTrace:
        """Walk the packet along a topology path, updating relay and
        delivery counters; the final hop hands the frame to the send
        callback. Raises HopDown if an intermediate or final robot node
        has no live session."""
        with self._lock:
            hops = []
            trace = DeliveryTrace(path=list(path), hops=hops, delivered=False)
            for prev, node in zip(path, path[1:]):
                session = self.robots.get(int(node)) if node != CONTROLLER_NODE else None
                if node != CONTROLLER_NODE and session is None:
                    self.protocol_errors += 1
                    raise HopDown(node)
                hops.append({"node": node, "tick": self.world_tick, "bytes": len(frame)})
                if node == path[-1]:
                    session.counters.delivered += 1
                    session.counters.packets_out += 1
                    session.counters.bytes_out += len(frame)
                else:
                    session.counters.relayed += 1
                self._link_count(prev, node)
            trace.delivered = True
            self._send(int(path[-1]), frame)
            return trace

    def _link_count(self, a: str, b: str) -> None:
        key = "-".join(sorted((a, b)))
        self.link_counters[key] = self.link_counters.get(key, 0) + 1

    def request_stats(self, robot_id: int) -> None:
        """Send a STATS_REQ to one robot; its STATS_REP lands in the
        session's latest-coefficients snapshot when it arrives."""
        with self._lock:
            session = self.robots.get(robot_id)
            if session is None:
                raise UnknownRobot(f"robot {robot_id} not registered")
            pkt = OpenBotsPacket(
                msg_type=MsgType.STATS_REQ,
                coefficients=RobotCoefficients(robot_id=robot_id),
                action=ActionCode.NOP,
                stats=session.next_stats(),
            )
            path, _ = shortest_path(self.topology, CONTROLLER_NODE, str(robot_id))
            self.forward_packet(encode_packet(pkt), path)

    # --- telemetry ---

    def record_telemetry(self, pkt: OpenBotsPacket) -> None:
        rid = pkt.coefficients.robot_id
        with self._lock:
            session = self.robots.get(rid)
            if session is None:
                raise UnknownRobot(f"telemetry from unregistered robot {rid}")
            session.last_sequence_in = pkt.stats.sequence
            session.latest = pkt.coefficients
            if pkt.action is ActionCode.SEND:
                self.mailboxes[rid].append(pkt.coefficients.data)
                return
            if pkt.action is ActionCode.SEE:
                session.counters.see_reports += 1
                return
            try:
                pose = json.loads(pkt.coefficients.data)
                tick = int(pose["tick"])
                record = {
                    "tick": tick,
                    "x": int(pose["x"]),
                    "y": int(pose["y"]),
                    "heading": int(pose["heading"]),
                    "holding": pose.get("holding"),
                    "powered": bool(pose.get("powered", False)),
                }
            except (ValueError, TypeError, KeyError) as exc:
                raise MalformedPose(f"bad pose payload from robot {rid}: {exc}") from exc
            self.world_tick = max(self.world_tick, tick)
            if tick > session.last_tick:
                session.last_tick = tick
            stored = self.global_map.get(rid)
            if stored is None or tick > stored["tick"]:
                self.global_map[rid] = record

    # --- southbound frame handling ---

    def handle_southbound(self, raw: bytes, link: Any = None, address: str = "") -> list[bytes]:
        """Process one frame from a robot link; returns reply frames to
        write back on the same link."""
        try:
            pkt = decode_packet(raw)
        except ChecksumMismatch:
            with self._lock:
                self.checksum_errors += 1
                session = self._session_for_link(link)
                if session is not None:
                    session.counters.checksum_errors += 1
            return []
        except OpenBotsError:
            with self._lock:
                self.protocol_errors += 1
            return []

        with self._lock:
            session = self.robots.get(pkt.coefficients.robot_id)
            if session is not None:
                session.counters.packets_in += 1
                session.counters.bytes_in += len(raw)

        if pkt.msg_type is MsgType.HELLO:
            return [self._handle_hello(pkt, link, address)]
        if pkt.msg_type is MsgType.TELEMETRY:
            try:
                self.record_telemetry(pkt)
            except ControllerError:
                with self._lock:
                    self.protocol_errors += 1
            return []
        if pkt.msg_type is MsgType.ACK:
            self._handle_ack(pkt)
            return []
        if pkt.msg_type is MsgType.STATS_REP:
            with self._lock:
                session = self.robots.get(pkt.coefficients.robot_id)
                if session is not None:
                    session.latest = pkt.coefficients
            return []
        with self._lock:
            self.protocol_errors += 1
        return []

    def _session_for_link(self, link: Any) -> RobotSession | None:
        if link is None:
            return None
        for session in self.robots.values():
            if session.link is link:
                return session
        return None

    def _handle_hello(self, pkt: OpenBotsPacket, link: Any, address: str) -> bytes:
        try:
            session = self.register_robot(pkt, address=address, link=link)
            stats = session.next_stats()
            body = {"ack": pkt.stats.sequence, "status": "OK"}
        except ControllerError as exc:
            with self._lock:
                self._ctl_sequence += 1
                self._ctl_counter += 1
                stats = PacketStats(sequence=self._ctl_sequence, counter=self._ctl_counter)
            body = {"ack": pkt.stats.sequence, "status": exc.code}
        reply = OpenBotsPacket(
            msg_type=MsgType.ACK,
            coefficients=RobotCoefficients(robot_id=pkt.coefficients.robot_id,
                                           data=json.dumps(body)),
            action=ActionCode.NOP,
            stats=stats,
        )
        return encode_packet(reply)

    def _handle_ack(self, pkt: OpenBotsPacket) -> None:
        with self._lock:
            session = self.robots.get(pkt.coefficients.robot_id)
            if session is None:
                self.protocol_errors += 1
                return
            try:
                body = json.loads(pkt.coefficients.data)
            except ValueError:
                self.protocol_errors += 1
                return
            if body.get("status") == "BUFFER_FULL":
                session.counters.buffer_full += 1

    # --- read-side snapshots ---

    def is_alive(self, session: RobotSession) -> bool:
        if session.last_tick < 0:
            # registered but no telemetry yet: alive within the grace window
            return self.world_tick <= LIVENESS_TICKS
        return self.world_tick - session.last_tick <= LIVENESS_TICKS

    def robots_view(self) -> list[dict]:
        with self._lock:
            return [
                {
                    "robot_id": rid,
                    "vendor": s.vendor,
                    "address": s.address,
                    "alive": self.is_alive(s),
                    "last_tick": s.last_tick,
                }
                for rid, s in sorted(self.robots.items())
            ]

    def groups_view(self) -> dict:
        with self._lock:
            return {name: sorted(members) for name, members in sorted(self.groups.items())}

    def map_view(self) -> dict:
        with self._lock:
            return {str(rid): dict(rec) for rid, rec in sorted(self.global_map.items())}

    def drain_mailbox(self, robot_id: int) -> list[str]:
        with self._lock:
            if robot_id not in self.robots:
                raise UnknownRobot(f"robot {robot_id} not registered")
            box = self.mailboxes[robot_id]
            out = list(box)
            box.clear()
            return out

    def path_view(self, src: str, dst: str) -> dict:
        with self._lock:
            path, cost = shortest_path(self.topology, src, dst)
            return {"path": path, "cost": cost}

    def stats_snapshot(self) -> dict:
        with self._lock:
            return {
                "mode": self.mode,
                "registered": len(self.robots),
                "uptime_ticks": self.world_tick,
                "dispatches": self.dispatches,
                "checksum_errors": self.checksum_errors,
                "protocol_errors": self.protocol_errors,
                "links": dict(sorted(self.link_counters.items())),
                "sessions": {
                    str(rid): {
                        "vendor": s.vendor,
                        "alive": self.is_alive(s),
                        "last_tick": s.last_tick,
                        **s.counters.as_dict(),
                    }
                    for rid, s in sorted(self.robots.items())
                },
            }
