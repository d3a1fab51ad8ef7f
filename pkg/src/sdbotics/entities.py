"""Live entities runner: the grid world's robots as TCP clients of a
controller.

One process drives every robot in the world file off a single clock.
Per tick each robot drains its socket (commands are buffered and ACKed,
stats requests answered), the world advances once, and each robot sends
its telemetry. Frames are only read when the socket is readable, so a
slow controller never desynchronizes the frame stream.
"""

from __future__ import annotations

import json
import select
import time
from pathlib import Path

from sdbotics.codec import (
    ActionCode,
    MsgType,
    OpenBotsPacket,
    RobotCoefficients,
    decode_packet,
    encode_packet,
)
from sdbotics.transport import ControllerClient, recv_frame
from sdbotics.world import (
    RobotState,
    WorldState,
    deliver,
    drain_telemetry,
    make_telemetry,
    step_world,
    trace_line,
)


class RegistrationRefused(Exception):
    code = "REGISTRATION_REFUSED"


def _hello_frame(r: RobotState) -> bytes:
    hello = OpenBotsPacket(
        msg_type=MsgType.HELLO,
        coefficients=RobotCoefficients(robot_id=r.robot_id, ip_addr=r.ip, data=r.vendor),
        action=ActionCode.NOP,
        stats=r.next_stats(),
    )
    return encode_packet(hello)


def _stats_reply(r: RobotState) -> bytes:
    body = {
        "buffered": len(r.buffer),
        "checksum_errors": r.checksum_errors,
        "decode_errors": r.decode_errors,
        "rows_executed": r.rows_executed,
        "rows_skipped": r.rows_skipped,
        "faults": list(r.faults),
    }
    pkt = OpenBotsPacket(
        msg_type=MsgType.STATS_REP,
        coefficients=RobotCoefficients(robot_id=r.robot_id, ip_addr=r.ip,
                                       data=json.dumps(body)),
        action=ActionCode.NOP,
        stats=r.next_stats(),
    )
    return encode_packet(pkt)


def register_fleet(world: WorldState, host: str, port: int) -> dict[int, ControllerClient]:
    """Connect one client per robot and complete the HELLO/ACK handshake.
    Raises RegistrationRefused (closing all sockets) if any robot is
    turned away."""
    clients: dict[int, ControllerClient] = {}
    try:
        for rid in sorted(world.robots):
            r = world.robots[rid]
            client = ControllerClient(host, port)
            clients[rid] = client
            client.send(_hello_frame(r))
            reply = client.recv(timeout=5)
            if reply is None:
                raise RegistrationRefused(f"robot {rid}: no ACK for HELLO")
            ack = decode_packet(reply)
            status = json.loads(ack.coefficients.data).get("status")
            if status != "OK":
                raise RegistrationRefused(f"robot {rid}: controller said {status}")
    except Exception:
        for client in clients.values():
            client.close()
        raise
    return clients


def _drain(world: WorldState, rid: int, client: ControllerClient, window: float) -> None:
    """Read every frame already queued for this robot. A readability
    check guards each blocking read so partial frames are never
    abandoned mid-stream."""
    sock = client.sock
    sock.settimeout(None)
    deadline = time.monotonic() + window
    while True:
        remaining = max(0.0, deadline - time.monotonic())
        readable, _, _ = select.select([sock], [], [], remaining)
        if not readable:
            return
        frame = recv_frame(sock)
        if frame is None:
            return  # controller hung up
        # byte 3 of the header is msg_type; stats requests are session
        # chatter, everything else goes through the robot's inbound path
        if len(frame) > 3 and frame[3] == MsgType.STATS_REQ:
            client.send(_stats_reply(world.robots[rid]))
            continue
        ack = deliver(world, rid, frame)
        if ack is not None:
            client.send(ack)


def run_fleet(
    world: WorldState,
    host: str,
    port: int,
    ticks: int,
    tick_interval: float = 0.0,
    trace_path: str | Path | None = None,
    drain_window: float = 0.02,
) -> WorldState:
    """Register every robot, then run the shared clock for `ticks` ticks.
    Returns the final world state."""
    clients = register_fleet(world, host, port)
    trace_file = open(trace_path, "w") if trace_path else None
    try:
        if trace_file is not None:
            # open with the pre-run pose so a round trip reads first == last
            for rid in sorted(world.robots):
                trace_file.write(trace_line(world, world.robots[rid]) + "\n")
        for _ in range(ticks):
            for rid in sorted(clients):
                _drain(world, rid, clients[rid], drain_window)
            step_world(world)
            for pkt in drain_telemetry(world):
                clients[pkt.coefficients.robot_id].send(encode_packet(pkt))
            if trace_file is not None:
                for rid in sorted(world.robots):
                    trace_file.write(trace_line(world, world.robots[rid]) + "\n")
            if tick_interval > 0:
                time.sleep(tick_interval)
    finally:
        if trace_file is not None:
            trace_file.close()
        for client in clients.values():
            client.close()
    return world
