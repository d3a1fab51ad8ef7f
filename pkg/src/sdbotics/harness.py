"""In-process simulation rig: a controller and a grid world wired
together without sockets, driven by an explicit tick loop.

Every frame still passes through the real wire codec in both directions
(commands encoded by dispatch and decoded by the robot; ACKs and
telemetry encoded by the robot and decoded by the controller), so runs
here are byte-faithful to the live TCP stack while staying fully
deterministic. Per-robot frame and trace histories are kept as bytes to
make run-to-run isolation comparisons exact.
"""

from __future__ import annotations

from sdbotics.codec import (
    ActionCode,
    MsgType,
    OpenBotsPacket,
    RobotCoefficients,
    encode_packet,
)
from sdbotics.controller import Controller
from sdbotics.world import (
    WorldState,
    deliver,
    drain_telemetry,
    load_world,
    step_world,
    trace_line,
)


class SimHarness:
    def __init__(self, world_source, mode: str = "cloud", hub: int | None = None):
        self.world: WorldState = load_world(world_source)
        self.controller = Controller(
            mode=mode,
            hub=hub,
            links=self.world.links or None,
            send=self._queue_frame,
        )
        self._pending: dict[int, list[bytes]] = {rid: [] for rid in self.world.robots}
        self.frames_to: dict[int, list[bytes]] = {rid: [] for rid in self.world.robots}
        # traces open with the pre-run pose so a round trip reads first == last
        self.traces: dict[int, list[str]] = {
            rid: [trace_line(self.world, r)] for rid, r in self.world.robots.items()
        }
        self._register_all()

    def _register_all(self) -> None:
        for rid in sorted(self.world.robots):
            r = self.world.robots[rid]
            hello = OpenBotsPacket(
                msg_type=MsgType.HELLO,
                coefficients=RobotCoefficients(robot_id=rid, ip_addr=r.ip, data=r.vendor),
                action=ActionCode.NOP,
                stats=r.next_stats(),
            )
            replies = self.controller.handle_southbound(encode_packet(hello), link=rid)
            assert replies, f"robot {rid} registration produced no ACK"

    def _queue_frame(self, robot_id: int, frame: bytes) -> None:
        self._pending[robot_id].append(frame)
        self.frames_to[robot_id].append(frame)

    def submit(self, target: str, rows: list) -> dict:
        return self.controller.dispatch(target, rows)

    def tick(self) -> None:
        """One world tick: deliver queued frames, step, report telemetry."""
        for rid in sorted(self.world.robots):
            queued, self._pending[rid] = self._pending[rid], []
            for frame in queued:
                ack = deliver(self.world, rid, frame)
                if ack is not None:
                    self.controller.handle_southbound(ack, link=rid)
        step_world(self.world)
        for pkt in drain_telemetry(self.world):
            self.controller.handle_southbound(encode_packet(pkt), link=pkt.coefficients.robot_id)
        for rid in sorted(self.world.robots):
            self.traces[rid].append(trace_line(self.world, self.world.robots[rid]))

    def run(self, ticks: int, schedule: list[tuple[int, str, list]] = ()) -> list[dict]:
        """Advance the clock; schedule entries (tick, target, rows) are
        submitted at the start of their tick. Returns dispatch reports."""
        reports = []
        by_tick: dict[int, list[tuple[str, list]]] = {}
        for at, target, rows in schedule:
            by_tick.setdefault(at, []).append((target, rows))
        for _ in range(ticks):
            for target, rows in by_tick.get(self.world.tick + 1, []):
                reports.append(self.submit(target, rows))
            self.tick()
        return reports

    # --- byte-exact observables for isolation checks ---

    def frame_bytes(self, robot_id: int) -> bytes:
        return b"".join(self.frames_to[robot_id])

    def trace_bytes(self, robot_id: int) -> bytes:
        return ("\n".join(self.traces[robot_id]) + "\n").encode("utf-8")

    def robot_idle(self, robot_id: int) -> bool:
        r = self.world.robots[robot_id]
        return r.active is None and not r.buffer

    def run_until_idle(self, robot_id: int, max_ticks: int = 100) -> int:
        """Tick until the robot has fully consumed its program (or the
        tick budget runs out); returns ticks consumed."""
        used = 0
        while used < max_ticks:
            self.tick()
            used += 1
            if self.robot_idle(robot_id):
                return used
        return used
