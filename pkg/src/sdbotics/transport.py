"""Southbound TCP transport: one length-delimited OpenBots packet per
write (u32 big-endian byte count, then the packet bytes).

SouthboundServer accepts robot connections, feeds inbound frames to the
controller, and gives the controller a send callback that writes to the
session's connection. A dropped connection never deregisters the robot;
liveness marking is the controller's job.
"""

from __future__ import annotations

import socket
import struct
import threading

from sdbotics.controller import Controller

DEFAULT_BOTS_PORT = 6801
# largest legal packet is 43 + 1024 + 4 + 32 bytes; anything bigger is a
# framing error, not a packet
MAX_FRAME = 4096
_LEN = struct.Struct("!I")


class FramingError(Exception):
    code = "FRAMING_ERROR"


def send_frame(sock: socket.socket, frame: bytes) -> None:
    if len(frame) > MAX_FRAME:
        raise FramingError(f"frame of {len(frame)} bytes exceeds {MAX_FRAME}")
    sock.sendall(_LEN.pack(len(frame)) + frame)


def recv_exact(sock: socket.socket, n: int) -> bytes | None:
    """Read exactly n bytes; None on clean EOF at a frame boundary."""
    chunks = bytearray()
    while len(chunks) < n:
        block = sock.recv(n - len(chunks))
        if not block:
            if chunks:
                raise FramingError("connection closed mid-frame")
            return None
        chunks.extend(block)
    return bytes(chunks)


def recv_frame(sock: socket.socket) -> bytes | None:
    header = recv_exact(sock, _LEN.size)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    if length > MAX_FRAME:
        raise FramingError(f"declared frame of {length} bytes exceeds {MAX_FRAME}")
    if length == 0:
        return b""
    body = recv_exact(sock, length)
    if body is None:
        raise FramingError("connection closed before frame body")
    return body


class ConnLink:
    """One robot connection: socket plus a write lock so controller
    dispatch and ACK replies cannot interleave a frame."""

    def __init__(self, sock: socket.socket, address: str) -> None:
        self.sock = sock
        self.address = address
        self._wlock = threading.Lock()

    def write(self, frame: bytes) -> None:
        with self._wlock:
            send_frame(self.sock, frame)

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class SouthboundServer:
    """Threaded accept loop; one reader thread per robot connection."""

    def __init__(self, controller: Controller, host: str = "127.0.0.1", port: int = DEFAULT_BOTS_PORT):
        self.controller = controller
        self._listener = socket.create_server((host, port))
        # waking a blocked accept() by closing the listener is not
        # reliable; poll so stop() returns promptly
        self._listener.settimeout(0.1)
        self.host, self.port = self._listener.getsockname()[:2]
        self._threads: list[threading.Thread] = []
        self._links: list[ConnLink] = []
        self._stop = threading.Event()
        self.send_failures = 0
        controller.set_send(self.send_to_robot)

    def start(self) -> None:
        t = threading.Thread(target=self._accept_loop, name="southbound-accept", daemon=True)
        t.start()
        self._threads.append(t)

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return  # listener closed
            sock.settimeout(None)
            link = ConnLink(sock, f"{addr[0]}:{addr[1]}")
            self._links.append(link)
            t = threading.Thread(target=self._reader_loop, args=(link,),
                                 name=f"southbound-{link.address}", daemon=True)
            t.start()
            self._threads.append(t)

    def _reader_loop(self, link: ConnLink) -> None:
        try:
            while True:
                frame = recv_frame(link.sock)
                if frame is None:
                    return
                replies = self.controller.handle_southbound(frame, link=link, address=link.address)
                for reply in replies:
                    link.write(reply)
        except (OSError, FramingError):
            return  # session over; controller marks the robot dead by ticks

    def send_to_robot(self, robot_id: int, frame: bytes) -> None:
        session = self.controller.robots.get(robot_id)
        link = session.link if session else None
        if link is None:
            self.send_failures += 1
            return
        try:
            link.write(frame)
        except OSError:
            self.send_failures += 1

    def stop(self) -> None:
        self._stop.set()
        self._listener.close()
        for link in self._links:
            link.close()
        for t in self._threads:
            t.join(timeout=2)


class ControllerClient:
    """Robot-side connection helper: frame-oriented socket wrapper used by
    the simulated entities."""

    def __init__(self, host: str, port: int, timeout: float = 5.0) -> None:
        self.sock = socket.create_connection((host, port), timeout=timeout)

    def send(self, frame: bytes) -> None:
        send_frame(self.sock, frame)

    def recv(self, timeout: float | None = None) -> bytes | None:
        if timeout is not None:
            self.sock.settimeout(timeout)
        try:
            return recv_frame(self.sock)
        except socket.timeout:
            return None

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()
