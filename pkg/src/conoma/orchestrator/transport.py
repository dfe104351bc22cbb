"""Message transport between platforms.

Wire format
-----------
Every message travels as one frame::

    length   u32, big-endian: number of payload bytes that follow
    sender   u16, big-endian: platform id (0 = cloud, e + 1 = edge computer e)
    round    u32, big-endian: round index the message belongs to
    count    u32, big-endian: number of doubles that follow
    values   count x IEEE-754 binary64, big-endian

so ``length = 10 + 8 * count``.  The first double is the message kind:

* ``0`` data: ``[0, n_i, n_d, (observer, device, power) x n_i, (strong, weak, power) x n_d]``
  with received powers in W; ``n_i`` interference entries
  ``|h_observer^H x_device|^2`` and ``n_d`` D2D entries ``|g_strong,weak|^2 p_strong``,
* ``1`` convergence flag to the coordinator: ``[1, phase, converged, improvement]``,
* ``2`` schedule decision from the coordinator: ``[2, action]``,
* ``3`` abort: ``[3]`` (the sender failed; receivers stop waiting).

Device indices are sent as doubles; they are small integers and therefore
exact.

Both transports implement the same barrier contract: ``receive`` returns
exactly the requested number of messages of the requested round and kind,
ordered by sender, and never hands out a message of another round.
Messages that arrive early are buffered.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass

import numpy as np

KIND_DATA, KIND_FLAG, KIND_DECISION, KIND_ABORT = 0, 1, 2, 3
_HEADER = struct.Struct(">HII")
_LENGTH = struct.Struct(">I")


class TransportTimeout(RuntimeError):
    def __init__(self, round_index: int, platform: int, kind: int):
        super().__init__(f"platform {platform} timed out waiting for round {round_index} (kind {kind})")
        self.round_index = round_index
        self.platform = platform


class TransportAborted(RuntimeError):
    def __init__(self, sender: int, round_index: int):
        super().__init__(f"platform {sender} aborted in round {round_index}")
        self.sender = sender
        self.round_index = round_index


@dataclass
class Frame:
    sender: int
    round: int
    values: np.ndarray  # float64

    @property
    def kind(self) -> int:
        return int(self.values[0])


def encode_frame(frame: Frame) -> bytes:
    vals = np.asarray(frame.values, dtype=">f8")
    payload = _HEADER.pack(frame.sender, frame.round, len(vals)) + vals.tobytes()
    return _LENGTH.pack(len(payload)) + payload


def decode_frame(data: bytes) -> Frame:
    """Decode one frame including its length prefix."""
    (length,) = _LENGTH.unpack_from(data, 0)
    if len(data) != 4 + length:
        raise ValueError("frame length mismatch")
    sender, rnd, count = _HEADER.unpack_from(data, 4)
    if length != _HEADER.size + 8 * count:
        raise ValueError("frame count mismatch")
    vals = np.frombuffer(data, dtype=">f8", count=count, offset=4 + _HEADER.size).astype(float)
    return Frame(sender, rnd, vals)


class Transport:
    """Common buffering and barrier logic; subclasses deliver raw frames."""

    def __init__(self) -> None:
        self._inbox: dict[int, queue.Queue] = {}
        self._pending: dict[int, list] = {}
        self.sent = 0
        self.sent_by_kind: dict[int, int] = {}
        self._count_lock = threading.Lock()

    def open(self, platforms) -> None:
        for p in platforms:
            self._inbox[p] = queue.Queue()
            self._pending[p] = []

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _deliver(self, recipient: int, data: bytes) -> None:
        raise NotImplementedError

    def send(self, recipient: int, frame: Frame) -> None:
        with self._count_lock:
            self.sent += 1
            self.sent_by_kind[frame.kind] = self.sent_by_kind.get(frame.kind, 0) + 1
        self._deliver(recipient, encode_frame(frame))

    def receive(self, platform: int, round_index: int, kind: int, count: int, timeout: float) -> list:
        pending = self._pending[platform]
        deadline = time.monotonic() + timeout
        while True:
            for fr in pending:
                if fr.kind == KIND_ABORT:
                    raise TransportAborted(fr.sender, fr.round)
            match = [fr for fr in pending if fr.round == round_index and fr.kind == kind]
            if len(match) >= count:
                match.sort(key=lambda fr: fr.sender)
                chosen = match[:count]
                ids = {id(fr) for fr in chosen}
                pending[:] = [fr for fr in pending if id(fr) not in ids]
                return chosen
            left = deadline - time.monotonic()
            if left <= 0:
                raise TransportTimeout(round_index, platform, kind)
            try:
                data = self._inbox[platform].get(timeout=left)
            except queue.Empty:
                continue
            pending.append(decode_frame(data))


class InProcessBus(Transport):
    """Frames handed over through in-memory queues."""

    def _deliver(self, recipient: int, data: bytes) -> None:
        self._inbox[recipient].put(data)


class SocketTransport(Transport):
    """Length-prefixed frames over loopback TCP connections."""

    def __init__(self, host: str = "127.0.0.1") -> None:
        super().__init__()
        self.host = host
        self._servers: dict[int, socket.socket] = {}
        self._ports: dict[int, int] = {}
        self._conns: dict[int, socket.socket] = {}
        self._conn_locks: dict[int, threading.Lock] = {}
        self._threads: list[threading.Thread] = []
        self._accepted: list[socket.socket] = []
        self._closed = threading.Event()

    def open(self, platforms) -> None:
        super().open(platforms)
        for p in platforms:
            srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            srv.bind((self.host, 0))
            srv.listen(16)
            self._servers[p] = srv
            self._ports[p] = srv.getsockname()[1]
            self._conn_locks[p] = threading.Lock()
            th = threading.Thread(target=self._accept_loop, args=(p, srv), daemon=True)
            th.start()
            self._threads.append(th)

    def _accept_loop(self, platform: int, srv: socket.socket) -> None:
        while not self._closed.is_set():
            try:
                conn, _ = srv.accept()
            except OSError:
                return
            self._accepted.append(conn)
            th = threading.Thread(target=self._read_loop, args=(platform, conn), daemon=True)
            th.start()
            self._threads.append(th)

    @staticmethod
    def _read_exact(conn: socket.socket, n: int) -> bytes | None:
        buf = bytearray()
        while len(buf) < n:
            chunk = conn.recv(n - len(buf))
            if not chunk:
                return None
            buf.extend(chunk)
        return bytes(buf)

    def _read_loop(self, platform: int, conn: socket.socket) -> None:
        try:
            while True:
                head = self._read_exact(conn, _LENGTH.size)
                if head is None:
                    return
                (length,) = _LENGTH.unpack(head)
                body = self._read_exact(conn, length)
                if body is None:
                    return
                self._inbox[platform].put(head + body)
        except OSError:
            return

    def _deliver(self, recipient: int, data: bytes) -> None:
        with self._conn_locks[recipient]:
            conn = self._conns.get(recipient)
            if conn is None:
                conn = socket.create_connection((self.host, self._ports[recipient]))
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self._conns[recipient] = conn
            conn.sendall(data)

    def close(self) -> None:
        self._closed.set()
        for s in list(self._conns.values()) + self._accepted + list(self._servers.values()):
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()
        self._conns.clear()


TRANSPORTS = {"inprocess": InProcessBus, "socket": SocketTransport}


def make_transport(name: str = "inprocess") -> Transport:
    try:
        return TRANSPORTS[name]()
    except KeyError:
        raise ValueError(f"unknown transport {name}; choose from {sorted(TRANSPORTS)}") from None
