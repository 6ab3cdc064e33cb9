"""Root/local controller cooperation over length-prefixed JSON frames.

The root controller is a plain TCP server; each local controller keeps one
connection to it. Every frame is a 4-byte big-endian length followed by a
UTF-8 JSON object {"body": ..., "code": "0101", "name": "C1", "rid": 17}
with sorted keys, so encoding is byte-reproducible.

Status codes (4-bit values carried as strings):
  0001 SET_CONTROLLER_NAME   register a local controller's name
  0010 ADD_DOMAIN_TOPO       upload the local domain topology
  0011 SYN_GLOBAL_VIEW       stream batched traffic-matrix snapshots
  0100 ADD_INTERDPID         declare the domain's interdomain switches
  0101 REQ_INTERPROPERTY     ask for an interdomain forwarding path
  0110 RES_INTERPROPERTY     the root's path answer, echoing the request id

Registration codes are acknowledged by echoing the code and request id with
an {"ok": ...} body; SYN_GLOBAL_VIEW is fire-and-forget. Each connection
multiplexes the per-domain worker triple (request sender, response reader,
traffic-matrix streamer) over one stream: a reader thread demultiplexes
responses by request id while senders share a write lock.
"""

from __future__ import annotations

import json
import logging
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

from .telemetry import TrafficMatrix

logger = logging.getLogger(__name__)

SET_CONTROLLER_NAME = "0001"
ADD_DOMAIN_TOPO = "0010"
SYN_GLOBAL_VIEW = "0011"
ADD_INTERDPID = "0100"
REQ_INTERPROPERTY = "0101"
RES_INTERPROPERTY = "0110"

STATUS_CODES = (
    SET_CONTROLLER_NAME,
    ADD_DOMAIN_TOPO,
    SYN_GLOBAL_VIEW,
    ADD_INTERDPID,
    REQ_INTERPROPERTY,
    RES_INTERPROPERTY,
)

DEFAULT_ROOT_ADDR = "127.0.0.1:47901"
MAX_FRAME_BYTES = 64 * 1024 * 1024

PIPELINE_FLUSH_COUNT = 5
PIPELINE_FLUSH_BYTES = 64 * 1024


class ProtocolError(Exception):
    pass


class FrameTooShort(ProtocolError):
    pass


class BadStatusCode(ProtocolError):
    pass


class MalformedBody(ProtocolError):
    pass


class BindFailure(ProtocolError):
    pass


class NotConnected(ProtocolError):
    pass


class NotRegistered(ProtocolError):
    pass


class DuplicateName(ProtocolError):
    pass


class Timeout(ProtocolError):
    pass


class NoRouteInResponse(ProtocolError):
    pass


@dataclass(frozen=True)
class Message:
    code: str
    name: str
    rid: int
    body: object


def _is_ack(body) -> bool:
    return isinstance(body, dict) and "ok" in body


def _validate_body(code: str, body) -> None:
    def need(keys):
        if not isinstance(body, dict) or not set(keys) <= set(body):
            raise MalformedBody(f"code {code} body missing keys {keys}: {body!r}")

    if code in (SET_CONTROLLER_NAME, ADD_DOMAIN_TOPO, ADD_INTERDPID) and _is_ack(body):
        return
    if code == SET_CONTROLLER_NAME:
        need(["name"])
    elif code == ADD_DOMAIN_TOPO:
        need(["nodes", "edges"])
    elif code == SYN_GLOBAL_VIEW:
        if not isinstance(body, list):
            raise MalformedBody(f"code {code} body must be a batch array: {body!r}")
        for item in body:
            if not isinstance(item, dict) or not {"tick", "matrix"} <= set(item):
                raise MalformedBody(f"bad batch item {item!r}")
    elif code == ADD_INTERDPID:
        need(["dpids"])
    elif code == REQ_INTERPROPERTY:
        need(["src", "dst"])
    elif code == RES_INTERPROPERTY:
        need(["path"])


def encode_message(msg: Message) -> bytes:
    """One wire frame: 4-byte big-endian length, then canonical JSON."""
    if msg.code not in STATUS_CODES:
        raise BadStatusCode(f"unknown status code {msg.code!r}")
    _validate_body(msg.code, msg.body)
    payload = json.dumps(
        {"body": msg.body, "code": msg.code, "name": msg.name, "rid": msg.rid},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    return struct.pack(">I", len(payload)) + payload


def decode_message(frame: bytes) -> Message:
    if len(frame) < 4:
        raise FrameTooShort(f"frame is {len(frame)} bytes, need 4-byte header")
    (length,) = struct.unpack(">I", frame[:4])
    if len(frame) - 4 < length:
        raise FrameTooShort(f"payload {len(frame) - 4} bytes, header says {length}")
    try:
        doc = json.loads(frame[4 : 4 + length].decode("utf-8"))
        code, name, rid, body = doc["code"], doc["name"], doc["rid"], doc["body"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise MalformedBody(f"unparseable frame: {exc}") from exc
    if code not in STATUS_CODES:
        raise BadStatusCode(f"unknown status code {code!r}")
    _validate_body(code, body)
    return Message(code, name, int(rid), body)


def _recv_exactly(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except OSError:
            return None
        if not chunk:
            return None
        buf += chunk
    return buf


def read_message(sock: socket.socket) -> Message | None:
    """Read one framed message; None on a clean EOF."""
    header = _recv_exactly(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME_BYTES:
        raise FrameTooShort(f"frame of {length} bytes exceeds limit")
    payload = _recv_exactly(sock, length)
    if payload is None:
        return None
    return decode_message(header + payload)


class Pipeline:
    """Batching buffer: flushes when it holds ``flush_count`` snapshots or
    ``flush_bytes`` of encoded payload, whichever comes first."""

    def __init__(
        self,
        flush_count: int = PIPELINE_FLUSH_COUNT,
        flush_bytes: int = PIPELINE_FLUSH_BYTES,
    ) -> None:
        self.flush_count = flush_count
        self.flush_bytes = flush_bytes
        self._buffer: list[dict] = []
        self._bytes = 0

    def add(self, item: dict) -> list[dict] | None:
        self._buffer.append(item)
        self._bytes += len(json.dumps(item))
        if len(self._buffer) >= self.flush_count or self._bytes >= self.flush_bytes:
            return self.flush()
        return None

    def flush(self) -> list[dict] | None:
        if not self._buffer:
            return None
        batch, self._buffer, self._bytes = self._buffer, [], 0
        return batch

    def __len__(self) -> int:
        return len(self._buffer)


@dataclass
class DomainRecord:
    name: str
    nodes: list[str] = field(default_factory=list)
    edges: list[dict] = field(default_factory=list)
    inter_dpids: list[str] = field(default_factory=list)
    last_tick: int = -1
    tms: dict[int, TrafficMatrix] = field(default_factory=dict)
    connected: bool = True


class RootRegistry:
    """Per-domain records owned by the root; mutations are serialized."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._records: dict[str, DomainRecord] = {}

    def register(self, name: str, conn_id: int, owners: dict[str, int]) -> None:
        with self._lock:
            current = owners.get(name)
            if current is not None and current != conn_id:
                raise DuplicateName(f"controller name {name!r} is already active")
            owners[name] = conn_id
            if name not in self._records:
                self._records[name] = DomainRecord(name)
            self._records[name].connected = True

    def record(self, name: str) -> DomainRecord:
        with self._lock:
            return self._records[name]

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._records)

    def store_tm(self, name: str, tick: int, tm: TrafficMatrix) -> None:
        with self._lock:
            rec = self._records[name]
            rec.tms[tick] = tm
            rec.last_tick = max(rec.last_tick, tick)

    def latest_common_tick(self) -> int | None:
        with self._lock:
            if not self._records:
                return None
            tick_sets = [set(r.tms) for r in self._records.values()]
            common = set.intersection(*tick_sets) if tick_sets else set()
            return max(common) if common else None

    def tms_at(self, tick: int) -> dict[str, TrafficMatrix]:
        with self._lock:
            return {
                name: rec.tms[tick]
                for name, rec in self._records.items()
                if tick in rec.tms
            }

    def mark_disconnected(self, name: str) -> None:
        with self._lock:
            if name in self._records:
                self._records[name].connected = False


def parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


class RootServer:
    """Concurrent root-controller server.

    ``path_oracle(src, dst)`` answers interdomain path requests; a missing
    or failing oracle yields an empty path, which clients surface as
    NoRouteInResponse. Traffic matrices streamed by the locals accumulate
    in ``registry`` keyed by tick for union assembly.
    """

    def __init__(
        self,
        addr: str = DEFAULT_ROOT_ADDR,
        path_oracle=None,
        *,
        name: str = "root",
    ) -> None:
        self.host, self.port = parse_addr(addr)
        self.name = name
        self.path_oracle = path_oracle
        self.registry = RootRegistry()
        self._owners: dict[str, int] = {}
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._conns: dict[int, socket.socket] = {}
        self._conn_seq = 0
        self._lock = threading.Lock()
        self._stop = threading.Event()

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((self.host, self.port))
        except OSError as exc:
            listener.close()
            raise BindFailure(f"cannot bind {self.host}:{self.port}: {exc}") from exc
        listener.listen(16)
        listener.settimeout(0.1)  # lets the accept loop notice stop()
        self.port = listener.getsockname()[1]
        self._listener = listener
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        self._threads.append(t)

    def stop(self) -> None:
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            conns = list(self._conns.values())
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()
        for t in self._threads:
            t.join(timeout=2.0)

    @property
    def addr(self) -> str:
        return f"{self.host}:{self.port}"

    # -- connection handling ---------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(None)
            with self._lock:
                self._conn_seq += 1
                conn_id = self._conn_seq
                self._conns[conn_id] = conn
            t = threading.Thread(
                target=self._serve_conn, args=(conn, conn_id), daemon=True
            )
            t.start()
            self._threads.append(t)

    def _serve_conn(self, conn: socket.socket, conn_id: int) -> None:
        registered_name: str | None = None
        send_lock = threading.Lock()

        def reply(msg: Message) -> None:
            data = encode_message(msg)
            with send_lock:
                conn.sendall(data)

        try:
            while not self._stop.is_set():
                try:
                    msg = read_message(conn)
                except ProtocolError as exc:
                    logger.error("bad frame from %s: %s", registered_name, exc)
                    continue
                if msg is None:
                    return
                try:
                    registered_name = self._dispatch(msg, conn_id, registered_name, reply)
                except ProtocolError as exc:
                    logger.error("error handling %s: %s", msg.code, exc)
                    if msg.code in (SET_CONTROLLER_NAME, ADD_DOMAIN_TOPO, ADD_INTERDPID):
                        reply(Message(msg.code, self.name, msg.rid,
                                      {"ok": False, "error": str(exc)}))
        except OSError:
            pass
        finally:
            if registered_name is not None:
                self.registry.mark_disconnected(registered_name)
                with self._lock:
                    if self._owners.get(registered_name) == conn_id:
                        del self._owners[registered_name]
            with self._lock:
                self._conns.pop(conn_id, None)
            conn.close()

    def _dispatch(self, msg: Message, conn_id: int, registered: str | None, reply):
        if msg.code == SET_CONTROLLER_NAME:
            with self._lock:
                owners = self._owners
            self.registry.register(msg.body["name"], conn_id, owners)
            reply(Message(msg.code, self.name, msg.rid, {"ok": True}))
            return msg.body["name"]
        if registered is None:
            raise NotRegistered(f"{msg.code} before SET_CONTROLLER_NAME")
        if msg.code == ADD_DOMAIN_TOPO:
            rec = self.registry.record(registered)
            rec.nodes = list(msg.body["nodes"])
            rec.edges = list(msg.body["edges"])
            reply(Message(msg.code, self.name, msg.rid, {"ok": True}))
        elif msg.code == ADD_INTERDPID:
            rec = self.registry.record(registered)
            rec.inter_dpids = list(msg.body["dpids"])
            reply(Message(msg.code, self.name, msg.rid, {"ok": True}))
        elif msg.code == SYN_GLOBAL_VIEW:
            for item in msg.body:
                tm = TrafficMatrix.from_csv(item["matrix"], registered, int(item["tick"]))
                self.registry.store_tm(registered, int(item["tick"]), tm)
        elif msg.code == REQ_INTERPROPERTY:
            path: list[str] = []
            if self.path_oracle is not None:
                try:
                    path = list(self.path_oracle(msg.body["src"], msg.body["dst"]))
                except Exception as exc:  # oracle errors surface as empty path
                    logger.error("path oracle failed: %s", exc)
            reply(Message(RES_INTERPROPERTY, self.name, msg.rid, {"path": path}))
        else:
            logger.error("unhandled code %s from %s", msg.code, registered)
        return registered


class LocalClient:
    """One local controller's connection to the root.

    The response reader runs in its own thread; blocking calls park on a
    per-request event keyed by request id. A separate streaming path sends
    pipelined traffic-matrix batches without waiting for replies.
    """

    def __init__(
        self,
        name: str,
        addr: str = DEFAULT_ROOT_ADDR,
        *,
        flush_count: int = PIPELINE_FLUSH_COUNT,
        flush_bytes: int = PIPELINE_FLUSH_BYTES,
    ) -> None:
        self.name = name
        self.addr = addr
        self.pipeline = Pipeline(flush_count, flush_bytes)
        self.frames_sent = 0
        self.registered = False
        self.domain_nodes: set[str] = set()
        self._sock: socket.socket | None = None
        self._send_lock = threading.Lock()
        self._rid = 0
        self._pending: dict[int, list] = {}
        self._pending_lock = threading.Lock()
        self._reader: threading.Thread | None = None

    # -- transport -------------------------------------------------------------

    def connect(self, retries: int = 3, delay: float = 0.2) -> None:
        host, port = parse_addr(self.addr)
        last_exc: Exception | None = None
        for _ in range(retries):
            try:
                sock = socket.create_connection((host, port), timeout=5.0)
                sock.settimeout(None)
                self._sock = sock
                self._reader = threading.Thread(target=self._read_loop, daemon=True)
                self._reader.start()
                return
            except OSError as exc:
                last_exc = exc
                time.sleep(delay)
        raise NotConnected(f"cannot reach root at {self.addr}: {last_exc}")

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()
            self._sock = None

    def _read_loop(self) -> None:
        sock = self._sock
        while sock is not None:
            try:
                msg = read_message(sock)
            except (ProtocolError, OSError):
                msg = None
            if msg is None:
                break
            with self._pending_lock:
                slot = self._pending.get(msg.rid)
            if slot is not None:
                slot[1] = msg
                slot[0].set()
            else:
                logger.warning("%s: unmatched reply rid=%s", self.name, msg.rid)

    def _next_rid(self) -> int:
        with self._send_lock:
            self._rid += 1
            return self._rid

    def _send(self, msg: Message) -> None:
        if self._sock is None:
            raise NotConnected("not connected to root")
        data = encode_message(msg)
        with self._send_lock:
            try:
                self._sock.sendall(data)
            except OSError as exc:
                raise NotConnected(f"send failed: {exc}") from exc
            self.frames_sent += 1

    def _call(self, code: str, body, timeout: float) -> Message:
        rid = self._next_rid()
        slot = [threading.Event(), None]
        with self._pending_lock:
            self._pending[rid] = slot
        try:
            self._send(Message(code, self.name, rid, body))
            if not slot[0].wait(timeout):
                raise Timeout(f"no reply to {code} rid={rid} within {timeout}s")
            return slot[1]
        finally:
            with self._pending_lock:
                self._pending.pop(rid, None)

    # -- protocol operations ----------------------------------------------------

    def register(
        self,
        domain_nodes: list[str],
        domain_edges: list[dict],
        inter_dpids: list[str],
        timeout: float = 2.0,
    ) -> None:
        """Three-step handshake: name, domain topology, interdomain switches."""
        if self._sock is None:
            raise NotConnected("connect() before register()")
        steps = [
            (SET_CONTROLLER_NAME, {"name": self.name}),
            (ADD_DOMAIN_TOPO, {"nodes": list(domain_nodes), "edges": list(domain_edges)}),
            (ADD_INTERDPID, {"dpids": list(inter_dpids)}),
        ]
        for code, body in steps:
            ack = self._call(code, body, timeout)
            if not (_is_ack(ack.body) and ack.body["ok"]):
                error = ack.body.get("error", "") if isinstance(ack.body, dict) else ""
                if "already active" in error:
                    raise DuplicateName(error)
                raise ProtocolError(f"{code} rejected: {ack.body!r}")
        self.domain_nodes = set(domain_nodes)
        self.registered = True

    def syn_global_view(self, tms: list[TrafficMatrix]) -> int:
        """Stream traffic-matrix snapshots through the pipeline; returns the
        number of frames actually put on the wire."""
        if not self.registered:
            raise NotRegistered("register() before syn_global_view()")
        sent = 0
        for tm in tms:
            batch = self.pipeline.add({"tick": tm.tick, "matrix": tm.to_csv()})
            if batch:
                self._send(Message(SYN_GLOBAL_VIEW, self.name, self._next_rid(), batch))
                sent += 1
        batch = self.pipeline.flush()
        if batch:
            self._send(Message(SYN_GLOBAL_VIEW, self.name, self._next_rid(), batch))
            sent += 1
        return sent

    def request_inter_path(
        self, src: str, dst: str, timeout: float = 2.0
    ) -> list[str]:
        if not self.registered:
            raise NotRegistered("register() before request_inter_path()")
        if src not in self.domain_nodes:
            raise ValueError(f"{src} is not in {self.name}'s domain")
        if dst in self.domain_nodes:
            raise ValueError(f"{dst} is inside {self.name}'s domain; no root needed")
        reply = self._call(REQ_INTERPROPERTY, {"src": src, "dst": dst}, timeout)
        path = list(reply.body.get("path", []))
        if not path or path[0] != src or path[-1] != dst or len(set(path)) != len(path):
            raise NoRouteInResponse(f"unusable path for {src}->{dst}: {path}")
        return path
