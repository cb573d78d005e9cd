"""In-process simulated network with integer logical time.

Every message on the wire is an :class:`~trustmarket.crypto.Envelope`
sealed to the destination's registered public key.  Delivery order is
``(deliver_at, sequence)``, so a run is fully determined by the order of
``post`` calls and the seeded randomness.
"""

from __future__ import annotations

import heapq
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable

from trustmarket import crypto
from trustmarket.errors import TransportFailure, error_by_name

HOP_LATENCY = 1


def pack(payload: dict[str, Any]) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def unpack(data: bytes) -> dict[str, Any]:
    return json.loads(data.decode("utf-8"))


@dataclass(order=True)
class Message:
    deliver_at: int
    seq: int
    src: str = field(compare=False)
    dst: str = field(compare=False)
    kind: str = field(compare=False)
    envelope: crypto.Envelope = field(compare=False, repr=False)
    sent_at: int = field(compare=False, default=0)


class EventLog:
    """Line-oriented event log; one ``<time> <event> key=value ...`` line per event."""

    def __init__(self) -> None:
        self.lines: list[str] = []

    def emit(self, time: int, event: str, **fields: Any) -> None:
        parts = [f"{time:06d}", event]
        parts += [f"{k}={v}" for k, v in fields.items()]
        self.lines.append(" ".join(parts))

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)


class SimulatedNetwork:
    def __init__(self, registry: crypto.KeyRegistry, rng: random.Random, log: EventLog | None = None):
        self.registry = registry
        self.rng = rng
        self.log = log if log is not None else EventLog()
        self.now = 0
        self.edges: set[frozenset[str]] = set()
        self.counters: Counter[tuple[str, str]] = Counter()
        self.kind_counters: Counter[tuple[str, str, str]] = Counter()
        self.delivered = 0
        self._queue: list[Message] = []
        self._seq = 0
        self._actors: dict[str, "Actor"] = {}
        self._request_seq = 0

    def attach(self, actor: "Actor") -> None:
        if actor.principal in self._actors:
            raise ValueError(f"principal {actor.principal!r} already attached")
        self._actors[actor.principal] = actor
        self.registry.register(actor.principal, actor.keypair.public_part, self.now)
        self.log.emit(self.now, "key-registered", principal=actor.principal, key_id=actor.keypair.key_id)

    def actor(self, principal: str) -> "Actor":
        return self._actors[principal]

    def connect(self, a: str, b: str) -> None:
        edge = frozenset((a, b))
        if edge not in self.edges:
            self.edges.add(edge)
            self.log.emit(self.now, "connect", a=min(a, b), b=max(a, b))

    def connected(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.edges

    def next_request_id(self) -> str:
        self._request_seq += 1
        return f"req-{self._request_seq:06d}"

    def post(self, src: str, dst: str, kind: str, payload: dict[str, Any]) -> Message:
        if not self.connected(src, dst):
            raise TransportFailure(f"no link {src} -> {dst}")
        if dst not in self._actors:
            raise TransportFailure(f"no endpoint for {dst}")
        public = self.registry.lookup(dst).public_part
        env = crypto.seal(pack(payload), public, self.rng, recipient=dst)
        self._seq += 1
        msg = Message(self.now + HOP_LATENCY, self._seq, src, dst, kind, env, self.now)
        heapq.heappush(self._queue, msg)
        self.counters[(src, dst)] += 1
        self.kind_counters[(src, dst, kind)] += 1
        self.log.emit(self.now, "send", src=src, dst=dst, kind=kind, bytes=len(env.to_bytes()))
        return msg

    def pending(self) -> int:
        return len(self._queue)

    def run(self, stop: Callable[[], bool] | None = None, until: int | None = None) -> bool:
        """Deliver messages in order.

        Stops when ``stop()`` becomes true (returns True), when the queue is
        empty, or when the next message is due after ``until``.  If ``until``
        is given and ``stop`` never fired, logical time advances to ``until``.
        """
        if stop is not None and stop():
            return True
        while self._queue:
            if until is not None and self._queue[0].deliver_at > until:
                break
            msg = heapq.heappop(self._queue)
            self.now = max(self.now, msg.deliver_at)
            self.delivered += 1
            self.log.emit(self.now, "deliver", src=msg.src, dst=msg.dst, kind=msg.kind)
            self._actors[msg.dst].receive(msg)
            if stop is not None and stop():
                return True
        if until is not None:
            self.now = max(self.now, until)
        return False


class Actor:
    """A network principal with its own key pair and a per-kind message dispatch."""

    def __init__(self, principal: str, network: SimulatedNetwork):
        self.principal = principal
        self.net = network
        self.keypair = crypto.generate_keypair(network.rng)
        self.replies: dict[str, dict[str, Any]] = {}
        network.attach(self)

    def post(self, dst: str, kind: str, **payload: Any) -> Message:
        return self.net.post(self.principal, dst, kind, payload)

    def request(self, dst: str, kind: str, timeout: int = 10, **payload: Any) -> dict[str, Any]:
        """Post a request and drive the network until its reply arrives."""
        rid = self.net.next_request_id()
        self.post(dst, kind, request_id=rid, **payload)
        got = self.net.run(stop=lambda: rid in self.replies, until=self.net.now + timeout)
        if not got:
            raise TransportFailure(f"no reply from {dst} to {kind} within {timeout}")
        return self.replies.pop(rid)

    def receive(self, msg: Message) -> None:
        payload = unpack(crypto.open_envelope(msg.envelope, self.keypair.private_part))
        handler = getattr(self, "on_" + msg.kind.replace("-", "_"), None)
        if handler is None:
            raise TransportFailure(f"{self.principal} cannot handle {msg.kind!r}")
        handler(msg.src, payload)

    def on_reply(self, src: str, payload: dict[str, Any]) -> None:
        self.replies[payload["request_id"]] = payload

    def reply(self, dst: str, request_id: str, **payload: Any) -> None:
        self.post(dst, "reply", request_id=request_id, **payload)

    def reply_error(self, dst: str, request_id: str, exc: Exception) -> None:
        self.reply(dst, request_id, ok=False, error=type(exc).__name__, message=str(exc))


def raise_for_reply(reply: dict[str, Any]) -> dict[str, Any]:
    if not reply.get("ok", False):
        raise error_by_name(reply.get("error", ""))(reply.get("message", ""))
    return reply
