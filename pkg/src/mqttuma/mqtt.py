"""Minimal MQTT broker semantics: sessions, exact-topic subscriptions, fan-out.

QoS 0 only (no PUBACK), no wildcards, topics are created on first use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import (
    FlowTranscript,
    MessageKind,
    NodeRole,
    ProtocolError,
    ProtocolMessage,
    Status,
    check_resource,
)

# Zigbee (IEEE 802.15.4) frame bound
MAX_PAYLOAD = 127


class NotConnected(ProtocolError):
    pass


class PayloadTooLarge(ProtocolError):
    pass


@dataclass(frozen=True)
class PublishEvent:
    topic: str
    value: bytes
    source: NodeRole

    def __post_init__(self) -> None:
        check_resource(self.topic)
        if len(self.value) > MAX_PAYLOAD:
            raise PayloadTooLarge(f"{len(self.value)} bytes > {MAX_PAYLOAD}")


@dataclass(frozen=True)
class LogEntry:
    topic: str
    value: bytes
    time: int
    source: NodeRole


@dataclass
class Broker:
    role: NodeRole
    sessions: set[NodeRole] = field(default_factory=set)
    # dict used as an insertion-ordered set
    subscriptions: dict[str, dict[NodeRole, None]] = field(default_factory=dict)
    retained: dict[str, bytes] = field(default_factory=dict)
    log: list[LogEntry] = field(default_factory=list)
    clock: int = 0

    def _transcript(self, transcript: Optional[FlowTranscript]) -> FlowTranscript:
        return transcript if transcript is not None else FlowTranscript()

    def connect(
        self, client: NodeRole, transcript: Optional[FlowTranscript] = None
    ) -> list[ProtocolMessage]:
        """Open (or replace) ``client``'s session. Subscriptions survive."""
        t = self._transcript(transcript)
        self.sessions.add(client)
        return [
            t.send(client, self.role, MessageKind.Connect),
            t.send(self.role, client, MessageKind.ConnAck, status=Status.OK),
        ]

    def subscribe(
        self, client: NodeRole, topic: str, transcript: Optional[FlowTranscript] = None
    ) -> list[ProtocolMessage]:
        check_resource(topic)
        if client not in self.sessions:
            raise NotConnected(f"{client} has no session with {self.role}")
        t = self._transcript(transcript)
        self.subscriptions.setdefault(topic, {})[client] = None
        return [t.send(client, self.role, MessageKind.Subscribe, resource=topic)]

    def subscribers(self, topic: str) -> list[NodeRole]:
        return list(self.subscriptions.get(topic, ()))

    def publish(
        self, event: PublishEvent, transcript: Optional[FlowTranscript] = None
    ) -> list[ProtocolMessage]:
        """Accept ``event`` and fan it out once to each current subscriber.

        If a transcript is given the inbound arrow is recorded too; the
        return value is the delivery messages only.
        """
        t = self._transcript(transcript)
        self.subscriptions.setdefault(event.topic, {})
        self.clock += 1
        self.log.append(LogEntry(event.topic, event.value, self.clock, event.source))
        self.retained[event.topic] = event.value
        t.send(event.source, self.role, MessageKind.Publish, resource=event.topic,
               payload=event.value)
        return [
            t.send(self.role, sub, MessageKind.Publish, resource=event.topic,
                   payload=event.value)
            for sub in self.subscribers(event.topic)
        ]

    def last_value(self, topic: str) -> Optional[bytes]:
        return self.retained.get(topic)

    def check_invariants(self) -> None:
        last: dict[str, bytes] = {}
        for entry in self.log:
            last[entry.topic] = entry.value
        assert last == self.retained, "retained values diverge from log"
        times = [e.time for e in self.log]
        assert times == sorted(set(times)), "log times not strictly increasing"
