"""The five hybrid MQTT/UMA flows over the fog topology.

P1 devices publish to MB1 (which is also P2 and the resource owner). MB1
forwards every topic to MB2, which is also the UMA resource server. The
requesting party S2 reaches MB2 only through the fog-hosted Client; there is
no MB1-S2 link.

Each flow returns a FlowTranscript. By default it is billed in coefficient
mode, so costing it reproduces the phase equation exactly; ``mode=
"transcript"`` bills every generated arrow instead.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional

from .core import (
    FlowTranscript,
    MessageKind,
    NodeRole,
    PhaseKind,
    ProtocolError,
    ProtocolMessage,
    Status,
    Token,
    TokenState,
    validate,
)
from .mqtt import Broker, PublishEvent
from .timing import TimingTerm, bill_coefficients, bill_protocol, DEFAULT_COEFFICIENTS
from .uma import UmaEngine

P1 = NodeRole.P1
MB1 = NodeRole.MB1_P2_RO
RS = NodeRole.S1_MB2_RS
AS = NodeRole.AS
CLIENT = NodeRole.CLIENT
S2 = NodeRole.S2_RP
K = MessageKind

COEFFICIENT = "coefficient"
TRANSCRIPT = "transcript"


class PrerequisiteMissing(ProtocolError):
    pass


class LinkClass(str, Enum):
    ZIGBEE_LOCAL = "ZigbeeLocal"
    INTER_REGION = "InterRegion"
    INTRA_FOG = "IntraFog"


DEFAULT_LINKS: dict[frozenset[NodeRole], LinkClass] = {
    frozenset({P1, MB1}): LinkClass.ZIGBEE_LOCAL,
    frozenset({MB1, RS}): LinkClass.INTER_REGION,
    frozenset({RS, AS}): LinkClass.INTRA_FOG,
    frozenset({CLIENT, RS}): LinkClass.INTRA_FOG,
    frozenset({CLIENT, AS}): LinkClass.INTRA_FOG,
    frozenset({S2, CLIENT}): LinkClass.INTER_REGION,
}


@dataclass(frozen=True)
class HybridTopology:
    nodes: frozenset[NodeRole] = frozenset(NodeRole)
    links: Mapping[frozenset[NodeRole], LinkClass] = field(
        default_factory=lambda: dict(DEFAULT_LINKS)
    )

    def link_class(self, a: NodeRole, b: NodeRole) -> Optional[LinkClass]:
        return self.links.get(frozenset({a, b}))

    def has_link(self, a: NodeRole, b: NodeRole) -> bool:
        return frozenset({a, b}) in self.links

    def check(self, transcript: FlowTranscript) -> None:
        for msg in transcript.messages:
            if not self.has_link(msg.sender, msg.receiver):
                raise ProtocolError(
                    f"seq {msg.seq}: {msg.sender} -> {msg.receiver} uses no topology link"
                )


_ROLE_MAP: tuple[tuple[Optional[str], Optional[str]], ...] = (
    ("P1", None),
    ("MB1/P2", "RO"),
    ("S1/MB2", "RS"),
    (None, "AS"),
    ("S2", "RP"),
    (None, "Client"),
    ("topic", "R"),
)


def role_map() -> tuple[tuple[Optional[str], Optional[str]], ...]:
    """Static MQTT-to-UMA correspondence; ``None`` marks no counterpart."""
    return _ROLE_MAP


def mqtt_to_uma(name: str) -> Optional[str]:
    for mqtt, uma in _ROLE_MAP:
        if mqtt == name:
            return uma
    raise KeyError(name)


def uma_to_mqtt(name: str) -> Optional[str]:
    for mqtt, uma in _ROLE_MAP:
        if uma == name:
            return mqtt
    raise KeyError(name)


class HybridSystem:
    """Combined broker + UMA state for one deployment.

    ``subscribers`` is the RS-side table of requesting parties subscribed to
    each topic and the RPT each presented.
    """

    def __init__(
        self,
        topology: Optional[HybridTopology] = None,
        devices: Iterable[str] = ("p1-0",),
        coefficients: Optional[Mapping[PhaseKind, Mapping[TimingTerm, int]]] = None,
    ) -> None:
        self.topology = topology or HybridTopology()
        self.devices = tuple(devices)
        self.coefficients = coefficients or DEFAULT_COEFFICIENTS
        self.mb1 = Broker(MB1)
        self.mb2 = Broker(RS)
        self.uma = UmaEngine(resources=self.mb2)
        self.completed: set[tuple[PhaseKind, str]] = set()
        self.aats: dict[tuple[str, str], str] = {}
        self.rpts: dict[tuple[str, str], str] = {}
        self.subscribers: dict[str, dict[str, Optional[str]]] = {}
        # one-time device sessions, outside any timed phase
        self.setup = FlowTranscript()
        for _ in self.devices:
            self.mb1.connect(P1, self.setup)

    def clone(self) -> "HybridSystem":
        return copy.deepcopy(self)

    def rpt(self, client_id: str, resource: str) -> Optional[Token]:
        rpt_id = self.rpts.get((client_id, resource))
        return self.uma.registry.get(rpt_id) if rpt_id else None

    def _require(self, phase: PhaseKind, resource: str, needed: PhaseKind) -> None:
        if (needed, resource) not in self.completed:
            raise PrerequisiteMissing(f"{phase.value} needs {needed.value} for {resource!r}")

    # -- flows -------------------------------------------------------------

    def run_flow(
        self,
        phase: PhaseKind,
        resource: str = "temp/room1",
        client_id: str = "rp-1",
        *,
        value: bytes = b"21.5",
        device: Optional[str] = None,
        policy: Optional[Iterable[str]] = None,
        mode: str = COEFFICIENT,
    ) -> FlowTranscript:
        if mode not in (COEFFICIENT, TRANSCRIPT):
            raise ValueError(f"unknown billing mode {mode!r}")
        if phase is PhaseKind.PROTECTION_AUTHORIZATION:
            t = self._protection_authorization(resource, client_id, policy)
        elif phase is PhaseKind.SUBSCRIBE:
            t = self._subscribe(resource, client_id)
        elif phase is PhaseKind.INITIAL_PUBLISH:
            t = self._publish(phase, resource, value, device, initial=True)
        elif phase is PhaseKind.PUBLISH:
            self._require(phase, resource, PhaseKind.INITIAL_PUBLISH)
            t = self._publish(phase, resource, value, device, initial=False)
        elif phase is PhaseKind.ACCESS:
            t = self._access(resource, client_id)
        else:  # pragma: no cover
            raise ValueError(phase)
        t.phase = phase
        self.topology.check(t)
        if mode == COEFFICIENT:
            bill_coefficients(t, self.coefficients[phase])
        else:
            bill_protocol(t)
        self.completed.add((phase, resource))
        return t

    def _protection_authorization(
        self, resource: str, client_id: str, policy: Optional[Iterable[str]]
    ) -> FlowTranscript:
        allowed = [client_id] if policy is None else list(policy)
        t = self.uma.phase1_protect(MB1, resource, allowed)
        t.extend(self.authorize(client_id, resource))
        return t

    def authorize(self, client_id: str, resource: str) -> FlowTranscript:
        """Authorization exchange for one more requesting party (unbilled)."""
        t, rpt = self.uma.phase2_authorize(client_id, resource)
        self.aats[(client_id, resource)] = next(
            m.token for m in t.messages if m.kind is K.AATResponse
        )
        self.rpts[(client_id, resource)] = rpt.id
        if client_id in self.subscribers.get(resource, {}):
            self.subscribers[resource][client_id] = rpt.id
        return t

    def _subscribe(self, resource: str, client_id: str) -> FlowTranscript:
        if not self.uma.is_protected(resource):
            raise PrerequisiteMissing(f"Subscribe needs a protected resource, {resource!r} is not")
        rpt_id = self.rpts.get((client_id, resource))
        t = FlowTranscript()
        t.send(S2, CLIENT, K.Subscribe, resource=resource, payload={"rp": client_id})
        if CLIENT not in self.mb2.sessions:
            self.mb2.connect(CLIENT)
        self.mb2.subscribe(CLIENT, resource)
        t.send(CLIENT, RS, K.Subscribe, resource=resource, token=rpt_id,
               payload={"rp": client_id})
        self.subscribers.setdefault(resource, {})[client_id] = rpt_id
        return t

    def _publish(
        self,
        phase: PhaseKind,
        resource: str,
        value: bytes,
        device: Optional[str],
        initial: bool,
    ) -> FlowTranscript:
        if initial and not self.uma.is_protected(resource):
            raise PrerequisiteMissing(f"{phase.value} needs a protected resource")
        device = device or self.devices[0]
        if device not in self.devices:
            raise ValueError(f"unknown device {device!r}")
        t = FlowTranscript()
        event = PublishEvent(resource, value, P1)
        self.mb1.publish(event)
        t.send(P1, MB1, K.Publish, resource=resource, payload={"device": device})
        if MB1 not in self.mb2.sessions:
            # MB1 acts as publisher P2 towards the second broker
            self.mb2.connect(MB1, t)
        self.mb2.publish(PublishEvent(resource, value, MB1))
        t.send(MB1, RS, K.Publish, resource=resource)
        if initial:
            self.uma.lookup_pat(resource, t)
        self.notify_subscribers_on_publish(resource, t)
        return t

    def _access(self, resource: str, client_id: str) -> FlowTranscript:
        self._require(PhaseKind.ACCESS, resource, PhaseKind.PROTECTION_AUTHORIZATION)
        rpt = self.rpt(client_id, resource)
        if rpt is None:
            raise PrerequisiteMissing(f"no RPT for {client_id!r} on {resource!r}")
        t, _ = self.uma.phase3_access(client_id, resource, rpt)
        return t

    def notify_subscribers_on_publish(
        self, topic: str, transcript: Optional[FlowTranscript] = None
    ) -> list[ProtocolMessage]:
        """Push the retained value to every subscribed RP with a valid RPT.

        One isValid round trip per subscriber, then RS -> Client -> S2.
        Returns the final deliveries to S2.
        """
        t = transcript if transcript is not None else FlowTranscript()
        value = self.mb2.last_value(topic)
        delivered = []
        for client_id, rpt_id in self.subscribers.get(topic, {}).items():
            if rpt_id is None:
                continue
            rpt = self.uma.registry.get(rpt_id)
            t.send(RS, AS, K.IsValid, resource=topic, token=rpt_id)
            verdict = validate(rpt, topic, self.uma.registry)
            if not verdict:
                t.send(AS, RS, K.IsValidReply, resource=topic, token=rpt_id,
                       status=Status.FORBIDDEN_403,
                       payload={"valid": False, "reason": verdict.reason.value})
                continue
            t.send(AS, RS, K.IsValidReply, resource=topic, token=rpt_id,
                   status=Status.OK, payload={"valid": True})
            t.send(RS, CLIENT, K.Publish, resource=topic, token=rpt_id,
                   payload={"rp": client_id, "value": value})
            delivered.append(
                t.send(CLIENT, S2, K.Publish, resource=topic,
                       payload={"rp": client_id, "value": value})
            )
        return delivered

    def revoke_rpt(self, client_id: str, resource: str) -> None:
        rpt_id = self.rpts[(client_id, resource)]
        if self.uma.registry.get(rpt_id).state is not TokenState.REVOKED:
            self.uma.registry.revoke(rpt_id)


# Order in which every prerequisite is satisfied before it is needed.
PHASE_SEQUENCE = (
    PhaseKind.PROTECTION_AUTHORIZATION,
    PhaseKind.SUBSCRIBE,
    PhaseKind.INITIAL_PUBLISH,
    PhaseKind.ACCESS,
    PhaseKind.PUBLISH,
)


def prepare_for(phase: PhaseKind, system: Optional[HybridSystem] = None, **kw) -> HybridSystem:
    """Return a system on which ``phase`` can run, running earlier phases."""
    system = system or HybridSystem()
    for earlier in PHASE_SEQUENCE[: PHASE_SEQUENCE.index(phase)]:
        system.run_flow(earlier, **kw)
    return system
