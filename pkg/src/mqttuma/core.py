"""Shared vocabulary for the MQTT/UMA hybrid model.

Roles, tokens, protocol messages and the token registry used by every other
module. Tokens are opaque ids looked up in a server-side registry; there is
no signing or encoding.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterator, Optional


class ProtocolError(Exception):
    """Base class for protocol-level failures raised by the engines."""


class IllegalHolder(ProtocolError):
    pass


class IllegalTransition(ProtocolError):
    pass


class UnknownToken(ProtocolError):
    pass


class NodeRole(str, Enum):
    """The six nodes of the hybrid topology.

    Composite roles (a broker that is also a publisher and resource owner,
    etc.) are single nodes.
    """

    P1 = "P1"
    MB1_P2_RO = "MB1/P2/RO"
    S1_MB2_RS = "S1/MB2/RS"
    AS = "AS"
    CLIENT = "Client"
    S2_RP = "S2/RP"

    def __str__(self) -> str:
        return self.value


class PhaseKind(str, Enum):
    PROTECTION_AUTHORIZATION = "ProtectionAuthorization"
    ACCESS = "Access"
    INITIAL_PUBLISH = "InitialPublish"
    PUBLISH = "Publish"
    SUBSCRIBE = "Subscribe"

    @classmethod
    def parse(cls, name: str) -> "PhaseKind":
        for phase in cls:
            if name in (phase.value, phase.name):
                return phase
        raise ValueError(f"unknown phase {name!r}")


class TokenKind(str, Enum):
    PAT = "PAT"
    AAT = "AAT"
    RPT = "RPT"
    PERMISSION_TICKET = "PermissionTicket"


class TokenState(str, Enum):
    ISSUED = "Issued"
    AUTHORIZED = "Authorized"
    REVOKED = "Revoked"
    CONSUMED = "Consumed"


class MessageKind(str, Enum):
    Connect = "Connect"
    ConnAck = "ConnAck"
    Publish = "Publish"
    Subscribe = "Subscribe"
    LoginRegister = "LoginRegister"
    GetPAT = "GetPAT"
    PATResponse = "PATResponse"
    GetResource = "GetResource"
    UnauthorizedWithEndpoint = "UnauthorizedWithEndpoint"
    RegisterClient = "RegisterClient"
    AATResponse = "AATResponse"
    GetRPT = "GetRPT"
    RPTResponse = "RPTResponse"
    AccessResource = "AccessResource"
    IsValid = "IsValid"
    IsValidReply = "IsValidReply"
    SetPermission = "SetPermission"
    PermissionTicketResponse = "PermissionTicketResponse"
    ForbiddenWithTicket = "ForbiddenWithTicket"
    ResourceResponse = "ResourceResponse"


REPLY_KINDS = frozenset(
    {
        MessageKind.ConnAck,
        MessageKind.PATResponse,
        MessageKind.UnauthorizedWithEndpoint,
        MessageKind.AATResponse,
        MessageKind.RPTResponse,
        MessageKind.IsValidReply,
        MessageKind.PermissionTicketResponse,
        MessageKind.ForbiddenWithTicket,
        MessageKind.ResourceResponse,
    }
)


class Status(str, Enum):
    OK = "OK"
    UNAUTHORIZED_401 = "401"
    FORBIDDEN_403 = "403"


# Every token is minted by the AS; the holder is fixed per kind.
LEGAL_HOLDERS = {
    TokenKind.PAT: NodeRole.S1_MB2_RS,
    TokenKind.AAT: NodeRole.CLIENT,
    TokenKind.RPT: NodeRole.CLIENT,
    TokenKind.PERMISSION_TICKET: NodeRole.CLIENT,
}


def check_resource(name: str) -> str:
    """Return ``name`` if it is usable as a topic/resource identifier."""
    if not isinstance(name, str) or not name.strip():
        raise ValueError(f"resource id must be a non-empty string, got {name!r}")
    return name


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    id: str
    issuer: NodeRole
    holder: NodeRole
    scope: str
    state: TokenState = TokenState.ISSUED
    # requesting-party identity the token was minted for (AAT/RPT/ticket)
    subject: Optional[str] = None


class InvalidReason(str, Enum):
    UNKNOWN_TOKEN = "UnknownToken"
    NOT_YET_PERMISSIONED = "NotYetPermissioned"
    SCOPE_MISMATCH = "ScopeMismatch"
    REVOKED = "Revoked"
    CONSUMED = "Consumed"
    NOT_ACCESS_TOKEN = "NotAccessToken"


@dataclass(frozen=True)
class Verdict:
    valid: bool
    reason: Optional[InvalidReason] = None

    def __bool__(self) -> bool:
        return self.valid


VALID = Verdict(True)


_LEGAL_TRANSITIONS = {
    (TokenKind.RPT, TokenState.ISSUED, TokenState.AUTHORIZED),
    (TokenKind.PERMISSION_TICKET, TokenState.ISSUED, TokenState.CONSUMED),
}


class TokenRegistry:
    """Authoritative token store kept by the authorization server.

    Tokens are immutable snapshots; the registry holds the current one for
    each id. Mutation is single-writer.
    """

    def __init__(self) -> None:
        self._tokens: dict[str, Token] = {}
        self._counter = itertools.count(1)

    def __contains__(self, token_id: object) -> bool:
        return token_id in self._tokens

    def __iter__(self) -> Iterator[Token]:
        return iter(self._tokens.values())

    def __len__(self) -> int:
        return len(self._tokens)

    def issue(
        self,
        kind: TokenKind,
        holder: NodeRole,
        scope: str,
        subject: Optional[str] = None,
    ) -> Token:
        if LEGAL_HOLDERS[kind] is not holder:
            raise IllegalHolder(f"{kind.value} cannot be issued to {holder}")
        check_resource(scope)
        token = Token(
            kind=kind,
            id=f"{kind.value}-{next(self._counter)}",
            issuer=NodeRole.AS,
            holder=holder,
            scope=scope,
            subject=subject,
        )
        self._tokens[token.id] = token
        return token

    def get(self, token_id: str) -> Token:
        try:
            return self._tokens[token_id]
        except KeyError:
            raise UnknownToken(token_id) from None

    def transition(self, token_id: str, new_state: TokenState) -> Token:
        token = self.get(token_id)
        legal = new_state is TokenState.REVOKED or (
            (token.kind, token.state, new_state) in _LEGAL_TRANSITIONS
        )
        if not legal:
            raise IllegalTransition(
                f"{token.id}: {token.state.value} -> {new_state.value}"
            )
        updated = replace(token, state=new_state)
        self._tokens[token_id] = updated
        return updated

    def authorize(self, token_id: str) -> Token:
        return self.transition(token_id, TokenState.AUTHORIZED)

    def consume(self, token_id: str) -> Token:
        return self.transition(token_id, TokenState.CONSUMED)

    def revoke(self, token_id: str) -> Token:
        return self.transition(token_id, TokenState.REVOKED)

    def snapshot(self) -> dict[str, Token]:
        return dict(self._tokens)


def new_token(
    kind: TokenKind,
    holder: NodeRole,
    scope: str,
    registry: TokenRegistry,
    subject: Optional[str] = None,
) -> Token:
    return registry.issue(kind, holder, scope, subject=subject)


def validate(token: Token, resource: str, registry: TokenRegistry) -> Verdict:
    """Check ``token`` against the registry's current view for ``resource``.

    The registry copy wins over the passed snapshot, so a stale ``token``
    object cannot resurrect a revoked credential. Never mutates state.
    """
    current = registry.snapshot().get(token.id)
    if current is None:
        return Verdict(False, InvalidReason.UNKNOWN_TOKEN)
    if current.state is TokenState.REVOKED:
        return Verdict(False, InvalidReason.REVOKED)
    if current.state is TokenState.CONSUMED:
        return Verdict(False, InvalidReason.CONSUMED)
    if current.kind is TokenKind.PERMISSION_TICKET:
        return Verdict(False, InvalidReason.NOT_ACCESS_TOKEN)
    if current.kind is TokenKind.RPT and current.state is not TokenState.AUTHORIZED:
        return Verdict(False, InvalidReason.NOT_YET_PERMISSIONED)
    if current.scope != resource:
        return Verdict(False, InvalidReason.SCOPE_MISMATCH)
    return VALID


@dataclass(frozen=True)
class ProtocolMessage:
    """One arrow of a sequence diagram."""

    seq: int
    sender: NodeRole
    receiver: NodeRole
    kind: MessageKind
    resource: Optional[str] = None
    token: Optional[str] = None
    status: Optional[Status] = None
    payload: Any = None

    def __post_init__(self) -> None:
        if self.status is not None and self.kind not in REPLY_KINDS:
            raise ValueError(f"status is only allowed on replies, not {self.kind.value}")

    def to_record(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "from": self.sender.value,
            "to": self.receiver.value,
            "kind": self.kind.value,
            "resource": self.resource,
            "status": self.status.value if self.status is not None else None,
        }


@dataclass(frozen=True)
class Charge:
    """A billed cost item: a processing step or a coefficient-only surcharge.

    ``term`` is a timing-table symbol name (see ``timing.TimingTerm``).
    """

    term: str
    after_seq: Optional[int]
    node: Optional[NodeRole] = None
    note: str = ""


@dataclass
class FlowTranscript:
    """Ordered protocol messages for one phase plus its cost ledger.

    Every message is billed on its own link unless its seq is in ``waived``.
    ``charges`` holds processing steps and any surcharges.
    """

    phase: Optional[PhaseKind] = None
    mode: Optional[str] = None
    messages: list[ProtocolMessage] = field(default_factory=list)
    charges: list[Charge] = field(default_factory=list)
    waived: dict[int, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self) -> Iterator[ProtocolMessage]:
        return iter(self.messages)

    @property
    def next_seq(self) -> int:
        return self.messages[-1].seq + 1 if self.messages else 1

    def send(
        self,
        sender: NodeRole,
        receiver: NodeRole,
        kind: MessageKind,
        resource: Optional[str] = None,
        token: Optional[str] = None,
        status: Optional[Status] = None,
        payload: Any = None,
    ) -> ProtocolMessage:
        msg = ProtocolMessage(
            self.next_seq, sender, receiver, kind, resource, token, status, payload
        )
        self.messages.append(msg)
        return msg

    def process(self, node: NodeRole, note: str = "") -> Charge:
        from .timing import PROCESSING_TERMS

        last = self.messages[-1].seq if self.messages else None
        step = Charge(PROCESSING_TERMS[node].value, last, node, note)
        self.charges.append(step)
        return step

    def waive(self, seq: int, note: str = "") -> None:
        self.waived[seq] = note

    def extend(self, other: "FlowTranscript") -> None:
        """Append ``other``'s messages, renumbering them after ours."""
        offset = self.next_seq - 1
        for msg in other.messages:
            self.messages.append(replace(msg, seq=msg.seq + offset))
        for charge in other.charges:
            after = None if charge.after_seq is None else charge.after_seq + offset
            self.charges.append(replace(charge, after_seq=after))
        for seq, note in other.waived.items():
            self.waived[seq + offset] = note

    @property
    def processing_steps(self) -> list[Charge]:
        return [c for c in self.charges if c.node is not None]

    def kinds(self) -> list[MessageKind]:
        return [m.kind for m in self.messages]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(m.to_record()) + "\n" for m in self.messages)
