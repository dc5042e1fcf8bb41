"""UMA protect / authorize / access phases as a deterministic message generator.

Entities live in one engine: the authorization server (token registry and
per-resource policy), the resource server (PATs for protected resources)
and the client (AAT/RPT holdings per requesting party). Resource values are
read from the resource server's broker, when one is attached.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .core import (
    FlowTranscript,
    MessageKind,
    NodeRole,
    ProtocolError,
    ProtocolMessage,
    Status,
    Token,
    TokenKind,
    TokenRegistry,
    TokenState,
    check_resource,
    validate,
)
from .mqtt import Broker

RO = NodeRole.MB1_P2_RO
RS = NodeRole.S1_MB2_RS
AS = NodeRole.AS
CLIENT = NodeRole.CLIENT
K = MessageKind


class AlreadyProtected(ProtocolError):
    pass


class NotProtected(ProtocolError):
    pass


class IllegalOwner(ProtocolError):
    pass


@dataclass(frozen=True)
class Protection:
    resource: str
    pat_id: str
    allowed: frozenset[str]


class UmaEngine:
    def __init__(
        self,
        registry: Optional[TokenRegistry] = None,
        resources: Optional[Broker] = None,
    ) -> None:
        self.registry = registry if registry is not None else TokenRegistry()
        self.resources = resources
        self.protections: dict[str, Protection] = {}

    # -- queries -----------------------------------------------------------

    def live_protection(self, resource: str) -> Optional[Protection]:
        prot = self.protections.get(resource)
        if prot is None:
            return None
        if self.registry.get(prot.pat_id).state is TokenState.REVOKED:
            return None
        return prot

    def is_protected(self, resource: str) -> bool:
        return self.live_protection(resource) is not None

    def value_of(self, resource: str) -> Optional[bytes]:
        return self.resources.last_value(resource) if self.resources else None

    # -- phase 1 -----------------------------------------------------------

    def phase1_protect(
        self, owner: NodeRole, resource: str, policy: Iterable[str] = ()
    ) -> FlowTranscript:
        """Register ``resource`` at the RS and obtain a PAT for it.

        ``policy`` is the allow-list of requesting-party ids.
        """
        check_resource(resource)
        if owner is not RO:
            raise IllegalOwner(f"{owner} is not the resource owner")
        if self.is_protected(resource):
            raise AlreadyProtected(resource)
        allowed = frozenset(policy)
        t = FlowTranscript()
        t.send(RO, RS, K.LoginRegister, resource=resource,
               payload={"policy": sorted(allowed)})
        t.send(RS, AS, K.GetPAT, resource=resource, payload={"policy": sorted(allowed)})
        pat = self.registry.issue(TokenKind.PAT, RS, resource)
        self.protections[resource] = Protection(resource, pat.id, allowed)
        t.send(AS, RS, K.PATResponse, resource=resource, token=pat.id, status=Status.OK,
               payload={"ro": RO.value, "rs": RS.value, "pat": pat.id})
        return t

    def lookup_pat(self, resource: str, transcript: FlowTranscript) -> Token:
        """RS asks the AS for the PAT guarding ``resource`` (getPAT round trip)."""
        prot = self.live_protection(resource)
        if prot is None:
            raise NotProtected(resource)
        transcript.send(RS, AS, K.GetPAT, resource=resource)
        transcript.send(AS, RS, K.PATResponse, resource=resource, token=prot.pat_id,
                        status=Status.OK,
                        payload={"ro": RO.value, "rs": RS.value, "pat": prot.pat_id})
        return self.registry.get(prot.pat_id)

    # -- phase 2 -----------------------------------------------------------

    def phase2_authorize(self, client_id: str, resource: str) -> tuple[FlowTranscript, Token]:
        """Run the authorization exchange for requesting party ``client_id``.

        Returns the transcript and the final RPT, which is Authorized only
        if ``client_id`` is on the resource's allow-list.
        """
        prot = self.live_protection(resource)
        if prot is None:
            raise NotProtected(resource)
        t = FlowTranscript()
        t.send(CLIENT, RS, K.GetResource, resource=resource)
        t.send(RS, CLIENT, K.UnauthorizedWithEndpoint, resource=resource,
               status=Status.UNAUTHORIZED_401, payload={"as": AS.value})
        t.send(CLIENT, AS, K.RegisterClient, payload={"client": client_id})
        aat = self.registry.issue(TokenKind.AAT, CLIENT, resource, subject=client_id)
        t.send(AS, CLIENT, K.AATResponse, token=aat.id, status=Status.OK)
        t.send(CLIENT, AS, K.GetRPT, resource=resource, token=aat.id)
        rpt = self.registry.issue(TokenKind.RPT, CLIENT, resource, subject=client_id)
        t.send(AS, CLIENT, K.RPTResponse, resource=resource, token=rpt.id, status=Status.OK)

        _, allowed = self.access_check(resource, rpt, t)
        if not allowed:
            ticket_msg = t.messages[-1]
            self.redeem_ticket(client_id, aat.id, ticket_msg.token, rpt.id, t)
        return t, self.registry.get(rpt.id)

    def redeem_ticket(
        self,
        client_id: str,
        aat_id: str,
        ticket_id: Optional[str],
        rpt_id: str,
        transcript: Optional[FlowTranscript] = None,
    ) -> ProtocolMessage:
        """getRPT(AAT, ticket, initial RPT): upgrade the RPT in place.

        The ticket is consumed by the attempt whether or not policy allows
        the upgrade. Returns the AS reply.
        """
        t = transcript if transcript is not None else FlowTranscript()
        scope = self.registry.get(rpt_id).scope if rpt_id in self.registry else None
        t.send(CLIENT, AS, K.GetRPT, resource=scope, token=ticket_id,
               payload={"aat": aat_id, "ticket": ticket_id, "rpt": rpt_id})
        reason = self._upgrade(client_id, aat_id, ticket_id, rpt_id)
        if reason is None:
            return t.send(AS, CLIENT, K.RPTResponse, resource=scope, token=rpt_id,
                          status=Status.OK)
        return t.send(AS, CLIENT, K.RPTResponse, resource=scope, token=rpt_id,
                      status=Status.FORBIDDEN_403, payload={"reason": reason})

    def _upgrade(
        self, client_id: str, aat_id: str, ticket_id: Optional[str], rpt_id: str
    ) -> Optional[str]:
        reg = self.registry
        if ticket_id is None or ticket_id not in reg:
            return "unknown-ticket"
        ticket = reg.get(ticket_id)
        if ticket.kind is not TokenKind.PERMISSION_TICKET:
            return "not-a-ticket"
        if ticket.state is not TokenState.ISSUED:
            return "ticket-" + ticket.state.value.lower()
        reg.consume(ticket_id)
        if aat_id not in reg or not validate(reg.get(aat_id), reg.get(aat_id).scope, reg):
            return "invalid-aat"
        aat = reg.get(aat_id)
        if rpt_id not in reg:
            return "unknown-rpt"
        rpt = reg.get(rpt_id)
        if rpt.kind is not TokenKind.RPT or rpt.scope != ticket.scope:
            return "scope-mismatch"
        if rpt.subject != client_id or aat.subject != client_id:
            return "wrong-requesting-party"
        prot = self.live_protection(ticket.scope)
        if prot is None:
            return "not-protected"
        if client_id not in prot.allowed:
            return "policy-denied"
        if rpt.state is TokenState.ISSUED:
            reg.authorize(rpt_id)
        elif rpt.state is not TokenState.AUTHORIZED:
            return "rpt-" + rpt.state.value.lower()
        return None

    # -- phase 3 -----------------------------------------------------------

    def access_check(
        self, resource: str, rpt: Token, transcript: FlowTranscript
    ) -> tuple[Optional[bytes], bool]:
        """get(R, RPT) at the RS followed by the isValid round trip.

        On success the RS replies with the resource value; otherwise it
        registers a permission and returns 403 with the ticket.
        """
        t = transcript
        t.send(CLIENT, RS, K.AccessResource, resource=resource, token=rpt.id)
        t.send(RS, AS, K.IsValid, resource=resource, token=rpt.id)
        verdict = validate(rpt, resource, self.registry)
        if verdict:
            t.send(AS, RS, K.IsValidReply, resource=resource, token=rpt.id,
                   status=Status.OK, payload={"valid": True})
            value = self.value_of(resource)
            t.send(RS, CLIENT, K.ResourceResponse, resource=resource, token=rpt.id,
                   status=Status.OK, payload=value)
            return value, True
        t.send(AS, RS, K.IsValidReply, resource=resource, token=rpt.id,
               status=Status.FORBIDDEN_403,
               payload={"valid": False, "reason": verdict.reason.value})
        ticket_id = None
        prot = self.live_protection(resource)
        if prot is not None:
            t.send(RS, AS, K.SetPermission, resource=resource, token=prot.pat_id)
            ticket = self.registry.issue(
                TokenKind.PERMISSION_TICKET, CLIENT, resource, subject=rpt.subject
            )
            ticket_id = ticket.id
            t.send(AS, RS, K.PermissionTicketResponse, resource=resource,
                   token=ticket_id, status=Status.OK)
        t.send(RS, CLIENT, K.ForbiddenWithTicket, resource=resource, token=ticket_id,
               status=Status.FORBIDDEN_403)
        return None, False

    def phase3_access(
        self, client_id: str, resource: str, rpt: Token
    ) -> tuple[FlowTranscript, Optional[bytes]]:
        """Client-initiated pull of ``resource`` with ``rpt``.

        Denial is a transcript ending in ForbiddenWithTicket, not an error.
        """
        t = FlowTranscript()
        value, _ = self.access_check(resource, rpt, t)
        return t, value
