"""Client endpoint: registers and logs in through the broker, transacts directly with companies."""

from __future__ import annotations

from decimal import Decimal

from trustmarket.auth import Session
from trustmarket.broker import BrokeredSession
from trustmarket.errors import NoBrokeredSession, Unauthenticated
from trustmarket.network import Actor, SimulatedNetwork, raise_for_reply


class Client(Actor):
    def __init__(self, user_id: str, network: SimulatedNetwork, broker_id: str = "broker"):
        super().__init__(user_id, network)
        self.broker_id = broker_id
        self.session: Session | None = None
        self.invoices: list[str] = []

    @property
    def user_id(self) -> str:
        return self.principal

    def register(self, mail_address: str) -> None:
        raise_for_reply(self.request(self.broker_id, "register", mail_address=mail_address))

    def login(self, otp: str) -> Session:
        reply = raise_for_reply(self.request(self.broker_id, "login", otp=otp))
        self.session = Session(reply["session_id"], self.user_id, reply["established_at"])
        return self.session

    def transact(self, brokered: BrokeredSession, summary: str, amount: Decimal | str) -> str:
        if self.session is None:
            raise Unauthenticated(f"{self.user_id} is not logged in")
        if brokered.client_id != self.user_id:
            raise NoBrokeredSession("brokered session belongs to another client")
        reply = raise_for_reply(
            self.request(
                brokered.company_id,
                "order",
                session_id=brokered.session_id,
                summary=summary,
                amount=str(amount),
            )
        )
        self.invoices.append(reply["invoice_id"])
        return reply["invoice_id"]
