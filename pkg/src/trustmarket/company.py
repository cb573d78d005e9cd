"""A simulated e-business company node.

The company's main system keeps two append-only stores under its own
directory: ``invoices.rec`` holds only ciphertext plus a key reference, and
``keystore.rec`` holds the 128-bit keys.  One key is generated per invoice.
Client evidence is rated onto the company's own servers and forwarded to the
broker as a sealed message.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any

from trustmarket import crypto, trust
from trustmarket.auth import Session
from trustmarket.errors import (
    InvalidProfile,
    MissingKey,
    NoBrokeredSession,
    NoCompletedTransaction,
    TrustMarketError,
    TrustValueError,
    Unauthorized,
    UnknownInvoice,
    UnknownServer,
)
from trustmarket.network import Actor, SimulatedNetwork, pack, raise_for_reply, unpack
from trustmarket.records import RecordFile, b64d, b64e


@dataclass(frozen=True)
class CompanyProfile:
    company_id: str
    display_name: str
    initial_expectation: float = trust.DEFAULT_F
    dispositional_trust: float = trust.DEFAULT_W
    evidence_cap: int = trust.DEFAULT_N

    def validate(self) -> "CompanyProfile":
        if not self.company_id:
            raise InvalidProfile("company_id must be non-empty")
        f = self.initial_expectation
        if not (0.0 < f <= 1.0):
            # f = 0 leaves the behavioral probability undefined
            raise InvalidProfile(f"initial expectation must be in (0, 1], got {f!r}")
        try:
            trust.EvidenceRecord(0, 0, self.evidence_cap, self.dispositional_trust)
        except TrustValueError as exc:
            raise InvalidProfile(str(exc)) from None
        return self

    def empty_evidence(self) -> trust.EvidenceRecord:
        return trust.EvidenceRecord(0, 0, self.evidence_cap, self.dispositional_trust)

    def to_dict(self) -> dict[str, Any]:
        return {
            "company_id": self.company_id,
            "display_name": self.display_name,
            "f": self.initial_expectation,
            "w": self.dispositional_trust,
            "N": self.evidence_cap,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CompanyProfile":
        return cls(d["company_id"], d["display_name"], d["f"], d["w"], d["N"])


class ServerKind(str, enum.Enum):
    SERVER = "SERVER"
    DATABASE = "DATABASE"


@dataclass(frozen=True)
class ServerRecord:
    server_id: str
    kind: ServerKind
    evidence: trust.EvidenceRecord
    opinion: trust.Opinion


@dataclass(frozen=True)
class Order:
    summary: str
    amount: Decimal

    @classmethod
    def of(cls, summary: str, amount: Decimal | str | float) -> "Order":
        if not summary:
            raise ValueError("order summary must be non-empty")
        try:
            amt = Decimal(str(amount)).quantize(Decimal("0.01"))
        except InvalidOperation:
            raise ValueError(f"invalid amount {amount!r}") from None
        if amt < 0:
            raise ValueError("amount must be non-negative")
        return cls(summary, amt)


@dataclass(frozen=True)
class InvoiceRecord:
    invoice_id: str
    client_id: str
    order_summary: str
    amount: Decimal
    ciphertext: bytes = field(repr=False)
    key_ref: str = ""


@dataclass(frozen=True)
class StoredInvoice:
    invoice_id: str
    client_id: str
    ciphertext: bytes
    key_ref: str


class KeyStore:
    """Main-system keystore; deletions append a tombstone."""

    def __init__(self, path: str | Path | None = None):
        self._file = RecordFile(path)
        self._keys: dict[str, crypto.SymmetricKey] = {}
        for rec in self._file:
            if rec.get("deleted"):
                self._keys.pop(rec["key_id"], None)
            else:
                self._keys[rec["key_id"]] = crypto.SymmetricKey(rec["key_id"], b64d(rec["material"]))

    def put(self, key: crypto.SymmetricKey) -> None:
        self._file.append({"key_id": key.key_id, "material": b64e(key.material)})
        self._keys[key.key_id] = key

    def get(self, key_id: str) -> crypto.SymmetricKey:
        try:
            return self._keys[key_id]
        except KeyError:
            raise MissingKey(f"key {key_id} not in keystore") from None

    def delete(self, key_id: str) -> None:
        self._file.append({"key_id": key_id, "deleted": True})
        self._keys.pop(key_id, None)

    def ids(self) -> set[str]:
        return set(self._keys)

    def __len__(self) -> int:
        return len(self._keys)


class InvoiceStore:
    def __init__(self, path: str | Path | None = None):
        self._file = RecordFile(path)
        self._records: dict[str, StoredInvoice] = {}
        for rec in self._file:
            self._records[rec["invoice_id"]] = StoredInvoice(
                rec["invoice_id"], rec["client_id"], b64d(rec["ciphertext"]), rec["key_ref"]
            )

    def put(self, rec: StoredInvoice) -> None:
        self._file.append(
            {"invoice_id": rec.invoice_id, "client_id": rec.client_id, "ciphertext": b64e(rec.ciphertext), "key_ref": rec.key_ref}
        )
        self._records[rec.invoice_id] = rec

    def get(self, invoice_id: str) -> StoredInvoice:
        try:
            return self._records[invoice_id]
        except KeyError:
            raise UnknownInvoice(invoice_id) from None

    def ids(self) -> set[str]:
        return set(self._records)

    def __len__(self) -> int:
        return len(self._records)


class CompanyNode(Actor):
    """One company's main system, attached to the simulated network as ``company_id``."""

    def __init__(
        self,
        profile: CompanyProfile,
        network: SimulatedNetwork,
        broker_id: str = "broker",
        directory: str | Path | None = None,
    ):
        self.profile = profile.validate()
        super().__init__(profile.company_id, network)
        self.broker_id = broker_id
        self.directory = Path(directory) if directory is not None else None
        self.keystore, self.invoices = self._open_stores()
        self.servers: dict[str, ServerRecord] = {}
        self.sessions: dict[str, Session] = {}
        self.transacted: set[str] = set()
        self.faults: set[str] = set()
        self.evidence_reported = {trust.Outcome.POSITIVE: 0, trust.Outcome.NEGATIVE: 0}
        self._invoice_seq = 0

    @property
    def company_id(self) -> str:
        return self.profile.company_id

    def _open_stores(self) -> tuple[KeyStore, InvoiceStore]:
        if self.directory is None:
            return KeyStore(), InvoiceStore()
        # keys and invoices are never co-located in one file
        return KeyStore(self.directory / "keystore.rec"), InvoiceStore(self.directory / "invoices.rec")

    def reload_stores(self) -> None:
        """Re-read both stores from disk, e.g. after a keystore file was lost."""
        self.keystore, self.invoices = self._open_stores()

    # -- servers ---------------------------------------------------------

    def add_server(self, server_id: str, kind: ServerKind | str = ServerKind.SERVER) -> ServerRecord:
        ev = self.profile.empty_evidence()
        rec = ServerRecord(server_id, ServerKind(kind), ev, trust.make_opinion(ev, self.profile.initial_expectation))
        self.servers[server_id] = rec
        return rec

    def rate_server(self, server_id: str, outcome: trust.Outcome | str) -> ServerRecord:
        try:
            rec = self.servers[server_id]
        except KeyError:
            raise UnknownServer(server_id) from None
        ev = rec.evidence.add(outcome)
        rec = replace(rec, evidence=ev, opinion=trust.make_opinion(ev, self.profile.initial_expectation))
        self.servers[server_id] = rec
        self.net.log.emit(self.net.now, "server-rated", company=self.company_id, server=server_id, r=ev.r, s=ev.s)
        return rec

    # -- transactions ----------------------------------------------------

    def handle_transaction(self, session: Session, order: Order) -> InvoiceRecord:
        if self.sessions.get(session.session_id) != session:
            raise NoBrokeredSession(f"{session.user_id} has no brokered session with {self.company_id}")
        self._invoice_seq += 1
        invoice_id = f"inv-{self.company_id}-{self._invoice_seq:04d}"
        key = crypto.generate_symmetric_key(self.net.rng)
        document = pack(
            {
                "invoice_id": invoice_id,
                "client_id": session.user_id,
                "company_id": self.company_id,
                "order_summary": order.summary,
                "amount": str(order.amount),
            }
        )
        ciphertext = crypto.symmetric_encrypt(key, document, self.net.rng)
        self.keystore.put(key)
        self.invoices.put(StoredInvoice(invoice_id, session.user_id, ciphertext, key.key_id))
        self.transacted.add(session.user_id)
        self.net.log.emit(self.net.now, "invoice-stored", company=self.company_id, invoice=invoice_id, key_ref=key.key_id)
        return InvoiceRecord(invoice_id, session.user_id, order.summary, order.amount, ciphertext, key.key_id)

    def retrieve_invoice(self, invoice_id: str, requester: str) -> Order:
        stored = self.invoices.get(invoice_id)
        if requester not in (stored.client_id, self.company_id):
            raise Unauthorized(f"{requester} may not read {invoice_id}")
        key = self.keystore.get(stored.key_ref)
        doc = unpack(crypto.symmetric_decrypt(key, stored.ciphertext))
        return Order(doc["order_summary"], Decimal(doc["amount"]))

    # -- evidence --------------------------------------------------------

    def report_evidence(self, outcome: trust.Outcome | str, client_id: str) -> dict[str, Any]:
        """Forward one client evaluation to the broker and wait for its acknowledgment."""
        outcome = trust.Outcome.parse(outcome)
        if client_id not in self.transacted:
            raise NoCompletedTransaction(f"{client_id} has not transacted with {self.company_id}")
        ack = raise_for_reply(
            self.request(self.broker_id, "evidence", company_id=self.company_id, outcome=outcome.value, client_id=client_id)
        )
        self.evidence_reported[outcome] += 1
        return ack

    # -- message handlers ------------------------------------------------

    def on_notify(self, src: str, payload: dict[str, Any]) -> None:
        if "drop-notifications" in self.faults:
            self.net.log.emit(self.net.now, "notification-dropped", company=self.company_id)
            return
        session = Session(payload["session_id"], payload["client_id"], payload["established_at"])
        self.sessions[session.session_id] = session
        self.reply(src, payload["request_id"], ok=True, company_id=self.company_id)

    def on_order(self, src: str, payload: dict[str, Any]) -> None:
        rid = payload["request_id"]
        session = self.sessions.get(payload["session_id"])
        try:
            if session is None or session.user_id != src:
                raise NoBrokeredSession(f"{src} has no brokered session with {self.company_id}")
            invoice = self.handle_transaction(session, Order.of(payload["summary"], payload["amount"]))
        except (TrustMarketError, ValueError) as exc:
            self.reply_error(src, rid, exc)
            return
        self.reply(src, rid, ok=True, invoice_id=invoice.invoice_id)
