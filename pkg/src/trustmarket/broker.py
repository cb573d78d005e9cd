"""Broker: trust ledger, listings, authentication host and session brokering.

The ledger is the single writer of company trust state.  Every accepted
piece of evidence is appended to ``evidence.log`` as
``<logical time>\\t<company id>\\t<outcome>`` and the profiles to
``companies.rec``; replaying those two files through a fresh ledger
reproduces every opinion and summary exactly.

The broker believes whatever evidence a registered company reports.  There
is no check on where the underlying client evaluations came from.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

from trustmarket import trust
from trustmarket.auth import AuthService, Session
from trustmarket.company import CompanyProfile
from trustmarket.errors import (
    CompanyUnavailable,
    DuplicateCompany,
    NotRegistered,
    TransportFailure,
    TrustMarketError,
    UnknownCompany,
)
from trustmarket.network import Actor, SimulatedNetwork
from trustmarket.records import RecordFile

DEFAULT_ACK_TIMEOUT = 10


@dataclass(frozen=True)
class CompanyLedgerEntry:
    company_id: str
    profile: CompanyProfile
    evidence: trust.EvidenceRecord
    opinion: trust.Opinion
    summary: trust.TrustSummary
    updated_at: int

    @property
    def rated(self) -> bool:
        return self.evidence.total > 0


@dataclass(frozen=True)
class ListingRow:
    company_id: str
    display_name: str
    trust_percent: float
    behavior_percent: float
    classification: trust.Classification
    unrated: bool


class Listing(list):
    """Rows sorted by T descending, then company id ascending."""

    HEADER = ("company", "name", "T%", "P%", "classification", "status")

    def to_tsv(self) -> str:
        lines = ["\t".join(self.HEADER)]
        for row in self:
            lines.append(
                "\t".join(
                    (
                        row.company_id,
                        row.display_name,
                        f"{row.trust_percent:.2f}",
                        f"{row.behavior_percent:+.2f}",
                        row.classification.value,
                        "unrated" if row.unrated else "rated",
                    )
                )
            )
        return "\n".join(lines) + "\n"


class TrustLedger:
    def __init__(
        self,
        directory: str | Path | None = None,
        clock: Callable[[], int] = lambda: 0,
        scale: trust.RatingScale = trust.RatingScale(),
    ):
        self.clock = clock
        self.scale = scale
        self.entries: dict[str, CompanyLedgerEntry] = {}
        self.directory = Path(directory) if directory is not None else None
        self._profiles = RecordFile(self.directory / "companies.rec" if self.directory else None)
        self._evidence_path = self.directory / "evidence.log" if self.directory else None
        if self._evidence_path is not None and not self._evidence_path.exists():
            self._evidence_path.touch()
        self.evidence_log: list[tuple[int, str, trust.Outcome]] = []

    def _entry(self, profile: CompanyProfile, ev: trust.EvidenceRecord, updated_at: int) -> CompanyLedgerEntry:
        opinion = trust.make_opinion(ev, profile.initial_expectation)
        return CompanyLedgerEntry(profile.company_id, profile, ev, opinion, trust.summarize(opinion, self.scale), updated_at)

    def register_company(self, profile: CompanyProfile) -> CompanyLedgerEntry:
        profile.validate()
        if profile.company_id in self.entries:
            raise DuplicateCompany(profile.company_id)
        entry = self._entry(profile, profile.empty_evidence(), self.clock())
        self._profiles.append({**profile.to_dict(), "registered_at": entry.updated_at})
        self.entries[profile.company_id] = entry
        return entry

    def ingest_evidence(self, company_id: str, outcome: trust.Outcome | str) -> CompanyLedgerEntry:
        outcome = trust.Outcome.parse(outcome)
        try:
            prev = self.entries[company_id]
        except KeyError:
            raise UnknownCompany(company_id) from None
        ev = prev.evidence.add(outcome)
        now = self.clock()
        entry = self._entry(prev.profile, ev, max(now, prev.updated_at + 1))
        # single assignment: readers see either the old or the new entry, never a mix
        self.entries[company_id] = entry
        self.evidence_log.append((now, company_id, outcome))
        if self._evidence_path is not None:
            with self._evidence_path.open("a", encoding="utf-8") as fh:
                fh.write(f"{now}\t{company_id}\t{outcome.value}\n")
        return entry

    def get(self, company_id: str) -> CompanyLedgerEntry:
        try:
            return self.entries[company_id]
        except KeyError:
            raise UnknownCompany(company_id) from None

    def __contains__(self, company_id: str) -> bool:
        return company_id in self.entries

    def list_companies(self) -> Listing:
        snapshot = list(self.entries.values())
        rows = [
            ListingRow(
                e.company_id,
                e.profile.display_name,
                e.summary.trust_percent,
                e.summary.behavior_percent,
                e.summary.classification,
                not e.rated,
            )
            for e in snapshot
        ]
        rows.sort(key=lambda r: (-r.trust_percent, r.company_id))
        return Listing(rows)

    @classmethod
    def replay(
        cls,
        profiles: Iterable[CompanyProfile | tuple[CompanyProfile, int]],
        evidence: Iterable[tuple[int, str, trust.Outcome | str]],
        scale: trust.RatingScale = trust.RatingScale(),
    ) -> "TrustLedger":
        """Rebuild a ledger from profiles (optionally with registration times) and an evidence log."""
        t = [0]
        ledger = cls(clock=lambda: t[0], scale=scale)
        for p in profiles:
            p, t[0] = p if isinstance(p, tuple) else (p, 0)
            ledger.register_company(p)
        for when, company_id, outcome in evidence:
            t[0] = when
            ledger.ingest_evidence(company_id, outcome)
        return ledger

    @classmethod
    def from_snapshot(cls, directory: str | Path, scale: trust.RatingScale = trust.RatingScale()) -> "TrustLedger":
        directory = Path(directory)
        profiles = [(CompanyProfile.from_dict(d), d.get("registered_at", 0)) for d in RecordFile(directory / "companies.rec")]
        return cls.replay(profiles, read_evidence_log(directory / "evidence.log"), scale)


def read_evidence_log(path: str | Path) -> list[tuple[int, str, trust.Outcome]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
        out.append((int(parts[0]), parts[1], trust.Outcome.parse(parts[2])))
    return out


@dataclass(frozen=True)
class DirectChannel:
    """Handle for the client <-> company link that bypasses the broker."""

    network: SimulatedNetwork
    client_id: str
    company_id: str


@dataclass(frozen=True)
class BrokeredSession:
    session_id: str
    client_id: str
    company_id: str
    channel: DirectChannel
    established_at: int


class Broker(Actor):
    def __init__(
        self,
        network: SimulatedNetwork,
        auth: AuthService,
        directory: str | Path | None = None,
        principal: str = "broker",
        ack_timeout: int = DEFAULT_ACK_TIMEOUT,
        scale: trust.RatingScale = trust.RatingScale(),
    ):
        super().__init__(principal, network)
        self.auth = auth
        self.ack_timeout = ack_timeout
        self.ledger = TrustLedger(directory, clock=lambda: network.now, scale=scale)
        self.sessions: dict[tuple[str, str], BrokeredSession] = {}

    # ledger surface
    def register_company(self, profile: CompanyProfile) -> CompanyLedgerEntry:
        entry = self.ledger.register_company(profile)
        self.net.log.emit(self.net.now, "company-registered", company=profile.company_id)
        return entry

    def ingest_evidence(self, company_id: str, outcome: trust.Outcome | str) -> CompanyLedgerEntry:
        entry = self.ledger.ingest_evidence(company_id, outcome)
        self.net.log.emit(
            self.net.now,
            "evidence",
            company=company_id,
            outcome=trust.Outcome.parse(outcome).value,
            r=entry.evidence.r,
            s=entry.evidence.s,
            T=f"{entry.summary.trust_percent:.6f}",
        )
        return entry

    def list_companies(self) -> Listing:
        return self.ledger.list_companies()

    def select_company(self, client: Session, company_id: str) -> BrokeredSession:
        """Notify the chosen company and, once it acknowledges, open a direct channel."""
        session = self.auth.require(client)
        if company_id not in self.ledger:
            raise UnknownCompany(company_id)
        rid = self.net.next_request_id()
        try:
            self.post(
                company_id,
                "notify",
                request_id=rid,
                session_id=session.session_id,
                client_id=session.user_id,
                established_at=session.established_at,
            )
        except TransportFailure as exc:
            raise CompanyUnavailable(str(exc)) from None
        deadline = self.net.now + self.ack_timeout
        if not self.net.run(stop=lambda: rid in self.replies, until=deadline):
            self.net.log.emit(self.net.now, "select-timeout", client=session.user_id, company=company_id)
            raise CompanyUnavailable(f"{company_id} did not acknowledge within {self.ack_timeout}")
        self.replies.pop(rid)
        self.net.connect(session.user_id, company_id)
        brokered = BrokeredSession(
            session.session_id,
            session.user_id,
            company_id,
            DirectChannel(self.net, session.user_id, company_id),
            self.net.now,
        )
        self.sessions[(session.session_id, company_id)] = brokered
        self.net.log.emit(self.net.now, "session-brokered", client=session.user_id, company=company_id)
        return brokered

    # message handlers
    def on_register(self, src: str, payload: dict[str, Any]) -> None:
        try:
            self.auth.register_user(src, payload["mail_address"])
        except (TrustMarketError, ValueError) as exc:
            self.reply_error(src, payload["request_id"], exc)
            return
        self.net.log.emit(self.net.now, "user-registered", user=src)
        self.reply(src, payload["request_id"], ok=True)

    def on_login(self, src: str, payload: dict[str, Any]) -> None:
        try:
            s = self.auth.login(src, payload["otp"])
        except TrustMarketError as exc:
            self.net.log.emit(self.net.now, "login-failed", user=src, reason=type(exc).__name__)
            self.reply_error(src, payload["request_id"], exc)
            return
        self.net.log.emit(self.net.now, "login", user=src, generation=self.auth.accounts[src].otp_generation)
        self.reply(src, payload["request_id"], ok=True, session_id=s.session_id, established_at=s.established_at)

    def on_evidence(self, src: str, payload: dict[str, Any]) -> None:
        rid = payload["request_id"]
        company_id = payload["company_id"]
        try:
            if company_id != src or company_id not in self.ledger:
                raise NotRegistered(f"{company_id} is not registered with the broker")
            entry = self.ingest_evidence(company_id, payload["outcome"])
        except TrustMarketError as exc:
            self.reply_error(src, rid, exc)
            return
        self.reply(src, rid, ok=True, r=entry.evidence.r, s=entry.evidence.s)
