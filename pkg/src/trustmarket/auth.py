"""OTP-only authentication with hashed storage and a simulated mail outbox.

Each account holds exactly one live OTP, stored as a digest.  Registration
mails the first OTP; every successful login consumes the current OTP,
replaces its digest with the digest of a freshly generated one and mails the
new cleartext.  There is no lockout on failed attempts.
"""

from __future__ import annotations

import random
import re
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from trustmarket import crypto
from trustmarket.errors import (
    BadOtp,
    DuplicateUser,
    InvalidMailAddress,
    ReplayedOtp,
    Unauthenticated,
    UnknownUser,
)
from trustmarket.records import encode_record

OTP_ALPHABET = string.ascii_letters + string.digits
OTP_LENGTH = 12

_MAIL_RE = re.compile(r"^[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}$")
_USER_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


def generate_otp(rng: random.Random, length: int = OTP_LENGTH) -> str:
    return "".join(rng.choice(OTP_ALPHABET) for _ in range(length))


@dataclass
class UserAccount:
    user_id: str
    mail_address: str
    otp_digest: crypto.Digest
    otp_generation: int = 0
    active_session: str | None = None


@dataclass(frozen=True)
class MailMessage:
    to: str
    body: str
    sent_at: int
    user_id: str
    generation: int

    @property
    def filename(self) -> str:
        return f"{self.user_id}-{self.generation}.msg"

    def otp(self) -> str:
        return self.body.rsplit(": ", 1)[1].strip()


@dataclass(frozen=True)
class Session:
    session_id: str
    user_id: str
    established_at: int


class Outbox:
    """Simulated mail delivery: messages kept in order and, optionally, one file each."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self.messages: list[MailMessage] = []

    def deliver(self, message: MailMessage) -> None:
        self.messages.append(message)
        if self.directory is not None:
            text = f"To: {message.to}\nSent-At: {message.sent_at}\n\n{message.body}\n"
            (self.directory / message.filename).write_text(text, encoding="utf-8")

    def for_user(self, user_id: str) -> list[MailMessage]:
        return [m for m in self.messages if m.user_id == user_id]

    def latest_otp(self, user_id: str) -> str:
        msgs = self.for_user(user_id)
        if not msgs:
            raise UnknownUser(user_id)
        return msgs[-1].otp()


class AuthService:
    """Account store plus OTP lifecycle.

    ``accounts_path`` is rewritten in full after every change so it only ever
    holds the current digest per user; old digests are not retained on disk.
    Digests of consumed OTPs are remembered in memory only, so a replay can
    be reported as :class:`ReplayedOtp` rather than a generic mismatch.
    """

    def __init__(
        self,
        rng: random.Random,
        outbox: Outbox | None = None,
        accounts_path: str | Path | None = None,
        clock: Callable[[], int] = lambda: 0,
        digest_algorithm: str = crypto.DEFAULT_DIGEST,
    ):
        self.rng = rng
        self.outbox = outbox if outbox is not None else Outbox()
        self.accounts_path = Path(accounts_path) if accounts_path is not None else None
        self.clock = clock
        self.digest_algorithm = digest_algorithm
        self.accounts: dict[str, UserAccount] = {}
        self._consumed: dict[str, set[bytes]] = {}
        self.successful_logins: dict[str, int] = {}

    def _issue_otp(self, account: UserAccount) -> None:
        otp = generate_otp(self.rng)
        account.otp_digest = crypto.digest(otp.encode("ascii"), self.digest_algorithm)
        account.otp_generation += 1
        self.outbox.deliver(
            MailMessage(
                to=account.mail_address,
                body=f"Your one-time password is: {otp}",
                sent_at=self.clock(),
                user_id=account.user_id,
                generation=account.otp_generation,
            )
        )

    def _persist(self) -> None:
        if self.accounts_path is None:
            return
        self.accounts_path.parent.mkdir(parents=True, exist_ok=True)
        blob = b"".join(
            encode_record(
                {
                    "user_id": a.user_id,
                    "mail": a.mail_address,
                    "algorithm": a.otp_digest.algorithm,
                    "otp_digest": a.otp_digest.hex(),
                    "generation": a.otp_generation,
                }
            )
            for a in sorted(self.accounts.values(), key=lambda a: a.user_id)
        )
        self.accounts_path.write_bytes(blob)

    def register_user(self, user_id: str, mail_address: str) -> UserAccount:
        if not user_id or not _USER_RE.match(user_id):
            raise ValueError(f"user id must match {_USER_RE.pattern}, got {user_id!r}")
        if user_id in self.accounts:
            raise DuplicateUser(user_id)
        if not _MAIL_RE.match(mail_address or ""):
            raise InvalidMailAddress(mail_address)
        account = UserAccount(user_id, mail_address, crypto.Digest(self.digest_algorithm, b""))
        self._issue_otp(account)
        self.accounts[user_id] = account
        self._consumed[user_id] = set()
        self.successful_logins[user_id] = 0
        self._persist()
        return account

    def login(self, user_id: str, otp_cleartext: str) -> Session:
        account = self.accounts.get(user_id)
        if account is None:
            raise UnknownUser(user_id)
        offered = crypto.digest(otp_cleartext.encode("utf-8"), account.otp_digest.algorithm)
        if not offered.matches(account.otp_digest):
            if offered.value in self._consumed[user_id]:
                raise ReplayedOtp(f"OTP for {user_id} was already used")
            raise BadOtp(f"OTP mismatch for {user_id}")

        self._consumed[user_id].add(account.otp_digest.value)
        session = Session(self.rng.randbytes(8).hex(), user_id, self.clock())
        account.active_session = session.session_id
        self.successful_logins[user_id] += 1
        self._issue_otp(account)
        self._persist()
        return session

    def is_authenticated(self, session: Session | None) -> bool:
        if session is None:
            return False
        account = self.accounts.get(session.user_id)
        return account is not None and account.active_session == session.session_id

    def require(self, session: Session | None) -> Session:
        if not self.is_authenticated(session):
            raise Unauthenticated("no active session")
        return session
