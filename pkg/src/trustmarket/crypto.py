"""Key generation, key distribution, sealed envelopes, invoice encryption, digests.

Instantiation of the primitives:

* Asymmetric sealing is an X25519 sealed box.  A fresh 128-bit content key
  is wrapped under a key-encryption key derived (HKDF-SHA256) from an
  ephemeral X25519 exchange with the recipient's public key.  The payload is
  encrypted with AES-128-GCM under the content key.
* At-rest encryption is AES-128-GCM with a 96-bit nonce prepended to the
  ciphertext.
* Digests default to MD5.  MD5 is *not* collision resistant by modern
  standards; it is the default only for fidelity with the modeled system and
  ``algorithm=`` accepts any hashlib digest such as ``"sha256"``.

All randomness is drawn from a caller-supplied :class:`random.Random` so a
seeded simulation replays bit-identically.  That makes this module a
simulation tool, not a production cryptosystem.
"""

from __future__ import annotations

import hashlib
import hmac
import random
import struct
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from trustmarket.errors import (
    DecryptFailure,
    IntegrityFailure,
    UnknownPrincipal,
    UnsupportedAlgorithm,
    WrongKey,
)
from trustmarket.records import RecordFile, b64d, b64e

KEY_BYTES = 16
NONCE_BYTES = 12
TAG_BYTES = 16
DEFAULT_DIGEST = "md5"

_KEK_INFO = b"trustmarket envelope kek v1"
_SUPPORTED_DIGESTS = frozenset(a for a in hashlib.algorithms_guaranteed if not a.startswith("shake"))


def as_rng(seed: int | random.Random) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def _raw_public(priv: X25519PrivateKey) -> bytes:
    return priv.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)


@dataclass(frozen=True)
class KeyPair:
    key_id: str
    public_part: bytes
    private_part: bytes = field(repr=False)


@dataclass(frozen=True)
class PublicKeyRecord:
    principal: str
    public_part: bytes
    registered_at: int


@dataclass(frozen=True)
class Envelope:
    recipient: str
    wrapped_key: bytes
    ciphertext: bytes
    integrity_tag: bytes

    def to_bytes(self) -> bytes:
        parts = [self.recipient.encode("utf-8"), self.wrapped_key, self.ciphertext, self.integrity_tag]
        return b"".join(struct.pack(">I", len(p)) + p for p in parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Envelope":
        parts = []
        pos = 0
        for _ in range(4):
            if pos + 4 > len(data):
                raise IntegrityFailure("truncated envelope")
            (n,) = struct.unpack_from(">I", data, pos)
            pos += 4
            if pos + n > len(data):
                raise IntegrityFailure("truncated envelope")
            parts.append(data[pos : pos + n])
            pos += n
        if pos != len(data):
            raise IntegrityFailure("trailing bytes after envelope")
        try:
            recipient = parts[0].decode("utf-8")
        except UnicodeDecodeError:
            raise IntegrityFailure("recipient is not valid UTF-8") from None
        return cls(recipient, parts[1], parts[2], parts[3])


@dataclass(frozen=True)
class SymmetricKey:
    key_id: str
    material: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.material) != KEY_BYTES:
            raise ValueError(f"symmetric key must be 128 bits, got {8 * len(self.material)}")


@dataclass(frozen=True)
class Digest:
    algorithm: str
    value: bytes

    def hex(self) -> str:
        return self.value.hex()

    def matches(self, other: "Digest") -> bool:
        return self.algorithm == other.algorithm and hmac.compare_digest(self.value, other.value)


# -- key material -------------------------------------------------------------


def generate_keypair(seed: int | random.Random) -> KeyPair:
    rng = as_rng(seed)
    priv_bytes = rng.randbytes(32)
    pub = _raw_public(X25519PrivateKey.from_private_bytes(priv_bytes))
    return KeyPair(hashlib.sha256(pub).hexdigest()[:16], pub, priv_bytes)


def generate_symmetric_key(rng: random.Random) -> SymmetricKey:
    return SymmetricKey("key-" + rng.randbytes(8).hex(), rng.randbytes(KEY_BYTES))


class KeyRegistry:
    """Key distribution system: principal -> latest public key.

    Backed by an append-only :class:`RecordFile`; re-registration appends a
    new record that supersedes the old one.
    """

    def __init__(self, path=None):
        self._file = RecordFile(path)
        self._active: dict[str, PublicKeyRecord] = {}
        for rec in self._file:
            self._active[rec["principal"]] = PublicKeyRecord(
                rec["principal"], b64d(rec["public"]), rec["registered_at"]
            )

    def register(self, principal: str, public_part: bytes, registered_at: int = 0) -> PublicKeyRecord:
        if not principal:
            raise ValueError("principal must be non-empty")
        record = PublicKeyRecord(principal, bytes(public_part), int(registered_at))
        self._file.append({"principal": principal, "public": b64e(record.public_part), "registered_at": record.registered_at})
        self._active[principal] = record
        return record

    def lookup(self, principal: str) -> PublicKeyRecord:
        try:
            return self._active[principal]
        except KeyError:
            raise UnknownPrincipal(principal) from None

    def __contains__(self, principal: str) -> bool:
        return principal in self._active

    def __len__(self) -> int:
        return len(self._active)


def register_public_key(registry: KeyRegistry, principal: str, public_part: bytes, registered_at: int = 0) -> PublicKeyRecord:
    return registry.register(principal, public_part, registered_at)


def lookup_public_key(registry: KeyRegistry, principal: str) -> PublicKeyRecord:
    return registry.lookup(principal)


# -- envelopes ----------------------------------------------------------------


def _kek(shared: bytes, eph_pub: bytes, recipient_pub: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=KEY_BYTES, salt=eph_pub + recipient_pub, info=_KEK_INFO).derive(shared)


def seal(plaintext: bytes, recipient_public: bytes, rng: random.Random, recipient: str = "") -> Envelope:
    """Seal ``plaintext`` so only the holder of the matching private part can open it."""
    eph = X25519PrivateKey.from_private_bytes(rng.randbytes(32))
    eph_pub = _raw_public(eph)
    shared = eph.exchange(X25519PublicKey.from_public_bytes(recipient_public))
    kek = _kek(shared, eph_pub, recipient_public)

    content_key = rng.randbytes(KEY_BYTES)
    wrap_nonce = rng.randbytes(NONCE_BYTES)
    aad = recipient.encode("utf-8")
    wrapped = eph_pub + wrap_nonce + AESGCM(kek).encrypt(wrap_nonce, content_key, aad)

    nonce = rng.randbytes(NONCE_BYTES)
    sealed = AESGCM(content_key).encrypt(nonce, bytes(plaintext), wrapped + aad)
    return Envelope(recipient, wrapped, nonce + sealed[:-TAG_BYTES], sealed[-TAG_BYTES:])


def open_envelope(env: Envelope, private_part: bytes) -> bytes:
    """Open an envelope.

    Raises :class:`WrongKey` when the content key cannot be unwrapped with
    ``private_part`` and :class:`IntegrityFailure` when the payload or tag
    has been altered.
    """
    wrapped = env.wrapped_key
    if len(wrapped) != 32 + NONCE_BYTES + KEY_BYTES + TAG_BYTES:
        raise WrongKey("malformed wrapped key")
    eph_pub, wrap_nonce, wrapped_ct = wrapped[:32], wrapped[32 : 32 + NONCE_BYTES], wrapped[32 + NONCE_BYTES :]
    priv = X25519PrivateKey.from_private_bytes(private_part)
    try:
        shared = priv.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    except ValueError:
        raise WrongKey("invalid ephemeral key") from None
    kek = _kek(shared, eph_pub, _raw_public(priv))
    aad = env.recipient.encode("utf-8")
    try:
        content_key = AESGCM(kek).decrypt(wrap_nonce, wrapped_ct, aad)
    except InvalidTag:
        raise WrongKey("content key does not unwrap under this private key") from None

    if len(env.ciphertext) < NONCE_BYTES or len(env.integrity_tag) != TAG_BYTES:
        raise IntegrityFailure("malformed ciphertext or tag")
    nonce, body = env.ciphertext[:NONCE_BYTES], env.ciphertext[NONCE_BYTES:]
    try:
        return AESGCM(content_key).decrypt(nonce, body + env.integrity_tag, wrapped + aad)
    except InvalidTag:
        raise IntegrityFailure("ciphertext or integrity tag altered") from None


# -- at-rest encryption -------------------------------------------------------


def symmetric_encrypt(key: SymmetricKey, plaintext: bytes, rng: random.Random) -> bytes:
    nonce = rng.randbytes(NONCE_BYTES)
    return nonce + AESGCM(key.material).encrypt(nonce, bytes(plaintext), key.key_id.encode("utf-8"))


def symmetric_decrypt(key: SymmetricKey, ciphertext: bytes) -> bytes:
    if len(ciphertext) < NONCE_BYTES + TAG_BYTES:
        raise DecryptFailure("ciphertext too short")
    try:
        return AESGCM(key.material).decrypt(ciphertext[:NONCE_BYTES], ciphertext[NONCE_BYTES:], key.key_id.encode("utf-8"))
    except InvalidTag:
        raise DecryptFailure("wrong key or corrupted ciphertext") from None


# -- digests ------------------------------------------------------------------


def digest(data: bytes, algorithm: str = DEFAULT_DIGEST) -> Digest:
    algorithm = algorithm.lower()
    if algorithm not in _SUPPORTED_DIGESTS:
        raise UnsupportedAlgorithm(algorithm)
    return Digest(algorithm, hashlib.new(algorithm, bytes(data)).digest())
