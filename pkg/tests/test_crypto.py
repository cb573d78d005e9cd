import random

import pytest

from trustmarket import crypto
from trustmarket.errors import DecryptFailure, IntegrityFailure, UnknownPrincipal, UnsupportedAlgorithm, WrongKey
from trustmarket.records import RecordFile, encode_record, iter_records


@pytest.fixture
def rng():
    return random.Random(1234)


def test_keypair_deterministic():
    a, b = crypto.generate_keypair(42), crypto.generate_keypair(42)
    assert a.key_id == b.key_id and a.public_part == b.public_part and a.private_part == b.private_part


def test_keypair_seed_sensitive():
    assert crypto.generate_keypair(42).public_part != crypto.generate_keypair(43).public_part


def test_keypair_private_not_in_repr():
    kp = crypto.generate_keypair(1)
    assert kp.private_part.hex() not in repr(kp)


def test_registry_register_lookup_supersede(tmp_path):
    reg = crypto.KeyRegistry(tmp_path / "registry.rec")
    crypto.register_public_key(reg, "clientA", b"pkA", 1)
    assert crypto.lookup_public_key(reg, "clientA").public_part == b"pkA"
    crypto.register_public_key(reg, "clientA", b"pkA2", 2)
    assert reg.lookup("clientA").public_part == b"pkA2"
    with pytest.raises(UnknownPrincipal):
        reg.lookup("ghost")
    # reload from the append-only file keeps the newest record
    again = crypto.KeyRegistry(tmp_path / "registry.rec")
    assert again.lookup("clientA") == crypto.PublicKeyRecord("clientA", b"pkA2", 2)
    assert len(list(RecordFile(tmp_path / "registry.rec"))) == 2


def test_registry_rejects_empty_principal():
    with pytest.raises(ValueError):
        crypto.KeyRegistry().register("", b"x")


@pytest.mark.parametrize("n", [0, 1, 15, 16, 17, 1024])
def test_seal_open_lengths(rng, n):
    kp = crypto.generate_keypair(rng)
    m = rng.randbytes(n)
    assert crypto.open_envelope(crypto.seal(m, kp.public_part, rng, "bob"), kp.private_part) == m


def test_seal_open_many(rng):
    kp = crypto.generate_keypair(rng)
    for _ in range(1000):
        m = rng.randbytes(rng.randrange(0, 200))
        assert crypto.open_envelope(crypto.seal(m, kp.public_part, rng), kp.private_part) == m


def test_open_with_other_key(rng):
    alice, bob = crypto.generate_keypair(rng), crypto.generate_keypair(rng)
    env = crypto.seal(b"for alice", alice.public_part, rng, "alice")
    with pytest.raises(WrongKey):
        crypto.open_envelope(env, bob.private_part)


def _mutations(env):
    fields = ("recipient", "wrapped_key", "ciphertext", "integrity_tag")
    for name in fields:
        value = getattr(env, name)
        raw = value.encode() if isinstance(value, str) else value
        for i in range(len(raw)):
            flipped = bytearray(raw)
            flipped[i] ^= 0x01
            new = bytes(flipped)
            if name == "recipient":
                try:
                    new = new.decode()
                except UnicodeDecodeError:
                    continue
            yield name, i, crypto.Envelope(**{**env.__dict__, name: new})


def test_every_single_byte_mutation_fails(rng):
    kp = crypto.generate_keypair(rng)
    env = crypto.seal(b"order #1001: 3 chairs", kp.public_part, rng, "shop")
    count = 0
    for name, i, bad in _mutations(env):
        with pytest.raises((IntegrityFailure, WrongKey)):
            crypto.open_envelope(bad, kp.private_part)
        if name in ("ciphertext", "integrity_tag"):
            with pytest.raises(IntegrityFailure):
                crypto.open_envelope(bad, kp.private_part)
        count += 1
    assert count == len(env.to_bytes()) - 16  # four 4-byte length prefixes are framing, not content


def test_envelope_serialization_round_trip(rng):
    kp = crypto.generate_keypair(rng)
    env = crypto.seal(b"x" * 50, kp.public_part, rng, "r")
    assert crypto.Envelope.from_bytes(env.to_bytes()) == env
    with pytest.raises(IntegrityFailure):
        crypto.Envelope.from_bytes(env.to_bytes()[:-1])


def test_wrapped_keys_one_use(rng):
    kp = crypto.generate_keypair(rng)
    wrapped = {crypto.seal(b"same", kp.public_part, rng).wrapped_key for _ in range(500)}
    assert len(wrapped) == 500


def test_symmetric_round_trip_and_key(rng):
    key = crypto.generate_symmetric_key(rng)
    assert len(key.material) * 8 == 128
    doc = b'{"invoice_id":"inv-A-0001","order_summary":"ORDER-77821 teak table","amount":"410.00"}'
    ct = crypto.symmetric_encrypt(key, doc, rng)
    assert crypto.symmetric_decrypt(key, ct) == doc
    assert b"ORDER-77821" not in ct
    # no 8-byte window of plaintext survives
    assert not any(doc[i : i + 8] in ct for i in range(len(doc) - 7))
    with pytest.raises(DecryptFailure):
        crypto.symmetric_decrypt(crypto.generate_symmetric_key(rng), ct)
    corrupted = bytearray(ct)
    corrupted[20] ^= 0xFF
    with pytest.raises(DecryptFailure):
        crypto.symmetric_decrypt(key, bytes(corrupted))


@pytest.mark.parametrize("n", [0, 1, 15, 16, 17, 1024])
def test_symmetric_lengths(rng, n):
    key = crypto.generate_symmetric_key(rng)
    m = rng.randbytes(n)
    assert crypto.symmetric_decrypt(key, crypto.symmetric_encrypt(key, m, rng)) == m


def test_symmetric_key_size_enforced():
    with pytest.raises(ValueError):
        crypto.SymmetricKey("k", b"short")


def test_digest_md5_published_vectors():
    # RFC 1321 test suite
    assert crypto.digest(b"").hex() == "d41d8cd98f00b204e9800998ecf8427e"
    assert crypto.digest(b"abc").hex() == "900150983cd24fb0d6963f7d28e17f72"
    assert crypto.digest(b"").algorithm == "md5"


def test_digest_pluggable():
    assert crypto.digest(b"", "sha256").hex().startswith("e3b0c442")
    with pytest.raises(UnsupportedAlgorithm):
        crypto.digest(b"x", "rot13")


def test_digest_deterministic_and_distinct(rng):
    for _ in range(1000):
        x = rng.randbytes(rng.randrange(0, 64))
        d = crypto.digest(x)
        assert d.matches(crypto.digest(x))
        assert len(d.value) == 16
        assert not d.matches(crypto.digest(x + b"0"))


def test_record_framing():
    blob = encode_record({"a": 1}) + encode_record({"b": "x"})
    assert blob[:4] == b"\x00\x00\x00\x07"
    assert list(iter_records(blob)) == [{"a": 1}, {"b": "x"}]
    with pytest.raises(ValueError):
        list(iter_records(blob[:-1]))
