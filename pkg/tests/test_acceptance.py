"""Acceptance suite.

Every criterion is one test.  Each records a ``PASS``/``FAIL`` line in
``RESULTS``; the terminal-summary hook in ``conftest.py`` prints them, and
running this file directly prints them too.
"""

import math
import random
import time
from fractions import Fraction

import pytest

from trustmarket import crypto, trust
from trustmarket.auth import AuthService
from trustmarket.calc import emit_surface_grid
from trustmarket.errors import BadOtp, CryptoError, ReplayedOtp
from trustmarket.harness import bundled_scenarios, load_script, run_scenario, scan_for_leaks, timing_report
from trustmarket.trust import EvidenceRecord, Opinion, RatingScale

RESULTS: list[str] = []


def _record(number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}"
    if detail:
        line += f" [{detail}]"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# -- 1 ----------------------------------------------------------------------


def test_criterion_1_case_study_pipeline():
    start = time.perf_counter()
    o = Opinion(0.714, 0.724, 0.5)
    e = trust.expectation(o)
    t_scaled = trust.scaled_rating(o.t, RatingScale(5))
    s = trust.summarize(o, RatingScale(5))
    elapsed = time.perf_counter() - start
    ok = (
        abs(e - 0.65) <= 0.005
        and abs(t_scaled - 3.57) <= 0.005
        and abs(s.trust_percent - 51.69) <= 0.01
        and abs(s.behavior_percent - 3.39) <= 0.01
        and s.classification is trust.Classification.HIGHER
        and elapsed < 0.1
    )
    detail = (
        f"E={e:.4f} t'={t_scaled:.4f} T={s.trust_percent:.4f} P={s.behavior_percent:+.4f} "
        f"{s.classification.value} in {elapsed * 1e3:.3f} ms"
    )
    _record(1, "case study pipeline numbers", ok, detail)


# -- 2 ----------------------------------------------------------------------


def test_criterion_2_evidence_mapping():
    t = trust.average_rating(EvidenceRecord(5, 2, 7, 1))
    failures = []
    if abs(t - 0.714) > 0.001:
        failures.append(f"t={t}")
    rng = random.Random(2)
    for _ in range(10_000):
        N = rng.randint(1, 1000)
        w = rng.uniform(0.01, 50.0)
        n = rng.randint(0, N)
        r = rng.randint(0, n)
        c = trust.certainty(EvidenceRecord(r, n - r, N, w))
        if not 0.0 <= c <= 1.0:
            failures.append(f"range {(r, n - r, N, w)}")
        if trust.certainty(EvidenceRecord(0, 0, N, w)) != 0.0:
            failures.append(f"empty {(N, w)}")
        rN = rng.randint(0, N)
        if trust.certainty(EvidenceRecord(rN, N - rN, N, w)) != 1.0:
            failures.append(f"full {(N, w)}")
        if n < N:
            r2 = rng.randint(0, n + 1)
            c2 = trust.certainty(EvidenceRecord(r2, n + 1 - r2, N, w))
            if not c2 > c:
                failures.append(f"monotone {(n, N, w)}")
    _record(2, "average rating and certainty over 10,000 random records", not failures, f"t={t:.4f}; {len(failures)} failures")


# -- 3 ----------------------------------------------------------------------


def _exact_opinion(rng):
    # Components drawn as rng.random() outputs are multiples of 2**-53, so
    # complements round-trip exactly in binary floating point.
    while True:
        f = rng.random()
        if 0.01 < f < 0.99:
            return Opinion(rng.random(), rng.random(), f)


def _q_and(a, b):
    ta, ca, fa = map(Fraction, a)
    tb, cb, fb = map(Fraction, b)
    k = 1 - fa * fb
    c = ca + cb - ca * cb - ((1 - ca) * cb * (1 - fa) * tb + ca * (1 - cb) * (1 - fb) * ta) / k
    t = Fraction(1, 2) if c == 0 else (ca * cb * ta * tb + (ca * (1 - cb) * (1 - fa) * fb * ta + (1 - ca) * cb * fa * (1 - fb) * tb) / k) / c
    return t, c, fa * fb


def _q_or(a, b):
    ta, ca, fa = map(Fraction, a)
    tb, cb, fb = map(Fraction, b)
    k = fa + fb - fa * fb
    c = ca + cb - ca * cb - (ca * (1 - cb) * fb * (1 - ta) + (1 - ca) * cb * fa * (1 - tb)) / k
    t = Fraction(1, 2) if c == 0 else (ca * ta + cb * tb - ca * cb * ta * tb) / c
    return t, c, k


def _q_e(t, c, f):
    return Fraction(t) * Fraction(c) + (1 - Fraction(c)) * Fraction(f)


def test_criterion_3_operator_algebra():
    rng = random.Random(3)
    failures = []
    pairs = 2000
    for _ in range(pairs):
        a, b = _exact_opinion(rng), _exact_opinion(rng)
        ea, eb = _q_e(*a), _q_e(*b)
        for name, op, oracle, want in (
            ("and", trust.op_and, _q_and, ea * eb),
            ("or", trust.op_or, _q_or, ea + eb - ea * eb),
        ):
            ab, ba = op(a, b), op(b, a)
            if any(not 0.0 <= x <= 1.0 for x in (*ab, *ba)):
                failures.append(f"{name} range")
            if abs(trust.expectation(ab) - float(want)) > 1e-9:
                failures.append(f"{name} homomorphism")
            if abs(float(_q_e(*oracle(a, b))) - float(want)) > 1e-12:
                failures.append(f"{name} oracle expectation")
            t_q, c_q, f_q = oracle(a, b)
            if abs(ab.c - float(c_q)) > 1e-9 or abs(ab.f - float(f_q)) > 1e-12:
                failures.append(f"{name} oracle c/f")
            if c_q > Fraction(1, 10**6) and abs(ab.t - float(t_q)) > 1e-6:
                failures.append(f"{name} oracle t")
            if abs(ab.c - ba.c) > 1e-12 or abs(ab.f - ba.f) > 1e-12 or abs(trust.expectation(ab) - trust.expectation(ba)) > 1e-12:
                failures.append(f"{name} commutativity")
            if ab.c > 1e-6 and abs(ab.t - ba.t) > 1e-12:
                failures.append(f"{name} commutativity t")
        a1, b1 = Opinion(a.t, 1.0, a.f), Opinion(b.t, 1.0, b.f)
        if abs(trust.op_and(a1, b1).t - a.t * b.t) > 1e-9 or trust.op_and(a1, b1).c != 1.0:
            failures.append("and reduction")
        if abs(trust.op_or(a1, b1).t - (a.t + b.t - a.t * b.t)) > 1e-9 or trust.op_or(a1, b1).c != 1.0:
            failures.append("or reduction")
        for keep in (False, True):
            n = trust.op_not(a, keep_certainty=keep)
            if trust.op_not(n, keep_certainty=keep) != a or any(not 0.0 <= x <= 1.0 for x in n):
                failures.append("not involution")
    _record(3, f"operator algebra over {pairs} random pairs", not failures, f"{len(failures)} failures {sorted(set(failures))[:3]}")


# -- 4 ----------------------------------------------------------------------


def test_criterion_4_case_study_listing():
    start = time.perf_counter()
    result = run_scenario(load_script("case-study-2"))
    elapsed = time.perf_counter() - start
    rows = result.listing
    ok = [r.company_id for r in rows] == ["A", "B"] and rows[0].trust_percent > rows[1].trust_percent and elapsed < 1.0
    detail = ", ".join(f"{r.company_id} T={r.trust_percent:.2f}" for r in rows) + f" in {elapsed:.3f} s"
    _record(4, "two-company listing puts A above B", ok, detail)


# -- 5 ----------------------------------------------------------------------


def test_criterion_5a_otp_single_use():
    rng = random.Random(51)
    auth = AuthService(random.Random(5))
    users = [f"user{i}" for i in range(8)]
    used = {u: [] for u in users}
    for u in users:
        auth.register_user(u, f"{u}@mail.test")
    attempts = rejected = logins = 0
    for _ in range(1000):
        u = rng.choice(users)
        otp = auth.outbox.latest_otp(u)
        auth.login(u, otp)
        logins += 1
        used[u].append(otp)
        victim = rng.choice([v for v in users if used[v]])
        attempts += 1
        try:
            auth.login(victim, rng.choice(used[victim]))
        except ReplayedOtp:
            rejected += 1
    ok = attempts == 1000 and rejected == attempts and logins == 1000
    _record(5, "(a) OTP replay rejection", ok, f"{rejected}/{attempts} replays rejected, {logins} fresh logins")


def test_criterion_5b_no_secrets_persisted(tmp_path):
    hits, secrets = [], 0
    for name in bundled_scenarios():
        out = tmp_path / name
        result = run_scenario(load_script(name), out)
        sim = result.simulation
        found = sim.mailed_otps() + sim.invoice_plaintexts
        secrets += len(found)
        hits += scan_for_leaks(out, found)
    _record(5, "(b) no OTP or invoice plaintext in persisted files", not hits and secrets > 0, f"{secrets} secrets scanned, {len(hits)} hits")


def test_criterion_5c_envelope_tamper_detection():
    kp = crypto.generate_keypair(55)
    env = crypto.seal(b'{"kind":"order","amount":"12.00"}', kp.public_part, random.Random(56), "A")
    blob = env.to_bytes()
    assert crypto.open_envelope(crypto.Envelope.from_bytes(blob), kp.private_part)
    opened = mutations = 0
    for i in range(len(blob)):
        for delta in range(1, 256):
            mutated = bytearray(blob)
            mutated[i] ^= delta
            mutations += 1
            try:
                crypto.open_envelope(crypto.Envelope.from_bytes(bytes(mutated)), kp.private_part)
                opened += 1
            except CryptoError:
                pass
    _record(5, "(c) every single-byte envelope mutation rejected", opened == 0, f"{mutations} mutations, {opened} opened")


# -- 6 ----------------------------------------------------------------------


def test_criterion_6_determinism(tmp_path):
    mismatched = []
    names = bundled_scenarios()
    for name in names:
        a, b = tmp_path / name / "a", tmp_path / name / "b"
        ra = run_scenario(load_script(name), a)
        rb = run_scenario(load_script(name), b)
        ta, tb = _tree(a), _tree(b)
        # wall-clock durations are the one non-logical output
        ta.pop("metrics.tsv", None), tb.pop("metrics.tsv", None)
        if ra.events != rb.events or ta != tb or "events.log" not in ta:
            mismatched.append(name)
    _record(6, "equal seeds give byte-identical logs and stores", not mismatched, f"{len(names)} scenarios, mismatched={mismatched}")


# -- 7 ----------------------------------------------------------------------


def test_criterion_7_timing_report(tmp_path):
    start = time.perf_counter()
    result = run_scenario(load_script("ten-transactions"), tmp_path)
    elapsed = time.perf_counter() - start
    lines = timing_report(result.metrics).splitlines()
    durations = [float(line.split("\t")[1].split()[0]) for line in lines[1:]]
    ok = (
        lines[0] == "Person No\tTransaction Time (Full Process)"
        and len(durations) == 10
        and all(d > 0 and math.isfinite(d) for d in durations)
        and all(len(line.split("\t")) == 2 for line in lines)
        and elapsed < 5.0
    )
    _record(7, "timing report shape and desk-scale runtime", ok, f"{len(durations)} rows, total {elapsed:.3f} s")


# -- 8 ----------------------------------------------------------------------


def test_criterion_8_surface_grid():
    g = emit_surface_grid(11)
    corners = (g.values[0][0], g.values[0][10], g.values[10][0], g.values[10][10])
    worst = max(abs(g.values[i][j] - 100 * t * c) for i, t in enumerate(g.axis_t) for j, c in enumerate(g.axis_c))
    ok = len(g.values) == 11 and all(len(r) == 11 for r in g.values) and corners == (0, 0, 0, 100) and worst <= 1e-9
    _record(8, "11x11 surface grid corners and cells", ok, f"corners={corners} max cell error={worst:.2e}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
