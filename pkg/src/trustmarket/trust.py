"""Certain Trust opinion algebra and the Trust / Behavioral-Probability parameters.

An opinion ``(t, c, f)`` carries an average rating ``t``, a certainty ``c``
and an initial expectation ``f``.  Opinions are derived from positive and
negative evidence counts and combined with AND / OR / NOT.  Two
presentation parameters sit on top:

    T = c * (t * scale) / scale * 100            (trust, in percent)
    P = (T/100 - f) / f * 100                    (behavioral probability, in percent)

Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from trustmarket.errors import (
    ClampOverflow,
    DegenerateBaseRate,
    EvidenceCapReached,
    TrustValueError,
    ZeroBaseExpectation,
)

DEFAULT_F = 0.5
DEFAULT_W = 1.0
DEFAULT_N = 100
DEFAULT_SCALE_MAX = 5.0

CLAMP_TOLERANCE = 1e-12
BALANCE_TOLERANCE = 1e-9


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise TrustValueError(f"{name} must be in [0, 1], got {value!r}")
    return value


def _clamp(name: str, value: float) -> float:
    if value < 0.0:
        if value < -CLAMP_TOLERANCE:
            raise ClampOverflow(f"{name}={value!r} below 0 beyond rounding")
        return 0.0
    if value > 1.0:
        if value > 1.0 + CLAMP_TOLERANCE:
            raise ClampOverflow(f"{name}={value!r} above 1 beyond rounding")
        return 1.0
    return value


class Outcome(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @classmethod
    def parse(cls, value: "Outcome | str") -> "Outcome":
        try:
            return cls(value)
        except ValueError:
            raise TrustValueError(f"outcome must be 'positive' or 'negative', got {value!r}") from None


class Classification(str, enum.Enum):
    LOWER = "LOWER"
    BALANCED = "BALANCED"
    HIGHER = "HIGHER"


@dataclass(frozen=True)
class Opinion:
    """Trust triple ``(t, c, f)``, every component in [0, 1]."""

    t: float
    c: float
    f: float

    def __post_init__(self) -> None:
        for name in ("t", "c", "f"):
            object.__setattr__(self, name, _check_unit(name, getattr(self, name)))

    def __iter__(self):
        return iter((self.t, self.c, self.f))


@dataclass(frozen=True)
class EvidenceRecord:
    """Positive count ``r``, negative count ``s``, cap ``N``, dispositional trust ``w``."""

    r: int = 0
    s: int = 0
    N: int = DEFAULT_N
    w: float = DEFAULT_W

    def __post_init__(self) -> None:
        for name in ("r", "s", "N"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                if isinstance(v, float) and v.is_integer():
                    object.__setattr__(self, name, int(v))
                else:
                    raise TrustValueError(f"{name} must be an integer, got {v!r}")
        if self.r < 0 or self.s < 0:
            raise TrustValueError(f"evidence counts must be non-negative, got r={self.r}, s={self.s}")
        if self.N < 1:
            raise TrustValueError(f"N must be >= 1, got {self.N}")
        if self.r + self.s > self.N:
            raise TrustValueError(f"r + s = {self.r + self.s} exceeds N = {self.N}")
        w = float(self.w)
        if not (w > 0.0) or math.isinf(w):
            raise TrustValueError(f"w must be a positive finite real, got {self.w!r}")
        object.__setattr__(self, "w", w)

    @property
    def total(self) -> int:
        return self.r + self.s

    def add(self, outcome: Outcome | str) -> "EvidenceRecord":
        """Return a copy with one more positive or negative observation."""
        outcome = Outcome.parse(outcome)
        if self.total >= self.N:
            raise EvidenceCapReached(f"evidence cap N={self.N} reached")
        if outcome is Outcome.POSITIVE:
            return EvidenceRecord(self.r + 1, self.s, self.N, self.w)
        return EvidenceRecord(self.r, self.s + 1, self.N, self.w)


@dataclass(frozen=True)
class RatingScale:
    max: float = DEFAULT_SCALE_MAX

    def __post_init__(self) -> None:
        m = float(self.max)
        if not (m > 0.0) or math.isinf(m):
            raise TrustValueError(f"rating scale max must be positive, got {self.max!r}")
        object.__setattr__(self, "max", m)


@dataclass(frozen=True)
class TrustSummary:
    trust_percent: float
    behavior_percent: float
    classification: Classification


# -- evidence -> opinion ------------------------------------------------------


def average_rating(ev: EvidenceRecord) -> float:
    if ev.total == 0:
        return 0.5
    return ev.r / ev.total


def certainty(ev: EvidenceRecord) -> float:
    n = ev.total
    if n == 0:
        return 0.0
    N = ev.N
    return (N * n) / (2.0 * ev.w * (N - n) + N * n)


def make_opinion(ev: EvidenceRecord, f: float = DEFAULT_F) -> Opinion:
    f = _check_unit("f", f)
    return Opinion(average_rating(ev), certainty(ev), f)


def expectation(o: Opinion) -> float:
    return o.t * o.c + (1.0 - o.c) * o.f


# -- operators ----------------------------------------------------------------


def op_not(o: Opinion, *, keep_certainty: bool = False) -> Opinion:
    """NOT: complement every component.

    ``keep_certainty=True`` selects the variant that leaves ``c`` untouched
    instead of complementing it.
    """
    c = o.c if keep_certainty else 1.0 - o.c
    return Opinion(1.0 - o.t, c, 1.0 - o.f)


def op_and(a: Opinion, b: Opinion) -> Opinion:
    ta, ca, fa = a
    tb, cb, fb = b
    denom = 1.0 - fa * fb
    if denom == 0.0:
        raise DegenerateBaseRate("AND undefined when both initial expectations are 1")
    c = ca + cb - ca * cb - ((1 - ca) * cb * (1 - fa) * tb + ca * (1 - cb) * (1 - fb) * ta) / denom
    c = _clamp("c", c)
    if c == 0.0:
        t = 0.5
    else:
        t = (ca * cb * ta * tb + (ca * (1 - cb) * (1 - fa) * fb * ta + (1 - ca) * cb * fa * (1 - fb) * tb) / denom) / c
        t = _clamp("t", t)
    return Opinion(t, c, fa * fb)


def op_or(a: Opinion, b: Opinion) -> Opinion:
    ta, ca, fa = a
    tb, cb, fb = b
    denom = fa + fb - fa * fb
    if denom == 0.0:
        raise DegenerateBaseRate("OR undefined when both initial expectations are 0")
    c = ca + cb - ca * cb - (ca * (1 - cb) * fb * (1 - ta) + (1 - ca) * cb * fa * (1 - tb)) / denom
    c = _clamp("c", c)
    if c == 0.0:
        t = 0.5
    else:
        t = _clamp("t", (ca * ta + cb * tb - ca * cb * ta * tb) / c)
    return Opinion(t, c, _clamp("f", denom))


# -- presentation parameters --------------------------------------------------


def scaled_rating(t: float, scale: RatingScale = RatingScale()) -> float:
    return _check_unit("t", t) * scale.max


def trust_percent(t: float, c: float, scale: RatingScale = RatingScale()) -> float:
    """Trust T in percent.  The scale cancels, leaving ``100 * t * c``."""
    c = _check_unit("c", c)
    return c * scaled_rating(t, scale) / scale.max * 100.0


def classify(trust: float, f: float) -> Classification:
    # the three cases compare T (as a fraction) against f directly
    diff = trust / 100.0 - f
    if abs(diff) <= BALANCE_TOLERANCE * f / 100.0:
        return Classification.BALANCED
    return Classification.HIGHER if diff > 0 else Classification.LOWER


def behavioral_probability(trust: float, f: float) -> tuple[float, Classification]:
    """Return ``(P, classification)`` for a trust percentage and initial expectation.

    T is converted to a fraction before comparing with f, so T = 51.69 and
    f = 0.5 give P = +3.38 (HIGHER).
    """
    f = _check_unit("f", f)
    if f == 0.0:
        raise ZeroBaseExpectation("behavioral probability needs f > 0")
    trust = float(trust)
    if not (0.0 <= trust <= 100.0):
        raise TrustValueError(f"T must be in [0, 100], got {trust!r}")
    p = (trust / 100.0 - f) / f * 100.0
    return p, classify(trust, f)


def summarize(o: Opinion, scale: RatingScale = RatingScale()) -> TrustSummary:
    T = trust_percent(o.t, o.c, scale)
    P, cls = behavioral_probability(T, o.f)
    return TrustSummary(T, P, cls)
