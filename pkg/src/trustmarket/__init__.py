"""Certain-trust opinion algebra and a broker-mediated e-commerce simulator."""

from trustmarket.trust import (
    Classification,
    EvidenceRecord,
    Opinion,
    Outcome,
    RatingScale,
    TrustSummary,
    average_rating,
    behavioral_probability,
    certainty,
    expectation,
    make_opinion,
    op_and,
    op_not,
    op_or,
    scaled_rating,
    summarize,
    trust_percent,
)

__version__ = "0.1.0"
