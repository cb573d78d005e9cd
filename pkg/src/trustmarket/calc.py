"""One-shot trust calculation and the (t, c) -> T surface grid."""

from __future__ import annotations

from dataclasses import dataclass

from trustmarket import trust
from trustmarket.errors import InvalidResolution

# (r, s, N, w) whose certainty is commonly quoted as 0.724, a value the
# certainty formula cannot produce for these inputs
_UNREACHABLE_C_CASE = (5, 2, 7, 1.0)


@dataclass(frozen=True)
class TrustCalculation:
    t: float
    c: float
    f: float
    expectation: float
    scaled_t: float
    trust_percent: float
    behavior_percent: float
    classification: trust.Classification
    forced: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()

    def format(self) -> str:
        lines = [
            f"t  = {self.t:.2f}",
            f"c  = {self.c:.2f}",
            f"f  = {self.f:.2f}",
            f"E  = {self.expectation:.2f}",
            f"t' = {self.scaled_t:.2f}",
            f"T  = {self.trust_percent:.2f}%",
            f"P  = {self.behavior_percent:+.2f}% ({self.classification.value})",
        ]
        if self.forced:
            lines.append("forced: " + ", ".join(self.forced) + " (test affordance, not derived from evidence)")
        lines += ["note: " + n for n in self.notes]
        return "\n".join(lines) + "\n"


def trust_calc(
    r: int = 0,
    s: int = 0,
    N: int = trust.DEFAULT_N,
    w: float = trust.DEFAULT_W,
    f: float = trust.DEFAULT_F,
    scale: float = trust.DEFAULT_SCALE_MAX,
    force_t: float | None = None,
    force_c: float | None = None,
) -> TrustCalculation:
    ev = trust.EvidenceRecord(r, s, N, w)
    rating_scale = trust.RatingScale(scale)
    o = trust.make_opinion(ev, f)
    forced = []
    if force_t is not None:
        forced.append(f"t={force_t}")
    if force_c is not None:
        forced.append(f"c={force_c}")
    o = trust.Opinion(o.t if force_t is None else force_t, o.c if force_c is None else force_c, o.f)

    notes = []
    if force_c is None and (ev.r, ev.s, ev.N, ev.w) == _UNREACHABLE_C_CASE:
        notes.append(
            "certainty evaluates to 1.00 at r+s = N; the often-quoted c = 0.724 for these "
            "inputs is not reachable from the certainty formula (use --force-c to reproduce it)"
        )

    summary = trust.summarize(o, rating_scale)
    return TrustCalculation(
        o.t,
        o.c,
        o.f,
        trust.expectation(o),
        trust.scaled_rating(o.t, rating_scale),
        summary.trust_percent,
        summary.behavior_percent,
        summary.classification,
        tuple(forced),
        tuple(notes),
    )


@dataclass(frozen=True)
class SurfaceGrid:
    axis_t: tuple[float, ...]
    axis_c: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]  # values[i][j] = T(axis_t[i], axis_c[j])

    def to_tsv(self) -> str:
        """Matrix layout: header row of c values, then one row per t value."""
        rows = ["t\\c\t" + "\t".join(repr(c) for c in self.axis_c)]
        for t, row in zip(self.axis_t, self.values):
            rows.append(repr(t) + "\t" + "\t".join(repr(v) for v in row))
        return "\n".join(rows) + "\n"

    @classmethod
    def from_tsv(cls, text: str) -> "SurfaceGrid":
        lines = [ln for ln in text.splitlines() if ln]
        axis_c = tuple(float(x) for x in lines[0].split("\t")[1:])
        axis_t, values = [], []
        for ln in lines[1:]:
            cells = ln.split("\t")
            axis_t.append(float(cells[0]))
            values.append(tuple(float(x) for x in cells[1:]))
        return cls(tuple(axis_t), axis_c, tuple(values))


def emit_surface_grid(resolution: int, scale: trust.RatingScale = trust.RatingScale()) -> SurfaceGrid:
    if isinstance(resolution, bool) or not isinstance(resolution, int) or resolution < 2:
        raise InvalidResolution(f"resolution must be an integer >= 2, got {resolution!r}")
    axis = tuple(i / (resolution - 1) for i in range(resolution))
    values = tuple(tuple(trust.trust_percent(t, c, scale) for c in axis) for t in axis)
    return SurfaceGrid(axis, axis, values)
