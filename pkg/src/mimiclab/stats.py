"""Score-trajectory analyses over the attempt log.

A game (one session round played to completion) yields a trajectory of
attempt scores S1..SA.  The central comparison is the first attempt S1
against the mean of the remaining attempts, with a paired two-sided Student
t-test.  The t distribution's CDF is computed here via the continued-fraction
regularized incomplete beta function, so the analysis needs no numerical
dependency; tests pin it against direct quadrature of the t density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import MimicLabError, RoundRecord


class EmptyInput(MimicLabError):
    pass


class LengthMismatch(MimicLabError):
    pass


class DegenerateVariance(MimicLabError):
    """All paired differences are identical; the t statistic is undefined."""


# -- Student t machinery ----------------------------------------------------

_MAX_CF_ITER = 300
_CF_EPS = 1e-15
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise MimicLabError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise MimicLabError("incomplete beta needs positive parameters")
    if x < 0.0 or x > 1.0:
        raise MimicLabError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    # use the side of the symmetry relation where the fraction converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for T ~ Student t with df degrees of freedom."""
    if df < 1:
        raise MimicLabError("degrees of freedom must be at least 1")
    if math.isnan(t):
        raise MimicLabError("t statistic is not a number")
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def _sample_sd(values: Sequence[float], mean: float) -> float:
    return math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    n: int
    mean_a: float
    mean_b: float
    sd_a: float
    sd_b: float
    mean_diff: float  # mean(b - a)
    sd_diff: float


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on differences d = b - a.

    t = mean(d) / (sd(d) / sqrt(n)) with the sample standard deviation
    (n - 1 denominator) and df = n - 1.
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    if len(a) != len(b):
        raise LengthMismatch(f"paired samples differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise EmptyInput("paired t-test needs at least two pairs")
    d = [y - x for x, y in zip(a, b)]
    mean_d = sum(d) / n
    sd = _sample_sd(d, mean_d)
    if sd == 0.0:
        raise DegenerateVariance("all paired differences are identical")
    t = mean_d / (sd / math.sqrt(n))
    mean_a = sum(a) / n
    mean_b = sum(b) / n
    return TTestResult(
        t=t,
        df=n - 1,
        p=student_t_two_sided_p(t, n - 1),
        n=n,
        mean_a=mean_a,
        mean_b=mean_b,
        sd_a=_sample_sd(a, mean_a),
        sd_b=_sample_sd(b, mean_b),
        mean_diff=mean_d,
        sd_diff=sd,
    )


# -- trajectories ------------------------------------------------------------

@dataclass(frozen=True)
class GameTrajectory:
    """Scores of one fully played round, in attempt order."""

    session_id: str
    round_id: str
    group: str
    scores: tuple[float, ...]

    @property
    def s1(self) -> float:
        return self.scores[0]

    @property
    def m_rest(self) -> float:
        rest = self.scores[1:]
        return sum(rest) / len(rest)

    @property
    def final(self) -> float:
        return self.scores[-1]

    @property
    def improved(self) -> bool:
        return self.final > self.s1


@dataclass(frozen=True)
class TrajectorySet:
    games: tuple[GameTrajectory, ...]
    skipped_incomplete: int


def trajectories(records: Sequence[RoundRecord], attempts_per_round: int = 5,
                 ) -> TrajectorySet:
    """Group records into per-round score trajectories.

    Only rounds with all ``attempts_per_round`` attempts become games; the
    rest are counted as skipped.  Input order does not matter.
    """
    by_round: dict[str, list[RoundRecord]] = {}
    for r in records:
        by_round.setdefault(r.round_id, []).append(r)
    games: list[GameTrajectory] = []
    skipped = 0
    for round_id in sorted(by_round):
        attempts = sorted(by_round[round_id], key=lambda r: r.attempt_index)
        if len(attempts) != attempts_per_round:
            skipped += 1
            continue
        games.append(GameTrajectory(
            session_id=attempts[0].session_id,
            round_id=round_id,
            group=attempts[0].group,
            scores=tuple(r.score for r in attempts),
        ))
    return TrajectorySet(tuple(games), skipped)


@dataclass(frozen=True)
class ImprovementRates:
    overall: float
    by_group: dict[str, float]
    n_overall: int
    n_by_group: dict[str, int]


def improvement_rate(games: Sequence[GameTrajectory]) -> ImprovementRates:
    """Fraction of games whose final score strictly exceeds the first."""
    if not games:
        raise EmptyInput("no games to rate")
    groups = sorted({g.group for g in games})
    by_group = {}
    n_by_group = {}
    for grp in groups:
        sub = [g for g in games if g.group == grp]
        by_group[grp] = sum(g.improved for g in sub) / len(sub)
        n_by_group[grp] = len(sub)
    return ImprovementRates(
        overall=sum(g.improved for g in games) / len(games),
        by_group=by_group,
        n_overall=len(games),
        n_by_group=n_by_group,
    )


# -- report ------------------------------------------------------------------

def _t_section(title: str, games: list[GameTrajectory]) -> list[str]:
    lines = [f"{title} (n={len(games)}):"]
    if not games:
        lines.append("  no complete games")
        return lines
    s1 = [g.s1 for g in games]
    rest = [g.m_rest for g in games]
    mean_s1 = sum(s1) / len(s1)
    mean_rest = sum(rest) / len(rest)
    if len(games) < 2:
        lines.append(f"  first attempt   mean={mean_s1:.4f}")
        lines.append(f"  remaining mean  mean={mean_rest:.4f}")
        lines.append(f"  mean change (remaining - first) = {mean_rest - mean_s1:+.4f}")
        lines.append("  t-test: needs at least two games")
        return lines
    try:
        res = paired_t_test(s1, rest)
    except DegenerateVariance:
        lines.append(f"  first attempt   mean={mean_s1:.4f}")
        lines.append(f"  remaining mean  mean={mean_rest:.4f}")
        lines.append(f"  mean change (remaining - first) = {mean_rest - mean_s1:+.4f}")
        lines.append("  t-test: not defined (zero variance in differences)")
        return lines
    lines.append(f"  first attempt   mean={res.mean_a:.4f}  sd={res.sd_a:.4f}")
    lines.append(f"  remaining mean  mean={res.mean_b:.4f}  sd={res.sd_b:.4f}")
    lines.append(f"  mean change (remaining - first) = {res.mean_diff:+.4f}")
    lines.append(f"  t({res.df}) = {res.t:.3f}, p = {res.p:.4g}")
    return lines


def analysis_report(records: Sequence[RoundRecord], attempts_per_round: int = 5,
                    ) -> str:
    """Human-readable first-vs-rest analysis of a record log.

    Layout: overall section, per-group sections (marked absent when a group
    has no complete games), improvement rates, and the skipped-round count.
    """
    ts = trajectories(records, attempts_per_round)
    games = list(ts.games)
    lines = ["score trajectory analysis", "========================="]
    lines.append(f"complete games: {len(games)}   "
                 f"skipped incomplete rounds: {ts.skipped_incomplete}")
    lines.append("")
    if not games:
        lines.append("zero games; nothing to analyze")
        return "\n".join(lines) + "\n"

    lines += _t_section("all games", games)
    for grp in ("control", "treatment"):
        lines.append("")
        sub = [g for g in games if g.group == grp]
        if sub:
            lines += _t_section(f"{grp} group", sub)
        else:
            lines.append(f"{grp} group: absent (no complete games)")

    lines.append("")
    rates = improvement_rate(games)
    lines.append("improvement rate (final attempt > first):")
    hits = round(rates.overall * rates.n_overall)
    lines.append(f"  overall: {rates.overall * 100:.1f}% ({hits}/{rates.n_overall})")
    for grp, rate in rates.by_group.items():
        n = rates.n_by_group[grp]
        lines.append(f"  {grp}: {rate * 100:.1f}% ({round(rate * n)}/{n})")
    return "\n".join(lines) + "\n"
