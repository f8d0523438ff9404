"""Directional assertions over aggregated rows, checked with Welch t-tests.

Assertion file, one per line::

    rts_hurts_2000: throughput_total_kbps[workload.mss=2000, workload.window=10, mac.rts_mode=never, fec.policy=off] > throughput_total_kbps[workload.mss=2000, workload.window=10, mac.rts_mode=always, fec.policy=off]
    fec_small: throughput_total_kbps[workload.mss=100, fec.policy=adaptive, ...] !> throughput_total_kbps[...]
    low_loss: voice_loss[workload.udp_bytes=200, workload.bulk_window=1] < 0.02 @ 0.99

A term is a number, a single-row selector ``metric[key=value, ...]``, or
``sum(...)`` / ``mean(...)`` over every row the selector matches.

Operators (alpha = 1 - confidence, default confidence 0.95):

* ``>``  / ``<``   pass if the difference is significant in that direction
* ``>=`` / ``<=``  pass unless the difference is significant the other way
* ``!>`` / ``!<``  aliases of ``<=`` / ``>=`` ("not greater", "not smaller")
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

from scipy import stats

from .sweep import ResultRow

MIN_REPS = 10


class AssertionSyntaxError(ValueError):
    pass


class InsufficientReplications(ValueError):
    pass


@dataclass(frozen=True)
class Term:
    kind: str  # "const", "one", "sum", "mean"
    metric: str = ""
    where: tuple[tuple[str, str], ...] = ()
    value: float = 0.0

    def __str__(self):
        if self.kind == "const":
            return repr(self.value)
        sel = f"{self.metric}[{', '.join(f'{k}={v}' for k, v in self.where)}]"
        return sel if self.kind == "one" else f"{self.kind}({sel})"


@dataclass(frozen=True)
class TrendAssertion:
    name: str
    lhs: Term
    op: str
    rhs: Term
    confidence: float = 0.95


@dataclass(frozen=True)
class AssertionResult:
    name: str
    passed: bool
    op: str
    lhs: float
    rhs: float
    t: float
    df: float
    p: float
    detail: str

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} {self.name}: {self.lhs:.6g} {self.op} {self.rhs:.6g} "
                f"(t={self.t:.3f}, df={self.df:.1f}, p={self.p:.4g}) {self.detail}").rstrip()


_OPS = (">=", "<=", "!>", "!<", ">", "<")
_SEL = re.compile(r"^([A-Za-z_][\w.]*)\s*\[(.*)\]$")
_AGG = re.compile(r"^(sum|mean)\s*\((.*)\)$")


def _parse_selector(text: str) -> tuple[str, tuple[tuple[str, str], ...]]:
    m = _SEL.match(text.strip())
    if not m:
        raise AssertionSyntaxError(f"bad selector {text.strip()!r}")
    where = []
    body = m.group(2).strip()
    if body:
        for part in body.split(","):
            k, sep, v = part.partition("=")
            if not sep or not k.strip() or not v.strip():
                raise AssertionSyntaxError(f"bad condition {part.strip()!r} in {text.strip()!r}")
            where.append((k.strip(), v.strip()))
    return m.group(1), tuple(where)


def parse_term(text: str) -> Term:
    text = text.strip()
    try:
        return Term("const", value=float(text))
    except ValueError:
        pass
    m = _AGG.match(text)
    if m:
        metric, where = _parse_selector(m.group(2))
        return Term(m.group(1), metric, where)
    metric, where = _parse_selector(text)
    return Term("one", metric, where)


def parse_assertion(line: str) -> TrendAssertion:
    name, sep, body = line.partition(":")
    if not sep or not name.strip():
        raise AssertionSyntaxError(f"expected 'name: lhs OP rhs', got {line.strip()!r}")
    conf = 0.95
    if "@" in body:
        body, _, c = body.rpartition("@")
        try:
            conf = float(c)
        except ValueError:
            raise AssertionSyntaxError(f"bad confidence {c.strip()!r}") from None
        if not 0.5 <= conf < 1.0:
            raise AssertionSyntaxError("confidence must be in [0.5, 1)")
    # find the operator outside brackets
    depth = 0
    i = 0
    while i < len(body):
        ch = body[i]
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        elif depth == 0:
            for op in _OPS:
                if body.startswith(op, i):
                    lhs = parse_term(body[:i])
                    rhs = parse_term(body[i + len(op):])
                    return TrendAssertion(name.strip(), lhs, op, rhs, conf)
        i += 1
    raise AssertionSyntaxError(f"no comparison operator in {line.strip()!r}")


def parse_assertions(text: str) -> list[TrendAssertion]:
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(parse_assertion(line))
    names = [a.name for a in out]
    if len(set(names)) != len(names):
        raise AssertionSyntaxError("duplicate assertion name")
    return out


def _same(a: str, b: str) -> bool:
    if a == b:
        return True
    try:
        return float(a) == float(b)
    except ValueError:
        return False


def _matches(row: ResultRow, term: Term) -> bool:
    if row.metric != term.metric:
        return False
    cell = dict(row.cell)
    for k, v in term.where:
        if k not in cell or not _same(cell[k], v):
            return False
    return True


def _evaluate(term: Term, rows: list[ResultRow], min_reps: int):
    """(mean, variance of the mean, [(se^2, reps), ...])."""
    if term.kind == "const":
        return term.value, 0.0, []
    hits = [r for r in rows if _matches(r, term)]
    if not hits:
        raise AssertionSyntaxError(f"{term} matches no rows")
    if term.kind == "one" and len(hits) != 1:
        raise AssertionSyntaxError(f"{term} matches {len(hits)} rows; use sum() or mean()")
    for r in hits:
        if r.reps < min_reps:
            raise InsufficientReplications(
                f"{term}: cell {dict(r.cell)} has {r.reps} replications, need {min_reps}")
    c = 1.0 / len(hits) if term.kind == "mean" else 1.0
    mean = c * math.fsum(r.mean for r in hits)
    parts = [((c * r.stderr) ** 2, r.reps) for r in hits]
    return mean, math.fsum(v for v, _ in parts), parts


def check_one(a: TrendAssertion, rows: list[ResultRow], min_reps: int = MIN_REPS) -> AssertionResult:
    lm, lv, lp = _evaluate(a.lhs, rows, min_reps)
    rm, rv, rp = _evaluate(a.rhs, rows, min_reps)
    diff = lm - rm
    var = lv + rv
    alpha = 1.0 - a.confidence
    if var > 0:
        denom = math.fsum(v * v / (n - 1) for v, n in lp + rp if n > 1 and v > 0)
        df = var * var / denom if denom > 0 else math.inf
        t = diff / math.sqrt(var)
        p_greater = float(stats.t.sf(t, df))
        p_less = float(stats.t.cdf(t, df))
    else:
        df = math.inf
        t = math.copysign(math.inf, diff) if diff else 0.0
        p_greater = 0.0 if diff > 0 else 1.0
        p_less = 0.0 if diff < 0 else 1.0
    op = a.op
    if op == ">":
        passed, p = p_greater < alpha, p_greater
    elif op == "<":
        passed, p = p_less < alpha, p_less
    elif op in (">=", "!<"):
        passed, p = not p_less < alpha, p_less
    else:  # "<=", "!>"
        passed, p = not p_greater < alpha, p_greater
    return AssertionResult(a.name, passed, op, lm, rm, t, df, p,
                           f"[{a.lhs} vs {a.rhs}, conf={a.confidence}]")


@dataclass(frozen=True)
class TrendReport:
    results: tuple[AssertionResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def text(self) -> str:
        return "\n".join(r.line() for r in self.results) + ("\n" if self.results else "")


def trend_check(rows: list[ResultRow], assertions, min_reps: int = MIN_REPS) -> TrendReport:
    if isinstance(assertions, str):
        assertions = parse_assertions(assertions)
    return TrendReport(tuple(check_one(a, rows, min_reps) for a in assertions))
