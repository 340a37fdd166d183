"""Evaluation statistics: selection rates, discordant pairs, McNemar tests
(uncorrected and continuity-corrected), and Bonferroni decisions.

The chi-square p-value uses the 1-dof survival function sf(x) = erfc(sqrt(x/2)),
accurate to better than 1e-10 relative across the range used here.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum

from .errors import MissingMethod, ValidationError

__all__ = [
    "Method",
    "ResponseRecord",
    "ResponseTable",
    "RateCell",
    "SelectionRates",
    "McNemarResult",
    "BonferroniResult",
    "selection_rates",
    "discordant_counts",
    "mcnemar",
    "bonferroni",
    "chi2_sf_1dof",
    "evaluation_report",
    "report_to_text",
]


class Method(Enum):
    VLM = "VLM"
    RULE = "RULE"
    RANDOM = "RANDOM"


@dataclass(frozen=True)
class ResponseRecord:
    participant: str
    object: str
    method: Method
    selected: bool


@dataclass(frozen=True)
class ResponseTable:
    records: tuple[ResponseRecord, ...]

    def __post_init__(self):
        seen = set()
        for r in self.records:
            key = (r.participant, r.object, r.method)
            if key in seen:
                raise ValidationError(f"duplicate record {key}")
            seen.add(key)

    def objects(self) -> list[str]:
        out: list[str] = []
        for r in self.records:
            if r.object not in out:
                out.append(r.object)
        return out

    def methods(self) -> list[Method]:
        out: list[Method] = []
        for r in self.records:
            if r.method not in out:
                out.append(r.method)
        return out

    @classmethod
    def from_csv(cls, data: bytes | str) -> "ResponseTable":
        text = data.decode() if isinstance(data, bytes) else data
        reader = csv.DictReader(io.StringIO(text))
        required = {"participant", "object", "method", "selected"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValidationError(
                f"CSV header must contain {sorted(required)}, got {reader.fieldnames}"
            )
        records = []
        for row in reader:
            records.append(
                ResponseRecord(
                    participant=row["participant"].strip(),
                    object=row["object"].strip(),
                    method=Method(row["method"].strip().upper()),
                    selected=_parse_bool(row["selected"]),
                )
            )
        return cls(records=tuple(records))

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["participant", "object", "method", "selected"])
        for r in self.records:
            writer.writerow([r.participant, r.object, r.method.value, int(r.selected)])
        return buf.getvalue().encode()


def _parse_bool(token: str) -> bool:
    t = token.strip().lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise ValidationError(f"bad boolean {token!r}")


# ---------------------------------------------------------------------------
# rates


@dataclass(frozen=True)
class RateCell:
    count: int
    participants: int
    rate: float  # percent
    percent: str  # half-up, one decimal, e.g. "96.9"


@dataclass(frozen=True)
class SelectionRates:
    objects: tuple[str, ...]
    methods: tuple[Method, ...]
    cells: dict
    method_means: dict

    def cell(self, obj: str, method: Method) -> RateCell | None:
        return self.cells.get((obj, method))


def _fmt_percent(count: int, participants: int) -> str:
    value = Decimal(100 * count) / Decimal(participants)
    return str(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def selection_rates(table: ResponseTable) -> SelectionRates:
    """Per (object, method) selection counts and rates; per-method means.

    The denominator for an object is the number of distinct participants
    with any record on that object. Cells with zero participants are
    reported as absent rather than dividing by zero.
    """
    if not table.records:
        raise ValidationError("empty response table")
    objects = table.objects()
    methods = table.methods()
    participants_for_object: dict[str, set[str]] = {}
    for r in table.records:
        participants_for_object.setdefault(r.object, set()).add(r.participant)
    cells: dict = {}
    for obj in objects:
        denom = len(participants_for_object.get(obj, ()))
        if denom == 0:
            continue
        for m in methods:
            count = sum(
                1
                for r in table.records
                if r.object == obj and r.method is m and r.selected
            )
            cells[(obj, m)] = RateCell(
                count=count,
                participants=denom,
                rate=100.0 * count / denom,
                percent=_fmt_percent(count, denom),
            )
    means: dict = {}
    for m in methods:
        rates = [cells[(o, m)] for o in objects if (o, m) in cells]
        if not rates:
            continue
        total = sum(Decimal(100 * c.count) / Decimal(c.participants) for c in rates)
        mean = total / Decimal(len(rates))
        means[m] = {
            "rate": float(mean),
            "percent": str(mean.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)),
        }
    return SelectionRates(
        objects=tuple(objects), methods=tuple(methods), cells=cells, method_means=means
    )


# ---------------------------------------------------------------------------
# McNemar


def discordant_counts(table: ResponseTable, a: Method, b: Method) -> tuple[int, int]:
    """Pooled discordant pair counts over all (participant, object) pairs
    where both methods have records: b = a-only, c = b-only."""
    methods_present = set(table.methods())
    for m in (a, b):
        if m not in methods_present:
            raise MissingMethod(f"method {m.value} has no records")
    by_key: dict[tuple[str, str], dict[Method, bool]] = {}
    for r in table.records:
        by_key.setdefault((r.participant, r.object), {})[r.method] = r.selected
    b_count = 0
    c_count = 0
    for votes in by_key.values():
        if a not in votes or b not in votes:
            continue
        if votes[a] and not votes[b]:
            b_count += 1
        elif votes[b] and not votes[a]:
            c_count += 1
    return b_count, c_count


@dataclass(frozen=True)
class McNemarResult:
    b: int
    c: int
    chi2_uncorrected: float
    chi2_corrected: float
    p_uncorrected: float
    p_corrected: float


def chi2_sf_1dof(x: float) -> float:
    """Survival function of chi-square with 1 degree of freedom."""
    if x < 0:
        raise ValueError("chi-square statistic must be non-negative")
    return math.erfc(math.sqrt(x / 2.0))


def mcnemar(b: int, c: int) -> McNemarResult:
    """McNemar statistics from discordant counts: (b-c)^2/(b+c) and the
    continuity-corrected (|b-c|-1)^2/(b+c); b + c = 0 yields chi2 = 0, p = 1."""
    if b < 0 or c < 0:
        raise ValueError("counts must be non-negative")
    n = b + c
    if n == 0:
        return McNemarResult(b, c, 0.0, 0.0, 1.0, 1.0)
    chi2_u = (b - c) ** 2 / n
    chi2_c = (abs(b - c) - 1) ** 2 / n
    return McNemarResult(
        b=b,
        c=c,
        chi2_uncorrected=chi2_u,
        chi2_corrected=chi2_c,
        p_uncorrected=chi2_sf_1dof(chi2_u),
        p_corrected=chi2_sf_1dof(chi2_c),
    )


@dataclass(frozen=True)
class BonferroniResult:
    alpha: float
    m: int
    threshold: float
    rejected: tuple[bool, ...]


def bonferroni(p_values: list[float], alpha: float = 0.05, m: int | None = None) -> BonferroniResult:
    """Reject H0 iff p < alpha / m (strict inequality)."""
    if m is None:
        m = len(p_values)
    if m < 1:
        raise ValueError("m must be >= 1")
    threshold = alpha / m
    return BonferroniResult(
        alpha=alpha,
        m=m,
        threshold=threshold,
        rejected=tuple(p < threshold for p in p_values),
    )


# ---------------------------------------------------------------------------
# reporting


def _fmt_p(p: float) -> str:
    if p < 1e-12:
        return "<1e-12"
    return f"{p:.4g}"


def evaluation_report(table: ResponseTable, alpha: float = 0.05) -> dict:
    """Full evaluation: rates plus all pairwise McNemar tests with
    Bonferroni-adjusted decisions. Machine-readable; see report_to_text."""
    rates = selection_rates(table)
    methods = list(rates.methods)
    pairs = [
        (a, b) for i, a in enumerate(methods) for b in methods[i + 1 :]
    ]
    tests = []
    for a, b in pairs:
        bc = discordant_counts(table, a, b)
        res = mcnemar(*bc)
        tests.append((a, b, res))
    bon = bonferroni([t[2].p_uncorrected for t in tests], alpha=alpha, m=len(tests))
    return {
        "rates": {
            "objects": list(rates.objects),
            "methods": [m.value for m in rates.methods],
            "cells": {
                f"{obj}/{m.value}": {
                    "count": cell.count,
                    "participants": cell.participants,
                    "rate": cell.rate,
                    "percent": cell.percent,
                }
                for (obj, m), cell in rates.cells.items()
            },
            "means": {
                m.value: dict(v) for m, v in rates.method_means.items()
            },
        },
        "mcnemar": [
            {
                "a": a.value,
                "b": b.value,
                "b_count": r.b,
                "c_count": r.c,
                "chi2_uncorrected": r.chi2_uncorrected,
                "chi2_corrected": r.chi2_corrected,
                "p_uncorrected": r.p_uncorrected,
                "p_corrected": r.p_corrected,
            }
            for a, b, r in tests
        ],
        "bonferroni": {
            "alpha": bon.alpha,
            "m": bon.m,
            "threshold": bon.threshold,
            "rejected": list(bon.rejected),
        },
    }


def report_to_text(report: dict) -> str:
    lines = []
    rates = report["rates"]
    objects = rates["objects"]
    lines.append("Selection rates (percent of participants; count in parentheses)")
    header = ["Method"] + objects + ["Mean"]
    lines.append("  ".join(f"{h:>12}" for h in header))
    for m in rates["methods"]:
        row = [m]
        for obj in objects:
            cell = rates["cells"].get(f"{obj}/{m}")
            row.append(f"{cell['percent']}% ({cell['count']})" if cell else "-")
        mean = rates["means"].get(m)
        row.append(f"{mean['percent']}%" if mean else "-")
        lines.append("  ".join(f"{v:>12}" for v in row))
    lines.append("")
    lines.append("Pairwise McNemar tests (pooled discordant pairs)")
    lines.append(
        "  ".join(
            f"{h:>14}"
            for h in ["Comparison", "b", "c", "chi2", "p", "chi2_corr", "p_corr"]
        )
    )
    for t in report["mcnemar"]:
        lines.append(
            "  ".join(
                f"{v:>14}"
                for v in [
                    f"{t['a']} vs {t['b']}",
                    t["b_count"],
                    t["c_count"],
                    f"{t['chi2_uncorrected']:.2f}",
                    _fmt_p(t["p_uncorrected"]),
                    f"{t['chi2_corrected']:.2f}",
                    _fmt_p(t["p_corrected"]),
                ]
            )
        )
    bon = report["bonferroni"]
    lines.append("")
    lines.append(
        f"Bonferroni: alpha={bon['alpha']} m={bon['m']} threshold={bon['threshold']:.4f}; "
        + ", ".join(
            f"{t['a']}>{t['b']}: {'reject' if rej else 'keep'}"
            for t, rej in zip(report["mcnemar"], bon["rejected"])
        )
    )
    return "\n".join(lines) + "\n"


def report_to_json(report: dict) -> bytes:
    return json.dumps(report, sort_keys=True, indent=2).encode()
