"""Panel-assignment strategies and output-grammar parsing.

Three strategies produce label sets over a decomposition: the chat-vision
pipeline (part selection, label mapping, and conversational feedback), the
rule-based baseline (all upward-facing patches), and a seeded random
baseline built on SplitMix64 so draws reproduce across platforms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from . import prompts
from .decompose import Decomposition, Direction
from .errors import GrammarError, ValidationError
from .vlmclient import ChatMessage, ChatRequest, ChatVisionClient

__all__ = [
    "Provenance",
    "PartList",
    "LabelSet",
    "SelectionRequest",
    "parse_parts",
    "parse_labels",
    "format_parts",
    "format_labels",
    "validate_labels",
    "vlm_select_parts",
    "vlm_map_labels",
    "vlm_feedback",
    "rule_based_select",
    "random_select",
    "SplitMix64",
]


class Provenance(Enum):
    VLM = "VLM"
    RULE = "RULE"
    RANDOM = "RANDOM"
    FEEDBACK = "FEEDBACK"


@dataclass(frozen=True)
class PartList:
    parts: tuple[str, ...]

    def __post_init__(self):
        if not self.parts:
            raise GrammarError("part list is empty")
        if len(set(self.parts)) != len(self.parts):
            raise GrammarError("part list has duplicates")
        for p in self.parts:
            if not p or p != p.strip().lower():
                raise GrammarError(f"part name {p!r} is not trimmed lowercase")


@dataclass(frozen=True)
class LabelSet:
    labels: frozenset[int]
    provenance: Provenance
    retry_count: int = 0


@dataclass(frozen=True)
class SelectionRequest:
    """Inputs shared by the VLM tasks: object description, decomposition,
    and the rendered views (name, PNG bytes)."""

    user_prompt: str
    decomp: Decomposition
    images: tuple[tuple[str, bytes], ...] = ()
    component_type: str = "PANEL"

    def image_bytes(self) -> tuple[bytes, ...]:
        return tuple(png for _, png in self.images)


# ---------------------------------------------------------------------------
# output grammar

_PARTS_RE = re.compile(r"Parts\s*=\s*([^\n]*)")
_LABELS_RE = re.compile(r"Labels\s*=\s*([^\n]*)")


def _extract_list(text: str, pattern: re.Pattern, kind: str) -> str:
    matches = pattern.findall(text)
    if not matches:
        raise GrammarError(f"no '{kind} =' line found")
    if len(matches) > 1:
        raise GrammarError(f"multiple '{kind} =' lines found")
    body = matches[0].strip()
    if body.startswith("["):
        if not body.endswith("]"):
            raise GrammarError(f"unbalanced brackets in '{kind} =' line")
        body = body[1:-1]
    return body.strip()


def parse_parts(text: str) -> PartList:
    """Parse 'Parts = seat, backrest' (bracketed or bare) into a PartList."""
    body = _extract_list(text, _PARTS_RE, "Parts")
    names: list[str] = []
    for tok in body.split(","):
        name = tok.strip().lower()
        if name and name not in names:
            names.append(name)
    if not names:
        raise GrammarError("empty part list")
    return PartList(parts=tuple(names))


def parse_labels(text: str) -> set[int]:
    """Parse 'Labels = 4, 6' (bracketed or bare) into a set of positive ints."""
    body = _extract_list(text, _LABELS_RE, "Labels")
    if not body:
        raise GrammarError("empty label list")
    labels: set[int] = set()
    for tok in body.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            value = int(tok)
        except ValueError:
            raise GrammarError(f"non-integer label token {tok!r}") from None
        if value <= 0:
            raise GrammarError(f"label {value} is not positive")
        labels.add(value)
    if not labels:
        raise GrammarError("empty label list")
    return labels


def format_parts(parts: PartList) -> str:
    return "Parts = [" + ", ".join(parts.parts) + "]"


def format_labels(labels: frozenset[int] | set[int]) -> str:
    return "Labels = [" + ", ".join(str(v) for v in sorted(labels)) + "]"


def validate_labels(
    labels: set[int] | frozenset[int],
    decomp: Decomposition,
    provenance: Provenance = Provenance.VLM,
    retry_count: int = 0,
) -> LabelSet:
    """Check that every label exists in the decomposition."""
    if not labels:
        raise ValidationError("empty selection", unknown_labels=set())
    known = decomp.labels()
    unknown = set(labels) - known
    if unknown:
        raise ValidationError(
            f"unknown labels {sorted(unknown)}", unknown_labels=unknown
        )
    return LabelSet(labels=frozenset(labels), provenance=provenance, retry_count=retry_count)


# ---------------------------------------------------------------------------
# VLM strategy


def _correction_for(err: Exception, kind: str, decomp: Decomposition | None) -> str:
    if isinstance(err, ValidationError) and decomp is not None:
        if err.unknown_labels:
            valid = ", ".join(str(v) for v in sorted(decomp.labels()))
            bad = ", ".join(str(v) for v in sorted(err.unknown_labels))
            return (
                f"Labels {bad} do not exist in the image. Valid labels are: {valid}. "
                f'Reply with exactly one line in the form "{kind} = [...]".'
            )
        return (
            "The selection must not be empty. Reply with exactly one line in "
            f'the form "{kind} = [...]".'
        )
    return (
        "Your previous reply could not be parsed. Reply with exactly one line "
        f'in the form "{kind} = [...]" and nothing else.'
    )


def _vlm_round(
    client: ChatVisionClient,
    system: str,
    query: str,
    images: tuple[bytes, ...],
    parse: Callable[[str], object],
    validate: Callable[[object, int], object],
    kind: str,
    decomp: Decomposition | None,
):
    """Shared ask/parse/validate loop with bounded correction retries."""
    turns: list[ChatMessage] = [ChatMessage("user", query)]
    max_attempts = 1 + max(0, client.max_retries)
    for attempt in range(max_attempts):
        req = ChatRequest(system=system, messages=tuple(turns), images=images)
        reply = client.complete(req)
        try:
            value = parse(reply)
            return validate(value, attempt)
        except (GrammarError, ValidationError) as err:
            if attempt + 1 >= max_attempts:
                raise
            turns.append(ChatMessage("assistant", reply))
            turns.append(ChatMessage("user", _correction_for(err, kind, decomp)))
    raise GrammarError("unreachable")  # pragma: no cover


def vlm_select_parts(req: SelectionRequest, client: ChatVisionClient) -> PartList:
    """Task 1: which functional parts need the component type."""
    if not req.user_prompt:
        raise ValueError("user_prompt must be non-empty")
    if not req.images:
        raise ValueError("an axonometric render must be attached")
    return _vlm_round(
        client,
        prompts.PART_SELECTION_SYSTEM,
        prompts.part_selection_query(req.user_prompt),
        req.image_bytes(),
        parse_parts,
        lambda v, _attempt: v,
        "Parts",
        None,
    )


def vlm_map_labels(
    req: SelectionRequest, parts: PartList, client: ChatVisionClient
) -> LabelSet:
    """Task 2: map the part list onto face labels of the labeled renders."""
    if not req.images:
        raise ValueError("labeled renders must be attached")
    return _vlm_round(
        client,
        prompts.LABEL_MAPPING_SYSTEM,
        prompts.label_mapping_query(req.user_prompt, parts.parts),
        req.image_bytes(),
        parse_labels,
        lambda v, attempt: validate_labels(v, req.decomp, Provenance.VLM, attempt),
        "Labels",
        req.decomp,
    )


def vlm_feedback(
    req: SelectionRequest, feedback: str, client: ChatVisionClient
) -> LabelSet:
    """Task 3: replace the assignment according to conversational feedback."""
    if not feedback:
        raise ValueError("feedback must be non-empty")
    if not req.images:
        raise ValueError("labeled renders must be attached")
    return _vlm_round(
        client,
        prompts.FEEDBACK_SYSTEM,
        prompts.feedback_query(req.user_prompt, feedback),
        req.image_bytes(),
        parse_labels,
        lambda v, attempt: validate_labels(v, req.decomp, Provenance.FEEDBACK, attempt),
        "Labels",
        req.decomp,
    )


# ---------------------------------------------------------------------------
# baselines


def rule_based_select(decomp: Decomposition) -> LabelSet:
    """All upward-facing (+Z) labeled patches."""
    labels = frozenset(
        p.label for p in decomp.patches if p.normal is Direction.PZ and p.label
    )
    return LabelSet(labels=labels, provenance=Provenance.RULE)


_M64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 (Steele, Lea & Flood 2014): fixed published constants,
    so streams reproduce on every platform."""

    def __init__(self, seed: int):
        self.state = seed & _M64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _M64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform int in [0, n) via Lemire multiply-shift."""
        return (self.next_u64() * n) >> 64


def random_select(decomp: Decomposition, seed: int) -> LabelSet:
    """Draw k ~ Uniform{1..n}, then a uniform k-subset of the labels."""
    labels = sorted(decomp.labels())
    n = len(labels)
    if n < 1:
        raise ValueError("decomposition has no labels")
    rng = SplitMix64(seed)
    k = 1 + rng.below(n)
    pool = list(labels)
    for i in range(k):  # partial Fisher-Yates
        j = i + rng.below(n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return LabelSet(labels=frozenset(pool[:k]), provenance=Provenance.RANDOM)
