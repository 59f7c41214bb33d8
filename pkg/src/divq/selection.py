"""The two reliable pseudo-pair selection strategies.

Strategy 1 (select_backward) keeps a (generated triplet sequence, external
question) pair when the round-trip question regenerated from the sequence is
semantically close to the external question — strictly above the threshold.

Strategy 2 (select_forward) gates each instance's generated questions by
relevance to the gold question (inclusive threshold), then keeps the single
most token-diverse survivor as a (question, triplet sequence) pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import Instance, PseudoPair, Question, write_pseudo_pairs, _dump_jsonl, write_json
from .errors import EmptyGroup, ScorerError
from .metrics import diverse_pair
from .textproc import DEFAULT_CONFIG, TokenizeConfig, linearize, token_set, tokenize


@dataclass(frozen=True)
class SelectionOutcome:
    """Partition of the candidate pseudo pairs into selected and rejected."""

    selected: tuple[PseudoPair, ...]
    rejected: tuple[tuple[PseudoPair, str], ...]
    threshold_used: float

    @property
    def input_size(self) -> int:
        return len(self.selected) + len(self.rejected)


def select_backward(
    triples: Sequence[tuple[str, Question, Question]],
    scorer,
    threshold: float = 0.7,
    *,
    strict: bool = True,
    iteration: int = 0,
    epoch: int = 0,
) -> SelectionOutcome:
    """Filter (pseudo source, external question, round-trip question) triples.

    A pair survives when score(round-trip, external) exceeds the threshold;
    the comparison is strict by default and the score is recorded as
    roundtrip_semantic.
    """
    selected: list[PseudoPair] = []
    rejected: list[tuple[PseudoPair, str]] = []
    for source, external_q, roundtrip_q in triples:
        try:
            score = scorer.score(roundtrip_q.text, external_q.text)
        except ScorerError as exc:
            exc.origin_id = external_q.id
            raise
        pair = PseudoPair(
            source=source,
            target=external_q.text,
            origin_id=external_q.id,
            direction="backward",
            iteration=iteration,
            epoch=epoch,
            scores={"roundtrip_semantic": score},
        )
        passed = score > threshold if strict else score >= threshold
        if passed:
            selected.append(pair)
        else:
            bound = "≤" if strict else "<"
            rejected.append((pair, f"roundtrip_semantic {score} {bound} {threshold}"))
    return SelectionOutcome(tuple(selected), tuple(rejected), threshold)


def select_forward(
    groups: Sequence[tuple[Instance, Sequence[Question]]],
    scorer,
    threshold: float = 0.7,
    *,
    k: int | None = 5,
    strict: bool = False,
    iteration: int = 0,
    epoch: int = 0,
    config: TokenizeConfig = DEFAULT_CONFIG,
) -> SelectionOutcome:
    """Pick at most one generated question per instance: the most diverse
    among those relevant enough to the gold question.

    Relevance uses an inclusive threshold by default; diversity ties break
    toward the lower generation rank. Groups with no survivor contribute
    nothing. Candidates beyond the top-k window are rejected unscored.
    """
    selected: list[PseudoPair] = []
    rejected: list[tuple[PseudoPair, str]] = []
    for instance, generated in groups:
        generated = list(generated)
        if not generated:
            raise EmptyGroup(instance.id)
        target = linearize(instance.subgraph)
        gold_tokens = token_set(tokenize(instance.gold.text, config))
        limit = len(generated) if k is None else min(k, len(generated))

        def make_pair(question: Question, scores: dict) -> PseudoPair:
            return PseudoPair(
                source=question.text,
                target=target,
                origin_id=instance.id,
                direction="forward",
                iteration=iteration,
                epoch=epoch,
                scores=scores,
            )

        for rank in range(limit, len(generated)):
            rejected.append(
                (make_pair(generated[rank], {}), f"rank {rank} beyond top-{limit}")
            )

        keepers: list[tuple[int, Question, float]] = []
        for rank, question in enumerate(generated[:limit]):
            try:
                rel = scorer.score(question.text, instance.gold.text)
            except ScorerError as exc:
                exc.origin_id = instance.id
                raise
            passed = rel > threshold if strict else rel >= threshold
            if passed:
                keepers.append((rank, question, rel))
            else:
                bound = "≤" if strict else "<"
                rejected.append(
                    (make_pair(question, {"relevance": rel}),
                     f"relevance {rel} {bound} {threshold}")
                )
        if not keepers:
            continue

        scored: list[tuple[int, Question, float, float]] = []
        best_index = 0
        for pos, (rank, question, rel) in enumerate(keepers):
            div = diverse_pair(token_set(tokenize(question.text, config)), gold_tokens)
            scored.append((rank, question, rel, div))
            # strict > keeps the earliest rank on diversity ties
            if div > scored[best_index][3]:
                best_index = pos
        for pos, (rank, question, rel, div) in enumerate(scored):
            pair = make_pair(question, {"relevance": rel, "diverse": div})
            if pos == best_index:
                selected.append(pair)
            else:
                rejected.append(
                    (pair, f"diverse {div} below per-instance maximum "
                           f"{scored[best_index][3]}")
                )
    return SelectionOutcome(tuple(selected), tuple(rejected), threshold)


def write_selection_outcome(
    outcome: SelectionOutcome,
    pairs_path: str,
    summary_path: str | None = None,
    audit_path: str | None = None,
) -> None:
    """Persist selected pairs as JSONL, plus an optional summary and audit file."""
    write_pseudo_pairs(outcome.selected, pairs_path)
    if audit_path is not None:
        _dump_jsonl(
            ({"pair": pair.to_dict(), "reason": reason} for pair, reason in outcome.rejected),
            audit_path,
        )
    if summary_path is not None:
        write_json(
            {
                "input": outcome.input_size,
                "selected": len(outcome.selected),
                "rejected": len(outcome.rejected),
                "threshold": outcome.threshold_used,
            },
            summary_path,
        )
