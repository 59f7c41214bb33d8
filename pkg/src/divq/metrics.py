"""Evaluation metrics for top-k generated questions.

Pairwise diversity (symmetric difference over union of token sets), the
relevance-gated Diverse@k aggregate, pooled Distinct-n, single-order clipped
BLEU-n, Self-BLEU, Pearson correlation, and corpus-level aggregation.

The pairwise counting work runs on the kernel backend (compiled when
available); everything the kernels return is an integer, so results are
identical across backends.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .core import CandidateSet, Instance, Question
from .errors import (
    BothEmpty,
    InvalidK,
    InvalidN,
    LengthMismatch,
    MissingCandidates,
    TooFewQuestions,
    ZeroVariance,
)
from .textproc import (
    DEFAULT_CONFIG,
    TokenizeConfig,
    TokenSeq,
    TokenSet,
    ngrams,
    token_set,
    tokenize,
)


def _encode_sets(sets: Sequence[TokenSet]) -> list[np.ndarray]:
    """Map token sets to sorted unique int64 id arrays under a shared vocab."""
    vocab: dict[str, int] = {}
    arrays = []
    for s in sets:
        arr = np.empty(len(s), dtype=np.int64)
        for i, tok in enumerate(s):
            arr[i] = vocab.setdefault(tok, len(vocab))
        arr.sort()
        arrays.append(arr)
    return arrays


def _encode_bags(seqs: Sequence[TokenSeq], n: int) -> tuple[list[np.ndarray], list[int]]:
    """Map each sequence's n-grams to sorted int64 id arrays with repeats."""
    vocab: dict[tuple[str, ...], int] = {}
    arrays, totals = [], []
    for seq in seqs:
        grams = [tuple(seq[i : i + n]) for i in range(len(seq) - n + 1)]
        arr = np.empty(len(grams), dtype=np.int64)
        for i, gram in enumerate(grams):
            arr[i] = vocab.setdefault(gram, len(vocab))
        arr.sort()
        arrays.append(arr)
        totals.append(len(grams))
    return arrays, totals


def diverse_pair(a: TokenSet, b: TokenSet) -> float:
    """Symmetric-difference-over-union of two token sets; 1 - Jaccard."""
    if not a and not b:
        raise BothEmpty("pairwise diversity of two empty token sets is undefined")
    ea, eb = _encode_sets([a, b])
    inter = int(_kernels.intersect_count(ea, eb))
    union = len(a) + len(b) - inter
    return (len(a) + len(b) - 2 * inter) / union


@dataclass(frozen=True)
class DiverseReport:
    """Per-instance outcome of the gated top-k pairwise diversity metric."""

    instance_id: str
    k_requested: int
    k_surviving: int
    pair_scores: tuple[tuple[int, int, float], ...]
    instance_score: float


def diverse_at_k(
    candidates: CandidateSet,
    gold: Question,
    k: int,
    scorer,
    alpha: float = 0.7,
    config: TokenizeConfig = DEFAULT_CONFIG,
) -> DiverseReport:
    """Mean pairwise diversity of the top-k candidates that pass the gate.

    Candidates scoring below alpha against the gold question are removed
    before pairing; fewer than two survivors score 0. Pair indices refer to
    the candidate's original rank inside the top-k window.
    """
    if k < 2:
        raise InvalidK(f"diverse@k needs k >= 2, got {k}")
    top = list(candidates.questions[: min(k, len(candidates.questions))])
    surviving = [
        (rank, q) for rank, q in enumerate(top) if scorer.score(q.text, gold.text) >= alpha
    ]
    sets = [token_set(tokenize(q.text, config)) for _, q in surviving]
    if sum(1 for s in sets if not s) >= 2:
        raise BothEmpty(
            f"instance {candidates.instance_id!r}: two surviving candidates "
            "tokenize to empty sets"
        )
    inters = _kernels.pairwise_intersect_counts(_encode_sets(sets))
    pair_scores: list[tuple[int, int, float]] = []
    pos = 0
    for i in range(len(surviving) - 1):
        for j in range(i + 1, len(surviving)):
            la, lb, m = len(sets[i]), len(sets[j]), int(inters[pos])
            pos += 1
            score = (la + lb - 2 * m) / (la + lb - m)
            pair_scores.append((surviving[i][0], surviving[j][0], score))
    if len(surviving) >= 2:
        instance_score = math.fsum(s for _, _, s in pair_scores) / len(pair_scores)
    else:
        instance_score = 0.0
    return DiverseReport(
        instance_id=candidates.instance_id,
        k_requested=k,
        k_surviving=len(surviving),
        pair_scores=tuple(pair_scores),
        instance_score=instance_score,
    )


def distinct_n(
    candidates: CandidateSet,
    k: int,
    n: int,
    config: TokenizeConfig = DEFAULT_CONFIG,
) -> float:
    """Unique/total n-grams over the pooled top-k candidates of one instance.

    N-grams are taken per question (no windows across question boundaries);
    an empty pool scores 0.
    """
    if k < 1:
        raise InvalidK(f"distinct-n needs k >= 1, got {k}")
    if n < 1:
        raise InvalidN(f"n must be >= 1, got {n}")
    pooled: Counter = Counter()
    for q in candidates.questions[: min(k, len(candidates.questions))]:
        pooled.update(ngrams(tokenize(q.text, config), n).counts)
    total = sum(pooled.values())
    if total == 0:
        return 0.0
    return len(pooled) / total


def bleu_n(
    candidate: TokenSeq,
    reference: TokenSeq,
    n: int,
    use_brevity_penalty: bool = True,
) -> float:
    """Clipped n-gram precision at order n exactly, with optional brevity penalty.

    The penalty exp(1 - |ref|/|cand|) applies only when the candidate is
    shorter than the reference. A candidate with no n-grams scores 0.
    """
    if n < 1:
        raise InvalidN(f"n must be >= 1, got {n}")
    (cand_arr, ref_arr), totals = _encode_bags([candidate, reference], n)
    total = totals[0]
    if total == 0:
        return 0.0
    matches = int(_kernels.clipped_match_count(cand_arr, ref_arr))
    precision = matches / total
    if use_brevity_penalty and len(candidate) < len(reference):
        precision *= math.exp(1.0 - len(reference) / len(candidate))
    return precision


def self_bleu(questions: Sequence[TokenSeq], n: int) -> float:
    """Mean clipped precision over all ordered question pairs, no penalty."""
    if n < 1:
        raise InvalidN(f"n must be >= 1, got {n}")
    m = len(questions)
    if m < 2:
        raise TooFewQuestions(f"self-BLEU needs at least 2 questions, got {m}")
    bags, totals = _encode_bags(questions, n)
    matches = _kernels.pairwise_clipped_matches(bags)
    precisions = []
    pos = 0
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            precisions.append(matches[pos] / totals[i] if totals[i] else 0.0)
            pos += 1
    return math.fsum(precisions) / len(precisions)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(x) != len(y):
        raise LengthMismatch(f"length {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise LengthMismatch("need at least 2 paired values")
    if min(x) == max(x) or min(y) == max(y):
        raise ZeroVariance("correlation undefined for a constant vector")
    n = len(x)
    mean_x = math.fsum(x) / n
    mean_y = math.fsum(y) / n
    dx = [xi - mean_x for xi in x]
    dy = [yi - mean_y for yi in y]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    if sxx <= 0.0 or syy <= 0.0:
        raise ZeroVariance("correlation undefined for a constant vector")
    return sxy / math.sqrt(sxx * syy)


@dataclass(frozen=True)
class MetricSpec:
    """Selector for one corpus metric run.

    kind is one of "diverse", "distinct", "bleu", "relevance"; k bounds the
    candidate window; n is the n-gram order for distinct/bleu; alpha gates
    diverse.
    """

    kind: str
    k: int
    n: int = 1
    alpha: float = 0.7
    brevity_penalty: bool = True
    config: TokenizeConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if self.kind not in ("diverse", "distinct", "bleu", "relevance"):
            raise ValueError(f"unknown metric kind {self.kind!r}")

    @property
    def name(self) -> str:
        if self.kind == "diverse":
            return f"diverse@{self.k}"
        if self.kind == "distinct":
            return f"dist-{self.n}"
        if self.kind == "bleu":
            return f"bleu-{self.n}"
        return "relevance"

    def params_dict(self) -> dict:
        params: dict = {"k": self.k}
        if self.kind in ("distinct", "bleu"):
            params["n"] = self.n
        if self.kind == "bleu":
            params["brevity_penalty"] = self.brevity_penalty
        if self.kind == "diverse":
            params["alpha"] = self.alpha
        return params


@dataclass(frozen=True)
class CorpusMetricReport:
    metric_name: str
    params: dict
    per_instance: tuple[tuple[str, float], ...]
    corpus_value: float


def _instance_value(instance: Instance, metric: MetricSpec, scorer) -> float:
    cands = instance.candidates
    if cands is None:
        raise MissingCandidates(instance.id)
    if metric.kind == "diverse":
        report = diverse_at_k(
            cands, instance.gold, metric.k, scorer, metric.alpha, metric.config
        )
        return report.instance_score
    if metric.kind == "distinct":
        return distinct_n(cands, metric.k, metric.n, metric.config)
    top = cands.questions[: min(metric.k, len(cands.questions))]
    if metric.kind == "bleu":
        gold_tokens = tokenize(instance.gold.text, metric.config)
        values = [
            bleu_n(tokenize(q.text, metric.config), gold_tokens, metric.n,
                   metric.brevity_penalty)
            for q in top
        ]
    else:  # relevance
        values = [scorer.score(q.text, instance.gold.text) for q in top]
    return math.fsum(values) / len(values)


def corpus_metric(
    instances: Sequence[Instance],
    metric: MetricSpec,
    scorer=None,
    workers: int = 1,
) -> CorpusMetricReport:
    """Evaluate one metric per instance and average; order follows the input."""
    if not instances:
        raise ValueError("corpus_metric needs at least one instance")
    if metric.kind in ("diverse", "relevance") and scorer is None:
        raise ValueError(f"metric {metric.name} requires a relevance scorer")
    for instance in instances:
        if instance.candidates is None:
            raise MissingCandidates(instance.id)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda i: _instance_value(i, metric, scorer), instances))
    else:
        values = [_instance_value(i, metric, scorer) for i in instances]
    per_instance = tuple((inst.id, v) for inst, v in zip(instances, values))
    corpus_value = math.fsum(values) / len(values)
    return CorpusMetricReport(
        metric_name=metric.name,
        params=metric.params_dict(),
        per_instance=per_instance,
        corpus_value=corpus_value,
    )


def report_to_dict(report: CorpusMetricReport, decimals: int = 6) -> dict:
    """JSON-ready form of a corpus report, values rounded for emission."""
    return {
        "metric_name": report.metric_name,
        "params": report.params,
        "corpus_value": round(report.corpus_value, decimals),
        "per_instance": [
            {"id": iid, "value": round(v, decimals)} for iid, v in report.per_instance
        ],
    }


def format_table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    """Align columns; floats render with six decimals."""
    def cell(value: object) -> str:
        if isinstance(value, float):
            return f"{value:.6f}"
        return str(value)

    text_rows = [[cell(v) for v in row] for row in rows]
    widths = [
        max(len(headers[c]), *(len(r[c]) for r in text_rows)) if text_rows else len(headers[c])
        for c in range(len(headers))
    ]
    lines = ["  ".join(h.ljust(widths[c]) for c, h in enumerate(headers)).rstrip()]
    for row in text_rows:
        lines.append("  ".join(v.ljust(widths[c]) for c, v in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"
