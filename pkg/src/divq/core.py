"""Domain records and JSONL ingestion/emission for question-generation corpora.

Every type is a plain value: construction validates the record invariants,
``to_dict``/``from_dict`` round-trip losslessly, and the loaders preserve
file order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

from .errors import DuplicateId, EmptyCorpus, IoFailure, MalformedLine


def _require_text(value: Any, name: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"{name} must be a non-empty string")
    return value


@dataclass(frozen=True)
class Question:
    """One surface-form question with an opaque id."""

    text: str
    id: str

    def __post_init__(self):
        _require_text(self.text, "question text")
        _require_text(self.id, "question id")

    def to_dict(self) -> dict:
        return {"id": self.id, "text": self.text}

    @classmethod
    def from_dict(cls, data: dict, default_id: str | None = None) -> "Question":
        if not isinstance(data, dict):
            raise ValueError("question must be an object")
        qid = data.get("id", default_id)
        if qid is None:
            raise ValueError("question lacks an id")
        return cls(text=data["text"], id=str(qid))


@dataclass(frozen=True)
class Triplet:
    head: str
    relation: str
    tail: str

    def __post_init__(self):
        _require_text(self.head, "head")
        _require_text(self.relation, "relation")
        _require_text(self.tail, "tail")

    def to_list(self) -> list[str]:
        return [self.head, self.relation, self.tail]

    @classmethod
    def from_list(cls, data) -> "Triplet":
        if not isinstance(data, (list, tuple)) or len(data) != 3:
            raise ValueError("triplet must be a [head, relation, tail] list")
        return cls(*data)


@dataclass(frozen=True)
class Subgraph:
    """Ordered fact triplets, optionally annotated with the answer entity."""

    triplets: tuple[Triplet, ...]
    answer: str | None = None

    def __post_init__(self):
        if not self.triplets:
            raise ValueError("subgraph needs at least one triplet")
        object.__setattr__(self, "triplets", tuple(self.triplets))

    def to_dict(self) -> dict:
        return {
            "triplets": [t.to_list() for t in self.triplets],
            "answer": self.answer,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Subgraph":
        if not isinstance(data, dict):
            raise ValueError("subgraph must be an object")
        triplets = tuple(Triplet.from_list(t) for t in data["triplets"])
        answer = data.get("answer")
        if answer is not None and not isinstance(answer, str):
            raise ValueError("answer must be a string or null")
        return cls(triplets=triplets, answer=answer)


@dataclass(frozen=True)
class CandidateSet:
    """Top-k generated questions for one instance, in beam rank order."""

    instance_id: str
    questions: tuple[Question, ...]
    k: int

    def __post_init__(self):
        _require_text(self.instance_id, "instance_id")
        object.__setattr__(self, "questions", tuple(self.questions))
        if not 1 <= len(self.questions) <= self.k:
            raise ValueError(
                f"candidate count {len(self.questions)} outside 1..k={self.k}"
            )
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise ValueError("candidate question ids must be unique")

    def to_dict(self) -> dict:
        return {"k": self.k, "questions": [q.to_dict() for q in self.questions]}

    @classmethod
    def from_dict(cls, data: dict, instance_id: str) -> "CandidateSet":
        if not isinstance(data, dict):
            raise ValueError("candidates must be an object")
        k = data["k"]
        if not isinstance(k, int) or k < 1:
            raise ValueError("candidates.k must be a positive integer")
        questions = tuple(
            Question.from_dict(q, default_id=f"{instance_id}#c{i}")
            for i, q in enumerate(data["questions"])
        )
        return cls(instance_id=instance_id, questions=questions, k=k)


@dataclass(frozen=True)
class Instance:
    """One (subgraph, gold question) record with optional candidates."""

    id: str
    subgraph: Subgraph
    gold: Question
    candidates: CandidateSet | None = None

    def __post_init__(self):
        _require_text(self.id, "instance id")
        if self.candidates is not None and self.candidates.instance_id != self.id:
            raise ValueError(
                f"candidates.instance_id {self.candidates.instance_id!r} "
                f"does not match instance id {self.id!r}"
            )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "subgraph": self.subgraph.to_dict(),
            "gold": self.gold.to_dict(),
            "candidates": self.candidates.to_dict() if self.candidates else None,
        }

    @classmethod
    def from_dict(cls, data: dict, default_id: str | None = None) -> "Instance":
        if not isinstance(data, dict):
            raise ValueError("instance must be an object")
        inst_id = data.get("id", default_id)
        if inst_id is None:
            raise ValueError("instance lacks an id")
        inst_id = str(inst_id)
        subgraph = Subgraph.from_dict(data["subgraph"])
        gold = Question.from_dict(data["gold"], default_id=f"{inst_id}#gold")
        raw_cands = data.get("candidates")
        candidates = (
            CandidateSet.from_dict(raw_cands, inst_id) if raw_cands is not None else None
        )
        return cls(id=inst_id, subgraph=subgraph, gold=gold, candidates=candidates)

    def with_candidates(self, candidates: CandidateSet) -> "Instance":
        return Instance(
            id=self.id, subgraph=self.subgraph, gold=self.gold, candidates=candidates
        )


@dataclass(frozen=True)
class ExternalQuestionCorpus:
    """Natural questions with no paired subgraphs."""

    questions: tuple[Question, ...]

    def __post_init__(self):
        if not self.questions:
            raise ValueError("external corpus must be non-empty")
        object.__setattr__(self, "questions", tuple(self.questions))
        seen: set[str] = set()
        for q in self.questions:
            if q.id in seen:
                raise DuplicateId(q.id)
            seen.add(q.id)

    def __len__(self) -> int:
        return len(self.questions)


@dataclass(frozen=True)
class PseudoPair:
    """A (source, target) training record where one side is model-generated.

    ``direction`` names the producing model: "backward" pairs carry a
    generated triplet sequence as source and an external question as target;
    "forward" pairs carry a generated question as source and the gold
    triplet sequence as target.
    """

    source: str
    target: str
    origin_id: str
    direction: str
    iteration: int = 0
    epoch: int = 0
    scores: dict = field(default_factory=dict)

    def __post_init__(self):
        _require_text(self.source, "source")
        _require_text(self.target, "target")
        if self.direction not in ("backward", "forward"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.iteration < 0 or self.epoch < 0:
            raise ValueError("iteration and epoch must be nonnegative")
        for name, value in self.scores.items():
            lo = 0.0 if name == "diverse" else -1.0
            if not lo <= value <= 1.0:
                raise ValueError(f"score {name}={value} out of range")

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "origin_id": self.origin_id,
            "direction": self.direction,
            "iteration": self.iteration,
            "epoch": self.epoch,
            "scores": dict(self.scores),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PseudoPair":
        return cls(
            source=data["source"],
            target=data["target"],
            origin_id=data["origin_id"],
            direction=data["direction"],
            iteration=data["iteration"],
            epoch=data["epoch"],
            scores=dict(data.get("scores", {})),
        )


# --- JSONL plumbing -------------------------------------------------------


def _iter_jsonl(path: str) -> Iterator[tuple[int, Any]]:
    """Yield (line_no, parsed object) for every non-blank line."""
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(path, line_no, f"invalid JSON ({exc.msg})") from exc


def _dump_jsonl(records: Iterable[dict], path: str) -> None:
    """Write records atomically: temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise IoFailure(f"destination directory does not exist: {directory}")
    tmp_path = path + ".tmp"
    try:
        with open(tmp_path, "w", encoding="utf-8", newline="\n") as handle:
            for record in records:
                handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
                handle.write("\n")
        os.replace(tmp_path, path)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_instances(path: str, limit: int | None = None) -> list[Instance]:
    """Read an instance JSONL file in order, stopping after `limit` records."""
    if limit is not None and limit < 1:
        raise ValueError("limit must be positive")
    instances: list[Instance] = []
    seen: set[str] = set()
    for line_no, obj in _iter_jsonl(path):
        try:
            instance = Instance.from_dict(obj, default_id=f"L{line_no}")
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedLine(path, line_no, _schema_reason(exc)) from exc
        if instance.id in seen:
            raise MalformedLine(path, line_no, f"duplicate instance id {instance.id!r}")
        seen.add(instance.id)
        instances.append(instance)
        if limit is not None and len(instances) == limit:
            break
    if not instances:
        raise EmptyCorpus(f"no instances in {path}")
    return instances


def load_external_questions(path: str) -> ExternalQuestionCorpus:
    """Read an {id, text} JSONL corpus, rejecting duplicate ids."""
    questions: list[Question] = []
    seen: set[str] = set()
    for line_no, obj in _iter_jsonl(path):
        try:
            question = Question.from_dict(obj, default_id=f"L{line_no}")
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedLine(path, line_no, _schema_reason(exc)) from exc
        if question.id in seen:
            raise DuplicateId(question.id)
        seen.add(question.id)
        questions.append(question)
    if not questions:
        raise EmptyCorpus(f"no questions in {path}")
    return ExternalQuestionCorpus(questions=tuple(questions))


def write_instances(instances: Iterable[Instance], path: str) -> None:
    _dump_jsonl((inst.to_dict() for inst in instances), path)


def write_external_questions(corpus: ExternalQuestionCorpus, path: str) -> None:
    _dump_jsonl((q.to_dict() for q in corpus.questions), path)


def write_pseudo_pairs(pairs: Iterable[PseudoPair], path: str) -> None:
    _dump_jsonl((p.to_dict() for p in pairs), path)


def read_pseudo_pairs(path: str) -> list[PseudoPair]:
    pairs: list[PseudoPair] = []
    for line_no, obj in _iter_jsonl(path):
        try:
            pairs.append(PseudoPair.from_dict(obj))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedLine(path, line_no, _schema_reason(exc)) from exc
    return pairs


def write_json(obj: Any, path: str) -> None:
    """Atomically write one JSON document with stable key order."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise IoFailure(f"destination directory does not exist: {directory}")
    tmp_path = path + ".tmp"
    try:
        with open(tmp_path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(obj, handle, ensure_ascii=False, sort_keys=True, indent=2)
            handle.write("\n")
        os.replace(tmp_path, path)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def _schema_reason(exc: Exception) -> str:
    if isinstance(exc, KeyError):
        return f"missing field {exc.args[0]!r}"
    return str(exc)
