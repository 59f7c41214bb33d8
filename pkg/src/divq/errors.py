"""Exception taxonomy shared by all divq modules."""

from __future__ import annotations


class DivqError(Exception):
    """Base class for every error raised by this package."""


# --- corpus ingestion ---------------------------------------------------


class MalformedLine(DivqError):
    """A JSONL line failed to parse or violated the record schema."""

    def __init__(self, path: str, line_no: int, reason: str):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


class EmptyCorpus(DivqError):
    """A corpus file yielded zero records."""


class DuplicateId(DivqError):
    """The same id appeared twice within one file."""

    def __init__(self, dup_id: str):
        self.dup_id = dup_id
        super().__init__(f"duplicate id {dup_id!r}")


class IoFailure(DivqError):
    """Writing an artifact failed at the filesystem level."""


# --- text processing and metrics ----------------------------------------


class InvalidN(DivqError):
    """An n-gram order below 1 was requested."""


class InvalidK(DivqError):
    """A top-k metric was requested with an unusable k."""


class BothEmpty(DivqError):
    """Pairwise diversity is undefined when both token sets are empty."""


class TooFewQuestions(DivqError):
    """Self-BLEU needs at least two questions."""


class LengthMismatch(DivqError):
    """Paired score vectors differ in length."""


class ZeroVariance(DivqError):
    """Correlation is undefined for a constant vector."""


class MissingCandidates(DivqError):
    """An instance lacked generated candidates during corpus evaluation."""

    def __init__(self, instance_id: str):
        self.instance_id = instance_id
        super().__init__(f"instance {instance_id!r} has no candidates")


class KeyMismatch(DivqError):
    """Two score files did not cover the same ids."""

    def __init__(self, only_left: set[str], only_right: set[str]):
        self.only_left = only_left
        self.only_right = only_right
        super().__init__(
            "id sets differ: "
            f"only in first {sorted(only_left)}, only in second {sorted(only_right)}"
        )


# --- relevance scoring ---------------------------------------------------


class ScorerError(DivqError):
    """Base class for relevance-scoring failures.

    Callers that score many texts attach context before re-raising:
    ``pair_index`` (set by batch_score) and ``origin_id`` (set by the
    selection strategies) identify the offending input.
    """

    pair_index: int | None = None
    origin_id: str | None = None


class MissingEmbedding(ScorerError):
    """A text had no vector in the embedding table."""

    def __init__(self, text: str):
        self.text = text
        super().__init__(f"no embedding for text {text!r}")


class EndpointFailure(ScorerError):
    """An HTTP model/embedder endpoint failed or answered off-protocol."""

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class ZeroVector(ScorerError):
    """A text embedded or tokenized to an all-zero vector."""


class EmptyBatch(DivqError):
    """batch_score was called with no pairs."""


class DimensionMismatch(DivqError):
    """An embedding file row had a different dimension than the first row."""

    def __init__(self, line_no: int):
        self.line_no = line_no
        super().__init__(f"vector dimension changed at line {line_no}")


class DuplicateText(DivqError):
    """The same text appeared twice in an embedding file."""


# --- selection and orchestration -----------------------------------------


class EmptyGroup(DivqError):
    """A selection group carried no generated questions."""

    def __init__(self, instance_id: str):
        self.instance_id = instance_id
        super().__init__(f"instance {instance_id!r} has no generated questions")


class ConfigDrift(DivqError):
    """The config on disk no longer matches the checkpointed digest."""


class CorruptState(DivqError):
    """A checkpointed artifact is missing or fails its digest check."""
