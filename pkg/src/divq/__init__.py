"""divq: diversity evaluation and pseudo-pair selection for question generation.

Batch toolkit around top-k generated questions: token-set pairwise diversity
with a relevance gate, Distinct-n, single-order BLEU, Self-BLEU, Pearson
correlation against human scores, two reliable pseudo-pair selection
strategies, and an orchestrated dual-model training loop that talks to
external model servers over HTTP.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    CandidateSet,
    ExternalQuestionCorpus,
    Instance,
    PseudoPair,
    Question,
    Subgraph,
    Triplet,
    load_external_questions,
    load_instances,
    read_pseudo_pairs,
    write_pseudo_pairs,
)
from .metrics import (  # noqa: F401
    CorpusMetricReport,
    DiverseReport,
    MetricSpec,
    bleu_n,
    corpus_metric,
    distinct_n,
    diverse_at_k,
    diverse_pair,
    pearson,
    self_bleu,
)
from .relevance import (  # noqa: F401
    EmbeddingEndpointScorer,
    EmbeddingFileScorer,
    LexicalScorer,
    RelevanceScorer,
    batch_score,
    load_embedding_file,
    make_scorer,
)
from .selection import (  # noqa: F401
    SelectionOutcome,
    select_backward,
    select_forward,
)
from .orchestrator import (  # noqa: F401
    ModelEndpoint,
    Orchestrator,
    OrchestratorState,
    RunConfig,
)
from .textproc import (  # noqa: F401
    NGramBag,
    TokenizeConfig,
    linearize,
    ngrams,
    token_set,
    tokenize,
)
