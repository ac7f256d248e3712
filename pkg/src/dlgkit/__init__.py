"""Toolkit for building and validating grounded movie-dialogue corpora.

Covers the full data path: canonical corpus ingestion and statistics,
constrained speaker-profile generation, fuzzy entity resolution,
sentiment-adherence checking, model-input encoding, distractor sampling,
beam decoding against an external scorer process, and evaluation metrics.
"""

from .corpus import (
    SCHEMA_VERSION,
    Corpus,
    CorpusStats,
    Dialogue,
    SentimentClass,
    Speaker,
    Split,
    SplitAssignment,
    Utterance,
    compute_stats,
    ingest,
    serialize,
    split_by_movie,
)
from .entities import (
    EntityKind,
    EntityMatch,
    EntityRef,
    ResolverConfig,
    coverage,
    evaluate_ner,
    resolve,
)
from .errors import (
    ConfigError,
    DlgkitError,
    InvariantError,
    ParseError,
    PoolExhaustedError,
    SchemaError,
    ScorerError,
    StageError,
)
from .profiles import (
    Fact,
    FactKind,
    KnowledgeBase,
    Opinion,
    OpinionScale,
    Profile,
    ProfileGenerator,
    ProfileRelation,
    unify,
)

__version__ = "0.1.0"

__all__ = [
    "SCHEMA_VERSION",
    "Corpus",
    "CorpusStats",
    "Dialogue",
    "SentimentClass",
    "Speaker",
    "Split",
    "SplitAssignment",
    "Utterance",
    "compute_stats",
    "ingest",
    "serialize",
    "split_by_movie",
    "EntityKind",
    "EntityMatch",
    "EntityRef",
    "ResolverConfig",
    "coverage",
    "evaluate_ner",
    "resolve",
    "ConfigError",
    "DlgkitError",
    "InvariantError",
    "ParseError",
    "PoolExhaustedError",
    "SchemaError",
    "ScorerError",
    "StageError",
    "Fact",
    "FactKind",
    "KnowledgeBase",
    "Opinion",
    "OpinionScale",
    "Profile",
    "ProfileGenerator",
    "ProfileRelation",
    "unify",
]
