"""Topic mining for grouped social-media posts.

Pipeline stages: harvest per-account posts, build a deduplicated
bag-of-words corpus, fit a topic model with a collapsed Gibbs sampler, and
roll topic weights up into labeled categories per group.
"""

from .analysis import (
    ALL_GROUPS_LABEL,
    CATEGORIES,
    GroupCategoryWeights,
    LabelMap,
    LabelMapError,
    TopicWeights,
    aggregate_all_groups,
    bundled_label_map,
    group_category_weights,
    load_label_map,
    rank_topics,
    save_label_map,
    topic_weights,
)
from .corpus import (
    BuildReport,
    Corpus,
    Document,
    GroupStatRow,
    GroupStats,
    TokenizerConfig,
    Vocabulary,
    build_corpus,
    corpus_stats,
    dedupe,
    default_stopwords,
    load_stopwords,
    tokenize,
)
from .harvest import (
    AccountEntry,
    DuplicateHandleError,
    FetchPolicy,
    HarvestError,
    HarvestResult,
    HttpTimelineSource,
    ManifestError,
    PostFormatError,
    PostSource,
    RateLimitedError,
    RateLimitExceededError,
    RawPost,
    ReplaySource,
    TransportError,
    UnknownAccountError,
    fetch_account,
    filter_active,
    harvest_accounts,
    load_manifest,
    read_posts,
    write_posts,
)
from .lda import (
    GENERATOR_ID,
    CountTables,
    EmptyCorpusError,
    GibbsLda,
    doc_topic_estimate,
    full_conditional,
    log_likelihood,
    ranked_words,
    topic_word_estimate,
)
from .snapshot import SnapshotError, load_snapshot, save_snapshot

__version__ = "0.1.0"

__all__ = [
    "ALL_GROUPS_LABEL",
    "AccountEntry",
    "BuildReport",
    "CATEGORIES",
    "Corpus",
    "CountTables",
    "Document",
    "DuplicateHandleError",
    "EmptyCorpusError",
    "FetchPolicy",
    "GENERATOR_ID",
    "GibbsLda",
    "GroupCategoryWeights",
    "GroupStatRow",
    "GroupStats",
    "HarvestError",
    "HarvestResult",
    "HttpTimelineSource",
    "LabelMap",
    "LabelMapError",
    "ManifestError",
    "PostFormatError",
    "PostSource",
    "RateLimitExceededError",
    "RateLimitedError",
    "RawPost",
    "ReplaySource",
    "SnapshotError",
    "TokenizerConfig",
    "TopicWeights",
    "TransportError",
    "UnknownAccountError",
    "Vocabulary",
    "aggregate_all_groups",
    "build_corpus",
    "bundled_label_map",
    "corpus_stats",
    "dedupe",
    "default_stopwords",
    "doc_topic_estimate",
    "fetch_account",
    "filter_active",
    "full_conditional",
    "group_category_weights",
    "harvest_accounts",
    "load_label_map",
    "load_manifest",
    "load_snapshot",
    "load_stopwords",
    "log_likelihood",
    "rank_topics",
    "ranked_words",
    "read_posts",
    "save_label_map",
    "save_snapshot",
    "tokenize",
    "topic_weights",
    "topic_word_estimate",
    "write_posts",
]
