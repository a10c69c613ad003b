"""
Question retrieval for community QA archives with language-model scoring
and embedding / feedback based query expansion.
"""

from .centrality import CentralitySpec, CentralWordSet, central_words, didf, term_centrality
from .corpus import (
    CollectionStats,
    Corpus,
    Question,
    TokenizerConfig,
    idf,
    ingest_corpus,
    make_question,
    tokenize,
)
from .embeddings import (
    ContextualStore,
    EmbeddingTable,
    QuestionVector,
    contextual_question_vector,
    cosine,
    load_contextual_store,
    load_static_embeddings,
    question_centroid,
    top_k_similar_questions,
    top_k_similar_words,
)
from .errors import ConfigError, CQARankError, DataError
from .evaluation import (
    EvalReport,
    Judgments,
    average_precision,
    mean_average_precision,
    paired_t_test,
    read_qrels,
    split_dev_test,
)
from .expansion import (
    ExpandedQuery,
    ExpansionParams,
    expand_almasri,
    expand_elmo,
    expand_elmo_prf,
    expand_kuzi,
    expand_prf,
    smm_feedback_lm,
)
from .retrieval import (
    LanguageModel,
    RankedList,
    ScoringParams,
    TranslationTable,
    bm25_score,
    build_translation_table,
    kl_score,
    mle_lm,
    rank,
    translation_lm_score,
)

__version__ = '0.1.0'
