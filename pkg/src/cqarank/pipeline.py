"""
Method roster: maps a method name to its expansion step and scorer.

Baselines: ``bm25``, ``lmir``, ``trlm``, ``lm-prf``.  Expansion methods:
``expAL``, ``expKuzi``, ``expELMo``, ``expELMoPRF``, each also available as
``<name>-centrality`` (central words excluded from expansion).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .centrality import CentralitySpec, central_words
from .errors import ConfigError
from .expansion import (
    ExpansionParams,
    _mix,
    expand_almasri,
    expand_elmo,
    expand_elmo_prf,
    expand_kuzi,
    expand_prf,
)
from .retrieval import ScoringParams, mle_lm, rank, unseen_terms

BASELINES = ('bm25', 'lmir', 'trlm', 'lm-prf')
EXPANSIONS = ('expAL', 'expKuzi', 'expELMo', 'expELMoPRF')
METHODS = BASELINES + EXPANSIONS + tuple(m + '-centrality' for m in EXPANSIONS)

log = logging.getLogger(__name__)

NEEDS_EMBEDDINGS = {'expAL', 'expKuzi'}
NEEDS_CONTEXT = {'expELMo', 'expELMoPRF'}


@dataclass
class Resources:
    corpus: object
    table: object = None
    store: object = None
    translation: object = None


@dataclass(frozen=True)
class Settings:
    scoring: ScoringParams = field(default_factory=ScoringParams)
    expansion: ExpansionParams = field(default_factory=ExpansionParams)
    centrality: CentralitySpec = field(default_factory=CentralitySpec)
    depth: int = 0


def parse_method(method):
    """Split ``'expAL-centrality'`` into ``('expAL', True)``; validate the name."""
    if method not in METHODS:
        raise ConfigError(f'unknown method {method!r}; choose from: {", ".join(METHODS)}')
    if method.endswith('-centrality'):
        return method[:-len('-centrality')], True
    return method, False


def check_resources(method, res):
    base, _ = parse_method(method)
    if base in NEEDS_EMBEDDINGS and res.table is None:
        raise ConfigError(f'method {method} needs static word vectors: pass --embeddings')
    if base in NEEDS_CONTEXT and res.store is None:
        raise ConfigError(f'method {method} needs contextual vectors: pass --ctx-store')
    if base == 'trlm' and res.translation is None:
        raise ConfigError('method trlm needs a translation table built from answer text')


def expand_query(question, method, res, settings=Settings()):
    """
    Expanded query for ``method`` (``lmir`` yields the plain MLE model).
    Returns ``(ExpandedQuery, central_word_set_or_None)``.
    """
    base, selective = parse_method(method)
    if base in ('bm25', 'trlm'):
        raise ConfigError(f'{base} scores the raw question; it has no query language model to expand')
    check_resources(method, res)
    cw = None
    exclude = frozenset()
    if selective:
        cw = central_words(question, res.corpus, settings.centrality, settings.scoring)
        exclude = frozenset(cw.terms)
    ep, sp = settings.expansion, settings.scoring
    corpus = res.corpus
    if base == 'lmir':
        eq = _mix(question.id, 'lmir', [(1.0, mle_lm(question).probs, 'base')])
    elif base == 'lm-prf':
        eq = expand_prf(question, corpus, ep, sp)
    elif base == 'expAL':
        eq = expand_almasri(question, res.table, ep, exclude, corpus.stats.vocabulary)
    elif base == 'expKuzi':
        eq = expand_kuzi(question, res.table, corpus.stats.vocabulary, ep, exclude)
    elif base == 'expELMo':
        eq = expand_elmo(question, corpus, res.store, ep, exclude)
    else:
        eq = expand_elmo_prf(question, corpus, res.store, ep, sp, exclude_central=exclude)
    return eq, cw


def run_query(question, method, res, settings=Settings()):
    """Rank the corpus for one input question.  Returns ``(RankedList, diagnostics)``."""
    base, _ = parse_method(method)
    check_resources(method, res)
    depth = settings.depth or None
    dropped = unseen_terms(question.tokens, res.corpus.stats)
    if dropped:
        log.warning('query %s: %d term(s) unseen in the collection are ignored: %s',
                    question.id, len(dropped), ' '.join(dropped[:10]))
    if base in ('bm25', 'trlm'):
        ranked = rank(question, res.corpus, base, settings.scoring, res.translation, question.id, depth)
        return ranked, {}
    eq, cw = expand_query(question, method, res, settings)
    ranked = rank(eq.lm, res.corpus, 'kl', settings.scoring, query_id=question.id, depth=depth)
    diag = {'flags': list(eq.flags)}
    if cw is not None:
        diag['central'] = list(cw.terms)
    return ranked, diag


def run_all(questions, method, res, settings=Settings(), workers=1):
    """
    Rank every question; output is ordered by query id whatever the worker count.
    Returns ``(ranked_lists, diagnostics_by_query)``.
    """
    check_resources(method, res)
    qs = sorted(questions, key=lambda q: q.id)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda q: run_query(q, method, res, settings), qs))
    else:
        results = [run_query(q, method, res, settings) for q in qs]
    return [r for r, _ in results], {q.id: d for q, (_, d) in zip(qs, results)}
