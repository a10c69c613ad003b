"""
Candidate scoring and ranking.

Three scorers are provided:

``kl``
    KL-divergence between the (possibly expanded) query language model and a
    Dirichlet-smoothed candidate model.  Query-only constants are dropped, so
    the score is rank-equivalent to ``-KL(query || candidate)``.
``bm25``
    Okapi BM25 with the smoothed idf of :func:`cqarank.corpus.idf`.
``trlm``
    Query likelihood over a translation-mixed candidate model, Dirichlet
    smoothed against the collection model.

All scorers have a per-candidate reference form (``*_score``) and a
vectorised form used by :func:`rank` that runs through :mod:`cqarank._accel`.
"""

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from . import _accel
from .corpus import Question, TokenizerConfig, idf, tokenize
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

SCORERS = ('kl', 'bm25', 'trlm')


class LanguageModel:
    """Sparse term -> probability map.  Zero-mass terms are never stored."""

    __slots__ = ('probs',)

    def __init__(self, probs):
        self.probs = {t: p for t, p in probs.items() if p > 0.0}

    def __getitem__(self, term):
        return self.probs.get(term, 0.0)

    def __contains__(self, term):
        return term in self.probs

    def __len__(self):
        return len(self.probs)

    def __iter__(self):
        return iter(self.probs)

    def __eq__(self, other):
        return isinstance(other, LanguageModel) and self.probs == other.probs

    def __repr__(self):
        top = sorted(self.probs.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
        return f'LanguageModel({len(self.probs)} terms, top={top})'

    def total(self):
        return math.fsum(self.probs.values())

    def items(self):
        return self.probs.items()


def mle_lm(question):
    """Maximum-likelihood unigram model of a question's tokens."""
    tokens = question.tokens if isinstance(question, Question) else tuple(question)
    if not tokens:
        raise ValueError('cannot build a language model from an empty question')
    n = len(tokens)
    return LanguageModel({t: c / n for t, c in Counter(tokens).items()})


@dataclass(frozen=True)
class ScoringParams:
    mu: float = 1000.0
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    translation_beta: float = 0.3
    translation_self_prob: float = 0.5

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigError(f'mu must be > 0, got {self.mu}')
        if self.bm25_k1 < 0:
            raise ConfigError(f'bm25_k1 must be >= 0, got {self.bm25_k1}')
        if not 0.0 <= self.bm25_b <= 1.0:
            raise ConfigError(f'bm25_b must be in [0, 1], got {self.bm25_b}')
        if not 0.0 <= self.translation_beta <= 1.0:
            raise ConfigError(f'translation_beta must be in [0, 1], got {self.translation_beta}')
        if not 0.0 < self.translation_self_prob <= 1.0:
            raise ConfigError(f'translation_self_prob must be in (0, 1], got {self.translation_self_prob}')


def unseen_terms(query_terms, stats):
    """Query terms with zero collection count; scorers drop them."""
    return sorted(t for t in set(query_terms) if stats.collection_count.get(t, 0) == 0)


def _seen_terms(query_lm, stats):
    return [t for t in sorted(query_lm.probs) if stats.collection_count.get(t, 0) > 0]


def _seen_weights(query_lm, stats):
    """Seen query terms and their probabilities renormalised over the seen mass."""
    terms = _seen_terms(query_lm, stats)
    mass = math.fsum(query_lm.probs[t] for t in terms)
    return terms, [query_lm.probs[t] / mass for t in terms]


def kl_score(query_lm, candidate, stats, params=ScoringParams()):
    """
    ``sum_w p(w|q) * log(p_seen(w|d) / (alpha_d * p(w|C))) + log(alpha_d)`` over
    query terms present in the candidate.

    ``p_seen(w|d) / (alpha_d * p(w|C))`` simplifies to ``1 + c(w,d) / (mu p(w|C))``.
    Query terms absent from the whole collection are dropped and the
    remaining query probabilities renormalised, which keeps the ranking equal
    to Dirichlet query likelihood over the seen terms.  With no seen terms
    every candidate scores 0.
    """
    if not candidate.tokens:
        raise ValueError(f'candidate {candidate.id!r} is empty')
    counts = candidate.term_counts()
    mu = params.mu
    dlen = float(len(candidate.tokens))
    terms, weights = _seen_weights(query_lm, stats)
    if not terms:
        return 0.0
    score = 0.0
    for t, w in zip(terms, weights):
        c = counts.get(t, 0)
        if c:
            score += w * math.log1p(c / (mu * stats.p_c(t)))
    return score + math.log(mu / (dlen + mu))


def bm25_score(query, candidate, stats, params=ScoringParams()):
    """BM25; every query token contributes, so repeated query terms count repeatedly."""
    counts = candidate.term_counts()
    k1, b = params.bm25_k1, params.bm25_b
    norm = k1 * (1.0 - b + b * len(candidate.tokens) / stats.avg_len)
    score = 0.0
    for t, qc in sorted(Counter(query.tokens).items()):
        tf = counts.get(t, 0)
        if tf:
            score += qc * idf(t, stats) * (tf * (k1 + 1.0)) / (tf + norm)
    return score


# ---------------------------------------------------------------------------
# translation language model
# ---------------------------------------------------------------------------

class TranslationTable:
    """
    Row-stochastic map ``trans[u][w] = p(w|u)``.

    Source terms without a row translate only to themselves.
    """

    def __init__(self, trans):
        self.trans = trans
        inv = defaultdict(list)
        for u in sorted(trans):
            for w, p in sorted(trans[u].items()):
                inv[w].append((u, p))
        self._inverse = dict(inv)

    def __getitem__(self, u):
        return self.trans.get(u, {u: 1.0})

    def __contains__(self, u):
        return u in self.trans

    def sources_for(self, w):
        """``[(u, p(w|u))]`` over sources with an explicit row, plus identity if ``w`` has none."""
        pairs = list(self._inverse.get(w, ()))
        if w not in self.trans:
            pairs.append((w, 1.0))
        return pairs

    @classmethod
    def identity(cls):
        return cls({})


def build_translation_table(corpus, min_count=1, self_prob=0.5, tokenizer=TokenizerConfig()):
    """
    Estimate ``p(w|u)`` from question/answer pairs by pointwise mutual
    information.

    Each question with at least one answer forms one unit.  ``u`` ranges over
    the question's tokens, ``w`` over question and answer tokens of the same
    unit; ``PMI(u, w) = log(N n_uw / (n_u n_w))`` over unit document
    frequencies, negative values clipped to zero.  Rows are normalised, then
    the self-translation probability is raised to at least ``self_prob`` with
    the remaining mass rescaled to ``1 - p(u|u)``.
    """
    if not 0.0 < self_prob <= 1.0:
        raise ConfigError(f'self_prob must be in (0, 1], got {self_prob}')
    q_sets, u_sets = [], []
    for q in corpus:
        if not q.answers:
            continue
        qs = set(q.tokens)
        us = set(qs)
        for a in q.answers:
            us.update(tokenize(a, tokenizer))
        q_sets.append(qs)
        u_sets.append(us)
    if not q_sets:
        raise DataError('corpus has no answer text; the translation model (trlm) needs '
                        'question/answer pairs - choose a different method')
    vocab = sorted(set().union(*u_sets))
    tid = {t: i for i, t in enumerate(vocab)}
    n = len(q_sets)

    def incidence(sets):
        rows = np.repeat(np.arange(n), [len(s) for s in sets])
        cols = np.fromiter((tid[t] for s in sets for t in sorted(s)), dtype=np.int64, count=len(rows))
        return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, len(vocab)))

    qm, um = incidence(q_sets), incidence(u_sets)
    n_q = np.asarray(qm.sum(axis=0)).ravel()
    n_u = np.asarray(um.sum(axis=0)).ravel()
    co = (qm.T @ um).tocsr()
    co.sort_indices()

    trans = {}
    for i in range(len(vocab)):
        if n_q[i] < min_count:
            continue
        lo, hi = co.indptr[i], co.indptr[i + 1]
        cols, vals = co.indices[lo:hi], co.data[lo:hi]
        keep = n_u[cols] >= min_count
        cols, vals = cols[keep], vals[keep]
        pmi = np.log(n * vals / (n_q[i] * n_u[cols]))
        pos = pmi > 0
        u = vocab[i]
        if not pos.any():
            trans[u] = {u: 1.0}
            continue
        cols, pmi = cols[pos], pmi[pos]
        row = dict(zip((vocab[j] for j in cols), (pmi / pmi.sum()).tolist()))
        selfp = max(row.get(u, 0.0), self_prob)
        rest = {w: p for w, p in row.items() if w != u}
        rest_total = math.fsum(rest.values())
        if rest_total > 0 and selfp < 1.0:
            scale = (1.0 - selfp) / rest_total
            row = {w: p * scale for w, p in rest.items()}
            row[u] = selfp
        else:
            row = {u: 1.0}
        trans[u] = row
    return TranslationTable(trans)


def translation_lm_score(query, candidate, table, stats, params=ScoringParams()):
    """
    Log query likelihood under ``p_tr(w|d) = (1-beta) p_ml(w|d) + beta sum_u p(w|u) p_ml(u|d)``,
    Dirichlet smoothed with ``mu``.  Query tokens unseen in the collection are dropped.
    """
    counts = candidate.term_counts()
    dlen = float(len(candidate.tokens))
    beta, mu = params.translation_beta, params.mu
    score = 0.0
    for w, qc in sorted(Counter(query.tokens).items()):
        pc = stats.p_c(w)
        if pc == 0.0:
            continue
        trans_mass = math.fsum(p * counts.get(u, 0) for u, p in table.sources_for(w))
        eff = (1.0 - beta) * counts.get(w, 0) + beta * trans_mass
        score += qc * math.log((eff + mu * pc) / (dlen + mu))
    return score


# ---------------------------------------------------------------------------
# ranking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankedList:
    query_id: str
    entries: tuple

    def __len__(self):
        return len(self.entries)

    @property
    def ids(self):
        return [qid for qid, _ in self.entries]


def _query_arrays(query_lm, corpus):
    terms, w = _seen_weights(query_lm, corpus.stats)
    tids = np.array([corpus.term_index[t] for t in terms], dtype=np.int64)
    weights = np.array(w, dtype=np.float64)
    return tids, weights


def score_all(query, corpus, scorer='kl', params=ScoringParams(), translation=None):
    """Scores for every corpus question, indexed like ``corpus.ids``."""
    if scorer == 'kl':
        lm = mle_lm(query) if isinstance(query, Question) else query
        tids, weights = _query_arrays(lm, corpus)
        if not len(tids):
            return np.zeros(len(corpus.ids))
        return _accel.kl_accumulate(corpus.indptr, corpus.post_docs, corpus.post_counts,
                                    tids, weights, corpus.coll_prob[tids], float(params.mu),
                                    corpus.doc_len)
    if not isinstance(query, Question):
        raise ConfigError(f'scorer {scorer!r} needs a tokenised question, not a language model')
    qcounts = sorted((t, c) for t, c in Counter(query.tokens).items() if t in corpus.term_index)
    if scorer == 'bm25':
        tids = np.array([corpus.term_index[t] for t, _ in qcounts], dtype=np.int64)
        weights = np.array([c * idf(t, corpus.stats) for t, c in qcounts], dtype=np.float64)
        return _accel.bm25_accumulate(corpus.indptr, corpus.post_docs, corpus.post_counts,
                                      tids, weights, float(params.bm25_k1), float(params.bm25_b),
                                      corpus.doc_len, float(corpus.stats.avg_len))
    if scorer == 'trlm':
        if translation is None:
            raise ConfigError('scorer trlm needs a translation table')
        return _trlm_scores(qcounts, corpus, translation, params)
    raise ConfigError(f'unknown scorer {scorer!r}; expected one of {SCORERS}')


def _trlm_scores(qcounts, corpus, table, params):
    beta, mu = params.translation_beta, params.mu
    scores = np.zeros(len(corpus))
    denom = corpus.doc_len + mu
    for w, qc in qcounts:
        tr = np.zeros(len(corpus))
        for u, p in table.sources_for(w):
            t = corpus.term_index.get(u)
            if t is None:
                continue
            lo, hi = corpus.indptr[t], corpus.indptr[t + 1]
            tr[corpus.post_docs[lo:hi]] += p * corpus.post_counts[lo:hi]
        own = np.zeros(len(corpus))
        t = corpus.term_index[w]
        own[corpus.post_docs[corpus.indptr[t]:corpus.indptr[t + 1]]] = \
            corpus.post_counts[corpus.indptr[t]:corpus.indptr[t + 1]]
        eff = (1.0 - beta) * own + beta * tr
        scores += qc * np.log((eff + mu * corpus.coll_prob[t]) / denom)
    return scores


def rank(query, corpus, scorer='kl', params=ScoringParams(), translation=None, query_id=None, depth=None):
    """
    Score every corpus question and return them best-first.

    ``query`` is a :class:`LanguageModel` or a :class:`Question` (``bm25`` and
    ``trlm`` require the latter).  Equal scores are ordered by ascending id.
    """
    scores = score_all(query, corpus, scorer, params, translation)
    # doc index order is ascending id order
    order = np.lexsort((np.arange(len(corpus)), -scores))
    if depth:
        order = order[:depth]
    if query_id is None:
        query_id = query.id if isinstance(query, Question) else ''
    return RankedList(query_id, tuple((corpus.ids[d], float(scores[d])) for d in order))


# ---------------------------------------------------------------------------
# run files
# ---------------------------------------------------------------------------

def format_run(ranked_lists, tag):
    lines = []
    for rl in ranked_lists:
        for r, (qid, score) in enumerate(rl.entries, 1):
            lines.append(f'{rl.query_id} Q0 {qid} {r} {score:.6f} {tag}\n')
    return ''.join(lines)


def write_run(path, ranked_lists, tag):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_run(ranked_lists, tag))


def read_run(path):
    """Parse a TREC run file into ``{query_id: RankedList}`` ordered by rank."""
    path = Path(path)
    if not path.exists():
        raise DataError(f'run file not found: {path}')
    rows = defaultdict(list)
    tag = None
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise DataError(f'{path}:{lineno}: expected 6 columns, got {len(parts)}')
            qid, _, did, r, score, tag = parts
            try:
                rows[qid].append((int(r), did, float(score)))
            except ValueError:
                raise DataError(f'{path}:{lineno}: non-numeric rank or score') from None
    runs = {}
    for qid, entries in rows.items():
        entries.sort()
        runs[qid] = RankedList(qid, tuple((did, s) for _, did, s in entries))
    return runs, tag
