"""
Query-expansion methods.  Each returns an :class:`ExpandedQuery` whose
language model replaces the plain MLE model of the input question.

``expand_almasri``
    per-word embedding neighbours, counts renormalised per base word.
``expand_kuzi``
    neighbours of the whole-question centroid, interpolated with the MLE.
``expand_prf``
    simple-mixture-model feedback over the top retrieved questions.
``expand_elmo``
    feedback from the questions closest in contextual-vector space.
``expand_elmo_prf``
    three-way interpolation of the MLE, contextual feedback and PRF feedback.

Every method takes an exclusion set (the question's central words) for the
selective variants; an empty set reproduces the plain method exactly.
"""

import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _accel
from .embeddings import (
    contextual_question_vector,
    question_centroid,
    top_k_similar_questions,
    top_k_similar_words,
)
from .errors import ConfigError, DataError
from .retrieval import LanguageModel, ScoringParams, mle_lm, rank

ORIGINS = ('base', 'word-expansion', 'centroid', 'elmo-feedback', 'prf')


@dataclass(frozen=True)
class ExpansionParams:
    alpha_al: float = 0.4
    k_words: int = 2
    v_words: int = 9
    lambda_kuzi: float = 0.65
    k_questions: int = 5
    alpha_elmo: float = 0.3
    alpha_prf: float = 0.3
    beta_prf: float = 0.2
    prf_depth: int = 2
    prf_weight: float = 0.5
    smm_lambda: float = 0.5
    smm_iters: int = 20

    def __post_init__(self):
        for name in ('k_words', 'v_words', 'k_questions', 'prf_depth'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be >= 1')
        if self.smm_iters < 0:
            raise ConfigError('smm_iters must be >= 0')
        for name in ('alpha_al', 'lambda_kuzi', 'alpha_elmo', 'alpha_prf', 'beta_prf', 'prf_weight'):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f'{name} must be in [0, 1], got {v}')
        if not 0.0 < self.smm_lambda < 1.0:
            raise ConfigError(f'smm_lambda must be in (0, 1), got {self.smm_lambda}')
        if self.alpha_prf + self.beta_prf >= 1.0:
            raise ConfigError(f'alpha_prf + beta_prf must be < 1, got {self.alpha_prf} + {self.beta_prf}')

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ExpandedQuery:
    query_id: str
    lm: LanguageModel
    method: str
    contributions: dict
    flags: tuple = ()
    details: dict = field(default_factory=dict)

    def table(self):
        """``(term, probability, origin)`` rows, most probable first."""
        rows = []
        for t, p in sorted(self.lm.probs.items(), key=lambda kv: (-kv[1], kv[0])):
            parts = sorted(self.contributions[t].items(), key=lambda kv: (-kv[1], kv[0]))
            rows.append((t, p, '+'.join(o for o, _ in parts)))
        return rows


def _mix(query_id, method, components, flags=(), details=None):
    """
    Combine ``(weight, distribution, origin)`` components into an
    :class:`ExpandedQuery`.  Zero-weight components are skipped entirely so
    degenerate interpolations reproduce their surviving input bit for bit.
    """
    contrib = {}
    for weight, dist, origin in components:
        if weight == 0.0:
            continue
        for t, p in dist.items():
            m = weight * p
            if m > 0.0:
                slot = contrib.setdefault(t, {})
                slot[origin] = slot.get(origin, 0.0) + m
    probs = {}
    for t, origins in contrib.items():
        total = 0.0
        for o in ORIGINS:
            if o in origins:
                total += origins[o]
        probs[t] = total
    return ExpandedQuery(query_id, LanguageModel(probs), method, contrib, tuple(flags), details or {})


def _feedback_mle(questions):
    counts = Counter()
    for q in questions:
        counts.update(q.tokens)
    n = sum(counts.values())
    return {t: c / n for t, c in counts.items()}


# ---------------------------------------------------------------------------
# word-by-word expansion
# ---------------------------------------------------------------------------

def _conserve(counts, target):
    """Fold the rounding residual into the largest share so ``fsum(counts) == target``."""
    top = max(counts, key=lambda w: (counts[w], w))
    for _ in range(8):
        residual = math.fsum([target] + [-c for c in counts.values()])
        if residual == 0.0:
            return
        counts[top] += residual


def expand_almasri(question, table, params=ExpansionParams(), exclude=frozenset(), vocab=None):
    """
    Expand each base word with its ``k_words`` nearest embedding neighbours.

    Neighbour counts start at ``alpha * count(t) * cos`` and are rescaled so
    that they sum to ``count(t)``; base words keep their own counts and the
    pooled counts are sum-normalised.  Neighbours with non-positive similarity
    get no count.  ``vocab`` restricts candidate neighbours (normally the
    collection vocabulary).
    """
    exclude = frozenset(exclude)
    base_counts = Counter(question.tokens)
    exp_counts = {}
    per_base = {}
    skipped = []
    for t in sorted(base_counts):
        if t in exclude:
            continue
        neighbours = top_k_similar_words(t, params.k_words, table, vocab)
        raw = [(w, params.alpha_al * base_counts[t] * max(sim, 0.0)) for w, sim in neighbours]
        raw = [(w, c) for w, c in raw if c > 0.0]
        s = math.fsum(c for _, c in raw)
        if not raw or s == 0.0:
            skipped.append(t)
            continue
        counts = {w: c / s * base_counts[t] for w, c in raw}
        _conserve(counts, base_counts[t])
        per_base[t] = counts
        for w, c in counts.items():
            exp_counts[w] = exp_counts.get(w, 0.0) + c
    total = float(sum(base_counts.values())) + math.fsum(exp_counts.values())
    base = {t: c / total for t, c in base_counts.items()}
    expn = {t: c / total for t, c in exp_counts.items()}
    flags = ('no-embedding:' + ','.join(skipped),) if skipped else ()
    return _mix(question.id, 'expAL', [(1.0, base, 'base'), (1.0, expn, 'word-expansion')],
                flags, {'per_base_counts': per_base})


# ---------------------------------------------------------------------------
# whole-question (centroid) expansion
# ---------------------------------------------------------------------------

def centroid_distribution(centroid, table, vocab, v):
    """Top-``v`` terms by ``exp(cos(t, centroid))``, sum-normalised."""
    mask = table.vocab_mask(vocab) if vocab is not None else np.ones(len(table), dtype=bool)
    cand = np.flatnonzero(mask)
    if cand.size == 0:
        return {}
    c = np.asarray(centroid, dtype=np.float64)
    cos = table.unit[cand] @ (c / np.linalg.norm(c))
    order = np.lexsort((table.name_rank[cand], -cos))[:v]
    scores = np.exp(cos[order])
    scores = scores / scores.sum()
    return {table.terms[cand[j]]: float(s) for j, s in zip(order, scores)}


def expand_kuzi(question, table, vocab, params=ExpansionParams(), exclude=frozenset()):
    """
    ``lambda * P_MLE + (1 - lambda) * P_cent`` where ``P_cent`` spreads mass over
    the ``v_words`` vocabulary terms closest to the centroid of the question's
    non-excluded word vectors.  A zero centroid degrades to the MLE (flagged).
    """
    p_mle = mle_lm(question).probs
    centroid = question_centroid(question, table, exclude)
    if centroid.is_zero:
        return _mix(question.id, 'expKuzi', [(1.0, p_mle, 'base')], ('zero-centroid',))
    p_cent = centroid_distribution(centroid.values, table, vocab, params.v_words)
    lam = params.lambda_kuzi
    return _mix(question.id, 'expKuzi', [(lam, p_mle, 'base'), (1.0 - lam, p_cent, 'centroid')])


# ---------------------------------------------------------------------------
# pseudo-relevance feedback
# ---------------------------------------------------------------------------

def fit_smm(counts, collprob, lam, iters):
    """
    Fit the feedback topic model of a two-component mixture by EM.

    ``counts`` and ``collprob`` map term -> feedback count / background
    probability.  Returns ``(LanguageModel, loglik)`` where ``loglik[i]`` is the
    mixture log-likelihood after ``i`` iterations (``loglik[0]`` at the MLE start).
    """
    terms = sorted(counts)
    c = np.array([counts[t] for t in terms], dtype=np.float64)
    pc = np.array([collprob.get(t, 0.0) for t in terms], dtype=np.float64)
    theta, loglik = _accel.smm_em(c, pc, float(lam), int(iters))
    return LanguageModel(dict(zip(terms, theta.tolist()))), loglik


def smm_feedback_lm(feedback, stats, params=ExpansionParams()):
    """Feedback language model of ``feedback`` questions, background ``stats``."""
    if not feedback:
        raise ValueError('feedback set is empty')
    counts = Counter()
    for q in feedback:
        counts.update(q.tokens)
    collprob = {t: stats.p_c(t) for t in counts}
    lm, _ = fit_smm(counts, collprob, params.smm_lambda, params.smm_iters)
    return lm


def prf_feedback(question, corpus, params=ExpansionParams(), scoring=ScoringParams(),
                 scorer='kl', translation=None, depth=None):
    """Top ``depth`` (default ``prf_depth``) questions from the base scorer."""
    depth = depth or params.prf_depth
    query = mle_lm(question) if scorer == 'kl' else question
    ranked = rank(query, corpus, scorer, scoring, translation, question.id, depth=depth)
    return [corpus[qid] for qid in ranked.ids]


def expand_prf(question, corpus, params=ExpansionParams(), scoring=ScoringParams(),
               scorer='kl', translation=None):
    """``(1 - w) P_MLE + w theta_F`` with ``theta_F`` the SMM model of the top ``prf_depth`` questions."""
    p_mle = mle_lm(question).probs
    w = params.prf_weight
    if w == 0.0:
        return _mix(question.id, 'lm-prf', [(1.0, p_mle, 'base')])
    feedback = prf_feedback(question, corpus, params, scoring, scorer, translation)
    theta = smm_feedback_lm(feedback, corpus.stats, params)
    return _mix(question.id, 'lm-prf', [(1.0 - w, p_mle, 'base'), (w, theta.probs, 'prf')],
                details={'feedback': [q.id for q in feedback]})


# ---------------------------------------------------------------------------
# contextual-similarity feedback
# ---------------------------------------------------------------------------

def elmo_feedback_set(question, corpus, store, k, exclude_central=()):
    """
    Feedback questions by contextual similarity.

    One excluded term: drop its positions from both input and candidate vectors.
    Several: intersect the per-term top-``k`` sets (order of the first set).
    An empty result falls back to the unexcluded top-``k`` and is flagged.
    Returns ``(ids, flags)``.
    """
    if question.id not in store:
        raise DataError(f'input question {question.id!r} is not in the contextual store')
    flags = []
    central = sorted(set(exclude_central))
    if central:
        sets = []
        for t in central:
            vec = contextual_question_vector(question, store, t)
            sets.append(top_k_similar_questions(vec, corpus, store, k, t) if not vec.is_zero else [])
        common = set(sets[0]).intersection(*sets[1:])
        ids = [qid for qid in sets[0] if qid in common]
        if ids:
            return ids, flags
        flags.append('empty-central-intersection')
    vec = contextual_question_vector(question, store)
    ids = top_k_similar_questions(vec, corpus, store, k) if not vec.is_zero else []
    if not ids:
        flags.append('no-contextual-feedback')
    return ids, flags


def expand_elmo(question, corpus, store, params=ExpansionParams(), exclude_central=()):
    """``(1 - alpha) P_MLE + alpha theta_E`` with ``theta_E`` the MLE of the contextual feedback set."""
    p_mle = mle_lm(question).probs
    alpha = params.alpha_elmo
    if alpha == 0.0:
        return _mix(question.id, 'expELMo', [(1.0, p_mle, 'base')])
    ids, flags = elmo_feedback_set(question, corpus, store, params.k_questions, exclude_central)
    if not ids:
        return _mix(question.id, 'expELMo', [(1.0, p_mle, 'base')], flags)
    theta = _feedback_mle([corpus[qid] for qid in ids])
    return _mix(question.id, 'expELMo', [(1.0 - alpha, p_mle, 'base'), (alpha, theta, 'elmo-feedback')],
                flags, {'elmo_feedback': ids})


def expand_elmo_prf(question, corpus, store, params=ExpansionParams(), scoring=ScoringParams(),
                    scorer='kl', translation=None, exclude_central=()):
    """``(1 - a - b) P_MLE + a theta_E + b theta_F``."""
    a, b = params.alpha_prf, params.beta_prf
    if a + b >= 1.0:
        raise ConfigError(f'alpha_prf + beta_prf must be < 1, got {a} + {b}')
    p_mle = mle_lm(question).probs
    flags, details = [], {}
    theta_e = {}
    if a != 0.0:
        ids, flags = elmo_feedback_set(question, corpus, store, params.k_questions, exclude_central)
        if ids:
            theta_e = _feedback_mle([corpus[qid] for qid in ids])
            details['elmo_feedback'] = ids
        else:
            a = 0.0
    theta_f = {}
    if b != 0.0:
        feedback = prf_feedback(question, corpus, params, scoring, scorer, translation)
        theta_f = smm_feedback_lm(feedback, corpus.stats, params).probs
        details['feedback'] = [q.id for q in feedback]
    return _mix(question.id, 'expELMoPRF',
                [(1.0 - a - b, p_mle, 'base'), (a, theta_e, 'elmo-feedback'), (b, theta_f, 'prf')],
                flags, details)
