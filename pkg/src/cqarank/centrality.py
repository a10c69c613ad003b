"""
Central-word detection for selective expansion.

Term importance inside a question is estimated from pseudo-relevant feedback
questions with a damped fixed-point iteration over term co-occurrence, then
discounted by ``didf(t) = idf(t) / (c + idf(t))``.  The central set holds the
argmax before and after the idf discount (one or two terms).
"""

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import idf
from .errors import ConfigError
from .expansion import prf_feedback
from .retrieval import ScoringParams


@dataclass(frozen=True)
class CentralitySpec:
    feedback_depth: int = 10
    iters: int = 12
    c_idf: float = 1.0
    damping: float = 0.85

    def __post_init__(self):
        if self.feedback_depth < 1:
            raise ConfigError('feedback_depth must be >= 1')
        if self.iters < 1:
            raise ConfigError('iters must be >= 1')
        if not self.c_idf > 0:
            raise ConfigError('c_idf must be > 0')
        if not 0.0 < self.damping < 1.0:
            raise ConfigError('damping must be in (0, 1)')


@dataclass(frozen=True)
class CentralWordSet:
    pre_idf: str
    post_idf: str
    terms: tuple
    rows: tuple = ()  # (term, A, didf, I) per distinct question term

    def __contains__(self, term):
        return term in self.terms

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)


def didf(term, stats, c_idf=1.0):
    """Damped idf in [0, 1): ``idf / (c_idf + idf)``."""
    if not c_idf > 0:
        raise ConfigError('c_idf must be > 0')
    v = idf(term, stats)
    return v / (c_idf + v)


def centrality_fixed_point(assoc, prior, damping, iters):
    """
    Iterate ``A <- normalise(damping * W @ A + (1 - damping) * prior)`` from the
    uniform vector, ``W`` being ``assoc`` with rows normalised to sum to one.
    """
    assoc = np.asarray(assoc, dtype=np.float64)
    prior = np.asarray(prior, dtype=np.float64)
    n = prior.shape[0]
    rows = assoc.sum(axis=1, keepdims=True)
    w = np.divide(assoc, rows, out=np.zeros_like(assoc), where=rows > 0)
    prior = prior / prior.sum()
    a = np.full(n, 1.0 / n)
    for _ in range(iters):
        a = damping * (w @ a) + (1.0 - damping) * prior
        a = a / a.sum()
    return a


def term_centrality(question, feedback, spec=CentralitySpec()):
    """
    Importance of each distinct question term (first-occurrence order) given
    the feedback questions.  Returns ``{term: A}`` summing to one.

    Association between two different terms is the number of feedback
    questions containing both, plus one; the prior is each term's feedback
    frequency, plus one.
    """
    if not question.tokens:
        raise ValueError('question has no tokens')
    if not feedback:
        raise ValueError('feedback set is empty')
    terms = list(dict.fromkeys(question.tokens))
    if len(terms) == 1:
        return {terms[0]: 1.0}
    n = len(terms)
    doc_sets = [set(q.tokens) for q in feedback]
    freq = Counter()
    for q in feedback:
        freq.update(q.tokens)
    assoc = np.ones((n, n))
    np.fill_diagonal(assoc, 0.0)
    for s in doc_sets:
        present = [i for i, t in enumerate(terms) if t in s]
        for i in present:
            for j in present:
                if i != j:
                    assoc[i, j] += 1.0
    prior = np.array([freq[t] + 1.0 for t in terms])
    a = centrality_fixed_point(assoc, prior, spec.damping, spec.iters)
    return dict(zip(terms, a.tolist()))


def _argmax_first(terms, values):
    best = 0
    for i in range(1, len(terms)):
        if values[i] > values[best]:
            best = i
    return terms[best]


def central_words(question, corpus, spec=CentralitySpec(), scoring=ScoringParams(),
                  scorer='kl', translation=None):
    """
    Central word set of ``question``: argmax of the raw centrality and argmax
    of centrality times didf, evidence drawn from the top ``feedback_depth``
    questions of the base scorer.  Ties go to the earlier token.
    """
    terms = list(dict.fromkeys(question.tokens))
    if len(terms) == 1:
        t = terms[0]
        d = didf(t, corpus.stats, spec.c_idf)
        return CentralWordSet(t, t, (t,), ((t, 1.0, d, d),))
    feedback = prf_feedback(question, corpus, scoring=scoring, scorer=scorer,
                            translation=translation, depth=spec.feedback_depth)
    a = term_centrality(question, feedback, spec)
    d = {t: didf(t, corpus.stats, spec.c_idf) for t in terms}
    i = {t: a[t] * d[t] for t in terms}
    pre = _argmax_first(terms, [a[t] for t in terms])
    post = _argmax_first(terms, [i[t] for t in terms])
    chosen = (pre,) if pre == post else (pre, post)
    rows = tuple((t, a[t], d[t], i[t]) for t in terms)
    return CentralWordSet(pre, post, chosen, rows)
