"""
Reference implementations written independently of the package, used as
oracles.  Plain Python loops, no shared helpers with ``cqarank``.
"""

import math
import random
from collections import Counter

from cqarank import Corpus, make_question


def dirichlet_ql(query_tokens, doc_tokens, all_docs, mu):
    """Log query likelihood under Dirichlet smoothing; unseen query terms skipped."""
    coll = Counter()
    for d in all_docs:
        coll.update(d)
    total = sum(coll.values())
    tf = Counter(doc_tokens)
    s = 0.0
    for w in query_tokens:
        if coll[w] == 0:
            continue
        pc = coll[w] / total
        s += math.log((tf[w] + mu * pc) / (len(doc_tokens) + mu))
    return s


def ql_ranking(query_tokens, docs, mu):
    """``docs``: ``{id: tokens}``; best first, ties by id."""
    all_docs = list(docs.values())
    scored = [(-dirichlet_ql(query_tokens, toks, all_docs, mu), qid) for qid, toks in docs.items()]
    return [qid for _, qid in sorted(scored)]


def ql_scores(query_tokens, docs, mu):
    all_docs = list(docs.values())
    return {qid: dirichlet_ql(query_tokens, toks, all_docs, mu) for qid, toks in docs.items()}


def average_precision(ranked_ids, relevant):
    """Textbook AP: mean of precision@k over the ranks of relevant items."""
    if not relevant:
        return None
    hits = 0
    precisions = []
    for k, qid in enumerate(ranked_ids, start=1):
        if qid in relevant:
            hits += 1
            precisions.append(hits / k)
    return sum(precisions) / len(relevant)


def cosine_topk(query, vectors, k):
    """``vectors``: ``{id: list}``; full sort by (-cos, id)."""
    def cos(u, v):
        nu = math.sqrt(sum(x * x for x in u))
        nv = math.sqrt(sum(x * x for x in v))
        if nu == 0 or nv == 0:
            return 0.0
        return sum(a * b for a, b in zip(u, v)) / (nu * nv)
    scored = sorted((-cos(query, v), qid) for qid, v in vectors.items())
    return [qid for _, qid in scored[:k]]


def smm_grid_argmax(counts, collprob, lam, steps=200001):
    """Maximise the two-term mixture log-likelihood over p(a) on a grid."""
    (ta, ca), (tb, cb) = sorted(counts.items())
    best, best_p = -math.inf, None
    for i in range(steps):
        p = i / (steps - 1)
        fa = (1 - lam) * p + lam * collprob[ta]
        fb = (1 - lam) * (1 - p) + lam * collprob[tb]
        if fa <= 0 or fb <= 0:
            continue
        ll = ca * math.log(fa) + cb * math.log(fb)
        if ll > best:
            best, best_p = ll, p
    return {ta: best_p, tb: 1 - best_p}


def random_corpus(rng, n_docs=None, vocab=None, max_len=8):
    """A random corpus plus the word list it was drawn from."""
    n_docs = n_docs or rng.randint(1, 50)
    vocab_size = vocab or rng.randint(2, 30)
    words = [f't{i:02d}' for i in range(vocab_size)]
    questions = []
    for i in range(n_docs):
        toks = [rng.choice(words) for _ in range(rng.randint(1, max_len))]
        questions.append(make_question(f'd{i:03d}', ' '.join(toks)))
    return Corpus(questions), words


def random_question(rng, words, qid='q', max_len=6):
    return make_question(qid, ' '.join(rng.choice(words) for _ in range(rng.randint(1, max_len))))


def seeded(seed):
    return random.Random(seed)
