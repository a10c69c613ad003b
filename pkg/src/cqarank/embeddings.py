"""
Static word vectors, precomputed contextual token vectors and the similarity
searches built on them.

Cosine similarities are computed on demand from a row-normalised copy of the
vector matrix; no term-by-term similarity matrix is ever materialised.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)


def cosine(u, v):
    """Cosine similarity; 0 when either vector is all zeros."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f'dimension mismatch: {u.shape} vs {v.shape}')
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    c = float(np.dot(u, v) / (nu * nv))
    return min(1.0, max(-1.0, c))


def _normalize_rows(m):
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    out = np.zeros_like(m)
    np.divide(m, norms, out=out, where=norms > 0)
    return out


class EmbeddingTable:
    """Term -> dense vector map with a unit-norm view for cosine searches."""

    def __init__(self, terms, matrix, warnings=0):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(terms):
            raise ValueError('matrix must have one row per term')
        self.terms = list(terms)
        self.index = {t: i for i, t in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise ValueError('duplicate terms')
        self.matrix = matrix
        self.unit = _normalize_rows(matrix)
        self.dim = matrix.shape[1]
        self.duplicate_warnings = warnings
        # position of each term in lexicographic order, for similarity tie-breaks
        self.name_rank = np.empty(len(self.terms), dtype=np.int64)
        self.name_rank[sorted(range(len(self.terms)), key=self.terms.__getitem__)] = np.arange(len(self.terms))

    @classmethod
    def from_dict(cls, vectors):
        terms = list(vectors)
        if not terms:
            raise ValueError('empty embedding table')
        return cls(terms, np.array([vectors[t] for t in terms], dtype=np.float64))

    def __contains__(self, term):
        return term in self.index

    def __len__(self):
        return len(self.terms)

    def __getitem__(self, term):
        return self.matrix[self.index[term]]

    def get(self, term):
        i = self.index.get(term)
        return None if i is None else self.matrix[i]

    def vocab_mask(self, vocab):
        """Boolean mask over table rows for terms in ``vocab``."""
        mask = np.zeros(len(self.terms), dtype=bool)
        for t in vocab:
            i = self.index.get(t)
            if i is not None:
                mask[i] = True
        return mask

    def write(self, path):
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(f'{len(self.terms)} {self.dim}\n')
            for t, row in zip(self.terms, self.matrix):
                f.write(t + ' ' + ' '.join(repr(float(x)) for x in row) + '\n')


def load_static_embeddings(path):
    """
    Read a word2vec text-format file (``"<n> <dim>"`` header, then
    ``"<term> <c1> ... <c_dim>"`` rows).  Duplicate terms keep the last row and
    are counted in ``duplicate_warnings``.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f'embedding file not found: {path}')
    vectors = {}
    dups = 0
    with open(path, encoding='utf-8') as f:
        header = f.readline().split()
        if len(header) != 2:
            raise DataError(f'{path}:1: header must be "<vocab_size> <dim>"')
        try:
            _, dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError(f'{path}:1: header must be "<vocab_size> <dim>"') from None
        for lineno, line in enumerate(f, 2):
            parts = line.rstrip('\n').split(' ')
            parts = [p for p in parts if p]
            if not parts:
                continue
            term, comps = parts[0], parts[1:]
            if len(comps) != dim:
                raise DataError(f'{path}:{lineno}: row for {term!r} has {len(comps)} '
                                f'components, header says {dim}')
            try:
                vec = [float(x) for x in comps]
            except ValueError:
                raise DataError(f'{path}:{lineno}: non-numeric component in row for {term!r}') from None
            if term in vectors:
                dups += 1
                log.warning('%s:%d: duplicate term %r, keeping last occurrence', path, lineno, term)
            vectors[term] = vec
    if not vectors:
        raise DataError(f'{path}: no vectors')
    terms = list(vectors)
    return EmbeddingTable(terms, np.array([vectors[t] for t in terms], dtype=np.float64).reshape(len(terms), dim), dups)


def top_k_similar_words(base, k, table, vocab_filter=None):
    """
    The ``k`` terms of ``vocab_filter`` (all table terms if None) most
    cosine-similar to ``base``, excluding ``base`` itself.  Ties go to the
    lexicographically smaller term.  Returns ``[]`` when ``base`` has no vector.
    """
    if k < 1:
        raise ValueError('k must be >= 1')
    i = table.index.get(base)
    if i is None:
        return []
    sims = table.unit @ table.unit[i]
    if vocab_filter is None:
        mask = np.ones(len(table.terms), dtype=bool)
    else:
        mask = table.vocab_mask(vocab_filter)
    mask[i] = False
    cand = np.flatnonzero(mask)
    if cand.size == 0:
        return []
    # lexsort: last key is primary
    order = cand[np.lexsort((table.name_rank[cand], -sims[cand]))][:k]
    return [(table.terms[j], float(sims[j])) for j in order]


@dataclass(frozen=True)
class QuestionVector:
    values: np.ndarray
    source: str
    excluded_terms: frozenset = field(default_factory=frozenset)

    @property
    def is_zero(self):
        return not np.any(self.values)


def question_centroid(question, table, exclude=frozenset()):
    """
    Sum (not mean) of the static vectors of the question's tokens, skipping
    tokens in ``exclude`` and tokens without a vector.  Repeated tokens count
    once per occurrence.
    """
    exclude = frozenset(exclude)
    rows = [table.index[t] for t in question.tokens if t not in exclude and t in table.index]
    if rows:
        values = table.matrix[rows].sum(axis=0)
    else:
        values = np.zeros(table.dim)
    return QuestionVector(values, 'static-centroid', exclude)


class ContextualStore:
    """Per-question token vectors, aligned one-to-one with ``Question.tokens``."""

    def __init__(self, per_question, dim):
        self.per_question = per_question
        self.dim = dim
        self._sum_cache = {}

    def __contains__(self, qid):
        return qid in self.per_question

    def __getitem__(self, qid):
        return self.per_question[qid]

    def __len__(self):
        return len(self.per_question)

    def validate(self, questions):
        """Check alignment against a ``{id: Question}`` mapping."""
        for qid, vecs in self.per_question.items():
            q = questions.get(qid)
            if q is None:
                raise DataError(f'contextual store has vectors for unknown question id {qid!r}')
            if vecs.shape[0] != len(q.tokens):
                raise DataError(f'contextual vectors for question {qid!r}: {vecs.shape[0]} vectors '
                                f'but {len(q.tokens)} tokens')

    def question_sums(self, corpus):
        """Row ``d`` = sum of token vectors of ``corpus.ids[d]`` (cached per corpus)."""
        key = id(corpus)
        hit = self._sum_cache.get(key)
        if hit is not None and hit[0] is corpus:
            return hit[1]
        missing = [qid for qid in corpus.ids if qid not in self.per_question]
        if missing:
            raise DataError(f'contextual store lacks {len(missing)} corpus question(s), '
                            f'e.g. {missing[0]!r}')
        sums = np.array([self.per_question[qid].sum(axis=0) for qid in corpus.ids]).reshape(len(corpus), self.dim)
        self._sum_cache[key] = (corpus, sums)
        return sums

    def write(self, path, ids=None):
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            for qid in (ids if ids is not None else sorted(self.per_question)):
                vecs = [[float(f'{x:.7g}') for x in row] for row in self.per_question[qid]]
                f.write(json.dumps({'id': qid, 'vectors': vecs}) + '\n')


def load_contextual_store(path, questions=None):
    """
    Read a contextual-vector file: one ``{"id", "vectors"}`` record per line.

    If ``questions`` (a mapping ``id -> Question``) is given, every record must
    name a known question and carry exactly one vector per token.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f'contextual store not found: {path}')
    per_question = {}
    dim = None
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                qid = rec['id']
                vecs = np.asarray(rec['vectors'], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f'{path}:{lineno}: malformed contextual record ({exc})') from None
            if vecs.ndim != 2:
                raise DataError(f'{path}:{lineno}: vectors for {qid!r} must be a non-ragged list of lists')
            if dim is None:
                dim = vecs.shape[1]
            elif vecs.shape[1] != dim:
                raise DataError(f'{path}:{lineno}: vectors for {qid!r} have dim {vecs.shape[1]}, expected {dim}')
            per_question[qid] = vecs
    store = ContextualStore(per_question, dim or 0)
    if questions is not None:
        store.validate(questions)
    return store


def contextual_question_vector(question, store, exclude_term=None):
    """Sum of the question's contextual token vectors, minus positions equal to ``exclude_term``."""
    vecs = store.per_question.get(question.id)
    if vecs is None:
        raise DataError(f'question {question.id!r} is not in the contextual store')
    if exclude_term is not None and exclude_term in question.tokens:
        keep = np.array([t != exclude_term for t in question.tokens])
        values = vecs[keep].sum(axis=0) if keep.any() else np.zeros(store.dim)
        excluded = frozenset([exclude_term])
    else:
        values = vecs.sum(axis=0)
        excluded = frozenset() if exclude_term is None else frozenset([exclude_term])
    return QuestionVector(values, 'contextual', excluded)


def candidate_matrix(corpus, store, exclude_term=None):
    """Contextual vectors for every corpus question, with ``exclude_term`` positions removed."""
    sums = store.question_sums(corpus)
    if exclude_term is None:
        return sums
    docs = corpus.docs_with(exclude_term)
    if docs.size == 0:
        return sums
    out = sums.copy()
    for d in docs:
        q = corpus.questions[corpus.ids[d]]
        out[d] = contextual_question_vector(q, store, exclude_term).values
    return out


def top_k_similar_questions(input_vector, corpus, store, k, exclude_term=None):
    """
    Ids of the ``k`` corpus questions whose contextual vectors are most
    cosine-similar to ``input_vector``.  Candidate vectors drop the same
    ``exclude_term``; zero-vector candidates are never returned; ties go to the
    smaller id.
    """
    if k < 1:
        raise ValueError('k must be >= 1')
    mat = candidate_matrix(corpus, store, exclude_term)
    q = np.asarray(input_vector.values if isinstance(input_vector, QuestionVector) else input_vector,
                   dtype=np.float64)
    qn = np.linalg.norm(q)
    if qn == 0.0:
        return []
    norms = np.linalg.norm(mat, axis=1)
    valid = norms > 0
    sims = np.zeros(len(corpus))
    sims[valid] = (mat[valid] @ q) / (norms[valid] * qn)
    cand = np.flatnonzero(valid)
    # doc indices follow sorted id order, so the index itself is the id tie-break
    order = cand[np.lexsort((cand, -sims[cand]))][:k]
    return [corpus.ids[d] for d in order]


# ---------------------------------------------------------------------------
# deterministic pseudo-contextual stub
# ---------------------------------------------------------------------------

def hashed_unit_vector(term, dim, salt=''):
    """Unit vector seeded by a stable hash of ``term`` (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b((salt + '\x00' + term).encode('utf-8'), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, 'little'))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def pseudo_contextual_vectors(tokens, dim, base=None, neighbor_weight=0.25):
    """
    Stand-in for a contextual encoder.

    Token ``i`` gets ``base(tokens[i])`` plus ``neighbor_weight`` times a hashed
    vector of each existing neighbour, so the same word in different contexts
    gets different vectors.  ``base`` defaults to :func:`hashed_unit_vector`.
    """
    if base is None:
        def base(t):
            return hashed_unit_vector(t, dim)
    out = np.empty((len(tokens), dim))
    for i, t in enumerate(tokens):
        v = np.array(base(t), dtype=np.float64)
        if i > 0:
            v = v + neighbor_weight * hashed_unit_vector(tokens[i - 1], dim, 'ctx')
        if i + 1 < len(tokens):
            v = v + neighbor_weight * hashed_unit_vector(tokens[i + 1], dim, 'ctx')
        out[i] = v
    return out


def build_pseudo_store(questions, dim, base=None, neighbor_weight=0.25):
    """Contextual store for ``questions`` produced by :func:`pseudo_contextual_vectors`."""
    per_q = {q.id: pseudo_contextual_vectors(q.tokens, dim, base, neighbor_weight) for q in questions}
    return ContextualStore(per_q, dim)
