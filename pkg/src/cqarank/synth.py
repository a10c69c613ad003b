"""
Synthetic lexical-gap collections with known ground truth.

The content vocabulary is partitioned into synonym pairs.  Every input
question draws ``question_length`` distinct synonym classes; its relevant
questions paraphrase it by swapping each term for its synonym with
probability ``synonym_rate``; its distractors keep the same shape but draw
only from classes the input question does not use.  Word vectors are
constructed, not trained: each class gets an orthonormal direction, and the
second member of a pair is a small rotation of the first.
"""

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Question, make_question
from .embeddings import EmbeddingTable, build_pseudo_store, cosine
from .errors import ConfigError
from .evaluation import Judgments

SYNONYM_MIN_COS = 0.95
NON_SYNONYM_MAX_COS = 0.3


@dataclass(frozen=True)
class SynthSpec:
    n_queries: int = 50
    n_relevant_per_query: int = 3
    n_distractors: int = 20
    synonym_rate: float = 0.6
    vocab_size: int = 200
    question_length: int = 6
    seed: int = 0
    synonym_cos: float = 0.97
    ctx_dim: int = 64

    def __post_init__(self):
        for name in ('n_queries', 'n_relevant_per_query', 'n_distractors', 'vocab_size', 'question_length',
                     'ctx_dim'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be >= 1')
        if not 0.0 <= self.synonym_rate <= 1.0:
            raise ConfigError(f'synonym_rate must be in [0, 1], got {self.synonym_rate}')
        if not SYNONYM_MIN_COS <= self.synonym_cos < 1.0:
            raise ConfigError(f'synonym_cos must be in [{SYNONYM_MIN_COS}, 1)')

    @property
    def min_vocab_size(self):
        # input classes plus as many disjoint classes for distractors, two words each
        return 4 * self.question_length


@dataclass
class SynthData:
    corpus: Corpus
    queries: list
    judgments: Judgments
    table: EmbeddingTable
    store: object
    synonyms: dict


def _word(cls, form):
    return f'w{cls:03d}{"ab"[form]}'


def synonym_embeddings(n_classes, rng, synonym_cos=0.97, dim=None):
    """
    Vectors for ``2 * n_classes`` words: ``a`` members are orthonormal class
    directions, each ``b`` member is ``cos * a + sin * r`` with ``r`` a random
    unit vector orthogonal to its ``a``.
    """
    dim = dim or n_classes
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    u = basis[:, :n_classes].T
    sin = np.sqrt(1.0 - synonym_cos ** 2)
    vecs = {}
    for c in range(n_classes):
        r = rng.standard_normal(dim)
        r -= (r @ u[c]) * u[c]
        r /= np.linalg.norm(r)
        vecs[_word(c, 0)] = u[c]
        vecs[_word(c, 1)] = synonym_cos * u[c] + sin * r
    return vecs


def check_geometry(table, synonyms):
    """Assert synonym pairs are close and every other pair is far, exhaustively."""
    unit = table.unit
    sims = unit @ unit.T
    idx = table.index
    syn_mask = np.eye(len(table), dtype=bool)
    for a, b in synonyms.items():
        syn_mask[idx[a], idx[b]] = True
    if sims[syn_mask & ~np.eye(len(table), dtype=bool)].min(initial=1.0) < SYNONYM_MIN_COS:
        raise AssertionError('synonym pair below the minimum cosine')
    if sims[~syn_mask].max(initial=-1.0) > NON_SYNONYM_MAX_COS:
        raise AssertionError('non-synonym pair above the maximum cosine')


def generate(spec=SynthSpec()):
    """Build corpus, input questions, qrels, word vectors and contextual vectors."""
    if spec.vocab_size < spec.min_vocab_size:
        raise ConfigError(f'vocab_size={spec.vocab_size} is too small for question_length='
                          f'{spec.question_length}: need at least {spec.min_vocab_size}')
    rng = np.random.default_rng(spec.seed)
    n_classes = spec.vocab_size // 2
    L = spec.question_length

    queries, candidates, rels = [], [], {}
    for i in range(spec.n_queries):
        qid = f'q{i:04d}'
        classes = rng.choice(n_classes, L, replace=False)
        forms = rng.integers(0, 2, L)
        queries.append([qid, [_word(c, f) for c, f in zip(classes, forms)]])
        for _ in range(spec.n_relevant_per_query):
            swap = rng.random(L) < spec.synonym_rate
            toks = [_word(c, 1 - f if s else f) for c, f, s in zip(classes, forms, swap)]
            candidates.append((qid, 1, toks))
        others = np.setdiff1d(np.arange(n_classes), classes)
        for _ in range(spec.n_distractors):
            dc = rng.choice(others, L, replace=False)
            toks = [_word(c, f) for c, f in zip(dc, rng.integers(0, 2, L))]
            candidates.append((qid, 0, toks))

    # opaque candidate ids so the id tie-break carries no relevance signal
    perm = rng.permutation(len(candidates))
    questions = []
    for new, old in enumerate(perm):
        qid, label, toks = candidates[old]
        cid = f'c{new:05d}'
        rels[qid, cid] = label
        # the answer restates the question with every term's synonym
        answer = ' '.join(_partner(t) for t in toks)
        questions.append(make_question(cid, ' '.join(toks), answers=(answer,)))
    questions.sort(key=lambda q: q.id)
    corpus = Corpus(questions)
    inputs = [make_question(qid, ' '.join(toks)) for qid, toks in queries]

    vecs = synonym_embeddings(n_classes, rng, spec.synonym_cos)
    terms = sorted(vecs)
    table = EmbeddingTable(terms, np.array([vecs[t] for t in terms]))
    synonyms = {t: _partner(t) for t in terms}
    check_geometry(table, synonyms)

    store = build_pseudo_store(list(corpus) + inputs, spec.ctx_dim)
    return SynthData(corpus, inputs, Judgments(rels), table, store, synonyms)


def _partner(term):
    return term[:-1] + ('b' if term[-1] == 'a' else 'a')


# ---------------------------------------------------------------------------
# a city-swap scenario for the selective-expansion check
# ---------------------------------------------------------------------------

_CITY_QUERY = 'any quiet restaurant in manchester'
_CITY_DISTRACTOR = 'nice coffee place in munich'
_CITY_CORPUS = [
    'manchester restaurant open late',
    'best curry restaurant manchester',
    'quiet pub near manchester piccadilly',
    'manchester airport parking prices',
    'manchester derby tickets',
    'weather in manchester during april',
    'cheap hotel manchester centre',
    'manchester museum opening hours',
    _CITY_DISTRACTOR,
    'munich beer festival dates',
    'munich airport train connections',
    'london restaurant with river view',
    'learn guitar in one month',
    'best laptop in this price range',
    'fixing a broken camera lens',
    'console will not charge anymore',
    'music keyboard for beginners',
    'connect laptop to tv screen',
    'running shoes for flat feet',
    'why do cats purr',
    'good name for a puppy',
    'tips for a job interview in sales',
    'rain in the forecast for weekend',
    'mortgage rates in spring',
]
_CITY_CLUSTERS = [
    (['manchester', 'munich', 'london', 'paris'], 0.9),
    (['restaurant', 'cafe', 'coffee', 'pub', 'curry'], 0.75),
    (['quiet', 'calm', 'peaceful'], 0.85),
]


@dataclass
class CityScenario:
    corpus: Corpus
    query: Question
    table: EmbeddingTable
    distractor_id: str
    location_term: str


def _clustered_vectors(clusters, singletons, rng, dim=64):
    """Unit vectors where words of one cluster share a direction at the given cosine."""
    vecs = {}
    for words, cos in clusters:
        centre = rng.standard_normal(dim)
        centre /= np.linalg.norm(centre)
        for w in words:
            r = rng.standard_normal(dim)
            r -= (r @ centre) * centre
            r /= np.linalg.norm(r)
            # pairwise cosine between two members is ~cos
            vecs[w] = np.sqrt(cos) * centre + np.sqrt(1.0 - cos) * r
    for w in singletons:
        if w not in vecs:
            v = rng.standard_normal(dim)
            vecs[w] = v / np.linalg.norm(v)
    return vecs


def city_scenario(seed=7):
    """
    A quiet-restaurant-in-Manchester question against a collection holding a
    coffee-place-in-Munich distractor.  Expanding the city name pulls the
    distractor up; the city is the word selective expansion should protect.
    """
    rng = np.random.default_rng(seed)
    questions = [make_question(f's{i:02d}', text) for i, text in enumerate(_CITY_CORPUS)]
    distractor_id = questions[_CITY_CORPUS.index(_CITY_DISTRACTOR)].id
    corpus = Corpus(questions)
    query = make_question('city-q', _CITY_QUERY)
    vocab = sorted(set(corpus.vocab) | set(query.tokens))
    vecs = _clustered_vectors(_CITY_CLUSTERS, vocab, rng)
    table = EmbeddingTable(vocab, np.array([vecs[t] for t in vocab]))
    assert cosine(vecs['manchester'], vecs['munich']) > 0.8
    return CityScenario(corpus, query, table, distractor_id, 'manchester')
