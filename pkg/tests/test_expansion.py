import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqarank import (
    ConfigError,
    Corpus,
    EmbeddingTable,
    ExpansionParams,
    expand_almasri,
    expand_elmo,
    expand_elmo_prf,
    expand_kuzi,
    expand_prf,
    make_question,
    mle_lm,
    smm_feedback_lm,
)
from cqarank.embeddings import ContextualStore, build_pseudo_store
from cqarank.expansion import centroid_distribution, elmo_feedback_set, fit_smm, prf_feedback

import oracles


def test_almasri_single_neighbour():
    t = EmbeddingTable.from_dict({'a': [1.0, 0.0], 'b': [0.8, 0.6]})
    eq = expand_almasri(make_question('q', 'a'), t, ExpansionParams(k_words=1, alpha_al=0.4))
    assert eq.details['per_base_counts'] == {'a': {'b': 1.0}}
    assert eq.lm.probs == {'a': 0.5, 'b': 0.5}
    assert dict((t, o) for t, _, o in eq.table()) == {'a': 'base', 'b': 'word-expansion'}


def test_almasri_full_exclusion_is_mle():
    t = EmbeddingTable.from_dict({'a': [1.0, 0.0], 'b': [0.8, 0.6], 'c': [0, 1]})
    q = make_question('q', 'a b a')
    assert expand_almasri(q, t, exclude={'a', 'b'}).lm == mle_lm(q)


def test_almasri_per_base_conservation():
    rng = np.random.default_rng(1)
    t = EmbeddingTable.from_dict({w: rng.standard_normal(5) + [3, 0, 0, 0, 0] for w in 'abcdefg'})
    eq = expand_almasri(make_question('q', 'a a b'), t, ExpansionParams(k_words=2))
    per = eq.details['per_base_counts']
    assert math.fsum(per['a'].values()) == 2.0
    assert math.fsum(per['b'].values()) == 1.0
    assert all(len(v) == 2 for v in per.values())


def test_almasri_alpha_cancels():
    t = EmbeddingTable.from_dict({'a': [1.0, 0.1], 'b': [0.8, 0.6], 'c': [0.5, 0.5]})
    q = make_question('q', 'a')
    lo = expand_almasri(q, t, ExpansionParams(alpha_al=0.2)).lm
    hi = expand_almasri(q, t, ExpansionParams(alpha_al=0.4)).lm
    for term in lo:
        assert lo[term] == pytest.approx(hi[term], rel=1e-12)


def test_almasri_missing_vector_flagged():
    t = EmbeddingTable.from_dict({'a': [1.0, 0.0], 'b': [0.8, 0.6]})
    eq = expand_almasri(make_question('q', 'a zz'), t, ExpansionParams(k_words=1))
    assert eq.flags == ('no-embedding:zz',)


def test_kuzi_lambda_one_is_mle():
    t = EmbeddingTable.from_dict({'a': [1, 0], 'b': [0, 1]})
    q = make_question('q', 'a b b')
    eq = expand_kuzi(q, t, {'a', 'b'}, ExpansionParams(lambda_kuzi=1.0))
    assert eq.lm == mle_lm(q)


def test_kuzi_centroid_softmax():
    t = EmbeddingTable.from_dict({'a': [1.0, 0.0], 'b': [1.0, 0.0], 'c': [0.0, 1.0]})
    dist = centroid_distribution(t['a'], t, {'b', 'c'}, 2)
    assert dist['b'] == pytest.approx(math.e / (math.e + 1))
    assert dist['c'] == pytest.approx(1 / (math.e + 1))
    assert dist['b'] == pytest.approx(0.7311, abs=1e-4)


def test_kuzi_zero_centroid_flagged():
    t = EmbeddingTable.from_dict({'a': [1.0, 0.0], 'b': [0.0, 0.0]})
    q = make_question('q', 'a b')
    eq = expand_kuzi(q, t, {'a', 'b'}, exclude={'a'})
    assert eq.lm == mle_lm(q) and eq.flags == ('zero-centroid',)


def test_smm_background_off_gives_mle():
    lm, _ = fit_smm({'a': 3, 'b': 1}, {'a': 0.9, 'b': 0.1}, 1e-9, 50)
    assert lm['a'] == pytest.approx(0.75, abs=1e-6)


def test_smm_matches_grid_search():
    counts, pc = {'a': 8, 'b': 2}, {'a': 0.5, 'b': 0.5}
    lm, _ = fit_smm(counts, pc, 0.5, 50)
    best = oracles.smm_grid_argmax(counts, pc, 0.5)
    assert lm['a'] == pytest.approx(best['a'], abs=1e-4)
    # an interior optimum as well
    counts, pc = {'a': 5, 'b': 3}, {'a': 0.7, 'b': 0.3}
    lm, _ = fit_smm(counts, pc, 0.3, 400)
    best = oracles.smm_grid_argmax(counts, pc, 0.3)
    assert 0 < best['a'] < 1
    assert lm['a'] == pytest.approx(best['a'], abs=1e-4)


@given(st.dictionaries(st.sampled_from('abcdefgh'), st.integers(1, 20), min_size=1),
       st.floats(0.05, 0.95), st.integers(0, 10 ** 6))
def test_smm_loglik_non_decreasing(counts, lam, seed):
    rng = np.random.default_rng(seed)
    bg = rng.random(len(counts)) + 0.01
    pc = dict(zip(sorted(counts), bg / bg.sum()))
    _, ll = fit_smm(counts, pc, lam, 30)
    assert np.all(np.diff(ll) >= -1e-12 * np.abs(ll[1:]))


def _prf_corpus():
    return Corpus([make_question(f'd{i}', t) for i, t in enumerate([
        'cheap flights to rome', 'rome hotel cheap', 'flights delayed again', 'pasta recipe easy',
        'rome travel tips', 'learn python fast'])])


def test_prf_weight_zero_is_mle():
    q = make_question('q', 'cheap rome')
    assert expand_prf(q, _prf_corpus(), ExpansionParams(prf_weight=0.0)).lm == mle_lm(q)


def test_prf_uses_top_depth():
    c = _prf_corpus()
    q = make_question('q', 'cheap rome')
    fb = prf_feedback(q, c, ExpansionParams(prf_depth=2))
    assert len(fb) == 2
    eq = expand_prf(q, c, ExpansionParams(prf_depth=2))
    assert eq.details['feedback'] == [x.id for x in fb]


def test_prf_identical_feedback_preserves_mle():
    c = Corpus([make_question('d0', 'a b'), make_question('d1', 'a b'), make_question('d2', 'c c d d')])
    q = make_question('q', 'a b')
    # p(a|C) = p(b|C): the uniform background over query terms keeps the MLE fixed
    eq = expand_prf(q, c, ExpansionParams(prf_weight=0.7))
    for t in ('a', 'b'):
        assert eq.lm[t] == pytest.approx(mle_lm(q)[t], abs=1e-12)


def test_smm_feedback_lm_normalised():
    c = _prf_corpus()
    lm = smm_feedback_lm(list(c)[:3], c.stats)
    assert lm.total() == pytest.approx(1.0, abs=1e-12)


def _ctx_setup():
    c = Corpus([make_question(f'd{i}', t) for i, t in enumerate([
        'play guitar songs', 'play football match', 'guitar chords easy', 'football boots cheap',
        'play piano songs', 'music theory basics', 'match tickets price'])])
    q = make_question('q', 'play guitar songs')
    store = build_pseudo_store(list(c) + [q], 32)
    return c, q, store


def test_elmo_alpha_zero_is_mle():
    c, q, store = _ctx_setup()
    assert expand_elmo(q, c, store, ExpansionParams(alpha_elmo=0.0)).lm == mle_lm(q)


def test_elmo_duplicate_ranked_first():
    c, q, store = _ctx_setup()
    ids, _ = elmo_feedback_set(q, c, store, 5)
    assert ids[0] == 'd0'


def test_elmo_two_central_words_intersection():
    def token(sim, axis, other):
        v = np.zeros(6)
        v[axis], v[other] = sim, math.sqrt(1 - sim * sim)
        return v
    # similarity of each candidate's first / second token to the input's
    sim0 = [.99, .98, .97, .96, .95, .5, .4, .3, .2, .1]
    sim1 = [.99, .98, .5, .4, .3, .97, .96, .95, .2, .1]
    vecs = {f'd{i}': np.array([token(a, 2, 4), token(b, 3, 5)]) for i, (a, b) in enumerate(zip(sim0, sim1))}
    vecs['q'] = np.array([token(1.0, 2, 4), token(1.0, 3, 5)])
    c = Corpus([make_question(f'd{i}', 'x y') for i in range(10)])
    q = make_question('q', 'x y')
    k = 5
    ids, flags = elmo_feedback_set(q, c, ContextualStore(vecs, 6), k, {'x', 'y'})
    # brute force: excluding x leaves the second token, excluding y the first
    cands = {d: v for d, v in vecs.items() if d != 'q'}
    by_x = oracles.cosine_topk(vecs['q'][1], {d: v[1] for d, v in cands.items()}, k)
    by_y = oracles.cosine_topk(vecs['q'][0], {d: v[0] for d, v in cands.items()}, k)
    assert set(ids) == set(by_x) & set(by_y)
    assert len(ids) == 2 and not flags


def test_elmo_empty_intersection_falls_back():
    def onehot(i):
        v = np.zeros(4)
        v[i] = 1.0
        return v
    c = Corpus([make_question('d0', 'x y'), make_question('d1', 'x y')])
    vecs = {'d0': np.array([onehot(0), onehot(2)]), 'd1': np.array([onehot(2), onehot(1)]),
            'q': np.array([onehot(0), onehot(1)])}
    ids, flags = elmo_feedback_set(make_question('q', 'x y'), c, ContextualStore(vecs, 4), 1, {'x', 'y'})
    assert flags == ['empty-central-intersection'] and len(ids) == 1


def test_elmo_prf_reductions():
    c, q, store = _ctx_setup()
    base = ExpansionParams(alpha_prf=0.3, beta_prf=0.0, alpha_elmo=0.3)
    assert expand_elmo_prf(q, c, store, base).lm == expand_elmo(q, c, store, base).lm
    p = ExpansionParams(alpha_prf=0.0, beta_prf=0.4, prf_weight=0.4)
    assert expand_elmo_prf(q, c, store, p).lm == expand_prf(q, c, p).lm
    p0 = ExpansionParams(alpha_prf=0.0, beta_prf=0.0)
    assert expand_elmo_prf(q, c, store, p0).lm == mle_lm(q)


def test_elmo_prf_original_term_floor():
    c, q, store = _ctx_setup()
    eq = expand_elmo_prf(q, c, store, ExpansionParams(alpha_prf=0.3, beta_prf=0.2))
    mle = mle_lm(q)
    for t in mle:
        assert eq.contributions[t]['base'] >= 0.5 * mle[t] - 1e-15
    assert eq.lm[max(mle, key=mle.__getitem__)] >= 0.5 * max(mle.probs.values())


def test_params_validation():
    with pytest.raises(ConfigError):
        ExpansionParams(alpha_prf=0.6, beta_prf=0.5)
    with pytest.raises(ConfigError):
        ExpansionParams(k_words=0)


def test_empty_exclude_is_bit_identical():
    c, q, store = _ctx_setup()
    rng = np.random.default_rng(0)
    t = EmbeddingTable.from_dict({w: rng.standard_normal(6) for w in c.vocab})
    assert expand_almasri(q, t, exclude=set()) == expand_almasri(q, t)
    assert expand_almasri(q, t, exclude={'absent'}) == expand_almasri(q, t)
    assert expand_kuzi(q, t, c.vocab, exclude={'absent'}) == expand_kuzi(q, t, c.vocab)
    assert expand_elmo(q, c, store, exclude_central=()) == expand_elmo(q, c, store)


@given(st.integers(0, 10 ** 6))
@settings(max_examples=40, deadline=None)
def test_expansions_are_distributions(seed):
    rng = oracles.seeded(seed)
    corpus, words = oracles.random_corpus(rng, n_docs=rng.randint(3, 25), vocab=rng.randint(3, 15))
    q = oracles.random_question(rng, words, 'q')
    nrng = np.random.default_rng(seed)
    t = EmbeddingTable.from_dict({w: nrng.standard_normal(4) for w in words})
    store = build_pseudo_store(list(corpus) + [q], 8)
    for eq in (expand_almasri(q, t, vocab=corpus.vocab), expand_kuzi(q, t, corpus.vocab),
               expand_prf(q, corpus), expand_elmo(q, corpus, store), expand_elmo_prf(q, corpus, store)):
        assert eq.lm.total() == pytest.approx(1.0, abs=1e-9)
        assert all(p > 0 for p in eq.lm.probs.values())
