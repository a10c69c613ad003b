import json
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cqarank import (
    Corpus,
    DataError,
    EmbeddingTable,
    contextual_question_vector,
    cosine,
    load_contextual_store,
    load_static_embeddings,
    make_question,
    question_centroid,
    top_k_similar_questions,
    top_k_similar_words,
)
from cqarank.embeddings import ContextualStore, build_pseudo_store, pseudo_contextual_vectors

from oracles import cosine_topk


def test_load_word2vec_text(tmp_path):
    f = tmp_path / 'e.txt'
    f.write_text('2 2\na 1 0\nb 0 1\n')
    t = load_static_embeddings(f)
    assert t.dim == 2 and t.terms == ['a', 'b']
    np.testing.assert_array_equal(t['b'], [0.0, 1.0])


def test_load_rejects_bad_row(tmp_path):
    f = tmp_path / 'e.txt'
    f.write_text('2 2\na 1 0\nb 0 1 5\n')
    with pytest.raises(DataError, match=':3:'):
        load_static_embeddings(f)


def test_duplicate_row_keeps_last(tmp_path):
    f = tmp_path / 'e.txt'
    f.write_text('2 2\na 1 0\na 0 1\n')
    t = load_static_embeddings(f)
    assert t.duplicate_warnings == 1
    np.testing.assert_array_equal(t['a'], [0.0, 1.0])


def test_write_roundtrip(tmp_path):
    t = EmbeddingTable.from_dict({'x': [0.1, 1 / 3], 'y': [2.0, -1e-7]})
    t.write(tmp_path / 'e.txt')
    back = load_static_embeddings(tmp_path / 'e.txt')
    np.testing.assert_array_equal(back.matrix, t.matrix)


def test_cosine_examples():
    v = np.array([0.3, -2.0, 5.0])
    assert cosine(v, v) == pytest.approx(1.0)
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([1, 1], [2, 2]) == pytest.approx(1.0)
    assert cosine([0, 0], [1, 2]) == 0.0
    with pytest.raises(ValueError):
        cosine([1, 2], [1, 2, 3])


_vec = arrays(np.float64, 4, elements=st.floats(-10, 10, allow_nan=False))


@given(_vec, _vec, st.floats(0.01, 100), st.floats(0.01, 100))
def test_cosine_scale_invariant(u, v, a, b):
    assert cosine(a * u, b * v) == pytest.approx(cosine(u, v), abs=1e-9)


def _abc():
    return EmbeddingTable.from_dict({'a': [1, 0], 'b': [0.9, 0.1], 'c': [0, 1]})


def test_top_k_similar_words():
    [(term, sim)] = top_k_similar_words('a', 1, _abc())
    assert term == 'b'
    assert sim == pytest.approx(0.9 / np.hypot(0.9, 0.1))
    assert sim == pytest.approx(0.9939, abs=1e-4)
    assert [t for t, _ in top_k_similar_words('a', 10, _abc())] == ['b', 'c']
    assert top_k_similar_words('zzz', 3, _abc()) == []
    assert top_k_similar_words('a', 5, _abc(), vocab_filter={'c'}) == [('c', 0.0)]


def test_top_k_words_tie_break_is_lexicographic():
    t = EmbeddingTable.from_dict({'q': [1, 0], 'z': [1, 1], 'm': [1, 1], 'b': [0, 1]})
    assert [w for w, _ in top_k_similar_words('q', 3, t)] == ['m', 'z', 'b']


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 10))
def test_top_k_words_prefix_property(seed, k):
    rng = np.random.default_rng(seed)
    # coarse values force ties
    vecs = {f'w{i}': rng.integers(-2, 3, 3).astype(float) + 0.01 for i in range(12)}
    t = EmbeddingTable.from_dict(vecs)
    assert top_k_similar_words('w0', k, t) == top_k_similar_words('w0', k + 1, t)[:k]


def test_question_centroid_examples():
    t = EmbeddingTable.from_dict({'a': [1, 0], 'b': [0, 1]})
    ab = make_question('1', 'a b')
    np.testing.assert_array_equal(question_centroid(ab, t).values, [1, 1])
    np.testing.assert_array_equal(question_centroid(ab, t, {'b'}).values, [1, 0])
    np.testing.assert_array_equal(question_centroid(make_question('2', 'a a'), t).values, [2, 0])
    assert question_centroid(ab, t, {'a', 'b'}).is_zero


def _store_file(tmp_path, records):
    f = tmp_path / 'ctx.jsonl'
    f.write_text(''.join(json.dumps(r) + '\n' for r in records))
    return f


def test_contextual_store_alignment(tmp_path):
    q = make_question('q1', 'x y z')
    ok = _store_file(tmp_path, [{'id': 'q1', 'vectors': [[1, 0], [0, 1], [1, 1]]}])
    assert load_contextual_store(ok, {'q1': q}).dim == 2
    bad = _store_file(tmp_path, [{'id': 'q1', 'vectors': [[1, 0], [0, 1]]}])
    with pytest.raises(DataError, match='q1'):
        load_contextual_store(bad, {'q1': q})
    unknown = _store_file(tmp_path, [{'id': 'ghost', 'vectors': [[1, 0]]}])
    with pytest.raises(DataError, match='ghost'):
        load_contextual_store(unknown, {'q1': q})


def test_contextual_question_vector():
    q = make_question('q', 'u v')
    store = ContextualStore({'q': np.array([[1.0, 0.0], [0.0, 1.0]])}, 2)
    np.testing.assert_array_equal(contextual_question_vector(q, store).values, [1, 1])
    np.testing.assert_array_equal(contextual_question_vector(q, store, 'v').values, [1, 0])
    # excluding an absent term is a bit-identical no-op
    np.testing.assert_array_equal(contextual_question_vector(q, store, 'nope').values,
                                  contextual_question_vector(q, store).values)
    with pytest.raises(DataError):
        contextual_question_vector(make_question('other', 'u'), store)


def _vec_corpus(vectors):
    qs = [make_question(qid, f'tok{qid}') for qid in vectors]
    store = ContextualStore({qid: np.array([v], dtype=float) for qid, v in vectors.items()}, len(next(iter(vectors.values()))))
    return Corpus(qs), store


def test_top_k_questions_basic():
    target = np.array([1.0, 0.0])
    def at(c):
        return [c, np.sqrt(1 - c * c)]
    corpus, store = _vec_corpus({'x': at(0.1), 'y': at(0.9), 'z': at(0.5)})
    assert top_k_similar_questions(target, corpus, store, 2) == ['y', 'z']
    assert top_k_similar_questions(np.array(at(0.1)), corpus, store, 1) == ['x']


def test_top_k_questions_matches_brute_force():
    rng = random.Random(5)
    vecs = {f'c{i:02d}': [rng.gauss(0, 1) for _ in range(6)] for i in range(23)}
    corpus, store = _vec_corpus(vecs)
    query = [rng.gauss(0, 1) for _ in range(6)]
    assert top_k_similar_questions(np.array(query), corpus, store, 5) == cosine_topk(query, vecs, 5)


@given(st.permutations(['a', 'b', 'c', 'a', 'd']))
def test_vectors_are_permutation_invariant(tokens):
    t = EmbeddingTable.from_dict({w: [i + 1.0, i * 0.5 - 1, 2.0 ** -i] for i, w in enumerate('abcd')})
    base = question_centroid(make_question('q', 'a b c a d'), t).values
    np.testing.assert_allclose(question_centroid(make_question('q', ' '.join(tokens)), t).values, base, atol=1e-12)
    store_a = ContextualStore({'q': np.array([t[w] for w in 'abcad'])}, 3)
    store_b = ContextualStore({'q': np.array([t[w] for w in tokens])}, 3)
    np.testing.assert_allclose(
        contextual_question_vector(make_question('q', ' '.join(tokens)), store_b).values,
        contextual_question_vector(make_question('q', 'a b c a d'), store_a).values, atol=1e-12)


def test_excluding_absent_term_is_noop():
    t = EmbeddingTable.from_dict({'a': [0.1, 0.7], 'b': [0.3, -0.2]})
    q = make_question('q', 'a b a')
    assert np.array_equal(question_centroid(q, t, {'zzz'}).values, question_centroid(q, t).values)


def test_pseudo_context_depends_on_neighbours():
    a = pseudo_contextual_vectors(['play', 'music'], 16)
    b = pseudo_contextual_vectors(['play', 'football'], 16)
    assert not np.allclose(a[0], b[0])
    np.testing.assert_array_equal(a, pseudo_contextual_vectors(['play', 'music'], 16))
    store = build_pseudo_store([make_question('q', 'play music')], 16)
    np.testing.assert_array_equal(store['q'], a)
