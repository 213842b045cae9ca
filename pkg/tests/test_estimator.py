import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nnlda import NNLDA
from nnlda.corpus import SYNTHETIC_BAGS


@pytest.fixture(scope="module")
def raw():
    rng = np.random.default_rng(5)
    cats = [("TV", "quality"), ("TV", "price"), ("burger", "quality"), ("burger", "price")]
    texts, sides = [], []
    for i in range(240):
        prod, desc = cats[i % 4]
        bag = SYNTHETIC_BAGS[cats[i % 4]]
        texts.append(" ".join(rng.choice(bag, size=rng.integers(2, 6))))
        sides.append({"product": prod, "description": desc})
    return texts, sides


def test_params_roundtrip():
    est = NNLDA(n_topics=3, prior="dmr", learning_rate=0.01)
    params = est.get_params()
    assert params["n_topics"] == 3 and params["prior"] == "dmr"
    cloned = clone(est)
    assert cloned.get_params() == params
    est.set_params(n_topics=5)
    assert est.n_topics == 5


def test_not_fitted():
    with pytest.raises(NotFittedError):
        NNLDA().transform(["a b"])


def test_fit_transform_predict(raw):
    texts, sides = raw
    est = NNLDA(n_topics=4, prior="nnlda", max_em_iters=30, random_state=1).fit(texts, side=sides)
    assert est.components_.shape == (4, len(est.vocabulary_))
    np.testing.assert_allclose(est.components_.sum(axis=1), 1.0)
    theta = est.transform(texts[:10], side=sides[:10])
    assert theta.shape == (10, 4)
    np.testing.assert_allclose(theta.sum(axis=1), 1.0)
    np.testing.assert_array_equal(est.predict(texts[:10], side=sides[:10]), theta.argmax(axis=1))
    assert est.score(texts, side=sides) == pytest.approx(-est.perplexity(texts, side=sides))
    assert est.n_iter_ >= 1
    a = est.alpha(sides[:2])
    assert a.shape == (2, 4) and np.all(a > 0)


def test_unseen_words_ignored(raw):
    texts, sides = raw
    est = NNLDA(n_topics=2, prior="lda", max_em_iters=5).fit(texts, side=sides)
    theta = est.transform(["zzz qqq"], side=[sides[0]])
    np.testing.assert_allclose(theta.sum(), 1.0)


def test_numeric_side(raw):
    texts, _ = raw
    S = np.random.default_rng(0).normal(size=(len(texts), 3))
    est = NNLDA(n_topics=2, max_em_iters=5).fit(texts, side=S)
    assert est.model_.side_schema.dim == 3
    assert est.transform(texts[:3], side=S[:3]).shape == (3, 2)
    with pytest.raises(ValueError):
        est.transform(texts[:3], side=S[:3, :2])


def test_token_lists():
    docs = [["a", "b"], ["b", "c"], ["c", "a"]]
    est = NNLDA(n_topics=2, prior="lda", max_em_iters=5).fit(docs)
    assert est.transform(docs).shape == (3, 2)
    with pytest.raises(TypeError):
        est.fit("a single string")


def test_deterministic(raw):
    texts, sides = raw
    a = NNLDA(n_topics=3, max_em_iters=10, random_state=7).fit(texts, side=sides).components_
    b = NNLDA(n_topics=3, max_em_iters=10, random_state=7, n_threads=3).fit(texts, side=sides).components_
    np.testing.assert_array_equal(a, b)
