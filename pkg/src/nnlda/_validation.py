"""Input validation helpers shared by the estimator API."""

import numpy as np

from .corpus import Corpus, SideSchema, make_corpus, tokenize


def _as_tokens(doc):
    if isinstance(doc, str):
        return tokenize(doc)
    tokens = list(doc)
    if not all(isinstance(t, str) for t in tokens):
        raise TypeError("documents must be strings or sequences of string tokens")
    return tokens


def check_side(side, n_docs, side_schema=None):
    """Normalize side data to ``(records, schema, matrix)``.

    ``side`` may be None, a list of ``{column: value}`` dicts (categorical,
    one-hot encoded) or a numeric array of shape (n_docs, q) used as-is.
    """
    if side is None:
        return [{} for _ in range(n_docs)], side_schema or SideSchema(), None
    if len(side) != n_docs:
        raise ValueError(f"side data has {len(side)} rows for {n_docs} documents")
    if n_docs and isinstance(side[0], dict):
        if side_schema is None:
            names = []
            for row in side:
                names.extend(k for k in row if k not in names)
            side_schema = SideSchema.from_values(names, [{k: r.get(k) for k in names} for r in side])
        return list(side), side_schema, None
    mat = np.asarray(side, dtype=np.float64)
    if mat.ndim != 2 or not np.all(np.isfinite(mat)):
        raise ValueError("numeric side data must be a finite 2-D array")
    if side_schema is None:
        side_schema = SideSchema(tuple((f"x{j}", ("1",)) for j in range(mat.shape[1])))
    elif side_schema.dim != mat.shape[1]:
        raise ValueError(f"side data has width {mat.shape[1]}, expected {side_schema.dim}")
    return [{} for _ in range(n_docs)], side_schema, mat


def check_corpus(X, side=None, vocab=None, side_schema=None, categories=None):
    """Coerce estimator input into a ``Corpus``.

    ``X`` is either a ``Corpus`` (returned unchanged when no vocabulary is
    imposed) or a sequence of raw strings / token lists.
    """
    if isinstance(X, Corpus):
        if vocab is None or X.vocab == vocab:
            return X
        X = [X.vocab.decode(d.words) for d in X.docs]
    if isinstance(X, str):
        raise TypeError("expected a sequence of documents, got a single string")
    docs = [_as_tokens(d) for d in X]
    records, schema, mat = check_side(side, len(docs), side_schema)
    if categories is not None and len(categories) != len(docs):
        raise ValueError("categories must align with documents")
    rows = [
        {"tokens": toks, "side": rec, "category": None if categories is None else categories[i]}
        for i, (toks, rec) in enumerate(zip(docs, records))
    ]
    corpus = make_corpus(rows, vocab=vocab, side_schema=schema)
    if mat is not None:
        docs = tuple(type(d)(d.words, mat[i].copy(), d.label, d.category)
                     for i, d in enumerate(corpus.docs))
        corpus = Corpus(docs, corpus.vocab, corpus.side_schema, corpus.n_oov)
    return corpus
