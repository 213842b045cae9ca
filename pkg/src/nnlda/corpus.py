"""Tokenization, vocabulary, document encoding and the synthetic review corpus."""

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import AllDocumentsEmpty, MalformedRow, MissingColumn, UnknownSideValue

_TOKEN_RE = re.compile(r"[^\W_]+(?:_[^\W_]+)*")

# (product, description) -> bag of words.  Multi-word entries are joined with
# an underscore so each bag entry is a single token.  Repeated entries (e.g.
# "value" in the first bag) are kept, which doubles their sampling weight.
SYNTHETIC_BAGS: Dict[Tuple[str, str], Tuple[str, ...]] = {
    ("burger", "price"): (
        "value", "pricey", "ouch", "steep", "cheap", "value", "reason", "accept",
        "unreason", "unacceptable",
    ),
    ("burger", "quality"): (
        "nasty", "fantastic", "delicious", "tasty", "juicy", "unreason", "unacceptable",
        "reason", "accept", "fresh",
    ),
    ("TV", "price"): (
        "promotion", "affordable", "value", "increase", "expensive", "tasty",
        "economical", "fancy", "okay",
    ),
    ("TV", "quality"): (
        "fabulous", "fantastic", "promising", "sharp", "large", "clear", "eco_friendly",
        "fresh", "pixilated",
    ),
}

SYNTHETIC_SIDE_COLUMNS = ("product", "description")


def combination_name(product, description):
    return f"{product}|{description}"


def tokenize(text):
    """Lowercase ``text`` and split it on runs of non-alphanumeric characters.

    Underscores joining two alphanumeric runs are kept so pre-joined phrases
    such as ``eco_friendly`` survive a write/read cycle.
    """
    if not text:
        return []
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Bijection between token strings and dense indices ``0..V-1``."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens = tuple(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        if not self.tokens:
            raise AllDocumentsEmpty("vocabulary would be empty")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self):
        return f"Vocabulary(V={len(self)})"

    def encode(self, tokens):
        """Map tokens to indices; returns ``(indices, n_oov)`` with OOV tokens dropped."""
        ids = [self.index[t] for t in tokens if t in self.index]
        return ids, len(tokens) - len(ids)

    def decode(self, ids):
        return [self.tokens[i] for i in ids]


def build_vocabulary(docs):
    """Distinct tokens of ``docs`` in order of first occurrence."""
    seen = {}
    for doc in docs:
        for tok in doc:
            if tok not in seen:
                seen[tok] = len(seen)
    if not seen:
        raise AllDocumentsEmpty("no tokens found in any document")
    return Vocabulary(list(seen))


@dataclass(frozen=True)
class SideSchema:
    """Categorical side columns and the category order of each one-hot block."""

    columns: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()

    @property
    def dim(self):
        return sum(len(cats) for _, cats in self.columns)

    @property
    def names(self):
        return [name for name, _ in self.columns]

    @classmethod
    def from_values(cls, names, rows):
        cols = []
        for name in names:
            cats = sorted({str(row[name]) for row in rows})
            cols.append((name, tuple(cats)))
        return cls(tuple(cols))

    def encode(self, values: Dict[str, str], strict=True):
        """One-hot encode a mapping of column -> category value.

        Missing columns give an all-zero block.  Unknown values raise
        ``UnknownSideValue`` when ``strict``, otherwise they are zeroed too.
        """
        out = np.zeros(self.dim)
        offset = 0
        for name, cats in self.columns:
            if name in values and values[name] is not None:
                val = str(values[name])
                try:
                    out[offset + cats.index(val)] = 1.0
                except ValueError:
                    if strict:
                        raise UnknownSideValue(
                            f"unknown value {val!r} for side column {name!r}; "
                            f"expected one of {list(cats)}"
                        ) from None
            offset += len(cats)
        return out

    def to_dict(self):
        return [{"name": n, "categories": list(c)} for n, c in self.columns]

    @classmethod
    def from_dict(cls, data):
        return cls(tuple((d["name"], tuple(d["categories"])) for d in data))


@dataclass(frozen=True)
class Document:
    words: np.ndarray
    side: np.ndarray
    label: Optional[int] = None
    category: Optional[str] = None

    def __len__(self):
        return len(self.words)


@dataclass(frozen=True)
class Corpus:
    docs: Tuple[Document, ...]
    vocab: Vocabulary
    side_schema: SideSchema = field(default_factory=SideSchema)
    n_oov: int = 0

    def __post_init__(self):
        if not self.docs:
            raise AllDocumentsEmpty("corpus has no documents")
        q = self.side_dim
        V = len(self.vocab)
        for d in self.docs:
            if d.side.shape != (q,):
                raise ValueError(f"side vector of length {d.side.shape} != {q}")
            if len(d.words) and (d.words.min() < 0 or d.words.max() >= V):
                raise ValueError("word index outside the vocabulary")

    @property
    def side_dim(self):
        return self.side_schema.dim

    def __len__(self):
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs)

    @property
    def side_matrix(self):
        return np.stack([d.side for d in self.docs]) if self.side_dim else np.zeros((len(self), 0))

    @property
    def categories(self):
        return [d.category for d in self.docs]

    @property
    def labels(self):
        return [d.label for d in self.docs]

    @property
    def n_words(self):
        return sum(len(d) for d in self.docs)


@dataclass(frozen=True)
class Schema:
    """Column mapping for ``load_corpus``.

    ``side=None`` means every column that is not the text, label, category or
    id column is treated as a categorical side feature.
    """

    text: str = "text"
    side: Optional[Tuple[str, ...]] = None
    label: Optional[str] = "label"
    category: Optional[str] = "category"
    id: Optional[str] = "id"


def make_corpus(records, vocab=None, side_schema=None, side_columns=()):
    """Build a Corpus from dicts with ``tokens``, ``side`` (dict), ``label``, ``category``.

    Passing ``vocab``/``side_schema`` encodes against an existing model; OOV
    tokens are dropped and counted in ``Corpus.n_oov``.
    """
    records = list(records)
    if not records:
        raise AllDocumentsEmpty("no documents to load")
    if vocab is None:
        vocab = build_vocabulary(r["tokens"] for r in records)
    if side_schema is None:
        side_schema = SideSchema.from_values(side_columns, [r["side"] for r in records])
    docs = []
    n_oov = 0
    for r in records:
        ids, oov = vocab.encode(r["tokens"])
        n_oov += oov
        docs.append(
            Document(
                words=np.asarray(ids, dtype=np.int64),
                side=side_schema.encode(r["side"], strict=False),
                label=r.get("label"),
                category=r.get("category"),
            )
        )
    return Corpus(tuple(docs), vocab, side_schema, n_oov)


def _parse_label(raw, row):
    if raw is None or raw == "":
        return None
    try:
        return int(float(raw))
    except (TypeError, ValueError):
        raise MalformedRow(row, f"label {raw!r} is not an integer") from None


def _read_csv(path, schema):
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise AllDocumentsEmpty(f"{path} is empty")
        if schema.text not in header:
            raise MissingColumn(schema.text)
        reserved = {schema.text, schema.label, schema.category, schema.id}
        side_cols = schema.side if schema.side is not None else tuple(
            c for c in header if c not in reserved
        )
        for c in side_cols:
            if c not in header:
                raise MissingColumn(c)
        for rownum, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise MalformedRow(rownum, "wrong number of fields")
            records.append(
                {
                    "tokens": tokenize(row[schema.text]),
                    "side": {c: row[c] for c in side_cols},
                    "label": _parse_label(row.get(schema.label), rownum) if schema.label else None,
                    "category": (row.get(schema.category) or None) if schema.category else None,
                }
            )
    return records, side_cols


def _read_jsonl(path, schema):
    records = []
    side_cols = list(schema.side) if schema.side is not None else []
    with open(path, encoding="utf-8") as fh:
        for rownum, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRow(rownum, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise MalformedRow(rownum, "expected a JSON object")
            if schema.text not in obj:
                raise MissingColumn(schema.text)
            side = obj.get("side") or {}
            if not isinstance(side, dict):
                raise MalformedRow(rownum, "'side' must be an object")
            if schema.side is None:
                for c in side:
                    if c not in side_cols:
                        side_cols.append(c)
            records.append(
                {
                    "tokens": tokenize(obj[schema.text] or ""),
                    "side": side,
                    "label": _parse_label(obj.get(schema.label), rownum) if schema.label else None,
                    "category": obj.get(schema.category) if schema.category else None,
                }
            )
    if schema.side is not None:
        for c in side_cols:
            if records and not any(c in r["side"] for r in records):
                raise MissingColumn(c)
    return records, tuple(side_cols)


def load_corpus(path, schema=None, vocab=None, side_schema=None):
    """Read a CSV (header required) or JSONL corpus file.

    Categorical side columns are one-hot encoded; documents with empty text are
    kept with zero words.
    """
    schema = schema or Schema()
    path = Path(path)
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        records, side_cols = _read_jsonl(path, schema)
    else:
        records, side_cols = _read_csv(path, schema)
    if not records:
        raise AllDocumentsEmpty(f"{path} contains no rows")
    return make_corpus(records, vocab=vocab, side_schema=side_schema, side_columns=side_cols)


@dataclass(frozen=True)
class SyntheticConfig:
    n_docs: int = 2000
    min_len: int = 1
    max_len: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_docs < 1:
            raise ValueError("n_docs must be >= 1")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")


def synthetic_records(cfg: SyntheticConfig):
    rng = np.random.default_rng(cfg.seed)
    combos = list(SYNTHETIC_BAGS)
    records = []
    for _ in range(cfg.n_docs):
        product, description = combos[rng.integers(len(combos))]
        bag = SYNTHETIC_BAGS[(product, description)]
        length = int(rng.integers(cfg.min_len, cfg.max_len + 1))
        words = [bag[j] for j in rng.integers(len(bag), size=length)]
        records.append(
            {
                "tokens": words,
                "side": {"product": product, "description": description},
                "label": None,
                "category": combination_name(product, description),
            }
        )
    return records


def generate_synthetic(cfg: SyntheticConfig = SyntheticConfig()):
    """Sample the four-combination product review corpus."""
    return make_corpus(synthetic_records(cfg), side_columns=SYNTHETIC_SIDE_COLUMNS)


def write_synthetic_csv(cfg: SyntheticConfig, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["text", *SYNTHETIC_SIDE_COLUMNS, "category"])
        for r in synthetic_records(cfg):
            writer.writerow(
                [" ".join(r["tokens"]), r["side"]["product"], r["side"]["description"], r["category"]]
            )


def bag_of(category: str) -> List[str]:
    product, description = category.split("|")
    return list(SYNTHETIC_BAGS[(product, description)])
