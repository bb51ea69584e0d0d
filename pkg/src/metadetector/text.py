"""Tokenization, vocabulary, fixed-length encoding, and word embeddings.

Corpus interchange format: UTF-8 JSON Lines, one object per post with
fields ``id``, ``text``, ``label`` (0 fake / 1 real / null), ``event``.
"""

from __future__ import annotations

import json
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from .autodiff import Tensor, embedding_lookup
from .errors import ConfigurationError, ContractError, ParseError

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_CJK_RANGES = (
    (0x4E00, 0x9FFF),   # unified ideographs
    (0x3400, 0x4DBF),   # extension A
    (0xF900, 0xFAFF),   # compatibility ideographs
)


@dataclass
class Post:
    id: str
    text: str
    label: Optional[int]  # 0 = fake, 1 = real, None = unlabeled
    event_id: str


@dataclass
class EventCorpus:
    event_id: str
    posts: list[Post]
    role: str  # "source" | "target"

    def __post_init__(self):
        if not self.posts:
            raise ContractError(f"corpus {self.event_id!r} is empty")
        for p in self.posts:
            if p.event_id != self.event_id:
                raise ContractError(
                    f"post {p.id!r} has event {p.event_id!r}, corpus is {self.event_id!r}")

    def __len__(self) -> int:
        return len(self.posts)


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, CJK to chars."""
    return list(_tokenize_cached(text))


@lru_cache(maxsize=1 << 16)
def _tokenize_cached(text: str) -> tuple[str, ...]:
    tokens: list[str] = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and unicodedata.category(raw[start]).startswith("P"):
            start += 1
        while end > start and unicodedata.category(raw[end - 1]).startswith("P"):
            end -= 1
        word = raw[start:end]
        if not word:
            continue
        if word.isascii():  # fast path: ASCII words contain no CJK
            tokens.append(word)
            continue
        # split contiguous CJK runs into single characters
        buf = ""
        for ch in word:
            if _is_cjk(ch):
                if buf:
                    tokens.append(buf)
                    buf = ""
                tokens.append(ch)
            else:
                buf += ch
        if buf:
            tokens.append(buf)
    return tuple(tokens)


@dataclass
class Vocabulary:
    token_to_id: dict[str, int]
    min_count: int

    def __len__(self) -> int:
        return len(self.token_to_id)

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    @property
    def tokens_by_id(self) -> list[str]:
        out = [""] * len(self.token_to_id)
        for tok, i in self.token_to_id.items():
            out[i] = tok
        return out


def build_vocab(corpora: Iterable[EventCorpus], min_count: int = 1) -> Vocabulary:
    """Frequency-ordered vocabulary over all corpora; ties lexicographic."""
    if min_count < 1:
        raise ConfigurationError(f"min_count must be >= 1, got {min_count}")
    counts: Counter[str] = Counter()
    seen = False
    for corpus in corpora:
        seen = True
        for post in corpus.posts:
            counts.update(tokenize(post.text))
    if not seen:
        raise ContractError("build_vocab requires at least one corpus")
    kept = sorted((tok for tok, c in counts.items() if c >= min_count),
                  key=lambda t: (-counts[t], t))
    mapping = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
    for i, tok in enumerate(kept):
        mapping[tok] = i + 2
    return Vocabulary(token_to_id=mapping, min_count=min_count)


def encode(post: Post, vocab: Vocabulary, k: int) -> np.ndarray:
    """Token ids truncated/right-padded to exactly ``k``."""
    if k < 1:
        raise ConfigurationError(f"sequence length k must be >= 1, got {k}")
    ids = [vocab.id_for(t) for t in tokenize(post.text)[:k]]
    ids.extend([PAD_ID] * (k - len(ids)))
    return np.array(ids, dtype=np.int64)


def choose_k(corpora: Iterable[EventCorpus], quantile: float = 0.95) -> int:
    """Smallest length covering the given quantile of post lengths, in [4, 256]."""
    lengths = sorted(len(tokenize(p.text))
                     for corpus in corpora for p in corpus.posts)
    if not lengths:
        raise ContractError("choose_k requires non-empty corpora")
    idx = max(0, math.ceil(quantile * len(lengths)) - 1)
    return min(256, max(4, lengths[idx]))


@dataclass
class EmbeddingTable:
    weights: Tensor  # |V| x d; row 0 (PAD) all-zeros
    trainable: bool = True

    def __post_init__(self):
        self.weights.requires_grad = self.trainable

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def random_init(cls, vocab_size: int, dim: int, rng: np.random.Generator,
                    trainable: bool = True) -> "EmbeddingTable":
        scale = 0.25 / math.sqrt(dim)
        w = rng.uniform(-scale, scale, size=(vocab_size, dim))
        w[PAD_ID] = 0.0
        return cls(weights=Tensor(w, requires_grad=trainable), trainable=trainable)


def embed(ids: np.ndarray, table: EmbeddingTable) -> Tensor:
    """Columns are the embeddings of ``ids``; shape (d, k) or (B, d, k)."""
    return embedding_lookup(table.weights, ids)


def load_pretrained_vectors(path: str, vocab: Vocabulary,
                            rng: np.random.Generator,
                            trainable: bool = True) -> EmbeddingTable:
    """Textual word2vec format: header "N d", then lines "token v1 .. vd".

    Vocabulary tokens found in the file take the file vectors; the rest are
    random-initialized; PAD is forced to zero.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ParseError(f"line 1: expected header 'N d', got {header.strip()!r}")
        try:
            n, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"line 1: non-integer header {header.strip()!r}") from None
        table = EmbeddingTable.random_init(len(vocab), dim, rng, trainable=trainable)
        for lineno in range(2, n + 2):
            line = fh.readline()
            if not line:
                raise ParseError(f"line {lineno}: file ends before {n} vectors read")
            fields = line.rstrip("\n").split(" ")
            if len(fields) != dim + 1:
                raise ParseError(
                    f"line {lineno}: expected token + {dim} values, got {len(fields)} fields")
            token = fields[0]
            try:
                vec = np.array([float(v) for v in fields[1:]])
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric vector component") from None
            idx = vocab.token_to_id.get(token)
            if idx is not None and idx != PAD_ID:
                table.weights.data[idx] = vec
    table.weights.data[PAD_ID] = 0.0
    return table


# -- corpus file I/O ----------------------------------------------------------


def load_corpus(path: str, role: str) -> EventCorpus:
    posts: list[Post] = []
    event_id = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            try:
                post = Post(id=str(obj["id"]), text=obj["text"],
                            label=obj["label"], event_id=obj["event"])
            except KeyError as exc:
                raise ParseError(f"line {lineno}: missing field {exc.args[0]!r}") from None
            if post.label is not None and post.label not in (0, 1):
                raise ParseError(f"line {lineno}: label must be 0, 1, or null")
            if event_id is None:
                event_id = post.event_id
            posts.append(post)
    if not posts:
        raise ParseError(f"corpus file {path!r} contains no posts")
    return EventCorpus(event_id=event_id, posts=posts, role=role)


def save_corpus(corpus: EventCorpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in corpus.posts:
            fh.write(json.dumps({"id": p.id, "text": p.text,
                                 "label": p.label, "event": p.event_id},
                                ensure_ascii=False) + "\n")
