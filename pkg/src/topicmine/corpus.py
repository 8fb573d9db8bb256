"""Deduplication, tokenization, vocabulary building, and per-group statistics."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

from .harvest import AccountEntry, RawPost, UnknownAccountError

_URL_RE = re.compile(r"https?://\S+|www\.\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#\w+")
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)  # alphanumeric runs, no underscore


def load_stopwords(path) -> frozenset[str]:
    """Read a stopword file: one token per line, '#' comment lines allowed."""
    words = set()
    with open(path, encoding="utf-8") as f:
        for line in f:
            token = line.strip()
            if token and not token.startswith("#"):
                words.add(token)
    return frozenset(words)


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    """The bundled standard English stopword list."""
    ref = resources.files("topicmine.data") / "stopwords_en.txt"
    with resources.as_file(ref) as path:
        return load_stopwords(path)


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    min_token_len: int = 2
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    strip_urls: bool = True
    strip_mentions: bool = True
    keep_hashtag_body: bool = True

    def __post_init__(self):
        if self.min_token_len < 1:
            raise ValueError("min_token_len must be >= 1")


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    """Split text into filtered tokens, preserving order.

    URLs and @mentions are removed when configured; '#' is dropped from
    hashtags (or the whole hashtag when keep_hashtag_body is off); the rest
    splits on non-alphanumeric boundaries, then short tokens and stopwords
    are filtered out.
    """
    if config is None:
        config = TokenizerConfig()
    if config.strip_urls:
        text = _URL_RE.sub(" ", text)
    if config.strip_mentions:
        text = _MENTION_RE.sub(" ", text)
    if not config.keep_hashtag_body:
        text = _HASHTAG_RE.sub(" ", text)
    if config.lowercase:
        text = text.lower()
    return [
        token
        for token in _TOKEN_RE.findall(text)
        if len(token) >= config.min_token_len and token not in config.stopwords
    ]


class Vocabulary:
    """Dense token<->id mapping; ids are assigned 0..V-1."""

    __slots__ = ("_tokens", "_ids")

    def __init__(self, tokens: Iterable[str] = ()):
        self._tokens = tuple(tokens)
        self._ids = {token: i for i, token in enumerate(self._tokens)}
        if len(self._ids) != len(self._tokens):
            raise ValueError("duplicate token in vocabulary")

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def id_of(self, token: str) -> int:
        return self._ids[token]

    def token_of(self, word_id: int) -> str:
        return self._tokens[word_id]

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token) -> bool:
        return token in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    def __repr__(self) -> str:
        return f"Vocabulary({len(self)} tokens)"


@dataclass(frozen=True)
class Document:
    """Bag-of-words document with provenance; word order is preserved."""

    post_id: str
    account: str
    group: str
    word_ids: tuple[int, ...]


@dataclass(frozen=True)
class BuildReport:
    n_posts: int
    n_documents: int
    n_dropped: int


@dataclass
class Corpus:
    vocabulary: Vocabulary
    documents: list[Document]
    group_index: dict[str, list[int]]

    @property
    def n_documents(self) -> int:
        return len(self.documents)

    @property
    def n_tokens(self) -> int:
        return sum(len(doc.word_ids) for doc in self.documents)

    def word_id_lists(self) -> list[tuple[int, ...]]:
        return [doc.word_ids for doc in self.documents]


def dedupe(posts: Sequence[RawPost]) -> list[RawPost]:
    """Drop repeated (account, text) pairs, keeping the first occurrence."""
    seen: set[tuple[str, str]] = set()
    kept = []
    for post in posts:
        key = (post.account, post.text)
        if key not in seen:
            seen.add(key)
            kept.append(post)
    return kept


def build_corpus(posts: Sequence[RawPost],
                 config: TokenizerConfig | None = None) -> tuple[Corpus, BuildReport]:
    """Tokenize posts (assumed deduplicated) into a corpus.

    Vocabulary ids are assigned in first-appearance order over posts in
    input order; posts that tokenize to nothing are dropped and counted.
    """
    if config is None:
        config = TokenizerConfig()
    token_to_id: dict[str, int] = {}
    id_to_token: list[str] = []
    documents: list[Document] = []
    group_index: dict[str, list[int]] = {}
    dropped = 0
    for post in posts:
        tokens = tokenize(post.text, config)
        if not tokens:
            dropped += 1
            continue
        word_ids = []
        for token in tokens:
            word_id = token_to_id.get(token)
            if word_id is None:
                word_id = len(id_to_token)
                token_to_id[token] = word_id
                id_to_token.append(token)
            word_ids.append(word_id)
        group_index.setdefault(post.group, []).append(len(documents))
        documents.append(Document(post_id=post.id, account=post.account,
                                  group=post.group, word_ids=tuple(word_ids)))
    corpus = Corpus(vocabulary=Vocabulary(id_to_token), documents=documents,
                    group_index=group_index)
    return corpus, BuildReport(n_posts=len(posts), n_documents=len(documents),
                               n_dropped=dropped)


@dataclass(frozen=True)
class GroupStatRow:
    group: str
    posts: int
    accounts: int

    @property
    def average(self) -> Fraction:
        """Posts per account, exact."""
        if self.accounts == 0:
            return Fraction(0)
        return Fraction(self.posts, self.accounts)

    def formatted_average(self) -> str:
        """The average rendered at 2 decimal places (half-even)."""
        if self.accounts == 0:
            return "0.00"
        value = Decimal(self.posts) / Decimal(self.accounts)
        return str(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN))


TOTAL_LABEL = "TOTAL"


@dataclass
class GroupStats:
    """Per-group post/account counts with a totals row."""

    rows: list[GroupStatRow]

    @property
    def total(self) -> GroupStatRow:
        return GroupStatRow(
            group=TOTAL_LABEL,
            posts=sum(row.posts for row in self.rows),
            accounts=sum(row.accounts for row in self.rows),
        )

    def to_csv(self) -> str:
        lines = ["group,posts,accounts,average"]
        for row in [*self.rows, self.total]:
            lines.append(f"{row.group},{row.posts},{row.accounts},{row.formatted_average()}")
        return "\n".join(lines) + "\n"


def corpus_stats(posts: Sequence[RawPost],
                 manifest: Sequence[AccountEntry]) -> GroupStats:
    """Per-group post counts and posts-per-account averages.

    Groups appear in manifest order, restricted to groups with at least one
    post; each group's account count is its manifest roster size. A post
    whose account is not in the manifest is an error.
    """
    group_of = {entry.handle: entry.group for entry in manifest}
    roster: dict[str, int] = {}
    for entry in manifest:
        roster[entry.group] = roster.get(entry.group, 0) + 1
    post_counts: dict[str, int] = {}
    for post in posts:
        group = group_of.get(post.account)
        if group is None:
            raise UnknownAccountError(f"post account {post.account!r} not in manifest")
        post_counts[group] = post_counts.get(group, 0) + 1
    rows = [
        GroupStatRow(group=group, posts=post_counts[group], accounts=roster[group])
        for group in roster
        if group in post_counts
    ]
    return GroupStats(rows=rows)
