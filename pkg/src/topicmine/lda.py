"""Collapsed Gibbs sampling for topic models.

The estimator resamples one token-topic assignment at a time from its full
conditional, (n_dk + alpha) * (n_kw + beta) / (n_k + V*beta), sweeping the
corpus in document order and token order. All randomness comes from a
self-contained PCG32 generator (see GENERATOR_ID) so fits are reproducible
bit-for-bit for a given seed, independent of platform and library versions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import Corpus

GENERATOR_ID = "pcg32"
# PCG32 (XSH-RR variant): 64-bit LCG state, 32-bit rotated-xorshift output.
# Stream constant 54 matches the generator's published test vector.
PCG_DEFAULT_STREAM = 54

_U64 = np.uint64
_MASK32 = _U64(0xFFFFFFFF)
_PCG_MULT = _U64(6364136223846793005)
_INV_2_32 = 2.3283064365386963e-10  # 2**-32


class EmptyCorpusError(ValueError):
    """Fitting requires a corpus with at least one document."""


@njit(cache=True)
def _pcg32_next(rng):
    """Advance the PCG32 state (rng[0]=state, rng[1]=inc) and emit 32 bits."""
    old = rng[0]
    rng[0] = old * _PCG_MULT + rng[1]
    xorshifted = (_U64((old >> _U64(18)) ^ old) >> _U64(27)) & _MASK32
    rot = old >> _U64(59)
    return ((xorshifted >> rot) | (xorshifted << ((_U64(0) - rot) & _U64(31)))) & _MASK32


@njit(cache=True)
def _pcg32_randrange(rng, n):
    """Unbiased draw from [0, n) via bounded rejection."""
    bound = _U64(n)
    threshold = (_U64(0x100000000)) % bound
    while True:
        r = _pcg32_next(rng)
        if r >= threshold:
            return np.int64(r % bound)


def pcg32_state(seed: int, stream: int = PCG_DEFAULT_STREAM) -> np.ndarray:
    """Seed a PCG32 state array [state, inc] by the reference procedure."""
    rng = np.zeros(2, dtype=np.uint64)
    rng[1] = (_U64(stream & 0xFFFFFFFFFFFFFFFF) << _U64(1)) | _U64(1)
    _pcg32_next(rng)
    rng[0] = rng[0] + _U64(seed & 0xFFFFFFFFFFFFFFFF)
    _pcg32_next(rng)
    return rng


@njit(cache=True)
def _init_assignments(doc_of, word_of, z, n_dk, n_kw, n_k, n_d, n_topics, rng):
    for i in range(doc_of.shape[0]):
        k = _pcg32_randrange(rng, n_topics)
        z[i] = k
        n_dk[doc_of[i], k] += 1
        n_kw[k, word_of[i]] += 1
        n_k[k] += 1
        n_d[doc_of[i]] += 1


def _sweep_impl(doc_of, word_of, z, n_dk, n_kw, n_k, alpha, beta, rng,
                probs, cum, trace, record):
    n_topics = n_dk.shape[1]
    vbeta = n_kw.shape[1] * beta
    for i in range(doc_of.shape[0]):
        d = doc_of[i]
        w = word_of[i]
        k_old = z[i]
        n_dk[d, k_old] -= 1
        n_kw[k_old, w] -= 1
        n_k[k_old] -= 1
        total = 0.0
        for k in range(n_topics):
            p = (n_dk[d, k] + alpha) * (n_kw[k, w] + beta) / (n_k[k] + vbeta)
            probs[k] = p
            total += p
            cum[k] = total
        if record:
            for k in range(n_topics):
                trace[i, k] = probs[k] / total
        u = (_pcg32_next(rng) * _INV_2_32) * total
        k_new = n_topics - 1
        for k in range(n_topics):
            if u < cum[k]:
                k_new = k
                break
        z[i] = k_new
        n_dk[d, k_new] += 1
        n_kw[k_new, w] += 1
        n_k[k_new] += 1


_sweep = njit(cache=True)(_sweep_impl)


@njit(cache=True)
def _token_loglik(doc_of, word_of, n_dk, n_kw, n_k, n_d, alpha, beta):
    n_topics = n_dk.shape[1]
    vbeta = n_kw.shape[1] * beta
    kalpha = n_topics * alpha
    total = 0.0
    for i in range(doc_of.shape[0]):
        d = doc_of[i]
        w = word_of[i]
        p = 0.0
        for k in range(n_topics):
            p += ((n_dk[d, k] + alpha) / (n_d[d] + kalpha)
                  * (n_kw[k, w] + beta) / (n_k[k] + vbeta))
        total += np.log(p)
    return total


@dataclass
class CountTables:
    """Sufficient statistics of an assignment state.

    doc_topic[d, k] tokens of document d assigned to topic k; topic_word[k, w]
    assignments of word w to topic k; topic[k] and doc[d] are their margins.
    """

    doc_topic: np.ndarray  # (D, K) int64
    topic_word: np.ndarray  # (K, V) int64
    topic: np.ndarray  # (K,) int64
    doc: np.ndarray  # (D,) int64

    @classmethod
    def zeros(cls, n_docs: int, n_topics: int, vocab_size: int) -> "CountTables":
        return cls(
            doc_topic=np.zeros((n_docs, n_topics), dtype=np.int64),
            topic_word=np.zeros((n_topics, vocab_size), dtype=np.int64),
            topic=np.zeros(n_topics, dtype=np.int64),
            doc=np.zeros(n_docs, dtype=np.int64),
        )

    @classmethod
    def from_assignments(cls, word_id_lists: Sequence[Sequence[int]],
                         assignments: Sequence[Sequence[int]], n_topics: int,
                         vocab_size: int) -> "CountTables":
        """Recount tables from scratch."""
        tables = cls.zeros(len(word_id_lists), n_topics, vocab_size)
        for d, (word_ids, topics) in enumerate(zip(word_id_lists, assignments)):
            if len(word_ids) != len(topics):
                raise ValueError(f"document {d}: {len(topics)} assignments "
                                 f"for {len(word_ids)} tokens")
            for w, k in zip(word_ids, topics):
                tables.doc_topic[d, k] += 1
                tables.topic_word[k, w] += 1
                tables.topic[k] += 1
                tables.doc[d] += 1
        return tables

    def copy(self) -> "CountTables":
        return CountTables(self.doc_topic.copy(), self.topic_word.copy(),
                           self.topic.copy(), self.doc.copy())

    def check(self) -> None:
        """Raise ValueError if any internal sum identity is violated."""
        if (self.doc_topic < 0).any() or (self.topic_word < 0).any():
            raise ValueError("negative count")
        if not np.array_equal(self.doc_topic.sum(axis=1), self.doc):
            raise ValueError("doc_topic rows do not sum to doc lengths")
        if not np.array_equal(self.topic_word.sum(axis=1), self.topic):
            raise ValueError("topic_word rows do not sum to topic totals")
        if self.topic.sum() != self.doc.sum():
            raise ValueError("topic totals do not sum to the token count")

    def __eq__(self, other) -> bool:
        return (isinstance(other, CountTables)
                and np.array_equal(self.doc_topic, other.doc_topic)
                and np.array_equal(self.topic_word, other.topic_word)
                and np.array_equal(self.topic, other.topic)
                and np.array_equal(self.doc, other.doc))


def full_conditional(tables: CountTables, doc: int, word: int, alpha: float,
                     beta: float) -> np.ndarray:
    """Topic distribution for resampling one token.

    ``tables`` must already exclude the token being resampled. Entry k is
    proportional to (doc_topic[doc,k] + alpha) * (topic_word[k,word] + beta)
    / (topic[k] + V*beta), normalized to sum to 1.
    """
    vocab_size = tables.topic_word.shape[1]
    weights = ((tables.doc_topic[doc] + alpha)
               * (tables.topic_word[:, word] + beta)
               / (tables.topic + vocab_size * beta))
    return weights / weights.sum()


def doc_topic_estimate(tables: CountTables, alpha: float) -> np.ndarray:
    """Smoothed per-document topic distribution (rows sum to 1)."""
    n_topics = tables.doc_topic.shape[1]
    return ((tables.doc_topic + alpha)
            / (tables.doc[:, None] + n_topics * alpha))


def topic_word_estimate(tables: CountTables, beta: float) -> np.ndarray:
    """Smoothed per-topic word distribution (rows sum to 1)."""
    vocab_size = tables.topic_word.shape[1]
    return ((tables.topic_word + beta)
            / (tables.topic[:, None] + vocab_size * beta))


def log_likelihood(doc_topic, topic_word, documents) -> float:
    """Token log likelihood: sum over tokens of log(theta[d] . phi[:, w])."""
    doc_topic = np.asarray(doc_topic, dtype=np.float64)
    topic_word = np.asarray(topic_word, dtype=np.float64)
    if isinstance(documents, Corpus):
        documents = documents.word_id_lists()
    total = 0.0
    for d, word_ids in enumerate(documents):
        ids = np.asarray(word_ids, dtype=np.intp)
        total += float(np.log(doc_topic[d] @ topic_word[:, ids]).sum())
    return total


def ranked_words(weights, tokens: Sequence[str], n: int) -> list[tuple[str, float]]:
    """Top-n (token, weight) pairs; ties broken lexicographically by token."""
    weights = np.asarray(weights, dtype=np.float64)
    order = sorted(range(len(tokens)), key=lambda w: (-weights[w], tokens[w]))
    return [(tokens[w], float(weights[w])) for w in order[:n]]


class GibbsLda(BaseEstimator):
    """Latent Dirichlet allocation fit by collapsed Gibbs sampling.

    Parameters
    ----------
    n_topics : int, default=20
        Number of topics.
    alpha : float or None, default=None
        Symmetric document-topic prior; None means 50 / n_topics.
    beta : float, default=0.01
        Symmetric topic-word prior.
    sweeps : int, default=1000
        Full Gibbs passes over the token stream.
    burn_in : int, default=200
        Sweeps regarded as burn-in in convergence diagnostics. Must be
        smaller than ``sweeps``. Estimates always come from the final sweep.
    seed : int, default=0
        64-bit seed for the PCG32 generator.
    top_n : int, default=10
        Default word count for per-topic word reports.

    Attributes
    ----------
    doc_topic_ : ndarray of shape (n_documents, n_topics)
        Smoothed topic distribution per document (theta); rows sum to 1.
    topic_word_ : ndarray of shape (n_topics, vocab_size)
        Smoothed word distribution per topic (phi); rows sum to 1.
    counts_ : CountTables
        Final-state sufficient statistics.
    assignments_ : list of ndarray
        Final token-topic assignment per document, aligned with word_ids.
    vocabulary_ : Vocabulary
        The fitted corpus vocabulary.
    corpus_ : Corpus
        The fitted corpus.
    loglik_per_sweep_ : ndarray of shape (sweeps,)
        Token log likelihood after each sweep.
    alpha_ : float
        Effective alpha (resolves the None default).
    fit_flags_ : tuple of str
        Non-fatal conditions noticed during the fit.
    """

    def __init__(self, n_topics: int = 20, alpha: float | None = None,
                 beta: float = 0.01, sweeps: int = 1000, burn_in: int = 200,
                 seed: int = 0, top_n: int = 10):
        self.n_topics = n_topics
        self.alpha = alpha
        self.beta = beta
        self.sweeps = sweeps
        self.burn_in = burn_in
        self.seed = seed
        self.top_n = top_n

    def _check_params(self):
        if int(self.n_topics) != self.n_topics or self.n_topics < 1:
            raise ValueError(f"n_topics must be a positive integer, got {self.n_topics!r}")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha!r}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta!r}")
        if int(self.sweeps) != self.sweeps or self.sweeps < 1:
            raise ValueError(f"sweeps must be a positive integer, got {self.sweeps!r}")
        if int(self.burn_in) != self.burn_in or not 0 <= self.burn_in < self.sweeps:
            raise ValueError(
                f"burn_in must be an integer in [0, sweeps), got {self.burn_in!r}")
        if int(self.seed) != self.seed:
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if int(self.top_n) != self.top_n or self.top_n < 1:
            raise ValueError(f"top_n must be a positive integer, got {self.top_n!r}")

    def fit(self, X: Corpus, y=None, sweep_callback=None):
        """Run the sampler on a corpus.

        The token stream is swept in document order and token order within
        each document; assignments are initialized uniformly at random from
        the seed. ``sweep_callback(sweep_index, counts, assignments)``, when
        given, is invoked after every sweep with live views of the count
        tables and the per-document assignments.
        """
        self._check_params()
        if not isinstance(X, Corpus):
            raise TypeError(f"expected a Corpus, got {type(X).__name__}")
        if not X.documents:
            raise EmptyCorpusError("cannot fit an empty corpus")
        n_docs = X.n_documents
        n_topics = int(self.n_topics)
        vocab_size = len(X.vocabulary)
        alpha = float(self.alpha) if self.alpha is not None else 50.0 / n_topics
        beta = float(self.beta)

        lengths = [len(doc.word_ids) for doc in X.documents]
        n_tokens = sum(lengths)
        doc_of = np.repeat(np.arange(n_docs, dtype=np.int32),
                           np.asarray(lengths, dtype=np.int64))
        word_of = np.concatenate(
            [np.asarray(doc.word_ids, dtype=np.int32) for doc in X.documents])
        if word_of.size and int(word_of.max()) >= vocab_size:
            raise ValueError("corpus word id out of vocabulary range")

        flags = []
        if n_topics > n_tokens:
            flags.append("n_topics_exceeds_token_count")

        tables = CountTables.zeros(n_docs, n_topics, vocab_size)
        z = np.zeros(n_tokens, dtype=np.int32)
        rng = pcg32_state(int(self.seed))
        _init_assignments(doc_of, word_of, z, tables.doc_topic, tables.topic_word,
                          tables.topic, tables.doc, n_topics, rng)

        offsets = np.concatenate(([0], np.cumsum(lengths)))
        views = [z[offsets[d]:offsets[d + 1]] for d in range(n_docs)]
        probs = np.zeros(n_topics, dtype=np.float64)
        cum = np.zeros(n_topics, dtype=np.float64)
        no_trace = np.zeros((0, 0), dtype=np.float64)
        lls = np.zeros(int(self.sweeps), dtype=np.float64)
        for sweep in range(int(self.sweeps)):
            _sweep(doc_of, word_of, z, tables.doc_topic, tables.topic_word,
                   tables.topic, alpha, beta, rng, probs, cum, no_trace, False)
            lls[sweep] = _token_loglik(doc_of, word_of, tables.doc_topic,
                                       tables.topic_word, tables.topic,
                                       tables.doc, alpha, beta)
            if sweep_callback is not None:
                sweep_callback(sweep, tables, views)

        self.assignments_ = [view.copy() for view in views]
        self.counts_ = tables
        self.alpha_ = alpha
        self.corpus_ = X
        self.vocabulary_ = X.vocabulary
        self.doc_topic_ = doc_topic_estimate(tables, alpha)
        self.topic_word_ = topic_word_estimate(tables, beta)
        self.loglik_per_sweep_ = lls
        self.fit_flags_ = tuple(flags)
        return self

    def fit_transform(self, X: Corpus, y=None) -> np.ndarray:
        """Fit and return the per-document topic distribution."""
        return self.fit(X).doc_topic_

    def _check_fitted(self):
        if not hasattr(self, "doc_topic_"):
            raise NotFittedError("this GibbsLda instance is not fitted yet")

    @property
    def components_(self) -> np.ndarray:
        """Alias for topic_word_ (row-normalized), for ecosystem tooling."""
        self._check_fitted()
        return self.topic_word_

    def top_words(self, topic: int, n: int | None = None) -> list[str]:
        """The n heaviest words of a topic; ties broken lexicographically."""
        self._check_fitted()
        if not 0 <= topic < self.topic_word_.shape[0]:
            raise IndexError(f"topic {topic} out of range "
                             f"[0, {self.topic_word_.shape[0]})")
        if n is None:
            n = self.top_n
        pairs = ranked_words(self.topic_word_[topic], self.vocabulary_.tokens, n)
        return [token for token, _ in pairs]

    def score(self, X: Corpus | None = None, y=None) -> float:
        """Token log likelihood of the fitted (or a dimension-matching) corpus."""
        self._check_fitted()
        corpus = self.corpus_ if X is None else X
        if corpus.n_documents != self.doc_topic_.shape[0]:
            raise ValueError("corpus does not match the fitted document count")
        return log_likelihood(self.doc_topic_, self.topic_word_, corpus)
