"""Shared builders for fixtures, synthetic corpora, and oracle computations."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from topicmine import Corpus, Document, RawPost, Vocabulary, write_posts

DATA_DIR = Path(__file__).parent / "data"
MANIFEST_48 = DATA_DIR / "manifest_westcoast.csv"

# Per-group post and account counts exercised by the stats goldens.
GROUP_POST_COUNTS = {"AK": 26739, "CA": 65153, "HI": 1739, "OR": 29166, "WA": 24259}
GROUP_ACCOUNT_COUNTS = {"AK": 5, "CA": 22, "HI": 1, "OR": 9, "WA": 11}


def make_post(post_id, account="acct", group="G1", text="hello world", created_at=None):
    return RawPost(id=str(post_id), account=account, group=group, text=text,
                   created_at=created_at)


def spread(total: int, n: int) -> list[int]:
    """Split total into n integers differing by at most 1 (largest first)."""
    base, rem = divmod(total, n)
    return [base + 1] * rem + [base] * (n - rem)


def posts_for_counts(entries, group_totals) -> list[RawPost]:
    """One post per count unit, texts unique per account."""
    by_group: dict[str, list] = {}
    for entry in entries:
        by_group.setdefault(entry.group, []).append(entry)
    posts = []
    for group, total in group_totals.items():
        members = by_group[group]
        for entry, count in zip(members, spread(total, len(members))):
            for i in range(count):
                posts.append(make_post(f"{entry.handle}-{i}", account=entry.handle,
                                       group=group, text=f"post {i} from {entry.handle}"))
    return posts


def make_corpus(word_id_lists, groups=None, vocab_size=None) -> Corpus:
    """Corpus over synthetic tokens w000..; groups defaults to one group G0."""
    if vocab_size is None:
        vocab_size = 1 + max(max(ids) for ids in word_id_lists if ids)
    vocabulary = Vocabulary([f"w{i:03d}" for i in range(vocab_size)])
    if groups is None:
        groups = ["G0"] * len(word_id_lists)
    documents = []
    group_index: dict[str, list[int]] = {}
    for d, (ids, group) in enumerate(zip(word_id_lists, groups)):
        documents.append(Document(post_id=f"p{d}", account=f"a{d}", group=group,
                                  word_ids=tuple(int(w) for w in ids)))
        group_index.setdefault(group, []).append(d)
    return Corpus(vocabulary=vocabulary, documents=documents, group_index=group_index)


def random_corpus(n_docs, vocab_size, min_len=3, max_len=12, gen_seed=0,
                  groups=None) -> Corpus:
    rng = np.random.default_rng(gen_seed)
    lists = [rng.integers(0, vocab_size, size=rng.integers(min_len, max_len + 1)).tolist()
             for _ in range(n_docs)]
    return make_corpus(lists, groups=groups, vocab_size=vocab_size)


def planted_model(n_topics=5, support=40):
    """Per-topic word distributions with disjoint supports and 1/rank decay."""
    vocab_size = n_topics * support
    decay = 1.0 / (np.arange(support) + 1.0)
    decay /= decay.sum()
    topic_word = np.zeros((n_topics, vocab_size))
    for k in range(n_topics):
        topic_word[k, k * support:(k + 1) * support] = decay
    return topic_word


def planted_corpus(n_docs=1000, doc_len=50, n_topics=5, support=40,
                   doc_prior=0.3, gen_seed=20180613):
    """Generate documents from known topic mixtures; returns (corpus, topic_word)."""
    topic_word = planted_model(n_topics, support)
    vocab_size = n_topics * support
    decay_cum = np.cumsum(topic_word[0, :support]) / topic_word[0, :support].sum()
    rng = np.random.default_rng(gen_seed)
    doc_topic = rng.dirichlet(np.full(n_topics, doc_prior), size=n_docs)
    lists = []
    for d in range(n_docs):
        topics = rng.choice(n_topics, size=doc_len, p=doc_topic[d])
        ranks = np.searchsorted(decay_cum, rng.random(doc_len), side="right")
        lists.append((topics * support + ranks).tolist())
    return make_corpus(lists, vocab_size=vocab_size), topic_word


def top_ids(row, n) -> list[int]:
    """Word ids of the n largest entries (stable on ties)."""
    return list(np.argsort(-np.asarray(row), kind="stable")[:n])


def greedy_topic_overlap(fitted_topic_word, planted_topic_word, n=20) -> float:
    """Mean top-n word overlap under greedy one-to-one topic matching."""
    n_topics = fitted_topic_word.shape[0]
    fitted_tops = [set(top_ids(fitted_topic_word[k], n)) for k in range(n_topics)]
    planted_tops = [set(top_ids(planted_topic_word[k], n)) for k in range(n_topics)]
    overlap = np.zeros((n_topics, n_topics))
    for i in range(n_topics):
        for j in range(n_topics):
            overlap[i, j] = len(fitted_tops[i] & planted_tops[j]) / n
    taken_rows: set[int] = set()
    taken_cols: set[int] = set()
    scores = []
    for _ in range(n_topics):
        best = max(((overlap[i, j], i, j) for i in range(n_topics)
                    for j in range(n_topics)
                    if i not in taken_rows and j not in taken_cols))
        scores.append(best[0])
        taken_rows.add(best[1])
        taken_cols.add(best[2])
    return float(np.mean(scores))


def brute_conditional(doc_topic_row, word_column, topic_totals, alpha, beta,
                      vocab_size) -> list[float]:
    """Pure-python evaluation of the collapsed full conditional."""
    n_topics = len(topic_totals)
    weights = [
        (doc_topic_row[k] + alpha) * (word_column[k] + beta)
        / (topic_totals[k] + vocab_size * beta)
        for k in range(n_topics)
    ]
    total = sum(weights)
    return [w / total for w in weights]


def write_replay_fixture(directory: Path, handle: str, posts) -> Path:
    path = directory / f"{handle.lstrip('@')}.jsonl"
    write_posts(posts, path)
    return path
