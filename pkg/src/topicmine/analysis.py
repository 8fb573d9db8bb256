"""Topic weighting, ranking, labeling, and per-group category rollups."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .lda import ranked_words

CATEGORIES = ("Book", "Event", "Training", "PublicRelations", "SocialGood")

ALL_GROUPS_LABEL = "ALL"


@dataclass(frozen=True)
class TopicWeights:
    """Per-topic weight: summed doc-topic probability mass and its share.

    mass[k] is the sum over documents of the document's probability of topic
    k; share[k] is mass[k] normalized by the total mass over all topics.
    Since each document's topic probabilities sum to 1, the total mass is
    the document count, so share[k] == mass[k] / n_documents.
    """

    mass: np.ndarray  # (K,)
    share: np.ndarray  # (K,)

    @property
    def n_topics(self) -> int:
        return len(self.mass)


def topic_weights(doc_topic) -> TopicWeights:
    """Sum the doc-topic matrix over documents and normalize."""
    doc_topic = np.asarray(doc_topic, dtype=np.float64)
    if doc_topic.ndim != 2:
        raise ValueError(f"expected a 2-d doc-topic matrix, got shape {doc_topic.shape}")
    mass = doc_topic.sum(axis=0)  # pairwise summation
    return TopicWeights(mass=mass, share=mass / mass.sum())


def rank_topics(weights) -> list[int]:
    """Topic indices sorted by weight, heaviest first; ties by topic index."""
    values = weights.share if isinstance(weights, TopicWeights) else np.asarray(weights)
    return sorted(range(len(values)), key=lambda k: (-values[k], k))


class LabelMapError(ValueError):
    """Label map file is malformed or does not cover the topics."""


@dataclass(frozen=True)
class LabelMap:
    """Total mapping of topic index -> label and label -> category."""

    labels: tuple[str, ...]
    label_categories: Mapping[str, str]

    def __post_init__(self):
        for label in self.labels:
            category = self.label_categories.get(label)
            if category is None:
                raise LabelMapError(f"label {label!r} has no category")
            if category not in CATEGORIES:
                raise LabelMapError(f"unknown category {category!r} for label "
                                    f"{label!r}; expected one of {', '.join(CATEGORIES)}")

    @property
    def n_topics(self) -> int:
        return len(self.labels)

    def label_of(self, topic: int) -> str:
        return self.labels[topic]

    def category_of(self, topic: int) -> str:
        return self.label_categories[self.labels[topic]]

    def topics_in(self, category: str) -> list[int]:
        return [k for k in range(len(self.labels)) if self.category_of(k) == category]

    def category_sizes(self) -> dict[str, int]:
        sizes = {category: 0 for category in CATEGORIES}
        for k in range(len(self.labels)):
            sizes[self.category_of(k)] += 1
        return sizes


LABEL_MAP_HEADER = ["topic", "label", "category"]


def load_label_map(path, n_topics: int) -> LabelMap:
    """Load a label map CSV (columns topic,label,category; '#' comments).

    The file must cover every topic index in [0, n_topics) exactly once.
    """
    by_topic: dict[int, tuple[str, str]] = {}
    with open(path, encoding="utf-8", newline="") as f:
        rows = [(lineno, line) for lineno, line in enumerate(f, start=1)
                if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise LabelMapError(f"{path}: empty label map")
    header = next(csv.reader([rows[0][1]]))
    if [h.strip() for h in header] != LABEL_MAP_HEADER:
        raise LabelMapError(f"{path}:{rows[0][0]}: bad header {header!r}, expected "
                            f"{','.join(LABEL_MAP_HEADER)}")
    for lineno, line in rows[1:]:
        row = next(csv.reader([line]))
        if len(row) != 3:
            raise LabelMapError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        topic_text, label, category = (cell.strip() for cell in row)
        try:
            topic = int(topic_text)
        except ValueError:
            raise LabelMapError(f"{path}:{lineno}: bad topic index {topic_text!r}") from None
        if not 0 <= topic < n_topics:
            raise LabelMapError(f"{path}:{lineno}: topic {topic} out of range "
                                f"[0, {n_topics})")
        if topic in by_topic:
            raise LabelMapError(f"{path}:{lineno}: duplicate entry for topic {topic}")
        if not label:
            raise LabelMapError(f"{path}:{lineno}: empty label")
        if category not in CATEGORIES:
            raise LabelMapError(f"{path}:{lineno}: unknown category {category!r}; "
                                f"expected one of {', '.join(CATEGORIES)}")
        existing = [c for t, (l, c) in by_topic.items() if l == label]
        if existing:
            raise LabelMapError(f"{path}:{lineno}: duplicate label {label!r}")
        by_topic[topic] = (label, category)
    missing = [k for k in range(n_topics) if k not in by_topic]
    if missing:
        raise LabelMapError(f"{path}: missing topics {missing}")
    labels = tuple(by_topic[k][0] for k in range(n_topics))
    categories = {by_topic[k][0]: by_topic[k][1] for k in range(n_topics)}
    return LabelMap(labels=labels, label_categories=categories)


def save_label_map(label_map: LabelMap, path) -> None:
    """Write a label map in the CSV grammar accepted by load_label_map."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(LABEL_MAP_HEADER)
        for topic, label in enumerate(label_map.labels):
            writer.writerow([topic, label, label_map.label_categories[label]])


def bundled_label_map() -> LabelMap:
    """The shipped 20-topic label map for public-library tweet analysis."""
    ref = resources.files("topicmine.data") / "library_topics_labelmap.csv"
    with resources.as_file(ref) as path:
        return load_label_map(path, n_topics=20)


@dataclass(frozen=True)
class GroupCategoryWeights:
    """Per-group category weights plus the raw masses they normalize.

    weights[g][c] sums theta over the group's documents and the category's
    topics, normalized so each group's five category weights sum to 1.
    masses[g][c] keeps the unnormalized sums (a group's masses total its
    document count); doc_counts[g] is the group size. Groups with no
    documents are absent.
    """

    weights: dict[str, dict[str, float]]
    masses: dict[str, dict[str, float]]
    doc_counts: dict[str, int]

    @property
    def groups(self) -> list[str]:
        return list(self.weights)


def group_category_weights(doc_topic, groups: Mapping[str, Sequence[int]],
                           label_map: LabelMap) -> GroupCategoryWeights:
    """Roll topic probabilities up to categories within each group."""
    doc_topic = np.asarray(doc_topic, dtype=np.float64)
    if label_map.n_topics != doc_topic.shape[1]:
        raise ValueError(f"label map covers {label_map.n_topics} topics, "
                         f"doc-topic matrix has {doc_topic.shape[1]}")
    topics_by_category = {c: label_map.topics_in(c) for c in CATEGORIES}
    weights: dict[str, dict[str, float]] = {}
    masses: dict[str, dict[str, float]] = {}
    doc_counts: dict[str, int] = {}
    for group, doc_indices in groups.items():
        doc_indices = list(doc_indices)
        if not doc_indices:
            continue
        block = doc_topic[doc_indices]
        mass = {c: float(block[:, topics_by_category[c]].sum())
                for c in CATEGORIES}
        total = sum(mass.values())
        weights[group] = {c: mass[c] / total for c in CATEGORIES}
        masses[group] = mass
        doc_counts[group] = len(doc_indices)
    return GroupCategoryWeights(weights=weights, masses=masses, doc_counts=doc_counts)


def aggregate_all_groups(per_group: GroupCategoryWeights) -> dict[str, float]:
    """Category weights over the union of all groups' documents."""
    if not per_group.masses:
        raise ValueError("no groups to aggregate")
    mass = {c: sum(per_group.masses[g][c] for g in per_group.masses)
            for c in CATEGORIES}
    total = sum(mass.values())
    return {c: mass[c] / total for c in CATEGORIES}


def write_topic_weights_csv(fp, weights: TopicWeights, label_map: LabelMap) -> None:
    """Rows (topic,label,category,wt,nwt,rank), one per topic index."""
    if label_map.n_topics != weights.n_topics:
        raise ValueError(f"label map covers {label_map.n_topics} topics, "
                         f"weights have {weights.n_topics}")
    order = rank_topics(weights)
    rank_of = {topic: position + 1 for position, topic in enumerate(order)}
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["topic", "label", "category", "wt", "nwt", "rank"])
    for topic in range(weights.n_topics):
        writer.writerow([topic, label_map.label_of(topic), label_map.category_of(topic),
                         repr(float(weights.mass[topic])),
                         repr(float(weights.share[topic])), rank_of[topic]])


def write_category_weights_csv(fp, per_group: GroupCategoryWeights) -> None:
    """Rows (group,category,weight) per group, then the all-groups rows."""
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["group", "category", "weight"])
    for group, group_weights in per_group.weights.items():
        for category in CATEGORIES:
            writer.writerow([group, category, repr(group_weights[category])])
    overall = aggregate_all_groups(per_group)
    for category in CATEGORIES:
        writer.writerow([ALL_GROUPS_LABEL, category, repr(overall[category])])


def write_top_words_csv(fp, topic_word, tokens: Sequence[str], top_n: int) -> None:
    """Rows (topic,rank,word,probability) for the top_n words of each topic."""
    topic_word = np.asarray(topic_word, dtype=np.float64)
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["topic", "rank", "word", "probability"])
    for topic in range(topic_word.shape[0]):
        for position, (word, prob) in enumerate(
                ranked_words(topic_word[topic], tokens, top_n), start=1):
            writer.writerow([topic, position, word, repr(prob)])
