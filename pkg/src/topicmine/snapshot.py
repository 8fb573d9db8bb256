"""Versioned on-disk snapshots of fitted models.

A snapshot is a single UTF-8 JSON object with LF line endings and these
fields, all required unless noted:

  format            literal "gibbs-lda-snapshot"
  version           integer layout version (currently 1)
  generator         random-generator id used for the fit ("pcg32")
  params            estimator parameters: n_topics, alpha (effective float),
                    beta, sweeps, burn_in, seed, top_n
  flags             list of fit flags (strings)
  vocabulary        list of V tokens; index == word id
  documents         list of {post_id, account, group, word_ids}
  assignments       per-document topic index lists, aligned with word_ids
  counts            {doc_topic: DxK, topic_word: KxV, topic: K, doc: D}
  loglik_per_sweep  per-sweep token log likelihood (floats)

Counts are redundant with assignments and are verified against a recount on
load; theta/phi are recomputed from the stored counts, so a loaded model
reproduces every report of the original fit bit-for-bit.
"""
from __future__ import annotations

import json

import numpy as np

from .corpus import Corpus, Document, Vocabulary
from .lda import (
    GENERATOR_ID,
    CountTables,
    GibbsLda,
    doc_topic_estimate,
    topic_word_estimate,
)

SNAPSHOT_FORMAT = "gibbs-lda-snapshot"
SNAPSHOT_VERSION = 1


class SnapshotError(ValueError):
    """Snapshot file is missing fields, corrupt, or of an unknown version."""


def save_snapshot(model: GibbsLda, path) -> None:
    """Write a fitted model (and its corpus) to a snapshot file."""
    model._check_fitted()
    obj = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "generator": GENERATOR_ID,
        "params": {
            "n_topics": int(model.n_topics),
            "alpha": float(model.alpha_),
            "beta": float(model.beta),
            "sweeps": int(model.sweeps),
            "burn_in": int(model.burn_in),
            "seed": int(model.seed),
            "top_n": int(model.top_n),
        },
        "flags": list(model.fit_flags_),
        "vocabulary": list(model.vocabulary_.tokens),
        "documents": [
            {
                "post_id": doc.post_id,
                "account": doc.account,
                "group": doc.group,
                "word_ids": list(doc.word_ids),
            }
            for doc in model.corpus_.documents
        ],
        "assignments": [[int(k) for k in doc_z] for doc_z in model.assignments_],
        "counts": {
            "doc_topic": model.counts_.doc_topic.tolist(),
            "topic_word": model.counts_.topic_word.tolist(),
            "topic": model.counts_.topic.tolist(),
            "doc": model.counts_.doc.tolist(),
        },
        "loglik_per_sweep": [float(v) for v in model.loglik_per_sweep_],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, ensure_ascii=False, separators=(",", ":"))
        f.write("\n")


def load_snapshot(path) -> GibbsLda:
    """Reconstruct a fitted model from a snapshot.

    The stored counts are validated against a recount of the stored
    assignments; theta and phi are recomputed from the counts.
    """
    with open(path, encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"{path}: invalid JSON: {exc}") from None
    if obj.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotError(f"{path}: not a {SNAPSHOT_FORMAT} file")
    if obj.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {obj.get('version')!r}")
    if obj.get("generator") != GENERATOR_ID:
        raise SnapshotError(f"{path}: unsupported generator {obj.get('generator')!r}")
    try:
        params = obj["params"]
        vocabulary = Vocabulary(obj["vocabulary"])
        documents = []
        group_index: dict[str, list[int]] = {}
        for i, rec in enumerate(obj["documents"]):
            documents.append(Document(post_id=rec["post_id"], account=rec["account"],
                                      group=rec["group"],
                                      word_ids=tuple(int(w) for w in rec["word_ids"])))
            group_index.setdefault(rec["group"], []).append(i)
        assignments = [np.asarray(doc_z, dtype=np.int32) for doc_z in obj["assignments"]]
        counts = CountTables(
            doc_topic=np.asarray(obj["counts"]["doc_topic"], dtype=np.int64),
            topic_word=np.asarray(obj["counts"]["topic_word"], dtype=np.int64),
            topic=np.asarray(obj["counts"]["topic"], dtype=np.int64),
            doc=np.asarray(obj["counts"]["doc"], dtype=np.int64),
        )
        lls = np.asarray(obj["loglik_per_sweep"], dtype=np.float64)
        flags = tuple(obj["flags"])
        n_topics = int(params["n_topics"])
        alpha = float(params["alpha"])
        beta = float(params["beta"])
        model = GibbsLda(n_topics=n_topics, alpha=alpha, beta=beta,
                         sweeps=int(params["sweeps"]), burn_in=int(params["burn_in"]),
                         seed=int(params["seed"]), top_n=int(params["top_n"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotError(f"{path}: malformed snapshot: {exc}") from None

    corpus = Corpus(vocabulary=vocabulary, documents=documents, group_index=group_index)
    if counts.doc_topic.shape != (len(documents), n_topics):
        raise SnapshotError(f"{path}: doc_topic shape {counts.doc_topic.shape} "
                            f"does not match {len(documents)} documents x {n_topics} topics")
    recount = CountTables.from_assignments(corpus.word_id_lists(), assignments,
                                           n_topics, len(vocabulary))
    if recount != counts:
        raise SnapshotError(f"{path}: stored counts disagree with a recount "
                            f"of the stored assignments")

    model.assignments_ = assignments
    model.counts_ = counts
    model.alpha_ = alpha
    model.corpus_ = corpus
    model.vocabulary_ = vocabulary
    model.doc_topic_ = doc_topic_estimate(counts, alpha)
    model.topic_word_ = topic_word_estimate(counts, beta)
    model.loglik_per_sweep_ = lls
    model.fit_flags_ = flags
    return model
