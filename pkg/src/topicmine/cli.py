"""Command-line pipeline: harvest -> stats -> fit -> report.

Exit codes: 0 success; 2 invalid input (arguments, files, schemas);
3 runtime failure (fetching, partial harvests).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis, corpus as corpus_mod, harvest as harvest_mod
from .lda import EmptyCorpusError, GibbsLda
from .snapshot import SnapshotError, load_snapshot, save_snapshot

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3

_INPUT_ERRORS = (
    harvest_mod.ManifestError,
    harvest_mod.PostFormatError,
    harvest_mod.UnknownAccountError,
    analysis.LabelMapError,
    SnapshotError,
    EmptyCorpusError,
    ValueError,
    OSError,
)

_CONFIG_SECTIONS = {"paths", "tokenizer", "lda", "fetch", "min_active_posts"}
_PATH_KEYS = {"manifest", "posts", "stopwords", "label_map", "out_dir", "replay_dir"}
_TOKENIZER_KEYS = {"lowercase", "min_token_len", "strip_urls", "strip_mentions",
                   "keep_hashtag_body"}
_LDA_KEYS = {"n_topics", "alpha", "beta", "sweeps", "burn_in", "seed", "top_n"}
_FETCH_KEYS = {"max_posts_per_account", "page_size", "max_retries", "backoff_base",
               "workers", "source", "api_base"}


@dataclass
class PipelineConfig:
    """Defaults file for the pipeline; command-line flags override it."""

    paths: dict = field(default_factory=dict)
    tokenizer: dict = field(default_factory=dict)
    lda: dict = field(default_factory=dict)
    fetch: dict = field(default_factory=dict)
    min_active_posts: int | None = None

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as f:
            try:
                obj = json.load(f)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        unknown = set(obj) - _CONFIG_SECTIONS
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        for section, allowed in (("paths", _PATH_KEYS), ("tokenizer", _TOKENIZER_KEYS),
                                 ("lda", _LDA_KEYS), ("fetch", _FETCH_KEYS)):
            extra = set(obj.get(section, {})) - allowed
            if extra:
                raise ValueError(f"{path}: unknown {section} keys {sorted(extra)}")
        return cls(paths=obj.get("paths", {}), tokenizer=obj.get("tokenizer", {}),
                   lda=obj.get("lda", {}), fetch=obj.get("fetch", {}),
                   min_active_posts=obj.get("min_active_posts"))


def _pick(*values):
    """First non-None value."""
    for value in values:
        if value is not None:
            return value
    return None


def _tokenizer_config(args, config: PipelineConfig) -> corpus_mod.TokenizerConfig:
    stopwords_path = _pick(getattr(args, "stopwords", None), config.paths.get("stopwords"))
    stopwords = (corpus_mod.load_stopwords(stopwords_path) if stopwords_path
                 else corpus_mod.default_stopwords())
    settings = {
        "lowercase": True, "min_token_len": 2, "strip_urls": True,
        "strip_mentions": True, "keep_hashtag_body": True,
    }
    settings.update(config.tokenizer)
    if getattr(args, "min_token_len", None) is not None:
        settings["min_token_len"] = args.min_token_len
    return corpus_mod.TokenizerConfig(stopwords=stopwords, **settings)


def cmd_harvest(args, config: PipelineConfig) -> int:
    manifest_path = _pick(args.manifest, config.paths.get("manifest"))
    if manifest_path is None:
        raise ValueError("no manifest: pass --manifest or set paths.manifest")
    out_path = _pick(args.out, config.paths.get("posts"))
    if out_path is None:
        raise ValueError("no output file: pass --out or set paths.posts")
    entries = harvest_mod.load_manifest(manifest_path)

    fetch_cfg = config.fetch
    policy = harvest_mod.FetchPolicy(
        max_posts_per_account=_pick(args.cap, fetch_cfg.get("max_posts_per_account"),
                                    harvest_mod.DEFAULT_POST_CAP),
        page_size=_pick(args.page_size, fetch_cfg.get("page_size"), 200),
        max_retries=_pick(args.max_retries, fetch_cfg.get("max_retries"), 3),
        backoff_base=_pick(args.backoff_base, fetch_cfg.get("backoff_base"), 1.0),
    )
    source_kind = _pick(args.source, fetch_cfg.get("source"), "replay")
    if source_kind == "replay":
        replay_dir = _pick(args.replay_dir, config.paths.get("replay_dir"))
        if replay_dir is None:
            raise ValueError("no replay directory: pass --replay-dir or set "
                             "paths.replay_dir")
        source = harvest_mod.ReplaySource(replay_dir)
    elif source_kind == "live":
        api_base = _pick(args.api_base, fetch_cfg.get("api_base"))
        if api_base is None:
            raise ValueError("no API base URL: pass --api-base or set fetch.api_base")
        source = harvest_mod.HttpTimelineSource(api_base)
    else:
        raise ValueError(f"unknown source {source_kind!r}, expected replay or live")

    min_active = _pick(args.min_active, config.min_active_posts, 100)
    workers = _pick(args.workers, fetch_cfg.get("workers"), 1)
    result = harvest_mod.harvest_accounts(entries, policy, source,
                                          min_active=min_active, workers=workers)
    posts = corpus_mod.dedupe(result.posts)
    removed = len(result.posts) - len(posts)
    harvest_mod.write_posts(posts, out_path)
    print(f"accounts: {len(result.fetched)} fetched, "
          f"{len(result.skipped_inactive)} skipped (fewer than {min_active} posts), "
          f"{len(result.failures)} failed")
    print(f"posts: {len(posts)} kept, {removed} duplicates removed")
    print(f"wrote {out_path}")
    if result.failures:
        for handle, message in result.failures.items():
            print(f"failed {handle}: {message}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_stats(args, config: PipelineConfig) -> int:
    posts_path = _pick(args.posts, config.paths.get("posts"))
    manifest_path = _pick(args.manifest, config.paths.get("manifest"))
    if posts_path is None or manifest_path is None:
        raise ValueError("stats needs --posts and --manifest (or paths.* in --config)")
    posts = harvest_mod.read_posts(posts_path)
    entries = harvest_mod.load_manifest(manifest_path)
    stats = corpus_mod.corpus_stats(posts, entries)
    text = stats.to_csv()
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_fit(args, config: PipelineConfig) -> int:
    posts_path = _pick(args.posts, config.paths.get("posts"))
    if posts_path is None:
        raise ValueError("fit needs --posts (or paths.posts in --config)")
    if args.out is None:
        raise ValueError("fit needs --out for the model snapshot")
    posts = corpus_mod.dedupe(harvest_mod.read_posts(posts_path))
    built, report = corpus_mod.build_corpus(posts, _tokenizer_config(args, config))
    if not built.documents:
        raise EmptyCorpusError(f"no usable documents in {posts_path} "
                               f"({report.n_dropped} posts tokenized to nothing)")

    lda_cfg = config.lda
    model = GibbsLda(
        n_topics=_pick(args.topics, lda_cfg.get("n_topics"), 20),
        alpha=_pick(args.alpha, lda_cfg.get("alpha")),
        beta=_pick(args.beta, lda_cfg.get("beta"), 0.01),
        sweeps=_pick(args.sweeps, lda_cfg.get("sweeps"), 1000),
        burn_in=_pick(args.burn_in, lda_cfg.get("burn_in"), 200),
        seed=_pick(args.seed, lda_cfg.get("seed"), 0),
        top_n=_pick(args.top_n, lda_cfg.get("top_n"), 10),
    )
    model.fit(built)
    save_snapshot(model, args.out)

    report_path = args.report or str(Path(args.out).with_suffix("")) + "_fit_report.csv"
    with open(report_path, "w", encoding="utf-8", newline="\n") as f:
        for flag in model.fit_flags_:
            f.write(f"# flag: {flag}\n")
        f.write("sweep,log_likelihood\n")
        for sweep, value in enumerate(model.loglik_per_sweep_):
            f.write(f"{sweep},{float(value)!r}\n")

    print(f"documents: {built.n_documents} kept, {report.n_dropped} dropped "
          f"(empty after tokenization)")
    print(f"vocabulary: {len(built.vocabulary)} words, {built.n_tokens} tokens")
    for flag in model.fit_flags_:
        print(f"flag: {flag}")
    print(f"final log likelihood: {float(model.loglik_per_sweep_[-1])!r}")
    print(f"wrote {args.out}")
    print(f"wrote {report_path}")
    return EXIT_OK


def cmd_report(args, config: PipelineConfig) -> int:
    if args.snapshot is None:
        raise ValueError("report needs --snapshot")
    out_dir = _pick(args.out_dir, config.paths.get("out_dir"))
    if out_dir is None:
        raise ValueError("report needs --out-dir (or paths.out_dir in --config)")
    model = load_snapshot(args.snapshot)
    labels_path = _pick(args.labels, config.paths.get("label_map"))
    if labels_path is not None:
        label_map = analysis.load_label_map(labels_path, model.n_topics)
    else:
        label_map = analysis.bundled_label_map()
        if label_map.n_topics != model.n_topics:
            raise analysis.LabelMapError(
                f"bundled label map covers {label_map.n_topics} topics but the "
                f"snapshot has {model.n_topics}; pass --labels")
    top_n = _pick(args.top_n, model.top_n)

    weights = analysis.topic_weights(model.doc_topic_)
    rollup = analysis.group_category_weights(model.doc_topic_,
                                             model.corpus_.group_index, label_map)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "topic_weights.csv", "w", encoding="utf-8", newline="") as f:
        analysis.write_topic_weights_csv(f, weights, label_map)
    with open(out / "category_weights_by_group.csv", "w", encoding="utf-8",
              newline="") as f:
        analysis.write_category_weights_csv(f, rollup)
    with open(out / "top_words.csv", "w", encoding="utf-8", newline="") as f:
        analysis.write_top_words_csv(f, model.topic_word_,
                                     model.vocabulary_.tokens, top_n)

    for position, topic in enumerate(analysis.rank_topics(weights), start=1):
        print(f"{position:2d}. {label_map.label_of(topic)} "
              f"({label_map.category_of(topic)}): {weights.share[topic]:.4f}")
    for name in ("topic_weights.csv", "category_weights_by_group.csv", "top_words.csv"):
        print(f"wrote {out / name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topicmine",
        description="Mine topics from grouped social-media posts.")
    parser.add_argument("--config", help="JSON config file with pipeline defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("harvest", help="collect posts for every manifest account")
    p.add_argument("--manifest", help="account manifest CSV")
    p.add_argument("--out", help="output posts file (JSON lines)")
    p.add_argument("--source", choices=["replay", "live"],
                   help="post source kind (default replay)")
    p.add_argument("--replay-dir", help="directory of per-handle replay files")
    p.add_argument("--api-base", help="base URL of the live timeline API")
    p.add_argument("--cap", type=int, help="max posts per account (default 3200)")
    p.add_argument("--page-size", type=int, help="posts per page (default 200)")
    p.add_argument("--max-retries", type=int, help="rate-limit retries (default 3)")
    p.add_argument("--backoff-base", type=float,
                   help="seconds before first retry, doubling (default 1.0)")
    p.add_argument("--min-active", type=int,
                   help="skip accounts with fewer total posts (default 100)")
    p.add_argument("--workers", type=int, help="concurrent account fetches (default 1)")
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("stats", help="per-group post counts and averages")
    p.add_argument("--posts", help="posts file")
    p.add_argument("--manifest", help="account manifest CSV")
    p.add_argument("--out", help="also write the CSV here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("fit", help="fit a topic model and write a snapshot")
    p.add_argument("--posts", help="posts file")
    p.add_argument("--out", help="model snapshot path")
    p.add_argument("--report", help="fit report CSV path "
                                    "(default <out>_fit_report.csv)")
    p.add_argument("--topics", type=int, help="topic count (default 20)")
    p.add_argument("--alpha", type=float, help="doc-topic prior (default 50/topics)")
    p.add_argument("--beta", type=float, help="topic-word prior (default 0.01)")
    p.add_argument("--sweeps", type=int, help="Gibbs sweeps (default 1000)")
    p.add_argument("--burn-in", type=int, help="burn-in sweeps (default 200)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--top-n", type=int, help="words per topic in reports (default 10)")
    p.add_argument("--stopwords", help="stopword file (default: bundled English list)")
    p.add_argument("--min-token-len", type=int, help="shortest kept token (default 2)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="write weight and category reports from a snapshot")
    p.add_argument("--snapshot", help="model snapshot path")
    p.add_argument("--labels", help="label map CSV (default: bundled 20-topic map)")
    p.add_argument("--out-dir", help="directory for the report CSVs")
    p.add_argument("--top-n", type=int, help="words per topic in top_words.csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
        return args.func(args, config)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (harvest_mod.RateLimitExceededError, harvest_mod.TransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
