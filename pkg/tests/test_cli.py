import json
import subprocess
import sys

import pytest

from helpers import make_post, write_replay_fixture
from topicmine import load_snapshot, read_posts
from topicmine.cli import EXIT_INPUT, EXIT_OK, EXIT_RUNTIME, main

WORDS = ["books", "read", "story", "music", "concert", "kids", "summer",
         "program", "workshop", "class", "health", "garden"]


def post_text(i):
    # Distinct per index so only the explicit duplicates collapse in dedupe.
    return (f"{WORDS[i % len(WORDS)]} {WORDS[(i * 5 + 2) % len(WORDS)]} "
            f"{WORDS[(i * 7 + 4) % len(WORDS)]} item{i}")


def write_manifest(path, rows):
    lines = ["library_name,group,handle"]
    lines += [f"{name},{group},{handle}" for name, group, handle in rows]
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def pipeline_dir(tmp_path):
    manifest = tmp_path / "manifest.csv"
    write_manifest(manifest, [("Alpha", "CA", "alpha"), ("Beta", "OR", "beta"),
                              ("Gamma", "CA", "gamma")])
    replay = tmp_path / "replay"
    replay.mkdir()
    # gamma's replay file has 99 lines (98 posts + 1 duplicate), under the
    # default 100-post activity threshold.
    for handle, count in (("alpha", 150), ("beta", 120), ("gamma", 98)):
        posts = [make_post(f"{handle}-{i}", account=handle, group="XX",
                           text=post_text(i)) for i in range(count)]
        posts.append(make_post(f"{handle}-dup", account=handle, group="XX",
                               text=post_text(0)))
        write_replay_fixture(replay, handle, posts)
    return tmp_path


def run_harvest(tmp_path, *extra):
    return main(["harvest", "--manifest", str(tmp_path / "manifest.csv"),
                 "--replay-dir", str(tmp_path / "replay"),
                 "--out", str(tmp_path / "posts.jsonl"), *extra])


class TestHarvestCommand:
    def test_min_active_drops_small_account(self, pipeline_dir, capsys):
        code = run_harvest(pipeline_dir, "--min-active", "100")
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "2 fetched" in out and "1 skipped" in out
        accounts = {p.account for p in read_posts(pipeline_dir / "posts.jsonl")}
        assert accounts == {"alpha", "beta"}

    def test_zero_min_active_keeps_all(self, pipeline_dir):
        code = run_harvest(pipeline_dir, "--min-active", "0")
        assert code == EXIT_OK
        accounts = {p.account for p in read_posts(pipeline_dir / "posts.jsonl")}
        assert accounts == {"alpha", "beta", "gamma"}

    def test_duplicates_removed_and_reported(self, pipeline_dir, capsys):
        run_harvest(pipeline_dir, "--min-active", "0")
        out = capsys.readouterr().out
        assert "3 duplicates removed" in out

    def test_cap_applies(self, pipeline_dir):
        code = run_harvest(pipeline_dir, "--min-active", "0", "--cap", "50")
        assert code == EXIT_OK
        posts = read_posts(pipeline_dir / "posts.jsonl")
        per_account = {h: sum(1 for p in posts if p.account == h)
                       for h in ("alpha", "beta", "gamma")}
        assert per_account == {"alpha": 50, "beta": 50, "gamma": 50}

    def test_idempotent_output(self, pipeline_dir):
        run_harvest(pipeline_dir, "--min-active", "0")
        first = (pipeline_dir / "posts.jsonl").read_bytes()
        run_harvest(pipeline_dir, "--min-active", "0")
        assert (pipeline_dir / "posts.jsonl").read_bytes() == first

    def test_missing_fixture_partial_failure(self, pipeline_dir, capsys):
        write_manifest(pipeline_dir / "manifest.csv",
                       [("Alpha", "CA", "alpha"), ("Ghost", "OR", "ghost")])
        code = run_harvest(pipeline_dir, "--min-active", "0")
        assert code == EXIT_RUNTIME
        captured = capsys.readouterr()
        assert "ghost" in captured.err
        accounts = {p.account for p in read_posts(pipeline_dir / "posts.jsonl")}
        assert accounts == {"alpha"}

    def test_missing_manifest_is_input_error(self, pipeline_dir):
        code = main(["harvest", "--manifest", str(pipeline_dir / "nope.csv"),
                     "--replay-dir", str(pipeline_dir / "replay"),
                     "--out", str(pipeline_dir / "posts.jsonl")])
        assert code == EXIT_INPUT

    def test_group_stamped_from_manifest(self, pipeline_dir):
        run_harvest(pipeline_dir, "--min-active", "0")
        groups = {p.account: p.group for p in read_posts(pipeline_dir / "posts.jsonl")}
        assert groups == {"alpha": "CA", "beta": "OR", "gamma": "CA"}


class TestStatsCommand:
    def test_prints_and_writes_csv(self, pipeline_dir, capsys):
        run_harvest(pipeline_dir, "--min-active", "0")
        capsys.readouterr()
        out_csv = pipeline_dir / "stats.csv"
        code = main(["stats", "--posts", str(pipeline_dir / "posts.jsonl"),
                     "--manifest", str(pipeline_dir / "manifest.csv"),
                     "--out", str(out_csv)])
        assert code == EXIT_OK
        printed = capsys.readouterr().out
        assert printed == out_csv.read_text()
        # after dedupe: alpha 150 + gamma 98 => CA 248 over 2 accounts
        assert "CA,248,2,124.00" in printed
        assert "OR,120,1,120.00" in printed
        assert "TOTAL,368,3,122.67" in printed

    def test_empty_posts_file(self, pipeline_dir, capsys):
        posts = pipeline_dir / "empty.jsonl"
        posts.write_text("")
        code = main(["stats", "--posts", str(posts),
                     "--manifest", str(pipeline_dir / "manifest.csv")])
        assert code == EXIT_OK
        assert capsys.readouterr().out == ("group,posts,accounts,average\n"
                                           "TOTAL,0,0,0.00\n")

    def test_unmanifested_account_rejected(self, pipeline_dir, capsys):
        posts = pipeline_dir / "bad.jsonl"
        posts.write_text('{"id":"1","account":"mystery","group":"CA","text":"x"}\n')
        code = main(["stats", "--posts", str(posts),
                     "--manifest", str(pipeline_dir / "manifest.csv")])
        assert code == EXIT_INPUT
        assert "mystery" in capsys.readouterr().err


def run_fit(tmp_path, *extra):
    return main(["fit", "--posts", str(tmp_path / "posts.jsonl"),
                 "--out", str(tmp_path / "model.json"),
                 "--topics", "4", "--sweeps", "25", "--burn-in", "5",
                 "--seed", "42", *extra])


def labels_csv(tmp_path, n_topics=4):
    categories = ["Book", "Event", "Training", "PublicRelations", "SocialGood"]
    path = tmp_path / "labels.csv"
    lines = ["topic,label,category"]
    lines += [f"{k},Label {k},{categories[k % len(categories)]}" for k in range(n_topics)]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestFitCommand:
    def test_fit_writes_snapshot_and_report(self, pipeline_dir, capsys):
        run_harvest(pipeline_dir, "--min-active", "0")
        code = run_fit(pipeline_dir)
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "wrote" in out
        model = load_snapshot(pipeline_dir / "model.json")
        assert model.n_topics == 4 and model.seed == 42
        report = (pipeline_dir / "model_fit_report.csv").read_text()
        lines = report.strip().splitlines()
        assert lines[0] == "sweep,log_likelihood"
        assert len(lines) == 26
        sweep, value = lines[1].split(",")
        assert sweep == "0" and float(value) < 0  # plain decimal text

    def test_snapshot_bytes_deterministic(self, pipeline_dir):
        run_harvest(pipeline_dir, "--min-active", "0")
        run_fit(pipeline_dir)
        first = (pipeline_dir / "model.json").read_bytes()
        run_fit(pipeline_dir)
        assert (pipeline_dir / "model.json").read_bytes() == first

    def test_zero_topics_is_input_error(self, pipeline_dir, capsys):
        run_harvest(pipeline_dir, "--min-active", "0")
        code = main(["fit", "--posts", str(pipeline_dir / "posts.jsonl"),
                     "--out", str(pipeline_dir / "model.json"), "--topics", "0"])
        assert code == EXIT_INPUT
        assert "n_topics" in capsys.readouterr().err

    def test_empty_corpus_is_input_error(self, pipeline_dir, capsys):
        posts = pipeline_dir / "posts.jsonl"
        posts.write_text('{"id":"1","account":"a","group":"CA","text":"the a of"}\n')
        code = main(["fit", "--posts", str(posts),
                     "--out", str(pipeline_dir / "model.json")])
        assert code == EXIT_INPUT
        assert "no usable documents" in capsys.readouterr().err

    def test_custom_stopwords_flag(self, pipeline_dir):
        run_harvest(pipeline_dir, "--min-active", "0")
        stop = pipeline_dir / "stop.txt"
        stop.write_text("books\n")
        run_fit(pipeline_dir, "--stopwords", str(stop))
        model = load_snapshot(pipeline_dir / "model.json")
        assert "books" not in model.vocabulary_


class TestReportCommand:
    def run_all(self, tmp_path, *report_extra):
        run_harvest(tmp_path, "--min-active", "0")
        run_fit(tmp_path)
        return main(["report", "--snapshot", str(tmp_path / "model.json"),
                     "--labels", str(labels_csv(tmp_path)),
                     "--out-dir", str(tmp_path / "reports"), *report_extra])

    def test_writes_three_csvs(self, pipeline_dir):
        assert self.run_all(pipeline_dir) == EXIT_OK
        reports = pipeline_dir / "reports"
        tw = (reports / "topic_weights.csv").read_text().splitlines()
        assert tw[0] == "topic,label,category,wt,nwt,rank"
        assert len(tw) == 5
        cw = (reports / "category_weights_by_group.csv").read_text().splitlines()
        assert cw[0] == "group,category,weight"
        assert len(cw) == 1 + 5 * 3  # CA, OR, ALL
        assert sum(1 for line in cw if line.startswith("ALL,")) == 5
        topw = (reports / "top_words.csv").read_text().splitlines()
        assert topw[0] == "topic,rank,word,probability"

    def test_report_bytes_deterministic(self, pipeline_dir):
        self.run_all(pipeline_dir)
        reports = pipeline_dir / "reports"
        before = {p.name: p.read_bytes() for p in reports.iterdir()}
        main(["report", "--snapshot", str(pipeline_dir / "model.json"),
              "--labels", str(pipeline_dir / "labels.csv"),
              "--out-dir", str(reports)])
        after = {p.name: p.read_bytes() for p in reports.iterdir()}
        assert before == after

    def test_label_map_must_cover_topics(self, pipeline_dir, capsys):
        run_harvest(pipeline_dir, "--min-active", "0")
        run_fit(pipeline_dir)
        short = pipeline_dir / "short.csv"
        short.write_text("topic,label,category\n0,a,Book\n1,b,Event\n2,c,Book\n")
        code = main(["report", "--snapshot", str(pipeline_dir / "model.json"),
                     "--labels", str(short),
                     "--out-dir", str(pipeline_dir / "reports")])
        assert code == EXIT_INPUT
        assert "missing topics" in capsys.readouterr().err

    def test_bundled_labels_require_twenty_topics(self, pipeline_dir, capsys):
        run_harvest(pipeline_dir, "--min-active", "0")
        run_fit(pipeline_dir)  # 4 topics
        code = main(["report", "--snapshot", str(pipeline_dir / "model.json"),
                     "--out-dir", str(pipeline_dir / "reports")])
        assert code == EXIT_INPUT
        assert "bundled label map" in capsys.readouterr().err

    def test_single_topic_weight_is_one(self, pipeline_dir):
        run_harvest(pipeline_dir, "--min-active", "0")
        main(["fit", "--posts", str(pipeline_dir / "posts.jsonl"),
              "--out", str(pipeline_dir / "model.json"),
              "--topics", "1", "--sweeps", "5", "--burn-in", "1", "--seed", "1"])
        labels = pipeline_dir / "one.csv"
        labels.write_text("topic,label,category\n0,everything,Book\n")
        main(["report", "--snapshot", str(pipeline_dir / "model.json"),
              "--labels", str(labels), "--out-dir", str(pipeline_dir / "reports")])
        rows = (pipeline_dir / "reports" / "topic_weights.csv").read_text().splitlines()
        assert len(rows) == 2
        assert rows[1].split(",")[4] == "1.0"  # nwt column


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_override(self, pipeline_dir):
        config = pipeline_dir / "config.json"
        config.write_text(json.dumps({
            "paths": {"manifest": str(pipeline_dir / "manifest.csv"),
                      "replay_dir": str(pipeline_dir / "replay"),
                      "posts": str(pipeline_dir / "posts.jsonl")},
            "lda": {"seed": 7, "n_topics": 3, "sweeps": 10, "burn_in": 2},
            "min_active_posts": 0,
        }))
        assert main(["--config", str(config), "harvest"]) == EXIT_OK
        assert main(["--config", str(config), "fit",
                     "--out", str(pipeline_dir / "model.json")]) == EXIT_OK
        model = load_snapshot(pipeline_dir / "model.json")
        assert model.seed == 7 and model.n_topics == 3

        assert main(["--config", str(config), "fit",
                     "--out", str(pipeline_dir / "model.json"),
                     "--seed", "99"]) == EXIT_OK
        assert load_snapshot(pipeline_dir / "model.json").seed == 99

    def test_unknown_config_key_rejected(self, pipeline_dir, capsys):
        config = pipeline_dir / "config.json"
        config.write_text('{"bogus": 1}')
        code = main(["--config", str(config), "stats",
                     "--posts", "x", "--manifest", "y"])
        assert code == EXIT_INPUT
        assert "bogus" in capsys.readouterr().err


class TestEntryPoint:
    def test_module_invocation(self, pipeline_dir):
        result = subprocess.run(
            [sys.executable, "-m", "topicmine", "harvest",
             "--manifest", str(pipeline_dir / "manifest.csv"),
             "--replay-dir", str(pipeline_dir / "replay"),
             "--out", str(pipeline_dir / "posts.jsonl"), "--min-active", "0"],
            capture_output=True, text=True)
        assert result.returncode == EXIT_OK, result.stderr
        assert "3 fetched" in result.stdout

    def test_usage_error_exit_code(self):
        result = subprocess.run([sys.executable, "-m", "topicmine", "frobnicate"],
                                capture_output=True, text=True)
        assert result.returncode == EXIT_INPUT
