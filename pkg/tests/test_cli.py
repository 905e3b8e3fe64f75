import json

from fieldimpact.cli import dispatch
from fieldimpact.synth import build_world_spec


def args_corpus(files, *extra):
    return [
        "--pubs", str(files["pubs"]),
        "--journals", str(files["journals"]),
        "--orgs", str(files["orgs"]),
        "--fields", str(files["fields"]),
        *extra,
    ]


class TestValidate:
    def test_valid_fixture(self, tiny_corpus_files, capsys):
        code = dispatch(["validate", *args_corpus(tiny_corpus_files)])
        assert code == 0
        assert capsys.readouterr().out.strip() == "3 records, 0 diagnostics"

    def test_invalid_corpus_exits_one_with_diagnostics(self, tiny_corpus_files, capsys):
        bad = tiny_corpus_files["dir"] / "bad.jsonl"
        bad.write_text('{"id": "x", "year": 2003}\n', encoding="utf-8")
        files = dict(tiny_corpus_files, pubs=bad)
        code = dispatch(["validate", *args_corpus(files)])
        assert code == 1
        err = capsys.readouterr().err
        assert "validation failed" in err

    def test_missing_required_flag_is_usage_error(self, capsys):
        assert dispatch(["validate"]) == 2
        assert "--pubs" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self, tiny_corpus_files, capsys):
        assert dispatch(["validate", "--bogus", "x"]) == 2

    def test_unknown_subcommand_is_usage_error(self):
        assert dispatch(["frobnicate"]) == 2

    def test_nonexistent_input_is_usage_error(self, tiny_corpus_files, capsys):
        files = dict(tiny_corpus_files, pubs=tiny_corpus_files["dir"] / "nope.jsonl")
        assert dispatch(["validate", *args_corpus(files)]) == 2

    def test_version(self, capsys):
        assert dispatch(["--version"]) == 0


class TestReconcileCmd:
    def test_writes_outputs_and_match_rate(self, tiny_corpus_files, tmp_path, capsys):
        out = tmp_path / "out"
        code = dispatch(
            ["reconcile", *args_corpus(tiny_corpus_files),
             "--rules", str(tiny_corpus_files["rules"]), "--out-dir", str(out)]
        )
        assert code == 0
        assert (out / "publications.reconciled.jsonl").exists()
        assert (out / "unmatched.csv").exists()
        assert "match rate 100.0%" in capsys.readouterr().out

    def test_thread_flag_output_invariant(self, tiny_corpus_files, tmp_path):
        outs = []
        for threads, sub in (("1", "t1"), ("4", "t4")):
            out = tmp_path / sub
            dispatch(
                ["reconcile", *args_corpus(tiny_corpus_files),
                 "--rules", str(tiny_corpus_files["rules"]),
                 "--out-dir", str(out), "--threads", threads]
            )
            outs.append((out / "publications.reconciled.jsonl").read_bytes())
        assert outs[0] == outs[1]


class TestBenchmarkCmd:
    def test_writes_three_tables(self, tiny_corpus_files, tmp_path):
        out = tmp_path / "bm"
        code = dispatch(["benchmark", *args_corpus(tiny_corpus_files), "--out-dir", str(out)])
        assert code == 0
        assert (out / "xcr.csv").read_text().startswith("year,field_id,n,xcr")
        assert (out / "jxcr.csv").read_text().startswith("year,journal_id,n,jxcr")
        assert (out / "top_journals.csv").read_text().startswith("field_id,journal_id")


class TestIndicatorsCmd:
    def test_writes_csv_and_json_mirror(self, tiny_corpus_files, tmp_path):
        out = tmp_path / "ind"
        code = dispatch(
            ["indicators", *args_corpus(tiny_corpus_files),
             "--slice", "discipline,year", "--out-dir", str(out)]
        )
        assert code == 0
        csv_path = out / "indicators_discipline_year.csv"
        json_path = out / "indicators_discipline_year.json"
        assert csv_path.read_text().splitlines()[0] == (
            "discipline,year,weight,n_excluded,mean_cx,top_share_pct,mean_cjx"
        )
        assert json.loads(json_path.read_text())

    def test_org_slice_needs_rules_or_attributions(self, tiny_corpus_files, tmp_path, capsys):
        code = dispatch(
            ["indicators", *args_corpus(tiny_corpus_files), "--slice", "org",
             "--out-dir", str(tmp_path)]
        )
        assert code == 2
        assert "rules" in capsys.readouterr().err


class TestRankCmd:
    def rank_args(self, files, *extra):
        return [
            "rank", *args_corpus(files), "--rules", str(files["rules"]),
            "--metric", "mean_cx", "--min-weight", "0", "--limit", "10", *extra,
        ]

    def test_table_shape_on_stdout(self, tiny_corpus_files, capsys):
        code = dispatch(self.rank_args(tiny_corpus_files, "--out", "-"))
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "entity,weight,mean_cx,top_share_pct,mean_cjx"
        assert len(lines) == 3  # two organizations

    def test_min_weight_threshold_respected(self, tiny_corpus_files, capsys):
        code = dispatch(
            ["rank", *args_corpus(tiny_corpus_files), "--rules", str(tiny_corpus_files["rules"]),
             "--metric", "mean_cx", "--min-weight", "50", "--limit", "10", "--out", "-"]
        )
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 1  # header only: no entity reaches 50 publications

    def test_rerun_identical_output_files(self, tiny_corpus_files, tmp_path):
        paths = []
        for name in ("r1.csv", "r2.csv"):
            target = tmp_path / name
            dispatch(self.rank_args(tiny_corpus_files, "--out", str(target)))
            paths.append(target.read_bytes())
        assert paths[0] == paths[1]

    def test_default_filename_template(self, tiny_corpus_files, tmp_path):
        out = tmp_path / "ranked"
        code = dispatch(self.rank_args(tiny_corpus_files, "--out-dir", str(out)))
        assert code == 0
        produced = list(out.glob("org_mean_cx_*.csv"))
        assert len(produced) == 1

    def test_discipline_filter(self, tiny_corpus_files, capsys):
        code = dispatch(self.rank_args(tiny_corpus_files, "--discipline", "Biology", "--out", "-"))
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        # Only p3 is in Biology (field F2), attributed half to A and half to B.
        assert len(lines) == 3
        assert all(line.split(",")[1] == "0.5" for line in lines[1:])

    def test_config_file_with_flag_override(self, tiny_corpus_files, tmp_path, capsys):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "pubs": str(tiny_corpus_files["pubs"]),
            "journals": str(tiny_corpus_files["journals"]),
            "orgs": str(tiny_corpus_files["orgs"]),
            "fields": str(tiny_corpus_files["fields"]),
            "rules": str(tiny_corpus_files["rules"]),
            "min_weight": 50,
            "limit": 10,
            "out": "-",
        }), encoding="utf-8")
        code = dispatch(["rank", "--config", str(config)])
        assert code == 0
        assert len(capsys.readouterr().out.splitlines()) == 1  # config threshold bites
        code = dispatch(["rank", "--config", str(config), "--min-weight", "0"])
        assert code == 0
        assert len(capsys.readouterr().out.splitlines()) == 3  # flag wins over config


class TestTrendCmd:
    def test_writes_trend_csv(self, tiny_corpus_files, tmp_path, capsys):
        out = tmp_path / "tr"
        code = dispatch(
            ["trend", *args_corpus(tiny_corpus_files), "--slice", "nation",
             "--metrics", "mean_cx,weight", "--out-dir", str(out)]
        )
        assert code == 0  # single year: growth undefined, rows skipped with a note
        err = capsys.readouterr().err
        assert "skipped" in err
        assert (out / "trend_nation.csv").exists()


class TestSynthCmds:
    def test_synth_generates_from_spec_file(self, tmp_path, capsys):
        spec = build_world_spec(3, n_fields=2, annual_volume=20, n_orgs=3, years=(2001, 2001))
        spec_path = tmp_path / "synth.spec"
        spec_path.write_text(json.dumps(spec.to_dict()), encoding="utf-8")
        out = tmp_path / "world"
        code = dispatch(["synth", "--spec", str(spec_path), "--out-dir", str(out)])
        assert code == 0
        assert (out / "publications.jsonl").exists()
        assert (out / "synth.meta.json").exists()
        assert dispatch(["validate",
                         "--pubs", str(out / "publications.jsonl"),
                         "--journals", str(out / "journals.csv"),
                         "--orgs", str(out / "orgs.csv"),
                         "--fields", str(out / "fieldscheme.csv")]) == 0

    def test_demo_distortion_passes(self, capsys):
        code = dispatch(["demo-distortion"])
        out = capsys.readouterr().out
        assert code == 0
        assert "raw citations-per-publication ratio" in out

    def test_out_dir_env_var(self, tiny_corpus_files, tmp_path, monkeypatch):
        monkeypatch.setenv("FIELDIMPACT_OUT_DIR", str(tmp_path / "envout"))
        code = dispatch(["benchmark", *args_corpus(tiny_corpus_files)])
        assert code == 0
        assert (tmp_path / "envout" / "xcr.csv").exists()
