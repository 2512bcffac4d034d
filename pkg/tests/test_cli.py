import csv
import io
import json
from fractions import Fraction

import pytest

from lookdown.cli import main, parse_config, run
from lookdown.core import BUDGET_ENV
from lookdown.errors import ParseError, ValidationError


def _run(doc, tmp_path, name="out"):
    out = tmp_path / name
    status = run(parse_config(json.dumps(doc)), out)
    return status, out, json.loads((out / "manifest.json").read_text())


class TestParseConfig:
    def test_coalescent_example(self):
        cfg = parse_config('{"command":"coalescent","family":{"kind":"moran","N":10},"cap":100}')
        assert cfg.command == "coalescent"
        assert cfg.spec().X == (10,) * 101
        assert cfg.seed == 0 and cfg.n == 0

    def test_missing_command(self):
        with pytest.raises(ValidationError) as exc:
            parse_config('{"family":{"kind":"moran","N":10}}')
        assert exc.value.field == "command"

    def test_pmf_rationals(self):
        cfg = parse_config('{"command":"gw-spine","pmf":["1/2","0","1/2"]}')
        assert cfg.model["pmf"] == [Fraction(1, 2), 0, Fraction(1, 2)]

    def test_bad_pmf(self):
        with pytest.raises(ValidationError) as exc:
            parse_config('{"command":"gw-spine","pmf":["1/2","1/3"]}')
        assert exc.value.field == "pmf"

    def test_parse_error_location(self):
        with pytest.raises(ParseError) as exc:
            parse_config('{\n  "command": "sample",\n  oops\n}')
        assert exc.value.line == 3 and exc.value.column == 3

    @pytest.mark.parametrize(
        "doc,field",
        [
            ({"command": "nope", "X": [1]}, "command"),
            ({"command": "sample", "X": [1], "alpha": 2}, "alpha"),
            ({"command": "sample", "X": [1], "reps": 0}, "reps"),
            ({"command": "sample", "X": [1], "grid": [1, -1]}, "grid"),
            ({"command": "sample", "X": [1], "sampler": "x"}, "sampler"),
            ({"command": "sample"}, "family"),
        ],
    )
    def test_field_named(self, doc, field):
        with pytest.raises(ValidationError) as exc:
            parse_config(json.dumps(doc))
        assert exc.value.field == field

    def test_manifest_round_trip(self):
        doc = {"command": "coalescent", "family": {"kind": "moran", "N": 4}, "cap": 3, "extra": 1}
        m = parse_config(json.dumps(doc)).to_manifest()
        assert m["document"] == doc
        assert m["options"]["extra"] == 1 and m["reps"] > 0


class TestRun:
    def test_verify_neutrality(self, tmp_path):
        doc = {"command": "verify-neutrality", "X": [2, 3, 3], "litters": [[2, 1], [2, 1, 0]]}
        status, out, man = _run(doc, tmp_path)
        assert status == 0
        assert man["summary"]["method"] == "exact" and man["summary"]["exact_equality"] is True
        rows = list(csv.reader(io.StringIO((out / "neutrality.csv").read_text())))
        assert rows[0] == ["canonical_form", "forward", "lookdown", "completely-neutral"]
        assert all(r[1] == r[2] == r[3] for r in rows[1:])
        assert sum(Fraction(r[1]) for r in rows[1:]) == 1

    def test_budget_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv(BUDGET_ENV, "5")
        doc = {"command": "verify-neutrality", "X": [2, 3, 3], "litters": [[2, 1], [2, 1, 0]], "reps": 300}
        status, _, man = _run(doc, tmp_path)
        assert man["summary"]["method"] == "chi-square"
        assert man["enumeration_budget"] == 5
        assert status in (0, 1)

    def test_identify_base_columns(self, tmp_path):
        doc = {"command": "identify-base", "family": {"kind": "moran", "N": 10}, "cap": 40, "grid": [0, 10, 20], "reps": 100}
        status, out, _ = _run(doc, tmp_path)
        rows = list(csv.reader(io.StringIO((out / "identify_base.csv").read_text())))
        assert status == 0
        assert rows[0] == ["n", "t_n", "rho_hat", "se"]
        assert [r[0] for r in rows[1:]] == ["0", "10", "20"]

    def test_fixation_doubling(self, tmp_path):
        doc = {"command": "fixation", "family": {"kind": "asynchronous", "X0": 1, "b": "double"}, "cap": 12, "n": 1, "reps": 100}
        status, out, man = _run(doc, tmp_path)
        assert status == 0
        assert man["summary"]["events"] == 0
        rows = list(csv.reader(io.StringIO((out / "fixation.csv").read_text())))
        assert all(r[1] == "none" for r in rows[1:])

    def test_sbo_check(self, tmp_path):
        doc = {"command": "sbo-check", "X": [2, 3, 3], "litters": [[2, 1], [2, 1, 0]]}
        status, _, man = _run(doc, tmp_path)
        t = man["summary"]["test"]
        assert status == 0 and t["kind"] == "exact" and t["statistic"] == "0/1"

    def test_coalescent_check(self, tmp_path):
        doc = {"command": "coalescent", "family": {"kind": "moran", "N": 4}, "cap": 3, "reps": 2000, "check": {"n": 0, "m": 3}}
        status, out, man = _run(doc, tmp_path)
        assert status == 0
        assert man["summary"]["check"]["exact"] == "91/216"
        assert (out / "scale.csv").read_text().splitlines()[-2:] == ["2,1/6,1/3,1/6,1/3", "3,,1/2,,1/2"]

    def test_gw_spine(self, tmp_path):
        doc = {"command": "gw-spine", "pmf": ["1/2", "0", "1/2"], "cap": 2}
        status, _, man = _run(doc, tmp_path)
        assert status == 0 and man["summary"]["diagnostics"]["regime"] == "fixation"

    def test_rank_recovery(self, tmp_path):
        doc = {"command": "rank-recovery", "family": {"kind": "moran", "N": 4}, "cap": 40, "reps": 20}
        status, _, man = _run(doc, tmp_path)
        assert status == 0 and man["summary"]["monotone_in_every_replicate"]

    def test_sample(self, tmp_path):
        doc = {"command": "sample", "family": {"kind": "moran", "N": 4}, "cap": 5, "sampler": "lookdown", "seed": 3}
        status, out, _ = _run(doc, tmp_path)
        assert status == 0
        assert (out / "genealogy.txt").exists() and (out / "descendants.csv").exists()

    @pytest.mark.parametrize(
        "doc",
        [
            {"command": "sample", "family": {"kind": "moran", "N": 5}, "cap": 8, "seed": 7},
            {"command": "identify-base", "family": {"kind": "moran", "N": 5}, "cap": 20, "grid": [0, 5], "reps": 100, "seed": 7},
        ],
    )
    def test_byte_identical_rerun(self, tmp_path, doc):
        _, a, ma = _run(doc, tmp_path, "a")
        _, b, mb = _run(doc, tmp_path, "b")
        for name in ma["outputs"]:
            assert (a / name).read_bytes() == (b / name).read_bytes()
        assert ma["summary"] == mb["summary"]


class TestMain:
    def test_bad_config_exit_2(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text('{"seed": 1}')
        assert main([str(p)]) == 2
        assert "command" in capsys.readouterr().err

    def test_seed_override(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"command": "sample", "family": {"kind": "moran", "N": 4}, "cap": 3}))
        assert main([str(p), "--seed", "9", "--out", str(tmp_path / "o"), "--threads", "1"]) == 0
        man = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert man["config"]["seed"] == 9

    def test_missing_file(self, tmp_path):
        assert main([str(tmp_path / "none.json")]) == 2
