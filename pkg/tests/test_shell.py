import csv
import io
import json
import math
import subprocess
import sys

import pytest

from wignerframes.shell import EXIT_CONFIG, EXIT_IO, EXIT_OK, SCHEMA_ID, flatten, main

G = 0.1
C = math.cos(math.pi / 3)


@pytest.fixture
def cfg(tmp_path):
    def write(text="[frame]\nbeta = 0\n", name="run.cfg"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return str(p)

    return write


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def csv_fields(text):
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["field", "value"]
    return dict(rows[1:])


class TestRun:
    def test_exact_frame_r(self, capsys, cfg):
        code, out, _ = run(capsys, "run", cfg(), "--exact")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["schema"] == SCHEMA_ID
        ex = doc["exact"]
        assert ex["convention"] == "unnormalized"
        assert ex["jointMomentUnnormalized"] == pytest.approx(G**2 / 4 * (1 + C * C), abs=1e-15)
        assert doc["closed_form"]["value"] == pytest.approx(ex["jointMomentUnnormalized"], abs=1e-15)
        assert doc["monte_carlo"] is None
        assert "coupling.g" in doc["defaulted"] and doc["config"]["coupling"]["g"] == G
        assert doc["seed"] == 1 and "Philox" in doc["rng"]

    def test_inverted_frame_reports_both_constants(self, capsys, cfg):
        code, out, _ = run(capsys, "run", cfg("[frame]\nbeta = 0.2\n"))
        cf = json.loads(out)["closed_form"]
        assert code == EXIT_OK
        assert cf["k"] == 0.25 and cf["alternative"]["k"] == 1.0
        assert cf["value"] == pytest.approx(G**2 * C * C / 4)

    def test_mc_byte_identical(self, capsys, cfg, tmp_path):
        path = cfg()
        outs = []
        for i in range(2):
            target = tmp_path / f"out{i}.json"
            code, _, _ = run(capsys, "run", path, "--mc", "--trials", 100000, "--seed", 7, "--out", target)
            assert code == EXIT_OK
            outs.append(target.read_bytes())
        assert outs[0] == outs[1]
        mc = json.loads(outs[0])["monte_carlo"]
        assert mc["trials"] == 100000 and mc["seed"] == 7
        assert mc["jointMomentUnnormalized"]["n"] == 100000
        assert mc["jointMomentUnnormalized"]["se"] > 0
        assert json.loads(outs[0])["exact"] is None

    def test_workers_do_not_change_output(self, capsys, cfg, monkeypatch):
        path = cfg()
        _, a, _ = run(capsys, "run", path, "--mc", "--trials", 140000, "--workers", 1)
        monkeypatch.setenv("WIGNERFRAMES_WORKERS", "3")
        _, b, _ = run(capsys, "run", path, "--mc", "--trials", 140000)
        assert a == b

    def test_csv_and_json_agree(self, capsys, cfg):
        path = cfg("[frame]\nbeta = 0.2\n[runs]\ntrials = 5000\n")
        _, js, _ = run(capsys, "run", path, "--exact", "--mc", "--format", "json")
        _, cs, _ = run(capsys, "run", path, "--exact", "--mc", "--format", "csv")
        assert "\r" not in cs
        fields = csv_fields(cs)
        leaves = dict(flatten(json.loads(js)))
        assert set(fields) == set(leaves)
        numeric = 0
        for key, v in leaves.items():
            if isinstance(v, float):
                assert float(fields[key]) == v, key
                numeric += 1
            elif v is None:
                assert fields[key] == "null"
        assert numeric > 30

    def test_malformed_config(self, capsys, cfg):
        code, out, err = run(capsys, "run", cfg("[coupling]\ng = = 1\n"))
        assert code == EXIT_CONFIG
        assert out == "" and "line 2" in err

    def test_range_error(self, capsys, cfg):
        code, _, err = run(capsys, "run", cfg("[frame]\nbeta = 1.5\n"))
        assert code == EXIT_CONFIG and "frame.beta" in err

    def test_missing_file(self, capsys, tmp_path):
        code, out, err = run(capsys, "run", tmp_path / "absent.cfg")
        assert code == EXIT_IO and out == "" and "I/O" in err

    def test_unwritable_output(self, capsys, cfg, tmp_path):
        code, _, _ = run(capsys, "run", cfg(), "--out", tmp_path / "no" / "dir" / "x.json")
        assert code == EXIT_IO

    def test_module_entry_point(self, cfg):
        proc = subprocess.run(
            [sys.executable, "-m", "wignerframes", "run", cfg(), "--exact"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["exact"]["successProb"] == pytest.approx(0.3125)


class TestCompareFrames:
    def test_unitary_weak(self, capsys, cfg):
        code, out, _ = run(capsys, "compare-frames", cfg(), "--beta-list", "0", "0.2", "0.5")
        assert code == EXIT_OK
        pairs = {(p["beta_a"], p["beta_b"]): p for p in json.loads(out)["pairs"]}
        assert pairs[(0.2, 0.5)]["momentDifference"] == 0
        assert not pairs[(0.2, 0.5)]["frame_dependent"]
        for key in ((0.0, 0.2), (0.0, 0.5)):
            assert pairs[key]["momentDifference"] == pytest.approx(G**2 / 4, abs=1e-15)
            assert pairs[key]["frame_dependent"]

    def test_comma_list(self, capsys, cfg):
        _, a, _ = run(capsys, "compare-frames", cfg(), "--beta-list", "0,0.2")
        _, b, _ = run(capsys, "compare-frames", cfg(), "--beta-list", "0", "0.2")
        assert a == b

    def test_collapse(self, capsys, cfg):
        path = cfg("[mode]\ninterpretation = objective_collapse\n")
        _, out, _ = run(capsys, "compare-frames", path, "--beta-list", "0", "0.2", "0.5")
        for p in json.loads(out)["pairs"]:
            assert p["maxFieldDifference"] <= 1e-12 and not p["frame_dependent"]

    def test_projective_records(self, capsys, cfg):
        path = cfg("[mode]\nscheme = projective\n")
        _, out, _ = run(capsys, "compare-frames", path, "--beta-list", "0", "0.2")
        rest, moving = (f["exact"] for f in json.loads(out)["frames"])
        z = rest["friendRecordDistribution"]
        x = moving["friendRecordDistribution"]
        assert z["z+"] + z["z-"] == pytest.approx(1) and rest["pQ1MatchesRecord"] == pytest.approx(1)
        assert x["x+"] + x["x-"] == pytest.approx(1) and moving["pQ2MatchesRecord"] == pytest.approx(1)

    @pytest.mark.parametrize("betas", [["0.1"], ["0", "1.0"], ["zero"]])
    def test_rejected(self, capsys, cfg, betas):
        code, _, err = run(capsys, "compare-frames", cfg(), "--beta-list", *betas)
        assert code == EXIT_CONFIG and err


class TestSignalling:
    def test_inverted(self, capsys, cfg):
        code, out, _ = run(capsys, "signalling-test", cfg("[frame]\nbeta = 0.2\n"))
        s = json.loads(out)["signalling"]
        assert code == EXIT_OK
        assert s["difference"] == pytest.approx(G**2 / 4, abs=1e-15) and s["signalling"] is True
        assert abs(s["control"]["difference"]) <= 1e-12 and s["control"]["signalling"] is False

    def test_no_inversion(self, capsys, cfg):
        code, _, err = run(capsys, "signalling-test", cfg("[frame]\nbeta = 0.05\n"))
        assert code == EXIT_CONFIG and "no ordering inversion" in err


class TestSweep:
    def test_n3(self, capsys, cfg):
        code, out, _ = run(capsys, "sweep", cfg("[frame]\nbeta = 0.2\n"), "--theta-grid", 3)
        assert code == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 9
        assert list(rows[0]) == ["theta1", "theta2", "moment_R", "moment_Rprime", "difference"]
        first = rows[0]
        assert float(first["theta1"]) == float(first["theta2"]) == 0
        assert float(first["moment_R"]) == pytest.approx(G**2 / 2, abs=1e-15)
        mid = rows[4]
        assert float(mid["theta1"]) == float(mid["theta2"]) == math.pi / 2
        assert float(mid["moment_R"]) == pytest.approx(G**2 / 4, abs=1e-15)
        assert abs(float(mid["moment_Rprime"])) <= 1e-15
        diffs = [float(r["difference"]) for r in rows]
        assert max(diffs) - min(diffs) <= 1e-12

    def test_default_beta_prime(self, capsys, cfg):
        _, out, _ = run(capsys, "sweep", cfg(), "--theta-grid", 2, "--format", "json")
        doc = json.loads(out)
        assert doc["beta_Rprime"] == pytest.approx(0.55)
        assert len(doc["table"]["rows"]) == 4

    def test_mc_columns(self, capsys, cfg):
        _, out, _ = run(capsys, "sweep", cfg(), "--theta-grid", 2, "--mc", "--trials", 2000)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert float(rows[0]["mc_R_se"]) > 0 and rows[0]["mc_trials"] == "2000"

    def test_small_grid(self, capsys, cfg):
        code, _, _ = run(capsys, "sweep", cfg(), "--theta-grid", 1)
        assert code == EXIT_CONFIG


class TestValidateGeometry:
    def test_default(self, capsys, cfg):
        code, out, _ = run(capsys, "validate-geometry", cfg())
        assert code == EXIT_OK
        assert out.splitlines()[-1] == "beta* = 0.1"
        assert out.count("PASS") == 4

    def test_json(self, capsys, cfg):
        _, out, _ = run(capsys, "validate-geometry", cfg(), "--format", "json")
        assert json.loads(out)["geometry"]["beta_star"] == 0.1

    @pytest.mark.parametrize(
        "text, failing",
        [
            ("[geometry]\nx_a = 0.5\n", "emission_alice_spacelike"),
            ("[geometry]\nt0 = 0.6\nt1 = 0.2\n", "rest_frame_ordering"),
            ("[geometry]\nx1 = 3\n", "lab_colocated"),
        ],
    )
    def test_failures(self, capsys, cfg, text, failing):
        code, out, _ = run(capsys, "validate-geometry", cfg(text))
        assert code == EXIT_CONFIG
        assert f"FAIL {failing}" in out
