import json

import numpy as np
import pytest

from spdc import cli
from spdc.io import read_csv

SMALL = {
    "crystal": {"length": 0.5e-3},
    "grid": {"n_points": 120},
}
CLUSTER = {"phase": {"n_scan": 180, "sweeps": 2, "n_starts": 4}}


def run(tmp_path, command, cfg, name="out", extra=()):
    cfg_path = tmp_path / f"{name}.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = cli.run([command, "--config", str(cfg_path), "--out", str(out), *extra])
    return code, out


def load(out, name="summary.json"):
    return json.loads((out / name).read_text())


class TestPhaseMatch:
    def test_default(self, tmp_path):
        code, out = run(tmp_path, "phase-match", {})
        assert code == 0
        s = load(out)
        assert s["theta_rad"] == pytest.approx(2.63214, abs=1e-3)
        assert s["residual"] < 1e-10
        header, rows = read_csv(out / "indices.csv")
        assert header[0] == "wavelength_m" and len(rows) == 2

    def test_other_wavelength(self, tmp_path):
        code, out = run(tmp_path, "phase-match", {"crystal": {"pump_wavelength": 400e-9}})
        assert code == 0 and load(out)["residual"] < 1e-10

    def test_not_phase_matchable(self, tmp_path, capsys):
        code, _ = run(tmp_path, "phase-match", {"crystal": {"pump_wavelength": 10e-6}})
        assert code != 0
        assert "not phase-matchable" in capsys.readouterr().err

    def test_manifest(self, tmp_path):
        code, out = run(tmp_path, "phase-match", {"seed": 5})
        m = load(out, "manifest.json")
        assert m["command"] == "phase-match" and m["seed"] == 5
        assert m["config"]["crystal"]["material"] == "BiBO"
        assert m["version"].startswith("spdc ")
        assert set(m["outputs"]) == {"indices", "summary"}


class TestSupermodes:
    def test_outputs(self, tmp_path):
        code, out = run(tmp_path, "supermodes", SMALL)
        assert code == 0
        s = load(out)
        assert s["leading_db"] == pytest.approx(7.0, abs=1e-9)
        header, rows = read_csv(out / "gains.csv")
        gains = np.array(rows)[:, 1]
        assert np.all(np.diff(gains) <= 0)
        header, rows = read_csv(out / "supermodes.csv")
        assert header[:4] == ["omega_rad_s", "wavelength_m", "amp_1", "phase_1"]
        assert len(rows) == 120

    def test_identity_shaper_matches_no_shaper(self, tmp_path):
        _, a = run(tmp_path, "supermodes", SMALL, "a")
        _, b = run(tmp_path, "supermodes", dict(SMALL, shaper={}), "b")
        for name in ("gains.csv", "supermodes.csv"):
            assert (a / name).read_text() == (b / name).read_text()
        assert load(b)["power_weight"] == 1.0

    def test_gaussian_1p5mm_mode_count(self, tmp_path):
        code, out = run(tmp_path, "supermodes", {"grid": {"n_points": 200}})
        assert abs(load(out)["n_above_0p9"] - 30) <= 8

    def test_rerun_from_manifest(self, tmp_path):
        _, a = run(tmp_path, "supermodes", SMALL, "a")
        out_b = tmp_path / "b"
        assert cli.run(["supermodes", "--config", str(a / "manifest.json"), "--out", str(out_b)]) == 0
        for name in ("gains.csv", "supermodes.csv", "summary.json"):
            assert (a / name).read_text() == (out_b / name).read_text()


class TestChirpScan:
    def test_scan(self, tmp_path):
        code, out = run(tmp_path, "chirp-scan", dict(SMALL, chirp_scan={"stretches": [1.0, 2.0, 3.0], "top": 5}))
        assert code == 0
        s = load(out)
        assert s["total_chirped_rel_spread"] < 1e-10 and s["total_unchirped_increasing"]
        _, rows = read_csv(out / "chirp_scan.csv")
        assert rows[0][2] == pytest.approx(1.0)
        _, rows = read_csv(out / "chirp_gains.csv")
        assert len(rows) == 15

    def test_missing_block(self, tmp_path, capsys):
        code, _ = run(tmp_path, "chirp-scan", SMALL)
        assert code == 2
        assert "chirp_scan" in capsys.readouterr().err


class TestCluster:
    def test_paper_defaults(self, tmp_path):
        cfg = {"crystal": {"length": 0.5e-3}, "grid": {"n_points": 200}, "cluster": CLUSTER}
        code, out = run(tmp_path, "cluster", cfg)
        assert code == 0
        s = load(out)
        assert s["best_permutation"] == [0, 3, 1, 2]
        assert s["trivial_mean_variance"] == pytest.approx(0.49, abs=0.05)
        assert s["best_mean_variance"] == pytest.approx(0.29, abs=0.05)
        _, rows = read_csv(out / "permutations.csv")
        assert len(rows) == 24

    def test_fixed_permutation(self, tmp_path):
        cfg = {"crystal": {"length": 0.5e-3}, "grid": {"n_points": 200},
               "cluster": dict(CLUSTER, permutation=[0, 1, 2, 3])}
        code, out = run(tmp_path, "cluster", cfg)
        assert code == 0
        assert not (out / "permutations.csv").exists()
        s = load(out)
        assert s["best_mean_variance"] == pytest.approx(s["trivial_mean_variance"])

    def test_band_count_mismatch(self, tmp_path):
        cfg = dict(SMALL, cluster=dict(CLUSTER, graph={"n_nodes": 3, "edges": [[0, 1], [1, 2]]}))
        code, _ = run(tmp_path, "cluster", cfg)
        assert code == 2


class TestSqueezingScan:
    def test_vacuum_first_row(self, tmp_path):
        cfg = {"crystal": {"length": 0.5e-3}, "grid": {"n_points": 200}, "cluster": CLUSTER,
               "squeezing_scan": {"db_values": [0.0, 7.0, 18.0]}}
        code, out = run(tmp_path, "squeezing-scan", cfg)
        assert code == 0
        _, rows = read_csv(out / "squeezing_scan.csv")
        assert rows[0][2] == pytest.approx(0.5, abs=1e-14)
        s = load(out)
        assert s["dips_below"] and s["rises_above"]


class TestOptimize:
    def cfg(self, **fitness):
        return dict(SMALL, optimize={"fitness": {"kind": "gap_f2_bar", **fitness},
                                     "evo": {"max_generations": 4}})

    def test_reproducible(self, tmp_path):
        _, a = run(tmp_path, "optimize", self.cfg(), "a", ["--seed", "3"])
        _, b = run(tmp_path, "optimize", self.cfg(), "b", ["--seed", "3"])
        assert load(a)["best_value"] == load(b)["best_value"]
        assert (a / "history.csv").read_text() == (b / "history.csv").read_text()
        assert load(a, "manifest.json")["seed"] == 3

    def test_outputs(self, tmp_path):
        code, out = run(tmp_path, "optimize", self.cfg())
        assert code == 0
        s = load(out)
        assert s["best_value"] >= s["start_value"]
        header, rows = read_csv(out / "best_profile.csv")
        assert header == ["control", "omega_rad_s", "amplitude", "phase"] and len(rows) == 32
        assert all(0 <= r[3] < 2 * np.pi for r in rows)
        _, rows = read_csv(out / "history.csv")
        assert len(rows) == 4

    def test_nullifier_fitness(self, tmp_path):
        cfg = {"crystal": {"length": 0.5e-3}, "grid": {"n_points": 200}, "cluster": CLUSTER,
               "shaper": {"window_sigmas": 2.0},
               "optimize": {"fitness": {"kind": "nullifier_f3_bar"},
                            "evo": {"max_generations": 2, "amplitude_scale": 0.1}}}
        code, out = run(tmp_path, "optimize", cfg)
        assert code == 0
        s = load(out)
        assert s["improvement_db"] >= 0.0 and len(s["nullifier_variances"]) == 4

    def test_nullifier_needs_cluster(self, tmp_path):
        cfg = dict(SMALL, optimize={"fitness": {"kind": "nullifier_f3"}})
        assert run(tmp_path, "optimize", cfg)[0] == 2

    def test_bad_fitness(self, tmp_path):
        assert run(tmp_path, "optimize", self.cfg(kind="bogus"))[0] == 2


def test_negative_seed(tmp_path):
    assert run(tmp_path, "phase-match", {}, extra=["--seed", "-1"])[0] == 2


def test_unknown_command():
    with pytest.raises(SystemExit):
        cli.run(["fly"])
