import csv
import json
from pathlib import Path

import numpy as np
import pytest

from cvfade.cli import main

REPO = Path(__file__).resolve().parent.parent
SCENARIOS = REPO / "scenarios"

BEAM_DOC = {
    "seed": 11,
    "protocol": {"family": "coherent", "v_m": 3.0, "beta": 0.95},
    "channel": {
        "eta1_db": -3.0,
        "eps2": 0.01,
        "fading": {
            "beam": {
                "wavelength": 1.55e-6, "w0": 0.04, "aperture": 0.02,
                "distance": 1500.0, "sigma_r2": 0.25, "n_samples": 4000,
            }
        },
    },
}


def write_cfg(tmp_path, doc, name="cfg.scenario"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def read_rows(path):
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


class TestSimulateCommand:
    def test_writes_csv_and_sidecar(self, tmp_path):
        cfg = write_cfg(tmp_path, BEAM_DOC)
        out = tmp_path / "etas.csv"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--n", "500"]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# metadata: ")
        assert lines[1] == "eta"
        assert len(lines) == 2 + 500
        sidecar = json.loads((tmp_path / "etas.csv.json").read_text())
        assert sidecar["seed"] == 11
        assert sidecar["generator"] == "philox"
        assert sidecar["n"] == 500
        assert sidecar["coefficient_table_version"]

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, BEAM_DOC)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--config", cfg, "--out", str(a), "--n", "2000"])
        main(["simulate", "--config", cfg, "--out", str(b), "--n", "2000", "--jobs", "4"])
        assert a.read_bytes() == b.read_bytes()

    def test_malformed_config_exits_2_without_output(self, tmp_path):
        bad = tmp_path / "bad.scenario"
        bad.write_text('{"channel": {"fading": {}}, "unknown": 1')
        out = tmp_path / "x.csv"
        assert main(["simulate", "--config", str(bad), "--out", str(out)]) == 2
        assert not out.exists()

    def test_stats_fading_config_rejected(self, tmp_path):
        doc = {"protocol": {"family": "coherent"}, "channel": {"fading": {"stats": {"mean_eta": 0.5}}}}
        cfg = write_cfg(tmp_path, doc)
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "y.csv")]) == 2

    def test_missing_distance_exits_2(self, tmp_path):
        doc = json.loads(json.dumps(BEAM_DOC))
        del doc["channel"]["fading"]["beam"]["distance"]
        cfg = write_cfg(tmp_path, doc)
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "z.csv")]) == 2


class TestStatsCommand:
    def make_samples(self, tmp_path, values, name="s.csv"):
        p = tmp_path / name
        p.write_text("eta\n" + "\n".join(str(v) for v in values) + "\n")
        return str(p)

    def test_uniform_grid(self, tmp_path, capsys):
        n = 100_000
        path = self.make_samples(tmp_path, (np.arange(n) + 0.5) / n)
        assert main(["stats", path]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["var_sqrt"] == pytest.approx(1.0 / 18.0, abs=1e-4)
        assert doc["var_sqrt"] == pytest.approx(0.055, abs=1e-3)

    def test_constant_channel(self, tmp_path, capsys):
        path = self.make_samples(tmp_path, [0.7] * 50)
        main(["stats", path])
        doc = json.loads(capsys.readouterr().out)
        assert doc["var_sqrt"] == pytest.approx(0.0, abs=1e-12)

    def test_on_off_channel(self, tmp_path, capsys):
        path = self.make_samples(tmp_path, [0.0, 1.0] * 20)
        main(["stats", path])
        doc = json.loads(capsys.readouterr().out)
        assert doc["var_sqrt"] == pytest.approx(0.25)

    def test_out_file(self, tmp_path):
        path = self.make_samples(tmp_path, [0.5, 0.5])
        out = tmp_path / "st.json"
        main(["stats", path, "--out", str(out)])
        assert json.loads(out.read_text())["n_samples"] == 2

    def test_missing_file_exits_4(self, tmp_path):
        assert main(["stats", str(tmp_path / "absent.csv")]) == 4

    def test_bad_header_exits_2(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("transmission\n0.5\n")
        assert main(["stats", str(p)]) == 2


class TestKeyrateCommand:
    def test_single_row(self, tmp_path):
        doc = {
            "protocol": {"family": "squeezed", "v_s": 0.5, "v_m": 1.5},
            "channel": {"fading": {"stats": {"mean_eta": 1.0}}},
        }
        cfg = write_cfg(tmp_path, doc)
        out = tmp_path / "kr.csv"
        assert main(["keyrate", "--config", cfg, "--out", str(out)]) == 0
        rows = read_rows(out)
        assert len(rows) == 1
        assert float(rows[0]["i_ab"]) == pytest.approx(1.0, abs=1e-9)
        assert float(rows[0]["chi"]) == pytest.approx(0.0, abs=1e-9)

    def test_keyrate_ignores_optimizer_optimize_uses_it(self, tmp_path):
        doc = {
            "protocol": {
                "family": "squeezed", "v_s": 0.9, "v_m": 1.0, "label": "sq",
                "optimizer": {"vs_cap_db": -10.0, "vm_max": 40.0, "grid": [7, 9]},
            },
            "channel": {"fading": {"stats": {"mean_eta": 0.5}}},
        }
        cfg = write_cfg(tmp_path, doc)
        kr, op = tmp_path / "kr.csv", tmp_path / "op.csv"
        main(["keyrate", "--config", cfg, "--out", str(kr)])
        main(["optimize", "--config", cfg, "--out", str(op)])
        assert float(read_rows(kr)[0]["v_m"]) == 1.0
        opt_row = read_rows(op)[0]
        assert float(opt_row["v_m"]) > 1.0
        assert float(opt_row["v_s"]) == pytest.approx(0.1, rel=1e-5)

    def test_trace_flag_writes_sidecar(self, tmp_path):
        doc = {
            "protocol": {
                "family": "coherent", "optimizer": {"vm_max": 20.0, "grid": [3, 5]},
            },
            "channel": {"fading": {"stats": {"mean_eta": 0.8}}},
        }
        cfg = write_cfg(tmp_path, doc)
        out = tmp_path / "o.csv"
        main(["optimize", "--config", cfg, "--out", str(out), "--trace"])
        trace = json.loads((tmp_path / "o.csv.trace.json").read_text())
        assert trace["traces"][0]["evaluations"] > 0


class TestSweepCommand:
    def test_block_size_sweep_monotone(self, tmp_path):
        doc = {
            "protocol": {"family": "squeezed", "v_s": 0.5, "v_m": 2.0, "beta": 0.95},
            "channel": {"fading": {"stats": {"mean_eta": 0.6}}},
            "finite_size": {"n": 1e6},
            "sweep": {"variable": "block_size", "values": [1e4, 1e6, 1e8]},
        }
        cfg = write_cfg(tmp_path, doc)
        out = tmp_path / "sw.csv"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        rates = [float(r["rate_finite"]) for r in read_rows(out)]
        assert rates[0] < rates[1] < rates[2]

    def test_sweep_requires_section(self, tmp_path):
        cfg = write_cfg(tmp_path, {
            "protocol": {"family": "coherent"},
            "channel": {"fading": {"stats": {"mean_eta": 0.5}}},
        })
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2

    def test_distance_sweep_requires_beam(self, tmp_path):
        cfg = write_cfg(tmp_path, {
            "protocol": {"family": "coherent"},
            "channel": {"fading": {"stats": {"mean_eta": 0.5}}},
            "sweep": {"variable": "distance", "values": [500.0, 1000.0]},
        })
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2

    def test_jobs_do_not_change_output(self, tmp_path):
        doc = {
            "seed": 3,
            "protocol": {"family": "coherent", "v_m": 4.0, "beta": 0.95},
            "channel": {"fading": {"stats": {"mean_eta": 0.9, "var_sqrt": 0.001}}},
            "sweep": {"variable": "mean_eta_db", "start": -6.0, "stop": -1.0, "steps": 6},
        }
        cfg = write_cfg(tmp_path, doc)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["sweep", "--config", cfg, "--out", str(a), "--jobs", "1"])
        main(["sweep", "--config", cfg, "--out", str(b), "--jobs", "6"])
        assert a.read_bytes() == b.read_bytes()

    def test_fig1b_shipped_scenario_trend(self, tmp_path):
        out = tmp_path / "fig1b.csv"
        assert main(["sweep", "--config", str(SCENARIOS / "fig1b.scenario"), "--out", str(out)]) == 0
        rows = read_rows(out)
        vs = [float(r["sweep_value"]) for r in rows]
        rates = [float(r["rate_asymptotic"]) for r in rows]
        assert vs == sorted(vs, reverse=True)
        # stronger squeezing never hurts on the fluctuation-free slice
        assert all(b >= a - 1e-9 for a, b in zip(rates, rates[1:]))


def reduced_daily_cfg(tmp_path, eta1_db=-4.5):
    doc = {
        "seed": 9,
        "protocols": [
            {"label": "coherent", "family": "coherent", "beta": 0.95,
             "optimizer": {"vm_max": 60.0, "grid": [5, 9]}},
            {"label": "squeezed3", "family": "squeezed", "beta": 0.95,
             "optimizer": {"vs_cap_db": -3.0, "vm_max": 60.0, "grid": [5, 9]}},
        ],
        "channel": {
            "eta1_db": eta1_db,
            "eps2": 0.01,
            "fading": {"beam": {"wavelength": 1.55e-6, "w0": 0.04, "aperture": 0.03}},
        },
        "finite_size": {"n": 1e6},
        "daily": {"n_samples": 2500},
    }
    return write_cfg(tmp_path, doc, "daily.scenario")


class TestDailyCommand:
    def test_all_rows_populated(self, tmp_path):
        cfg = reduced_daily_cfg(tmp_path)
        out = tmp_path / "daily.csv"
        assert main(["daily", str(SCENARIOS / "prague-like.csv"), "--config", cfg,
                     "--out", str(out), "--jobs", "4"]) == 0
        rows = read_rows(out)
        assert len(rows) == 24
        for row in rows:
            for key, value in row.items():
                assert value != "", f"empty field {key}"

    def test_lowest_cn2_hour_has_highest_coherent_rate(self, tmp_path):
        cfg = reduced_daily_cfg(tmp_path)
        out = tmp_path / "daily.csv"
        main(["daily", str(SCENARIOS / "prague-like.csv"), "--config", cfg,
              "--out", str(out), "--jobs", "4"])
        rows = read_rows(out)
        lowest = min(rows, key=lambda r: float(r["cn2"]))
        best = max(rows, key=lambda r: float(r["coherent_rate_finite"]))
        assert lowest["label"] == best["label"]

    def test_doubling_cn2_never_increases_rates(self, tmp_path):
        cfg = reduced_daily_cfg(tmp_path)
        doubled = tmp_path / "cn2x2.csv"
        src_lines = (SCENARIOS / "prague-like.csv").read_text().splitlines()
        out_lines = []
        for ln in src_lines:
            if ln.startswith("#") or ln.startswith("hour"):
                out_lines.append(ln)
            elif ln.strip():
                label, value = ln.split(",")
                out_lines.append(f"{label},{2.0 * float(value):.6e}")
        doubled.write_text("\n".join(out_lines) + "\n")

        base_out, dbl_out = tmp_path / "base.csv", tmp_path / "dbl.csv"
        main(["daily", str(SCENARIOS / "prague-like.csv"), "--config", cfg,
              "--out", str(base_out), "--jobs", "4"])
        main(["daily", str(doubled), "--config", cfg, "--out", str(dbl_out), "--jobs", "4"])
        base_rows, dbl_rows = read_rows(base_out), read_rows(dbl_out)
        for b, d in zip(base_rows, dbl_rows):
            for col in ("coherent_rate_finite", "squeezed3_rate_finite"):
                assert float(d[col]) <= float(b[col]) + 1e-9

    def test_daily_rejects_fixed_turbulence(self, tmp_path):
        doc = json.loads(Path(reduced_daily_cfg(tmp_path)).read_text())
        doc["channel"]["fading"]["beam"]["sigma_r2"] = 0.5
        cfg = write_cfg(tmp_path, doc, "bad_daily.scenario")
        assert main(["daily", str(SCENARIOS / "prague-like.csv"), "--config", cfg,
                     "--out", str(tmp_path / "x.csv")]) == 2


def test_exit_code_io_error(tmp_path):
    cfg = write_cfg(tmp_path, BEAM_DOC)
    assert main(["simulate", "--config", cfg, "--out", "/nonexistent-dir/x.csv", "--n", "10"]) == 4


def test_config_dir_environment_variable(tmp_path, monkeypatch):
    write_cfg(tmp_path, BEAM_DOC, name="fromenv.scenario")
    monkeypatch.setenv("CVFADE_CONFIG_DIR", str(tmp_path))
    monkeypatch.chdir(tmp_path / "..")
    out = tmp_path / "env.csv"
    assert main(["simulate", "--config", "fromenv.scenario", "--out", str(out), "--n", "50"]) == 0
    assert out.exists()


def test_sifting_factor_halves_rate(tmp_path):
    base = {
        "protocol": {"family": "squeezed", "v_s": 0.5, "v_m": 1.5},
        "channel": {"fading": {"stats": {"mean_eta": 1.0}}},
    }
    sifted = json.loads(json.dumps(base))
    sifted["protocol"]["sifting"] = 0.5
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["keyrate", "--config", write_cfg(tmp_path, base, "a.scenario"), "--out", str(out_a)])
    main(["keyrate", "--config", write_cfg(tmp_path, sifted, "b.scenario"), "--out", str(out_b)])
    full = float(read_rows(out_a)[0]["rate_asymptotic"])
    half = float(read_rows(out_b)[0]["rate_asymptotic"])
    assert half == pytest.approx(0.5 * full)
