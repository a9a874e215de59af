import csv
import json

import numpy as np
import pytest

from lsmc_life.cli import build_models, main
from lsmc_life.config import OUT_DIR_ENV, RunConfig, apply_overrides, load_config, write_config
from lsmc_life.errors import ConfigError


def write_ini(path, text):
    path.write_text(text)
    return path


def book_ini(tmp_path, data_dir, extra=""):
    book = data_dir / "reference_book"
    return write_ini(
        tmp_path / "run.ini",
        f"""
[data]
book = files
portfolio = {book / 'portfolio.csv'}
mortality = {book / 'mortality.csv'}
lapse = {book / 'lapse.csv'}
discount = {book / 'discount.csv'}
{extra}
""",
    )


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_defaults_and_types(tmp_path):
    cfg = load_config(None, env={})
    assert cfg.simulation.n_sims == 100_000 and cfg.risk.level == 0.995
    ini = write_ini(
        tmp_path / "a.ini",
        "[simulation]\nn_sims = 5_000\nrecenter = yes\n[trend]\nsigma = 0\n[nested]\ntime_budget =\n",
    )
    cfg = load_config(ini, env={})
    assert cfg.simulation.n_sims == 5000 and cfg.simulation.recenter is True
    assert cfg.trend.sigma == 0.0 and cfg.nested.time_budget is None


@pytest.mark.parametrize(
    "text",
    ["[nope]\na = 1\n", "[simulation]\nbogus = 1\n", "[simulation]\nn_sims = lots\n", "[calamity]\nenabled = maybe\n", "no section\n"],
)
def test_bad_config(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write_ini(tmp_path / "bad.ini", text), env={})


def test_precedence(tmp_path):
    ini = write_ini(tmp_path / "p.ini", "[simulation]\nseed = 5\n[output]\ndirectory = from_file\n")
    cfg = load_config(ini, env={})
    assert cfg.output.directory == "from_file"
    cfg = load_config(ini, env={OUT_DIR_ENV: "from_env"})
    assert cfg.output.directory == "from_env" and cfg.simulation.seed == 5
    apply_overrides(cfg, seed=7, out="from_flag", sims=1234, level=0.99, threads=3)
    assert (cfg.simulation.seed, cfg.output.directory, cfg.simulation.n_sims) == (7, "from_flag", 1234)
    assert cfg.risk.level == 0.99 and cfg.simulation.threads == 3


def test_relative_paths_and_round_trip(tmp_path):
    ini = write_ini(tmp_path / "r.ini", "[data]\nbook = files\nportfolio = p.csv\n")
    cfg = load_config(ini, env={})
    assert cfg.data.portfolio == str(tmp_path / "p.csv")
    write_config(cfg, tmp_path / "again.ini")
    assert load_config(tmp_path / "again.ini", env={}) == cfg


def test_validation():
    cfg = RunConfig()
    cfg.data.book = "files"
    with pytest.raises(ConfigError):
        cfg.validate()
    cfg = RunConfig()
    cfg.risk.level = 1.5
    with pytest.raises(ConfigError):
        cfg.validate()
    assert "threads" not in RunConfig().as_dict()["simulation"]


def test_models_from_config():
    cfg = RunConfig()
    m = build_models(cfg)
    assert m.basis.sigma == pytest.approx(1.39 / 1.35 - 1)
    cfg.calamity.enabled = False
    cfg.trend.sigma = 0.0
    m = build_models(cfg)
    assert m.calamity.mean_load == 0.0 and m.trend.sigma == 0.0


def test_help_lists_exit_codes(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for code in ("0", "2", "3", "4", "5", "6", "7"):
        assert f"\n  {code:>2}  " in out
    assert OUT_DIR_ENV in out


def test_scr_standard_matches_golden(tmp_path, data_dir, capsys):
    ini = book_ini(tmp_path, data_dir)
    assert main(["scr-standard", "-c", str(ini), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    golden = json.loads((data_dir / "golden_scr_standard.json").read_text())
    assert report["schema_version"] == "1.0"
    sf = report["standard_formula"]
    assert set(sf["scenario_pvofp"]) == {"lapse_mass", "lapse_up", "lapse_down", "mortality_up", "catastrophe"}
    for k, v in golden["scenario_pvofp"].items():
        assert sf["scenario_pvofp"][k] == pytest.approx(v, rel=1e-10)
    assert sf["scr"] == pytest.approx(golden["scr"], rel=1e-10)
    assert report["config"]["data"]["book"] == "files"


def test_funnel_without_volatility_is_flat(tmp_path):
    ini = write_ini(
        tmp_path / "flat.ini",
        "[data]\nbook = toy\n[trend]\nsigma = 0\n[basis]\nsigma = 0\n[lapse]\nsigma = 0\n[calamity]\nenabled = false\n",
    )
    assert main(["funnel", "-c", str(ini), "--sims", "300", "--out", str(tmp_path / "f")]) == 0
    for component in ("mort", "lapse", "trend"):
        rows = read_csv(tmp_path / "f" / f"funnel_{component}.csv")
        assert rows[0] == ["year", "q0.05", "q0.25", "q0.75", "q0.95", "mean"]
        values = np.array([[float(v) for v in r[1:5]] for r in rows[1:]])
        assert values.shape == (10, 4)
        np.testing.assert_allclose(values, 1.0, rtol=1e-14)


def test_reports_identical_across_threads(tmp_path):
    ini = write_ini(tmp_path / "d.ini", "[data]\nbook = toy\n")
    outs = []
    for threads in ("1", "4", "1"):
        out = tmp_path / f"t{len(outs)}"
        assert main(["scr-lsmc", "-c", str(ini), "--sims", "5000", "--threads", threads, "--out", str(out)]) == 0
        outs.append(out)
    first = (outs[0] / "report.json").read_bytes()
    for out in outs[1:]:
        assert (out / "report.json").read_bytes() == first
        assert (out / "distribution.csv").read_bytes() == (outs[0] / "distribution.csv").read_bytes()


def test_all_commands_write_outputs(tmp_path, monkeypatch):
    ini = write_ini(tmp_path / "all.ini", "[data]\nbook = toy\n[nested]\nn_outer = 200\nn_inner = 50\n")
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "env_out"))
    expected = {
        "scr-lsmc": ["report.json", "distribution.csv"],
        "life-expectancy": ["le_report.json", "funnel_survival.csv"],
        "validate-nested": ["report.json"],
        "simulate-export": ["report.json", "batch.csv"],
    }
    for command, files in expected.items():
        assert main([command, "-c", str(ini), "--sims", "2000"]) == 0
        for name in files:
            assert (tmp_path / "env_out" / name).is_file()
    report = json.loads((tmp_path / "env_out" / "report.json").read_text())
    assert report["command"] == "simulate-export"
    rows = read_csv(tmp_path / "env_out" / "batch.csv")
    assert rows[0] == ["path", "af_mort_1", "af_lapse_1", "ev", "y"] and len(rows) == 2001
    le = json.loads((tmp_path / "env_out" / "le_report.json").read_text())
    assert le["life_expectancy"]["beta_le"] < 0


def test_small_run_warns_in_report(tmp_path):
    ini = write_ini(tmp_path / "w.ini", "[data]\nbook = toy\n")
    assert main(["scr-lsmc", "-c", str(ini), "--sims", "500", "--out", str(tmp_path / "w")]) == 0
    report = json.loads((tmp_path / "w" / "report.json").read_text())
    assert any("below 1000" in w for w in report["warnings"])


def test_error_exit_codes(tmp_path, data_dir, capsys):
    assert main(["scr-standard", "-c", str(tmp_path / "missing.ini")]) == 2
    assert main(["bogus-command"]) == 2
    bad_book = tmp_path / "book"
    bad_book.mkdir()
    for name in ("mortality.csv", "lapse.csv", "discount.csv"):
        (bad_book / name).write_text((data_dir / "reference_book" / name).read_text())
    (bad_book / "portfolio.csv").write_text("id,age\nA,40\n")
    ini = write_ini(
        tmp_path / "b.ini",
        "[data]\nbook = files\nportfolio = book/portfolio.csv\nmortality = book/mortality.csv\n"
        "lapse = book/lapse.csv\ndiscount = book/discount.csv\n",
    )
    assert main(["scr-standard", "-c", str(ini), "--out", str(tmp_path / "x")]) == 3
    ini = write_ini(tmp_path / "c.ini", "[data]\nbook = toy\n[trend]\nfactor = 100\n")
    assert main(["funnel", "-c", str(ini), "--out", str(tmp_path / "x")]) == 5
    ini = write_ini(tmp_path / "n.ini", "[data]\nbook = toy\n[nested]\ntime_budget = 0\n")
    assert main(["validate-nested", "-c", str(ini), "--sims", "2000", "--out", str(tmp_path / "x")]) == 7
    err = capsys.readouterr().err.strip().splitlines()[-1]
    payload = json.loads(err)
    assert payload["exit_code"] == 7 and payload["error"] == "NestedBudgetExceeded"
