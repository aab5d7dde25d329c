import io

import pytest

from dsmcpar import cli


def run(argv):
    buf = io.StringIO()
    code = cli.main(argv, stdout=buf)
    return code, buf.getvalue()


def test_model_amdahl_prints_value():
    assert run(["model", "amdahl", "--alpha", "0.998", "--p", "6"]) == (0, "5.94059\n")


@pytest.mark.parametrize("argv,expect", [
    (["model", "tlp", "--alpha1", "0.998", "--alpha2", "0.97", "--p1", "6", "--p2", "6"], "30.9944"),
    (["model", "beta-star", "--beta", "0.437", "--p2", "6"], "0.823234"),
    (["model", "pri-star", "--beta", "0.437", "--p2", "6"], "3.88099"),
    (["model", "limit", "--alpha", "1"], "UNBOUNDED"),
    (["model", "time", "--t1", "1", "--alpha", "0.998", "--p", "6"], "0.168333"),
])
def test_model_formulas(argv, expect):
    assert run(argv) == (0, expect + "\n")


def test_model_missing_argument_is_a_validation_error(capsys):
    assert run(["model", "amdahl", "--alpha", "0.5"])[0] == 1
    assert "needs --p" in capsys.readouterr().err


def test_model_out_of_range(capsys):
    assert run(["model", "amdahl", "--alpha", "1.5", "--p", "2"])[0] == 1


def test_unknown_flag_is_a_usage_error():
    with pytest.raises(SystemExit) as e:
        cli.main(["simulate", "--frobnicate"])
    assert e.value.code == 2
    with pytest.raises(SystemExit):
        cli.main([])


def test_simulate_twice_gives_identical_csv(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"s{i}.csv"
        code, text = run(["simulate", "--strategy", "psir", "--n", "4", "--p", "1", "--seed", "42", "--out", str(path)])
        assert code == 0 and "collisions=" in text
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    head = outs[0].decode().splitlines()
    assert head[0].startswith("#") and "master_seed=42" in head[0] and "units" in head[0]
    assert head[1] == "run_id,t,cell_id,n_samples,density,vx,vy,temperature"


def test_simulate_strategies_agree_on_csv(tmp_path):
    texts = []
    for extra in (["--strategy", "sequential"], ["--strategy", "tlp", "--p1", "2", "--p2", "2"],
                  ["--strategy", "tlpdpr", "--p1", "2", "--p", "3", "--pri", "1"]):
        path = tmp_path / "x.csv"
        assert run(["simulate", "--problem", "expansion", "--n", "2", "--seed", "5", "--out", str(path),
                    "--alloc-log", str(tmp_path / "a.csv")] + extra)[0] == 0
        lines = path.read_text().splitlines()
        texts.append(lines[2:])
    assert texts[0] == texts[1] == texts[2]
    assert (tmp_path / "a.csv").read_text().splitlines()[1] == "time_ns,leader,requested,granted,released,run_id,available"


def test_simulate_one_dimensional_columns_and_per_run(tmp_path):
    path = tmp_path / "e.csv"
    assert run(["simulate", "--problem", "expansion", "--n", "2", "--per-run", "--out", str(path)])[0] == 0
    lines = path.read_text().splitlines()
    assert lines[1] == "run_id,t,cell_id,n_samples,density,vx,temperature"
    ids = {ln.split(",")[0] for ln in lines[2:]}
    assert ids == {"-1", "0", "1"}


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DSMCPAR_OUTPUT_DIR", str(tmp_path / "o"))
    assert run(["simulate", "--n", "1"])[0] == 0
    assert (tmp_path / "o" / "box_sequential_snapshots.csv").exists()


def test_bad_config_is_a_validation_error(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nlo=0\nhi=1\ncounts=0\n")
    assert run(["simulate", "--problem", str(bad)])[0] == 1
    assert "validation error" in capsys.readouterr().err


def test_bench_reports_prediction_next_to_measurement(tmp_path):
    path = tmp_path / "b.csv"
    code, text = run(["bench", "--strategy", "psir", "--n", "8", "--p", "1,2,4", "--repeats", "3", "--out", str(path)])
    assert code == 0
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    for col in ("p", "repeats", "median_s", "min_s", "speedup", "predicted_speedup", "excluded", "cv_flag"):
        assert col in header
    assert len(lines) == 4


def test_sweeps_and_sim(tmp_path):
    code, text = run(["sweep", "amdahl", "--alpha", "0.998", "--pmax", "6"])
    assert code == 0 and text.splitlines()[-1].startswith("0.998,6,5.940594059")
    code, text = run(["sweep", "sp2", "--pmax", "6"])
    assert code == 0 and "tlpdpr" in text
    code, text = run(["sim", "sweep", "--grid", "0,3.881"])
    rows = text.splitlines()
    assert rows[1] == "pri,simulated,predicted,makespan,contended" and len(rows) == 4
    code, text = run(["sim", "compare", "--p2", "6"])
    assert "p2,tlp,tlpdpr,max,pri_star,sim_tlp,sim_tlpdpr" in text
