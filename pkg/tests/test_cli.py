import math

import pytest

from sccphybrid.cli import main, parse_variant
from sccphybrid.config import ConfigError, PartitionSpec, parse_config

from conftest import model_path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_check_gene(capsys):
    code, out, _ = run(["check", model_path("gene")], capsys)
    assert code == 0
    assert out.count("  approximable\n") == 9 and "9/9 edges" in out


def test_check_reports_reason(tmp_path, capsys):
    f = tmp_path / "m.sccp"
    f.write_text("sccp v1 var X = 0 end a = [X > 5 -> X' = X - 1]{1}.a system a")
    code, out, _ = run(["check", f], capsys)
    assert code == 0 and "not approximable (rate does not provably vanish" in out


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.sccp"
    bad.write_text("sccp v1 var X = 0 end a = [X > -> *]{1}.a system a")
    code, _, err = run(["check", bad], capsys)
    assert code == 1 and "bad.sccp:1:" in err
    par = tmp_path / "par.sccp"
    par.write_text("sccp v1 var X = 0 end a = [true -> *]{1}.a || b b = 0 system a")
    assert run(["check", par], capsys)[0] == 2
    clash = tmp_path / "clash.sccp"
    clash.write_text("sccp v1 a = [true -> *]{1}.a system a || a")
    assert run(["check", clash], capsys)[0] == 2
    assert run(["check", tmp_path / "missing.sccp"], capsys)[0] == 64
    assert run(["frobnicate"], capsys)[0] == 64
    assert run(["simulate", model_path("birth_death")], capsys)[0] == 64  # no t_end
    assert run(["compile", model_path("gene"), "--kappa", "gene0=101"], capsys)[0] == 64


def test_compile_dumps(capsys):
    code, out, _ = run(["compile", model_path("gene"), "--dump-rts"], capsys)
    assert code == 0 and "component gene0" in out and "  5: gene2 -> gene1 [true] {ku2} /true/" in out
    code, out, _ = run(["compile", model_path("gene"), "--kappa", "gene0=100111,deg=1,dimer=11"], capsys)
    assert out.strip() == "modes=2 continuous=10 instantaneous=0 stochastic=2"


def test_simulate_is_deterministic(tmp_path, capsys):
    args = ["simulate", model_path("gene"), "--t-end", 20, "--seed", 4, "--dt-out", 0.5,
            "--dynamic", "--policy", "population", "--K", 5]
    assert run(args + ["--out", tmp_path / "a"], capsys)[0] == 0
    assert run(args + ["--out", tmp_path / "b"], capsys)[0] == 0
    for name in ("trajectory.csv", "events.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,Xp,Xp2,P_gene0,P_gene1,P_gene2,P_deg,P_dimer,mode"


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('sim.t_end = 5\nsim.seed = 1\nsim.dt_out = 1\npartition.mode = "dynamic"\n'
                   'partition.policy = "population"\nkappa.bd = "00"\n')
    # K missing in the file is supplied by the flag
    code, _, err = run(["ensemble", model_path("birth_death"), "--config", cfg, "--K", 10, "--runs", 4,
                        "--out", tmp_path], capsys)
    assert code == 0, err
    lines = (tmp_path / "ensemble.csv").read_text().splitlines()
    assert lines[0] == "t,mean_X,mean_P_bd,var_X,var_P_bd" and len(lines) == 7


def test_epsilon_zero_rejected(capsys):
    code, _, err = run(["simulate", model_path("birth_death"), "--t-end", 1, "--dynamic", "--policy",
                        "population", "--K", 10, "--epsilon", 0], capsys)
    assert code == 64 and "epsilon" in err


def test_compare(tmp_path, capsys):
    code, out, _ = run(["compare", model_path("birth_death"), "--t-end", 10, "--seed", 2, "--dt-out", 1,
                        "--variants", "bottom", "dynamic:population:K=inf", "top", "--out", tmp_path], capsys)
    assert code == 0
    rows = (tmp_path / "compare.csv").read_text().splitlines()
    assert rows[0].startswith("variant,runs,wall_s,stochastic,instantaneous,switch")
    dyn = rows[2].split(",")
    assert dyn[0] == "dynamic:population:K=inf" and dyn[-2:] == ["0", "yes"]
    assert rows[3].split(",")[-1] == "no"
    assert len((tmp_path / "compare_pairs.csv").read_text().splitlines()) == 4


def test_compare_single_variant(tmp_path, capsys):
    code, out, _ = run(["compare", model_path("birth_death"), "--t-end", 2, "--runs", 3,
                        "--variants", "top", "--out", tmp_path], capsys)
    assert code == 0 and len((tmp_path / "compare.csv").read_text().splitlines()) == 2


def test_parse_variant():
    part, kappa = parse_variant("kappa:bd=01", PartitionSpec())
    assert part.mode == "static" and kappa == "bd=01"
    part, kappa = parse_variant("dynamic:rate:Lambda=5,dt=0.1", PartitionSpec())
    assert (part.policy, part.Lambda, part.dt, kappa) == ("rate", 5, 0.1, None)
    part, _ = parse_variant("dynamic:fixed:value=-inf", PartitionSpec())
    assert part.value == -math.inf
    for bad in ("sideways", "dynamic:population", "dynamic:population:Q=1", "dynamic:population:K=x"):
        with pytest.raises(ConfigError):
            parse_variant(bad, PartitionSpec())


def test_parse_config():
    spec = parse_config('sim.t_end = 3\npartition.mode = "dynamic"\npartition.K = "inf"\n'
                        'kappa.gene0 = "100111"\n')
    assert spec.sim == {"t_end": 3} and spec.partition.K == math.inf
    assert spec.kappa_string() == "gene0=100111"
    with pytest.raises(ConfigError):
        parse_config("sim.tend = 3")
    with pytest.raises(ConfigError):
        parse_config('partition.mode = "dynamic"\npartition.K = 1\npartition.epsilon = 0')
    with pytest.raises(ConfigError):
        parse_config("partition.K = true")
