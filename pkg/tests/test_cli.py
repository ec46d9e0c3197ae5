import json

import pytest
from hypothesis import given, settings, strategies as st

from nlgrad.cli import DEFAULTS, ConfigError, RunConfig, main
from nlgrad.grid import load_grid_function


def files(d):
    return sorted(p.name for p in d.iterdir()) if d.exists() else []


@settings(max_examples=40, deadline=None)
@given(command=st.sampled_from(sorted(DEFAULTS)), seed=st.integers(0, 2 ** 31), jobs=st.integers(1, 8),
       scale=st.floats(0.1, 10, allow_nan=False))
def test_config_round_trip_is_bit_identical(command, seed, jobs, scale):
    cfg = RunConfig.default(command)
    for k, v in cfg.parameters.items():
        if isinstance(v, float) and not isinstance(v, bool):
            cfg.parameters[k] = v * scale
    cfg.seed, cfg.jobs = seed, jobs
    text = cfg.validate().to_json()
    again = RunConfig.from_json(text)
    assert again.to_json() == text
    assert again.stamp() == cfg.stamp()


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d["parameters"].pop("delta"), "parameters.delta: missing"),
    (lambda d: d["parameters"].update(bogus=1), "parameters.bogus"),
    (lambda d: d["parameters"].update(N="big"), "parameters.N"),
    (lambda d: d["parameters"].update(s_list=[0.9, "x"]), "parameters.s_list[1]"),
    (lambda d: d.update(schema_version=7), "schema_version"),
    (lambda d: d.pop("command"), "command: missing"),
    (lambda d: d.update(jobs=0), "jobs"),
])
def test_schema_errors_name_the_field(mutate, path):
    d = RunConfig.default("localize").to_dict()
    mutate(d)
    with pytest.raises(ConfigError, match=path.replace("[", r"\[").replace("]", r"\]")):
        RunConfig.from_dict(d)


def test_malformed_config_exits_2_without_report(tmp_path, capsys):
    d = RunConfig.default("localize").to_dict()
    del d["parameters"]["delta"]
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(d))
    out = tmp_path / "out"
    assert main(["localize", "--config", str(cfg), "--output-dir", str(out)]) == 2
    assert files(out) == []
    assert "parameters.delta" in capsys.readouterr().err


def test_config_for_other_command_rejected(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(RunConfig.default("decay").to_json())
    assert main(["kernel", "--config", str(cfg), "--output-dir", str(tmp_path)]) == 2


def test_inline_flags_and_identities_example(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["identities", "--s", "0.5", "--delta", "1", "--n", "1", "--N", "256", "--output-dir", str(out)])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and lines[0].startswith("identities[0] n=1 s=0.5")
    report = json.loads(next(out.glob("*.json")).read_text())
    assert report["verdict"] == "pass"
    assert report["parameters"]["config"]["parameters"]["N"] == [256]
    assert set(report["columns"]) >= {"adjoint", "pq", "qp", "gap"}


def test_localize_example_rows_decrease(tmp_path, capsys):
    assert main(["localize", "--s-list", "0.9,0.99,0.999", "--output-dir", str(tmp_path)]) == 0
    report = json.loads(next(tmp_path.glob("*.json")).read_text())
    errs = [r[1] for r in report["rows"]]
    assert errs[0] > errs[1] > errs[2]


def test_failing_criterion_exits_1_with_files(tmp_path):
    assert main(["localize", "--final-tol", "1e-9", "--output-dir", str(tmp_path)]) == 1
    names = files(tmp_path)
    assert len(names) == 2 and all(n.startswith("localization_") for n in names)
    assert "# verdict: fail" in next(tmp_path.glob("*.csv")).read_text()


def test_same_config_gives_byte_identical_csv(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["poincare", "--samples", "32", "--seed", "5"]
    assert main(args + ["--output-dir", str(a)]) == 0
    assert main(args + ["--output-dir", str(b), "--jobs", "3"]) == 0
    (ca,), (cb,) = list(a.glob("*.csv")), list(b.glob("*.csv"))
    assert ca.name == cb.name and ca.read_bytes() == cb.read_bytes()


def test_output_dir_precedence(tmp_path, monkeypatch):
    env_dir, flag_dir = tmp_path / "env", tmp_path / "flag"
    monkeypatch.setenv("NLGRAD_OUTPUT_DIR", str(env_dir))
    assert main(["decay"]) == 0
    assert len(files(env_dir)) == 2
    assert main(["decay", "--output-dir", str(flag_dir)]) == 0
    assert len(files(flag_dir)) == 2


def test_dump_config_then_run_from_it(tmp_path, capsys):
    assert main(["kernel", "--delta", "0.5", "--dump-config"]) == 0
    text = capsys.readouterr().out
    cfg = tmp_path / "k.json"
    cfg.write_text(text)
    assert RunConfig.from_json(text).parameters["delta"] == 0.5
    assert main(["kernel", "--config", str(cfg), "--output-dir", str(tmp_path / "o")]) == 0


def test_minimize_dumps_fields(tmp_path):
    out = tmp_path / "m"
    assert main(["minimize", "--N", "256", "--dump-fields", "true", "--output-dir", str(out)]) == 0
    (sidecar,) = [p for p in out.glob("*minimizer*.json")]
    u = load_grid_function(sidecar.with_suffix(""))
    assert u.grid.points == 256


@pytest.mark.parametrize("argv", [
    ["minimize", "--delta", "3"],
    ["minimize", "--integrand", "cubic"],
    ["minimize", "--integrand-params", '{"zzz": 1}'],
    ["homogenize", "--eps-list", "0.3"],
    ["kernel", "--s-list", "1.5"],
])
def test_precondition_failures_are_config_errors(tmp_path, argv):
    out = tmp_path / "o"
    assert main(argv + ["--output-dir", str(out)]) == 2
    assert files(out) == []


def test_unparseable_flag_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["localize", "--N", "abc"])
    assert e.value.code == 2
