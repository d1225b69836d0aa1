"""CLI: config parsing, exit codes, artifacts, byte-stability."""

import json

import pytest

from junctionsim.cli import load_scenario, run_cli
from junctionsim.errors import ConfigParse


def write_config(path, **overrides):
    payload = {
        "line": "desk",
        "run": {"m": 4, "dm": 0, "counts": 120},
        "sweep": {"m_range": [0, 6], "dm_range": [-1, 1]},
    }
    payload.update(overrides)
    path.write_text(json.dumps(payload))
    return str(path)


def test_validate_ok(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json")
    assert run_cli(["validate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "segments: 12" in out and "config ok" in out


def test_load_scenario_defaults(tmp_path):
    cfg = load_scenario(write_config(tmp_path / "s.json"))
    assert cfg.m == 4 and cfg.dm == 0 and cfg.counts == 120
    assert cfg.m_range == (0, 6) and cfg.dm_range == (-1, 1)
    assert cfg.reference_headway == 300.0


def test_parse_errors_name_fields(tmp_path, capsys):
    bad_type = tmp_path / "bad.json"
    bad_type.write_text(json.dumps({"line": "desk", "run": {"m": "six"}}))
    assert run_cli(["validate", "--config", str(bad_type)]) == 2
    assert "run.m" in capsys.readouterr().err

    not_json = tmp_path / "broken.json"
    not_json.write_text("{nope")
    assert run_cli(["validate", "--config", str(not_json)]) == 2
    assert "not valid JSON" in capsys.readouterr().err

    no_line = tmp_path / "noline.json"
    no_line.write_text("{}")
    assert run_cli(["validate", "--config", str(no_line)]) == 2
    assert "'line'" in capsys.readouterr().err

    bad_range = tmp_path / "range.json"
    bad_range.write_text(json.dumps({"line": "desk", "sweep": {"m_range": [4, 1]}}))
    assert run_cli(["validate", "--config", str(bad_range)]) == 2
    assert "m_range" in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path, capsys):
    assert run_cli(["validate", "--config", str(tmp_path / "absent.json")]) == 4
    assert "io error" in capsys.readouterr().err


def test_infeasible_seed_names_field(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json", run={"m": 20, "dm": 0})
    assert run_cli(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "run.m" in err and "outside" in err


def test_desk_overrides_and_bad_kwargs(tmp_path, capsys):
    over = write_config(tmp_path / "o.json", line={"desk": {"run_time": 80.0}})
    assert run_cli(["validate", "--config", over]) == 0
    capsys.readouterr()
    bad = write_config(tmp_path / "b.json", line={"desk": {"no_such": 1}})
    assert run_cli(["validate", "--config", bad]) == 2
    assert "desk" in capsys.readouterr().err


def test_simulate_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json")
    out = tmp_path / "out"
    assert run_cli(["simulate", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["m"] == 4 and summary["counts"] == 120
    assert summary["h0_s"] == pytest.approx(165.0)
    assert summary["f0_tph"] == pytest.approx(3600.0 / 165.0)
    header = (out / "departures.csv").read_text().splitlines()[0]
    assert header == "segment_id,part,k,arrival_s,departure_s"


def test_simulate_zero_trains_reports_null_headway(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json", run={"m": 0, "dm": 0, "counts": 50})
    out = tmp_path / "out"
    assert run_cli(["simulate", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["f0_tph"] == 0.0
    assert summary["h0_s"] is None


def test_counts_flag_overrides_config(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json")
    out = tmp_path / "out"
    assert run_cli(
        ["simulate", "--config", cfg, "--out", str(out), "--counts", "60"]
    ) == 0
    assert json.loads((out / "summary.json").read_text())["counts"] == 60


def test_sweep_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json")
    out = tmp_path / "out"
    assert run_cli(["sweep", "--config", cfg, "--out", str(out)]) == 0
    diagram = (out / "phase_diagram.csv").read_text().splitlines()
    assert diagram[0] == "m,dm,f0_tph,h0_s,phase,converged"
    assert len(diagram) > 10
    failures = (out / "failures.csv").read_text().splitlines()
    assert failures[0] == "m,dm,error"


def test_deadlock_is_runtime_error_exit(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json", run={"m": 12, "dm": 0, "counts": 10})
    assert run_cli(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert "Deadlock" in capsys.readouterr().err


def test_boundaries_missing_region_exit(tmp_path, capsys):
    # A window without congested labels cannot carry the JD boundary.
    cfg = write_config(tmp_path / "s.json", sweep={"m_range": [0, 6], "dm_range": [-1, 1]})
    assert run_cli(["boundaries", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert "MissingRegion" in capsys.readouterr().err


def test_boundaries_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json", sweep={"m_range": [0, 12], "dm_range": [-2, 2]})
    out = tmp_path / "out"
    assert run_cli(["boundaries", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "boundaries.csv").read_text().splitlines()
    assert rows[0] == "name,m,dm"
    assert any(r.startswith("AG,") for r in rows[1:])
    assert any(r.startswith("JD,") for r in rows[1:])
    fits = json.loads((out / "boundary_fits.json").read_text())
    assert set(fits) == {"AG", "JD"}
    assert fits["AG"]["r_squared"] == pytest.approx(1.0)


def test_oracle_check_passes_zero_demand(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json", run={"m": 2, "dm": 0, "counts": 500})
    assert run_cli(["oracle-check", "--config", cfg, "--tol", "1e-9"]) == 0
    out = capsys.readouterr().out
    assert "simulate-vs-entity" in out and "simulate-vs-maxplus" in out
    assert "passed" in out


def test_oracle_check_skips_maxplus_with_demand(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "s.json",
        line={"desk": {"lam_central": 0.2, "alpha": 10.0}},
        run={"m": 4, "dm": 0, "counts": 200},
    )
    assert run_cli(["oracle-check", "--config", cfg]) == 0
    assert "skipped" in capsys.readouterr().out


def test_compare_outputs(tmp_path, capsys):
    base = write_config(tmp_path / "base.json")
    variant = write_config(
        tmp_path / "variant.json", demand={"everywhere": 1.0}
    )
    out = tmp_path / "out"
    code = run_cli(
        ["compare", "--config", base, "--variant", variant, "--out", str(out)]
    )
    assert code == 0
    comparison = json.loads((out / "comparison.json").read_text())
    # Identical scenarios: no frequency shift, no boundary movement.
    assert comparison["max_abs_frequency_delta_tph"] == 0.0
    assert comparison["moved"] == []
    rows = (out / "frequency_delta.csv").read_text().splitlines()
    assert rows[0] == "m,dm,delta_f0_tph"


def test_outputs_byte_stable(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json")
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert run_cli(["simulate", "--config", cfg, "--out", str(b)]) == 0
    assert (a / "departures.csv").read_bytes() == (b / "departures.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()

    sa, sb = tmp_path / "sa", tmp_path / "sb"
    assert run_cli(["sweep", "--config", cfg, "--out", str(sa)]) == 0
    assert run_cli(["sweep", "--config", cfg, "--out", str(sb), "--parallel", "2"]) == 0
    assert (sa / "phase_diagram.csv").read_bytes() == (sb / "phase_diagram.csv").read_bytes()
    assert (sa / "failures.csv").read_bytes() == (sb / "failures.csv").read_bytes()


def test_full_line_description_config(tmp_path, capsys):
    from junctionsim import desk_line

    cfg_path = tmp_path / "full.json"
    cfg_path.write_text(json.dumps({"line": desk_line(), "run": {"m": 4, "dm": 0}}))
    assert run_cli(["validate", "--config", str(cfg_path)]) == 0


def test_initial_offsets_config(tmp_path):
    cfg = load_scenario(
        write_config(
            tmp_path / "s.json",
            run={"m": 4, "dm": 0, "initial_offsets": {"0": 10.0}},
        )
    )
    assert cfg.initial_offsets == {0: 10.0}
    with pytest.raises(ConfigParse):
        load_scenario(
            write_config(
                tmp_path / "bad.json",
                run={"m": 4, "dm": 0, "initial_offsets": {"x": 10.0}},
            )
        )
