import json

import pytest

from ptcoord.cli import main
from ptcoord.core import load_instance


def run_cli(args):
    return main(args)


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / "tiny.json"
    code = run_cli([
        "generate", "-T", "2", "-J", "2", "-N", "2", "-P", "1",
        "--seed", "3", "--out", str(path),
    ])
    assert code == 0
    # shrink to enumeration scale for the oracle command
    from ptcoord import clamp_instance, load_instance, save_instance

    inst = clamp_instance(load_instance(path), factory_cap_max=5, eng_cap_max=3,
                          budget_max=6)
    save_instance(inst, path)
    return path


class TestGenerate:
    def test_writes_valid_instance(self, tmp_path, capsys):
        out = tmp_path / "a.json"
        assert run_cli(["generate", "-T", "3", "-J", "2", "-N", "2", "-P", "1",
                        "--seed", "1", "--out", str(out)]) == 0
        assert out.exists()
        inst = load_instance(out)
        assert inst.horizon == 3
        assert capsys.readouterr().out.strip() == str(out)

    def test_same_flags_identical_bytes(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        args = ["generate", "-T", "3", "-J", "2", "-N", "2", "-P", "1", "--seed", "9"]
        run_cli(args + ["--out", str(a)])
        run_cli(args + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_too_many_new_products_is_an_error(self, tmp_path):
        code = run_cli(["generate", "-T", "3", "-J", "2", "-N", "2", "-P", "5",
                        "--out", str(tmp_path / "x.json")])
        assert code == 1


class TestSolveAndOracle:
    def test_solve_writes_result_trace_and_figure(self, tiny_file, tmp_path):
        out = tmp_path / "run"
        code = run_cli(["solve", "--instance", str(tiny_file), "--out-dir", str(out),
                        "--name", "res"])
        assert code == 0
        payload = json.loads((out / "res.json").read_text())
        assert payload["status"] == "optimal"
        assert (out / "res-trace.csv").exists()
        assert (out / "res-convergence.png").exists()

    def test_no_figures_flag(self, tiny_file, tmp_path):
        out = tmp_path / "run"
        run_cli(["solve", "--instance", str(tiny_file), "--out-dir", str(out),
                 "--name", "res", "--no-figures"])
        assert not (out / "res-convergence.png").exists()

    def test_solve_matches_oracle_output(self, tiny_file, tmp_path):
        out = tmp_path / "run"
        assert run_cli(["solve", "--instance", str(tiny_file), "--out-dir", str(out),
                        "--name", "ccg", "--no-figures"]) == 0
        assert run_cli(["oracle", "--instance", str(tiny_file), "--out-dir", str(out),
                        "--name", "oracle"]) == 0
        solved = json.loads((out / "ccg.json").read_text())
        oracle = json.loads((out / "oracle.json").read_text())
        assert solved["objective"] == oracle["objective"]
        assert set(solved) == set(oracle)  # same schema for diffing

    def test_time_limit_exit_code(self, tiny_file, tmp_path):
        code = run_cli(["solve", "--instance", str(tiny_file), "--out-dir",
                        str(tmp_path), "--time-limit", "1e-9", "--no-figures"])
        assert code == 4

    def test_zero_demand_instance_solves_to_zero(self, tmp_path):
        from ptcoord import Instance, PDSpec, save_instance
        from conftest import make_product

        prod = make_product(demand=(0, 0), revenue=(20, 20), prod_cost=(2, 2),
                            backorder_cost=(10, 10), holding_cost=(1, 1))
        inst = Instance(2, (PDSpec("pd0", (prod,), 1, 9),), (2, 2), (1, 1), 4)
        save_instance(inst, tmp_path / "inst.json")
        out = tmp_path / "out"
        code = run_cli(["solve", "--instance", str(tmp_path / "inst.json"),
                        "--out-dir", str(out), "--name", "res", "--no-figures"])
        assert code == 0
        result = json.loads((out / "res.json").read_text())
        assert result["objective"] == 0 and result["status"] == "optimal"

    def test_invalid_instance_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({
            "horizon": 2, "total_budget": -1, "factory_cap": [1, 1],
            "eng_cap": [1, 1],
            "pds": [{"id": "pd0", "factory_unit_cost": 1, "eng_unit_cost": 1,
                     "products": [{"id": "p", "is_new": False,
                                   "demand": [0, 0], "revenue": [1, 1],
                                   "prod_cost": [1, 1], "backorder_cost": [1, 1],
                                   "holding_cost": [1, 1]}]}],
        }))
        with pytest.raises(SystemExit):
            run_cli(["solve", "--instance", str(bad), "--out-dir", str(tmp_path)])


class TestExperiment:
    def test_budget_study_csv_and_figure(self, tmp_path):
        code = run_cli([
            "experiment", "--study", "budget", "--seeds", "1", "--backend", "scipy",
            "--out-dir", str(tmp_path),
        ])
        assert code == 0
        assert (tmp_path / "budget_study.csv").exists()
        assert (tmp_path / "budget_study.png").exists()

    def test_competition_study_csv(self, tmp_path):
        code = run_cli([
            "experiment", "--study", "competition", "--seeds", "1", "--horizon", "4",
            "--backend", "scipy", "--out-dir", str(tmp_path), "--no-figures",
        ])
        assert code == 0
        text = (tmp_path / "competition_study.csv").read_text()
        assert len(text.strip().splitlines()) == 5  # header + 4 classes
