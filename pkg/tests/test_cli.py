import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from uqsim.cli import main
from uqsim.compiler import schedule_from_text
from uqsim.engine import StateVector


def write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


HEISENBERG_CHAIN3 = "\n".join(
    f"1.0 {ops}" for ops in
    ("X X I", "Y Y I", "Z Z I", "I X X", "I Y Y", "I Z Z")
) + "\n"

UQS1_3 = "[hardware]\nplatform = uqs1\nsites = 3\nboundary = open\navailable_j = all\ngamma = 1.0\n"
UQS2_2 = "[hardware]\nplatform = uqs2\ngamma = 1.0\npositions = 0 ; 1\n"


class TestCompile:
    def test_heisenberg_chain_cost_and_layers(self, tmp_path, capsys):
        ham = write(tmp_path / "h.ham", HEISENBERG_CHAIN3)
        cfg = write(tmp_path / "c.cfg",
                    f"[compile]\nhamiltonian = {ham.name}\nt_prime = 1.0\nepsilon = 0.01\n" + UQS1_3)
        out = tmp_path / "out"
        assert main(["compile", "--config", str(cfg), "--out-dir", str(out)]) == 0
        sched = schedule_from_text((out / "schedule.txt").read_text())
        cost_lines = dict(
            line.split("=", 1) for line in (out / "cost.txt").read_text().splitlines()
        )
        assert float(cost_lines["c"]) == pytest.approx(3.0, rel=1e-12)
        assert int(cost_lines["n"]) == 3
        # 3 homogeneous layers per compiled cycle
        first_cycle = sched.instructions[: sched.cycle_length]
        layers = [i for i in first_cycle if type(i).__name__ == "ApplyLocal"]
        assert len(layers) == 3
        doc = json.loads((out / "compile.json").read_text())
        assert doc["cost"]["L"] == 900

    def test_sign_mismatch_exits_2(self, tmp_path, capsys):
        ham = write(tmp_path / "h.ham", HEISENBERG_CHAIN3)
        cfg = write(
            tmp_path / "c.cfg",
            f"[compile]\nhamiltonian = {ham.name}\n"
            "[hardware]\nplatform = uqs1\nsites = 3\ngamma = -1.0\n",
        )
        code = main(["compile", "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
        assert code == 2
        assert "sign" in capsys.readouterr().err

    def test_empty_hamiltonian(self, tmp_path):
        ham = write(tmp_path / "h.ham", "# nothing\n0.0 I I\n")
        cfg = write(tmp_path / "c.cfg", f"[compile]\nhamiltonian = {ham.name}\n" + UQS1_3.replace("sites = 3", "sites = 2"))
        out = tmp_path / "out"
        assert main(["compile", "--config", str(cfg), "--out-dir", str(out)]) == 0
        sched = schedule_from_text((out / "schedule.txt").read_text())
        assert sched.instructions == ()
        assert "c=0" in (out / "cost.txt").read_text().replace("0.0", "0")

    def test_parse_error_exits_1(self, tmp_path, capsys):
        ham = write(tmp_path / "h.ham", "0.5 X Q\n")
        cfg = write(tmp_path / "c.cfg", f"[compile]\nhamiltonian = {ham.name}\n" + UQS1_3)
        assert main(["compile", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 1

    def test_missing_config_exits_1(self, tmp_path, capsys):
        assert main(["compile", "--config", str(tmp_path / "nope.cfg")]) == 1


class TestSimulate:
    def compile_zz(self, tmp_path, t_prime=0.5):
        ham = write(tmp_path / "zz.ham", "1.0 Z Z\n")
        cfg = write(
            tmp_path / "compile.cfg",
            f"[compile]\nhamiltonian = zz.ham\nt_prime = {t_prime}\nepsilon = 0.01\n" + UQS2_2,
        )
        out = tmp_path / "compiled"
        assert main(["compile", "--config", str(cfg), "--out-dir", str(out)]) == 0
        return out / "schedule.txt"

    def test_identity_schedule_preserves_input(self, tmp_path):
        sched = write(tmp_path / "empty.txt", "# pulse schedule version=1 n_qubits=2\n")
        cfg = write(tmp_path / "sim.cfg", "[simulate]\nschedule = empty.txt\n")
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(out)]) == 0
        state = StateVector.load_text((out / "state.txt").read_text())
        np.testing.assert_array_equal(state.amps, StateVector.zero_state(2).amps)

    def test_oracle_fidelity_printed(self, tmp_path, capsys):
        sched_path = self.compile_zz(tmp_path)
        cfg = write(
            tmp_path / "sim.cfg",
            "[simulate]\n"
            f"schedule = {sched_path}\n"
            "initial = zeros\n"
            "oracle_hamiltonian = zz.ham\n"
            "t_prime = 0.5\n"
            "observables = Z0, Z1, Z0Z1\n",
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(out), "--oracle"]) == 0
        captured = capsys.readouterr().out
        assert "oracle_fidelity=" in captured
        summary = json.loads((out / "summary.json").read_text())
        assert summary["oracle_fidelity"] >= 1 - 2 * 0.01
        obs = (out / "observables.csv").read_text().splitlines()
        assert obs[0] == "observable,value"
        assert len(obs) == 4

    def test_noise_without_seed_exits_3(self, tmp_path, capsys):
        sched_path = self.compile_zz(tmp_path)
        cfg = write(
            tmp_path / "sim.cfg",
            f"[simulate]\nschedule = {sched_path}\neta_local = 0.01\n",
        )
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 3

    def test_determinism_bit_identical_dumps(self, tmp_path):
        sched_path = self.compile_zz(tmp_path)
        cfg = write(
            tmp_path / "sim.cfg",
            f"[simulate]\nschedule = {sched_path}\neta_local = 0.01\neta_int = 0.005\n",
        )
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main(["simulate", "--config", str(cfg), "--out-dir", str(out),
                         "--seed", "7", "--single-thread"])
            assert code == 0
            outs.append((out / "state.txt").read_bytes())
        assert outs[0] == outs[1]
        manifests = [json.loads((tmp_path / n / "manifest.json").read_text()) for n in ("a", "b")]
        assert manifests[0]["outputs"] == manifests[1]["outputs"]


class TestAdiabatic:
    def small_cfg(self, tmp_path, extra=""):
        return write(
            tmp_path / "adia.cfg",
            "[hardware]\nplatform = uqs1\nsites = 3\navailable_j = all\ngamma = 1.0\n"
            "[model]\nname = dipole\nj = 1.0\ngeometry = chain:3\n"
            "[adiabatic]\ninitial = zz_chain\nsteps = 20\ntheta1 = 0.1\n"
            "record_every = 1\nseed = 3\n" + extra,
        )

    def test_run_produces_valid_outputs(self, tmp_path):
        cfg = self.small_cfg(tmp_path)
        out = tmp_path / "out"
        assert main(["adiabatic", "--config", str(cfg), "--out-dir", str(out)]) == 0
        rows = (out / "trajectory.csv").read_text().splitlines()
        assert rows[0] == "step,k,fidelity,energy"
        assert len(rows) == 21
        for name in ("fidelity.svg", "histogram.svg"):
            ET.fromstring((out / name).read_text())  # valid XML
        summary = json.loads((out / "summary.json").read_text())
        assert 0 <= summary["ground_weight"] <= 1

    def test_steps_override_single_row(self, tmp_path):
        cfg = self.small_cfg(tmp_path)
        out = tmp_path / "out1"
        assert main(["adiabatic", "--config", str(cfg), "--out-dir", str(out), "--steps", "1"]) == 0
        rows = (out / "trajectory.csv").read_text().splitlines()
        assert len(rows) == 2

    def test_bundled_config_resolves(self, tmp_path):
        out = tmp_path / "out"
        code = main(["adiabatic", "--config", "fig4a.cfg", "--out-dir", str(out), "--steps", "5"])
        assert code == 0
        assert (out / "trajectory.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "adiabatic"
        assert set(manifest["outputs"]) >= {"trajectory.csv", "histogram.csv", "fidelity.svg"}

    def test_sweep_grid(self, tmp_path):
        cfg = self.small_cfg(
            tmp_path,
            "[sweep]\netas = 0 0.02\nsteps_list = 5 10\nrepetitions = 3\n",
        )
        out = tmp_path / "out"
        assert main(["adiabatic", "--config", str(cfg), "--out-dir", str(out)]) == 0
        rows = (out / "sweep.csv").read_text().splitlines()
        assert rows[0] == "eta,steps,repetitions,mean_fidelity,std_fidelity,stderr"
        assert len(rows) == 5
        ET.fromstring((out / "sweep.svg").read_text())

    def test_sweep_jobs_deterministic(self, tmp_path):
        cfg = self.small_cfg(
            tmp_path,
            "[sweep]\netas = 0 0.02\nsteps_list = 5\nrepetitions = 2\n",
        )
        texts = []
        for name, jobs in (("o1", "1"), ("o2", "2")):
            out = tmp_path / name
            assert main(["adiabatic", "--config", str(cfg), "--out-dir", str(out),
                         "--jobs", jobs]) == 0
            texts.append((out / "sweep.csv").read_text())
        assert texts[0] == texts[1]

    def test_sweep_noise_without_seed_exits_3(self, tmp_path):
        cfg = write(
            tmp_path / "adia.cfg",
            "[hardware]\nplatform = uqs1\nsites = 3\n"
            "[model]\nname = dipole\ngeometry = chain:3\n"
            "[adiabatic]\ninitial = zz_chain\nsteps = 5\ntheta1 = 0.1\n"
            "[sweep]\netas = 0.01\nsteps_list = 5\nrepetitions = 2\n",
        )
        assert main(["adiabatic", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 3


class TestCostAndCrosstalk:
    def test_antisymmetric_example_cost(self, tmp_path, capsys):
        j = 0.7
        cfg = write(
            tmp_path / "cost.cfg",
            "[cost]\nmode = inhomogeneous\ngamma = 0.5\n"
            f"matrix = 0 0 0 ; 0 0 {-j} ; 0 {j} 0\n",
        )
        assert main(["cost", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
        out = capsys.readouterr().out
        c = float([l for l in out.splitlines() if l.startswith("c=")][0][2:])
        assert c == pytest.approx(2 * j / 0.5, rel=1e-12)

    def test_homogeneous_infeasible_exits_2(self, tmp_path, capsys):
        cfg = write(
            tmp_path / "cost.cfg",
            "[cost]\nmode = homogeneous\ngamma = -1.0\nmatrix = 1 0 0 ; 0 1 0 ; 0 0 1\n",
        )
        assert main(["cost", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2

    def test_crosstalk_ten_site_ratio(self, tmp_path, capsys):
        positions = " ; ".join(str(i) for i in range(13))
        cfg = write(
            tmp_path / "x.cfg",
            f"[hardware]\nplatform = uqs2\npositions = {positions}\n"
            "crosstalk_threshold = 0.002\n"
            "[crosstalk]\ngroups = 0 1 ; 11 12\n",
        )
        assert main(["crosstalk", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
        out = capsys.readouterr().out
        assert "max_ratio=0.001" in out
        assert "concurrent=True" in out

    def test_single_group_ratio_zero(self, tmp_path, capsys):
        cfg = write(
            tmp_path / "x.cfg",
            "[hardware]\nplatform = uqs2\npositions = 0 ; 1\n"
            "[crosstalk]\ngroups = 0 1\n",
        )
        assert main(["crosstalk", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
        assert "max_ratio=0.0" in capsys.readouterr().out

    def test_output_dir_from_config(self, tmp_path, capsys, monkeypatch):
        cfg = write(
            tmp_path / "x.cfg",
            "[output]\ndir = results\n"
            "[hardware]\nplatform = uqs2\npositions = 0 ; 1\n"
            "[crosstalk]\ngroups = 0 1\n",
        )
        monkeypatch.chdir(tmp_path)
        assert main(["crosstalk", "--config", str(cfg)]) == 0
        assert (tmp_path / "results" / "crosstalk.txt").exists()


class TestUsage:
    def test_unknown_subcommand_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate", "--config", "x"])
        assert exc.value.code == 1

    def test_schedule_round_trip_through_files(self, tmp_path):
        ham = write(tmp_path / "h.ham", "0.5 Z Z\n0.25 X I\n0.25 I X\n")
        cfg = write(tmp_path / "c.cfg", "[compile]\nhamiltonian = h.ham\n" + UQS2_2)
        out = tmp_path / "out"
        assert main(["compile", "--config", str(cfg), "--out-dir", str(out)]) == 0
        text = (out / "schedule.txt").read_text()
        sched = schedule_from_text(text)
        from uqsim.compiler import schedule_to_text

        assert schedule_to_text(sched) == text
