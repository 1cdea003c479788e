import math

import numpy as np
import pytest

import oracles
from uqsim.compiler import ApplyLocal, HardwareConstraintError, emit_cycle
from uqsim.engine import ErrorModel
from uqsim.experiments import (
    AdiabaticConfig,
    ExperimentError,
    Geometry,
    GroundPath,
    NamedModel,
    SweepRow,
    adiabatic_run,
    build_model,
    error_sweep,
    min_gap,
    nn_chain,
    protocol_for_model,
    random_couplings,
    sweep_table_csv,
)
from uqsim.hardware import LatticeModel, TrapArrayModel
from uqsim.pauli import Hamiltonian, conjugate as pauli_conjugate


def chain_trap(n, **kw):
    return TrapArrayModel(positions=tuple((float(i),) for i in range(n)), **kw)


def plan_effective(plan) -> Hamiltonian:
    """Symbolic simulated Hamiltonian per unit time of a cycle plan."""
    acc = Hamiltonian.zero(plan.n_qubits)
    for fam in plan.families:
        gen_terms = []
        for g in fam.gates:
            for a, b, w in g.targets:
                ops = ["I"] * plan.n_qubits
                ops[a] = "Z"
                ops[b] = "Z"
                gen_terms.append((g.unit_angle * w, "".join(ops)))
        gen = Hamiltonian.from_terms(plan.n_qubits, gen_terms)
        for p, layer in fam.sequence.steps:
            acc = acc + pauli_conjugate(gen, layer).scaled(p)
    if plan.local_fields is not None:
        terms = []
        for q, (bx, by, bz) in enumerate(plan.local_fields):
            for c, axis in zip((bx, by, bz), "XYZ"):
                if c != 0.0:
                    ops = ["I"] * plan.n_qubits
                    ops[q] = axis
                    terms.append((c, "".join(ops)))
        acc = acc + Hamiltonian.from_terms(plan.n_qubits, terms)
    return acc


class TestBuildModel:
    def test_ising_two_sites(self):
        j = 0.8
        h = build_model(NamedModel("ising", Geometry.chain(2), j=j))
        assert h == Hamiltonian.from_terms(2, [(-j / 2, "ZZ")])

    def test_dipole_two_sites_matches_ladder_oracle(self):
        # expand J(s+ s- + s- s+) at unit distance with the sigma+- matrices
        j = 1.0
        h = build_model(NamedModel("dipole", Geometry.chain(2), j=j))
        plus_minus = np.kron(oracles.SMINUS, oracles.SPLUS)  # qubit0 -> +, qubit1 -> -
        minus_plus = np.kron(oracles.SPLUS, oracles.SMINUS)
        # ordered-pair sum of Eq-style dipole: (1/2) * sum_{a != b} J (s+_a s-_b + s-_a s+_b)
        dense = 0.5 * j * 2.0 * (plus_minus + minus_plus)
        np.testing.assert_allclose(h.to_matrix(), dense, atol=1e-14)
        assert h.coefficient("XX") == pytest.approx(j / 2)
        assert h.coefficient("YY") == pytest.approx(j / 2)

    def test_dipole_cube_law(self):
        h = build_model(NamedModel("dipole", Geometry.chain(3), j=2.0))
        assert h.coefficient("XIX") == pytest.approx(2.0 / (2 * 8))

    def test_heisenberg_with_field(self):
        j, b = 1.0, 0.3
        h = build_model(
            NamedModel("heisenberg", Geometry.chain(2), j=j, b=b, direction=(1.0, 0.0, 0.0))
        )
        assert h.coefficient("XX") == pytest.approx(-j / 2)
        assert h.coefficient("XI") == pytest.approx(b)
        assert h.coefficient("IX") == pytest.approx(b)

    def test_random_ising_map_and_fields(self):
        model = NamedModel(
            "random_ising",
            Geometry.chain(3),
            j_map=(((0, 1), 1.0), ((1, 2), -0.5)),
            b_list=(0.1, 0.0, 0.2),
        )
        h = build_model(model)
        assert h.coefficient("ZZI") == pytest.approx(-0.5)
        assert h.coefficient("IZZ") == pytest.approx(0.25)
        assert h.coefficient("XII") == pytest.approx(0.1)
        assert h.coefficient("IIX") == pytest.approx(0.2)

    def test_random_ising_seeded_draws_reproduce(self):
        geo = Geometry.chain(4)
        m = NamedModel("random_ising", geo, j_range=(-1.0, 1.0), seed=9)
        assert random_couplings(m) == random_couplings(m)
        with pytest.raises(ExperimentError):
            NamedModel("random_ising", geo, j_range=(-1.0, 1.0))

    def test_ising_relabeling_invariance(self):
        # reversing a chain is a graph automorphism: canonical forms agree
        n = 5
        h = build_model(NamedModel("ising", Geometry.chain(n), j=0.7))
        relabeled = [
            (t.coeff, "".join(t.ops[n - 1 - q] for q in range(n))) for t in h.terms
        ]
        assert Hamiltonian.from_terms(n, relabeled) == h


class TestProtocolForModel:
    def test_dipole_uqs2_single_global_push(self):
        geo = Geometry.chain(4)
        plan = protocol_for_model(NamedModel("dipole", geo, j=1.0), chain_trap(4))
        assert len(plan.families) == 1
        fam = plan.families[0]
        assert len(fam.gates) == 1
        gate = fam.gates[0]
        # raw generator carries the exact 1/d^3 weights of the global push
        weights = {(a, b): w for a, b, w in gate.targets}
        assert weights[(0, 1)] == 1.0
        assert weights[(0, 2)] == 1.0 / 8.0
        assert weights[(0, 3)] == 1.0 / 27.0
        assert fam.sequence.n == 2

    def test_dipole_uqs1_cube_law_angles(self):
        geo = Geometry.chain(4)
        hw = LatticeModel(n_sites=4, available_j=frozenset({1, 2, 3}))
        plan = protocol_for_model(NamedModel("dipole", geo, j=1.0), hw)
        fam = plan.families[0]
        units = {g.gate_id: g.unit_angle for g in fam.gates}
        assert units["uqs1:2"] / units["uqs1:1"] == pytest.approx(1.0 / 8.0, rel=1e-15)
        assert units["uqs1:3"] / units["uqs1:1"] == pytest.approx(1.0 / 27.0, rel=1e-15)

    def test_dipole_uqs1_truncates_at_available_j(self):
        geo = Geometry.chain(5)
        hw = LatticeModel(n_sites=5, available_j=frozenset({1, 2}))
        plan = protocol_for_model(NamedModel("dipole", geo, j=1.0), hw)
        ids = {g.gate_id for g in plan.families[0].gates}
        assert ids == {"uqs1:1", "uqs1:2"}

    def test_heisenberg_uqs1_three_layers_per_cycle(self):
        geo = Geometry.chain(3)
        hw = LatticeModel(n_sites=3, gamma=-1.0)  # -(J/2) target needs gamma < 0
        plan = protocol_for_model(NamedModel("heisenberg", geo, j=1.0), hw)
        cycle = emit_cycle(plan, 0.01)
        layers = [i for i in cycle if isinstance(i, ApplyLocal)]
        assert len(layers) == 3
        assert all(l.layer.is_homogeneous for l in layers)

    def test_dipole_protocol_identity_uqs2(self):
        # the xy-wrapped global push reproduces the dipole Hamiltonian exactly
        geo = Geometry.chain(5)
        model = NamedModel("dipole", geo, j=1.0)
        plan = protocol_for_model(model, chain_trap(5))
        assert plan_effective(plan) == build_model(model)

    def test_dipole_protocol_identity_uqs1(self):
        geo = Geometry.chain(5)
        model = NamedModel("dipole", geo, j=1.0)
        plan = protocol_for_model(model, LatticeModel(n_sites=5))
        assert plan_effective(plan) == build_model(model)

    def test_dipole_rescale_with_j(self):
        # general J: identity up to a global positive time rescale
        geo = Geometry.chain(3)
        model = NamedModel("dipole", geo, j=2.5)
        plan = protocol_for_model(model, chain_trap(3))
        eff = plan_effective(plan)
        target = build_model(model)
        ratios = [target.coefficient(t.ops) / t.coeff for t in eff.terms]
        assert all(r == pytest.approx(1.0, rel=1e-12) for r in ratios)

    def test_random_ising_gate_counts_proportional(self):
        geo = Geometry.chain(4)
        model = NamedModel(
            "random_ising", geo,
            j_map=(((0, 1), 0.5), ((1, 2), 1.0), ((2, 3), 2.0)),
        )
        plan = protocol_for_model(model, chain_trap(4))
        counts = {fam.gates[0].gate_id: len(fam.gates) for fam in plan.families}
        assert counts["push:0-1"] == 1
        assert counts["push:1-2"] == 2
        assert counts["push:2-3"] == 4
        assert plan_effective(plan) == build_model(model)

    def test_dipole_uqs2_rejects_mismatched_positions(self):
        geo = Geometry.chain(3)
        stretched = TrapArrayModel(positions=((0.0,), (2.0,), (4.0,)))
        with pytest.raises(HardwareConstraintError, match="positions"):
            protocol_for_model(NamedModel("dipole", geo, j=1.0), stretched)

    def test_random_ising_uqs1_needs_addressability(self):
        geo = Geometry.chain(3)
        model = NamedModel("random_ising", geo, j_map=(((0, 1), 1.0), ((1, 2), 0.5)))
        with pytest.raises(HardwareConstraintError, match="addressability"):
            protocol_for_model(model, LatticeModel(n_sites=3))


class TestMinGap:
    def test_constant_path(self):
        h = Hamiltonian.from_terms(1, [(1.0, "Z")])
        res = min_gap(h, h, samples=11)
        assert res.min_gap == pytest.approx(2.0, abs=1e-10)
        assert not res.gapless

    def test_single_qubit_closed_form(self):
        hz = Hamiltonian.from_terms(1, [(1.0, "Z")])
        hx = Hamiltonian.from_terms(1, [(1.0, "X")])
        res = min_gap(hz, hx, samples=101)
        assert res.min_gap == pytest.approx(math.sqrt(2.0), abs=1e-9)
        assert res.argmin_k == pytest.approx(0.5, abs=1e-9)
        assert res.recommended_time == pytest.approx(1 / math.sqrt(2.0), abs=1e-9)

    def test_fig4_path_regression_baseline(self):
        n = 7
        init = nn_chain("zz", n)
        target = build_model(NamedModel("dipole", Geometry.chain(n), j=1.0))
        res = min_gap(init, target, samples=101)
        # regression value recorded at first implementation
        assert res.min_gap == pytest.approx(0.6927372499417848, abs=1e-6)
        assert res.min_gap > 0 and not res.gapless


class TestAdiabaticRun:
    def setup_method(self):
        self.n = 4
        self.init = nn_chain("zz", self.n)
        self.target = build_model(NamedModel("dipole", Geometry.chain(self.n), j=1.0))
        self.hw = LatticeModel(n_sites=self.n)

    def test_single_step_runs(self):
        cfg = AdiabaticConfig(self.init, self.target, steps=1, theta1=0.05)
        res = adiabatic_run(cfg, self.hw)
        assert len(res.trajectory) == 1
        assert res.t_sim == pytest.approx(res.dt)
        assert sum(w for _, w in res.histogram) == pytest.approx(1.0, abs=1e-9)

    def test_zero_error_trotter_deterministic(self):
        cfg = AdiabaticConfig(self.init, self.target, steps=20, theta1=0.05, record_every=0)
        a = adiabatic_run(cfg, self.hw)
        b = adiabatic_run(cfg, self.hw)
        np.testing.assert_array_equal(a.final_state.amps, b.final_state.amps)

    def test_seeded_noise_deterministic(self):
        err = ErrorModel(eta_local=0.01, eta_int=0.01, seed=5)
        cfg = AdiabaticConfig(self.init, self.target, steps=10, theta1=0.05,
                              error_model=err, record_every=0)
        a = adiabatic_run(cfg, self.hw)
        b = adiabatic_run(cfg, self.hw)
        np.testing.assert_array_equal(a.final_state.amps, b.final_state.amps)

    def test_ramp_endpoints_enforced(self):
        cfg = AdiabaticConfig(self.init, self.target, steps=5, theta1=0.05,
                              ramp=lambda x: 1.0 - 0.5 * x)
        with pytest.raises(ExperimentError):
            adiabatic_run(cfg, self.hw)

    def test_cosine_ramp_runs(self):
        cfg = AdiabaticConfig(self.init, self.target, steps=10, theta1=0.05, ramp="cosine")
        res = adiabatic_run(cfg, self.hw)
        assert res.trajectory[-1][1] == pytest.approx(0.0, abs=1e-12)

    def test_trotter_close_to_exact_stepper(self):
        shared = dict(h_initial=self.init, h_target=self.target, steps=200,
                      theta1=0.05, record_every=0)
        trot = adiabatic_run(AdiabaticConfig(**shared), self.hw)
        exact = adiabatic_run(AdiabaticConfig(**shared, stepper="exact"), self.hw)
        assert abs(trot.ground_weight - exact.ground_weight) < 0.02

    @pytest.mark.slow
    def test_exact_step_convergence_is_monotone(self):
        n = 7
        init = nn_chain("zz", n)
        target = build_model(NamedModel("dipole", Geometry.chain(n), j=1.0))
        path = GroundPath(init, target)
        weights = []
        for steps in (50, 100, 250, 500, 1500):
            cfg = AdiabaticConfig(init, target, steps=steps, theta1=0.1,
                                  record_every=0, stepper="exact")
            res = adiabatic_run(cfg, LatticeModel(n_sites=n), ground_path=path)
            weights.append(res.ground_weight)
        assert all(b >= a - 1e-12 for a, b in zip(weights, weights[1:]))
        assert weights[-1] >= 0.99

    @pytest.mark.slow
    def test_min_gap_time_recommendation(self):
        # total simulated time past 10/min_gap reaches >= 0.9 ground weight
        n = 7
        init = nn_chain("zz", n)
        target = build_model(NamedModel("dipole", Geometry.chain(n), j=1.0))
        gap = min_gap(init, target, samples=41).min_gap
        theta1 = 0.1
        steps = math.ceil(10.0 / gap / theta1)
        cfg = AdiabaticConfig(init, target, steps=steps, theta1=theta1,
                              record_every=0, stepper="exact")
        res = adiabatic_run(cfg, LatticeModel(n_sites=n))
        assert res.t_sim >= 10.0 / gap
        assert res.ground_weight >= 0.9


class TestErrorSweep:
    def test_grid_shape_and_eta_zero(self):
        n = 3
        init = nn_chain("zz", n)
        target = build_model(NamedModel("dipole", Geometry.chain(n), j=1.0))
        cfg = AdiabaticConfig(init, target, steps=10, theta1=0.05, record_every=0)
        rows = error_sweep(cfg, LatticeModel(n_sites=n),
                           eta_list=[0.0, 0.02], steps_list=[5, 10], repetitions=4)
        assert len(rows) == 4
        zero_rows = [r for r in rows if r.eta == 0.0]
        assert all(r.std_fidelity == 0.0 and r.repetitions == 1 for r in zero_rows)
        noisy = [r for r in rows if r.eta > 0]
        assert all(r.repetitions == 4 for r in noisy)

    def test_csv_stable_header(self):
        rows = [SweepRow(0.0, 10, 1, 0.5, 0.0, 0.0)]
        text = sweep_table_csv(rows)
        assert text.splitlines()[0] == "eta,steps,repetitions,mean_fidelity,std_fidelity,stderr"
