"""Compilation of target spin Hamiltonians into pulse schedules of raw ZZ
gates interleaved with fast local-unitary layers.

The raw hardware resource is a switchable ZZ interaction (coupling ``gamma``);
interleaving short evolutions under it with local layers V_i of weight p_i
produces the average Hamiltonian sum_i p_i V_i H0 V_i^dag. Feasibility and
time cost follow the eigenvalue/singular-value rules for homogeneous and
per-qubit control, and long evolutions are Trotterized into L identical
cycles with a quadratic gate-count/error trade-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pauli import (
    CoeffMatrix,
    Hamiltonian,
    LocalLayer,
    PauliError,
    SingleQubitUnitary,
    commutator_generator,
    conjugate,
)

WEIGHT_SUM_TOL = 1e-12


class CompileError(Exception):
    """Base class for compilation failures."""


class InfeasibleTargetError(CompileError):
    """Homogeneous control cannot produce the target (sign condition)."""


class HardwareConstraintError(CompileError):
    """The hardware model cannot realize the requested schedule."""


class UnsupportedInteractionError(CompileError):
    """Interaction matrix outside the synthesizable library."""


# ---------------------------------------------------------------------------
# Control sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlSequence:
    """Ordered (weight, layer) steps with weights p_i in (0, 1] summing to 1."""

    steps: tuple[tuple[float, LocalLayer], ...]

    def __post_init__(self):
        if not self.steps:
            raise CompileError("empty control sequence")
        total = 0.0
        size = None
        for p, layer in self.steps:
            if not (0.0 < p <= 1.0):
                raise CompileError(f"step weight {p} outside (0, 1]")
            total += p
            if layer.n_qubits is not None:
                if size is None:
                    size = layer.n_qubits
                elif size != layer.n_qubits:
                    raise CompileError("layers in a sequence must share n_qubits")
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise CompileError(f"step weights sum to {total!r}, not 1")

    @property
    def n(self) -> int:
        return len(self.steps)

    @property
    def n_qubits(self) -> int | None:
        for _, layer in self.steps:
            if layer.n_qubits is not None:
                return layer.n_qubits
        return None


def effective_hamiltonian(seq: ControlSequence, h0: Hamiltonian) -> Hamiltonian:
    """The average Hamiltonian sum_i p_i V_i h0 V_i^dag in canonical form.

    The first-order remainder of the short-gate expansion is not included;
    it is what the Trotter error budget accounts for.
    """
    fixed = seq.n_qubits
    if fixed is not None and fixed != h0.n_qubits:
        raise CompileError(f"sequence is for {fixed} qubits, Hamiltonian for {h0.n_qubits}")
    acc = Hamiltonian.zero(h0.n_qubits)
    for p, layer in seq.steps:
        acc = acc + conjugate(h0, layer).scaled(p)
    return acc


def protocol_library(name: str) -> ControlSequence:
    """Library control sequences, keyed by what they synthesize from raw ZZ.

    * ``identity``: single trivial step, leaves ZZ as is.
    * ``heisenberg3``: three equal steps mapping gamma*ZZ to (gamma/3)(XX+YY+ZZ).
    * ``xy2``: two equal steps mapping gamma*ZZ to (gamma/2)(XX+YY).
    * ``antisym2``: two inhomogeneous steps mapping gamma*ZZ to
      (gamma/2)(ZY - YZ) on two qubits.
    """
    hom = LocalLayer.homogeneous
    qt = SingleQubitUnitary.quarter_turn
    ident = SingleQubitUnitary.identity()
    if name == "identity":
        return ControlSequence(((1.0, LocalLayer.identity()),))
    if name == "heisenberg3":
        third = 1.0 / 3.0
        return ControlSequence((
            (third, LocalLayer.identity()),
            (third, hom(qt("X"))),
            (third, hom(qt("Y"))),
        ))
    if name == "xy2":
        return ControlSequence((
            (0.5, hom(qt("X"))),
            (0.5, hom(qt("Y"))),
        ))
    if name == "antisym2":
        return ControlSequence((
            (0.5, LocalLayer.inhomogeneous([ident, qt("X", inverse=True)])),
            (0.5, LocalLayer.inhomogeneous([qt("X"), ident])),
        ))
    raise CompileError(f"unknown protocol {name!r}")


# ---------------------------------------------------------------------------
# Feasibility and cost
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    time_cost: float | None
    eigenvalues: tuple[float, ...]
    message: str = ""


# An eigenvalue counts as non-vanishing when above this times the largest.
EIGENVALUE_REL_TOL = 1e-10


def homogeneous_feasibility(m: CoeffMatrix, gamma: float) -> FeasibilityResult:
    """Sign rule for simulating a symmetric interaction with homogeneous control.

    Feasible iff every non-vanishing eigenvalue of M has the sign of gamma;
    the minimal time cost is then (sum of eigenvalues) / gamma.
    """
    if gamma == 0.0:
        raise CompileError("gamma must be nonzero")
    if not m.is_symmetric(1e-10):
        raise CompileError("asymmetric interaction matrix cannot arise from homogeneous control")
    evals = m.eigenvalues()
    scale = float(np.max(np.abs(evals))) if evals.size else 0.0
    if scale == 0.0:
        return FeasibilityResult(True, 0.0, tuple(evals), "zero target")
    bad = [mu for mu in evals if abs(mu) > EIGENVALUE_REL_TOL * scale and mu * gamma < 0.0]
    if bad:
        msg = (
            "infeasible under homogeneous control: eigenvalues "
            f"{[round(b, 12) for b in bad]} have sign opposite to gamma={gamma}"
        )
        return FeasibilityResult(False, None, tuple(evals), msg)
    cost = float(np.sum(evals)) / gamma
    return FeasibilityResult(True, cost, tuple(evals))


def inhomogeneous_cost(m: CoeffMatrix, gamma: float) -> float:
    """Optimal time cost with per-qubit control: sum of singular values / |gamma|."""
    if gamma == 0.0:
        raise CompileError("gamma must be nonzero")
    return float(np.sum(m.singular_values())) / abs(gamma)


# ---------------------------------------------------------------------------
# Sequence synthesis for a single two-qubit interaction
# ---------------------------------------------------------------------------

# Homogeneous quarter-turn steps: layer axis -> (target axis it feeds, sign).
# A homogeneous x quarter turn maps ZZ to YY; a y quarter turn maps ZZ to XX.

def synthesize_diagonal(target: CoeffMatrix, gamma: float) -> tuple[ControlSequence, float]:
    """Homogeneous sequence realizing a diagonal target diag(dx, dy, dz).

    Returns (sequence, rescale) with
    ``rescale * effective_hamiltonian(sequence, gamma*ZZ) == target`` and
    rescale equal to the optimal cost (dx+dy+dz)/gamma.
    """
    if not target.is_diagonal(1e-12):
        raise UnsupportedInteractionError("synthesize_diagonal requires a diagonal target")
    feas = homogeneous_feasibility(target, gamma)
    if not feas.feasible:
        raise InfeasibleTargetError(feas.message)
    dx, dy, dz = (float(target.m[i, i]) for i in range(3))
    cost = feas.time_cost
    if cost == 0.0:
        return protocol_library("identity"), 0.0
    hom = LocalLayer.homogeneous
    qt = SingleQubitUnitary.quarter_turn
    steps = []
    # Step order mirrors the three-step isotropic protocol: identity first,
    # then the x turn (feeds YY), then the y turn (feeds XX).
    for weight, layer in (
        (dz / (gamma * cost), LocalLayer.identity()),
        (dy / (gamma * cost), hom(qt("X"))),
        (dx / (gamma * cost), hom(qt("Y"))),
    ):
        if weight > 0.0:
            steps.append((weight, layer))
    return ControlSequence(tuple(steps)), cost


def _z_to_axis(axis: str, sign: int) -> SingleQubitUnitary:
    """A unitary with u Z u^dag = sign * sigma_axis (sign flips on Z use iX)."""
    qt = SingleQubitUnitary.quarter_turn
    table = {
        ("X", +1): lambda: qt("Y"),
        ("X", -1): lambda: qt("Y", inverse=True),
        ("Y", +1): lambda: qt("X", inverse=True),
        ("Y", -1): lambda: qt("X"),
        ("Z", +1): SingleQubitUnitary.identity,
        ("Z", -1): lambda: SingleQubitUnitary.pauli_flip("X"),
    }
    return table[(axis, sign)]()


def synthesize_diagonal_signed(target: CoeffMatrix, gamma: float) -> tuple[ControlSequence, float]:
    """Per-qubit (inhomogeneous) sequence for a diagonal target of any signs.

    Each axis is fed by one step whose two sites are rotated independently so
    that Z maps to +axis on one site and to (sign) * axis on the other. Cost
    is the singular-value optimum sum(|d_i|)/|gamma|.
    """
    if not target.is_diagonal(1e-12):
        raise UnsupportedInteractionError("diagonal target required")
    diag = [float(target.m[i, i]) for i in range(3)]
    cost = sum(abs(d) for d in diag) / abs(gamma)
    if cost == 0.0:
        return protocol_library("identity"), 0.0
    steps = []
    for axis, d in zip("XYZ", diag):
        if d == 0.0:
            continue
        weight = abs(d) / (abs(gamma) * cost)
        sign = 1 if d * gamma > 0 else -1
        u0 = _z_to_axis(axis, +1)
        u1 = _z_to_axis(axis, sign)
        steps.append((weight, LocalLayer.inhomogeneous([u0, u1])))
    return ControlSequence(tuple(steps)), cost


def _antisym_zy_component(m: CoeffMatrix) -> float | None:
    """J when M = J*(E_zy - E_yz) within 1e-12, else None."""
    mat = m.m
    j = mat[2, 1]
    pattern = np.zeros((3, 3))
    pattern[2, 1] = j
    pattern[1, 2] = -j
    if np.max(np.abs(mat - pattern)) <= 1e-12 * max(1.0, abs(j)):
        return float(j)
    return None


def compile_pair_interaction(
    m: CoeffMatrix, gamma: float, homogeneous_only: bool
) -> tuple[ControlSequence, float]:
    """Sequence + cost for one two-qubit interaction matrix.

    Supported targets: diagonal M (sign-matched for homogeneous control, any
    signs otherwise) and the antisymmetric ZY - YZ pattern (per-qubit control
    only). General dense M synthesis is out of scope.
    """
    if m.is_diagonal(1e-12):
        if homogeneous_only:
            return synthesize_diagonal(m, gamma)
        feas = homogeneous_feasibility(m, gamma)
        if feas.feasible:
            return synthesize_diagonal(m, gamma)
        return synthesize_diagonal_signed(m, gamma)
    j = _antisym_zy_component(m)
    if j is not None and j != 0.0:
        if homogeneous_only:
            raise InfeasibleTargetError(
                "antisymmetric interaction requires per-qubit control "
                "(homogeneous layers only produce exchange-symmetric targets)"
            )
        cost = 2.0 * abs(j) / abs(gamma)
        if j * gamma > 0:
            return protocol_library("antisym2"), cost
        qt = SingleQubitUnitary.quarter_turn
        ident = SingleQubitUnitary.identity()
        mirrored = ControlSequence((
            (0.5, LocalLayer.inhomogeneous([qt("X", inverse=True), ident])),
            (0.5, LocalLayer.inhomogeneous([ident, qt("X")])),
        ))
        return mirrored, cost
    if m.is_symmetric(1e-10):
        raise UnsupportedInteractionError(
            "general symmetric interaction synthesis is not implemented; "
            "only diagonal targets are supported"
        )
    raise UnsupportedInteractionError(
        "interaction matrix outside the supported library (diagonal or ZY-YZ)"
    )


# ---------------------------------------------------------------------------
# Schedule IR
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ApplyLocal:
    """Apply a layer of fast single-qubit unitaries."""

    layer: LocalLayer

    def equals(self, other) -> bool:
        if not isinstance(other, ApplyLocal):
            return False
        a, b = self.layer, other.layer
        if a.is_homogeneous != b.is_homogeneous:
            return False
        if a.is_homogeneous:
            return bool(np.array_equal(a.unitary_at(0).matrix, b.unitary_at(0).matrix))
        if a.n_qubits != b.n_qubits:
            return False
        return all(
            np.array_equal(a.unitary_at(q).matrix, b.unitary_at(q).matrix)
            for q in range(a.n_qubits)
        )


@dataclass(frozen=True)
class RawGate:
    """exp(-i * theta * sum_targets w * Z_a Z_b) on the listed qubit pairs."""

    gate_id: str
    theta: float
    targets: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise CompileError("gate angle must be finite")
        for a, b, w in self.targets:
            if a == b:
                raise CompileError(f"gate targets identical qubit {a}")

    def equals(self, other) -> bool:
        return (
            isinstance(other, RawGate)
            and self.gate_id == other.gate_id
            and self.theta == other.theta
            and self.targets == other.targets
        )


Instruction = ApplyLocal | RawGate


@dataclass(frozen=True)
class CostReport:
    """Resource accounting of one compiled schedule.

    c = T/T' is the time overhead; L cycles of physical length step_t realize
    the run, with L = ceil(c^2 T'^2 / eps) so the first-order error stays
    inside the budget; chi = n*L/T counts control operations per unit of
    physical time.
    """

    time_cost: float
    n_controls: int
    num_gates: int
    step_t: float
    chi: float
    epsilon: float
    t_prime: float
    total_time: float

    def as_dict(self) -> dict:
        return {
            "c": self.time_cost,
            "n": self.n_controls,
            "L": self.num_gates,
            "step_t": self.step_t,
            "chi": self.chi,
            "epsilon": self.epsilon,
            "t_prime": self.t_prime,
            "T": self.total_time,
        }

    def to_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in self.as_dict().items())


@dataclass(frozen=True)
class PulseSchedule:
    """Time-ordered instructions ready for execution (first entry acts first)."""

    n_qubits: int
    instructions: tuple[Instruction, ...]
    cost: CostReport | None = None
    cycle_length: int | None = None
    num_cycles: int | None = None

    def equals(self, other: "PulseSchedule") -> bool:
        return (
            self.n_qubits == other.n_qubits
            and len(self.instructions) == len(other.instructions)
            and all(a.equals(b) for a, b in zip(self.instructions, other.instructions))
        )

    def gate_angle_totals(self) -> dict[str, float]:
        """Sum of |theta| per gate family; conserved by hardware realization."""
        out: dict[str, float] = {}
        for ins in self.instructions:
            if isinstance(ins, RawGate):
                out[ins.gate_id] = out.get(ins.gate_id, 0.0) + abs(ins.theta)
        return out


def _format_unitary(u: SingleQubitUnitary) -> str:
    return " ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in u.matrix.ravel())


def _parse_unitary(tokens: list[str]) -> SingleQubitUnitary:
    vals = [float(t) for t in tokens]
    m = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
    return SingleQubitUnitary(m.reshape(2, 2))


def schedule_to_text(schedule: PulseSchedule) -> str:
    lines = [
        f"# pulse schedule version=1 n_qubits={schedule.n_qubits}"
        + (f" cycles={schedule.num_cycles} cycle_length={schedule.cycle_length}"
           if schedule.num_cycles is not None else "")
    ]
    for ins in schedule.instructions:
        if isinstance(ins, ApplyLocal):
            if ins.layer.is_homogeneous:
                lines.append("LOCAL H " + _format_unitary(ins.layer.unitary_at(0)))
            else:
                parts = [_format_unitary(ins.layer.unitary_at(q)) for q in range(ins.layer.n_qubits)]
                lines.append("LOCAL I " + " ".join(parts))
        else:
            targets = " ".join(f"{a}-{b}:{w!r}" for a, b, w in ins.targets)
            lines.append(f"GATE {ins.gate_id} {ins.theta!r} {targets}")
    return "\n".join(lines) + "\n"


def schedule_from_text(text: str) -> PulseSchedule:
    n_qubits = None
    num_cycles = None
    cycle_length = None
    instructions: list[Instruction] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("n_qubits="):
                    n_qubits = int(tok.split("=", 1)[1])
                elif tok.startswith("cycles="):
                    num_cycles = int(tok.split("=", 1)[1])
                elif tok.startswith("cycle_length="):
                    cycle_length = int(tok.split("=", 1)[1])
            continue
        parts = line.split()
        try:
            if parts[0] == "LOCAL":
                if parts[1] == "H":
                    instructions.append(ApplyLocal(LocalLayer.homogeneous(_parse_unitary(parts[2:]))))
                elif parts[1] == "I":
                    vals = parts[2:]
                    if len(vals) % 8:
                        raise CompileError("inhomogeneous layer needs 8 floats per qubit")
                    units = [_parse_unitary(vals[i : i + 8]) for i in range(0, len(vals), 8)]
                    instructions.append(ApplyLocal(LocalLayer.inhomogeneous(units)))
                else:
                    raise CompileError(f"unknown layer kind {parts[1]!r}")
            elif parts[0] == "GATE":
                gate_id = parts[1]
                theta = float(parts[2])
                targets = []
                for tok in parts[3:]:
                    pair, w = tok.split(":")
                    a, b = pair.split("-")
                    targets.append((int(a), int(b), float(w)))
                instructions.append(RawGate(gate_id, theta, tuple(targets)))
            else:
                raise CompileError(f"unknown instruction {parts[0]!r}")
        except (ValueError, IndexError, PauliError) as exc:
            raise CompileError(f"schedule parse error at line {lineno}: {exc}") from exc
    if n_qubits is None:
        sites = [q for ins in instructions if isinstance(ins, RawGate) for a, b, _ in ins.targets for q in (a, b)]
        n_qubits = max(sites) + 1 if sites else 1
    return PulseSchedule(n_qubits, tuple(instructions), None, cycle_length, num_cycles)


# ---------------------------------------------------------------------------
# Cycle plans and Trotter scheduling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawGateSpec:
    """One hardware gate inside a cycle: angle per unit simulated time."""

    gate_id: str
    targets: tuple[tuple[int, int, float], ...]
    unit_angle: float


@dataclass(frozen=True)
class PlannedFamily:
    """A group of raw gates driven inside one control-sequence wrap."""

    gates: tuple[RawGateSpec, ...]
    sequence: ControlSequence
    cost: float  # raw-interaction time per unit simulated time


@dataclass(frozen=True)
class CyclePlan:
    """Everything needed to emit one Trotter cycle for any simulated dt."""

    n_qubits: int
    families: tuple[PlannedFamily, ...]
    local_fields: tuple[tuple[float, float, float], ...] | None  # per-site (bx, by, bz)
    homogeneous_locals: bool = True

    @property
    def time_cost(self) -> float:
        return sum(f.cost for f in self.families)

    def max_unit_angle(self) -> float:
        """Largest |theta|*weight of any emitted gate per unit simulated time."""
        out = 0.0
        for fam in self.families:
            for p, _ in fam.sequence.steps:
                for g in fam.gates:
                    wmax = max((abs(w) for _, _, w in g.targets), default=0.0)
                    out = max(out, abs(p * g.unit_angle) * wmax)
        return out


def _local_layer_for(plan: CyclePlan, dt: float) -> ApplyLocal | None:
    fields = plan.local_fields
    if fields is None:
        return None
    units = []
    any_nonzero = False
    for bx, by, bz in fields:
        norm = math.sqrt(bx * bx + by * by + bz * bz)
        if norm * abs(dt) < 1e-300:
            units.append(SingleQubitUnitary.identity())
            continue
        any_nonzero = True
        units.append(SingleQubitUnitary.rot((bx / norm, by / norm, bz / norm), norm * dt))
    if not any_nonzero:
        return None
    if plan.homogeneous_locals:
        return ApplyLocal(LocalLayer.homogeneous(units[0]))
    return ApplyLocal(LocalLayer.inhomogeneous(units))


def emit_cycle(plan: CyclePlan, dt: float, scale: float = 1.0) -> list[Instruction]:
    """Instructions of one Trotter cycle simulating `scale * H` for time dt.

    Local terms come first, then each gate family wrapped in its control
    sequence; adjacent local layers inside a wrap are merged, so an n-step
    sequence emits n local layers per cycle.
    """
    if scale == 0.0 or dt == 0.0:
        return []
    out: list[Instruction] = []
    local = _local_layer_for(plan, dt * scale)
    if local is not None:
        out.append(local)
    for fam in plan.families:
        steps = fam.sequence.steps
        opening = steps[0][1].dagger()
        if not opening.is_identity():
            out.append(ApplyLocal(opening))
        for i, (p, layer) in enumerate(steps):
            for g in fam.gates:
                theta = p * g.unit_angle * dt * scale
                if theta != 0.0:
                    out.append(RawGate(g.gate_id, theta, g.targets))
            if i + 1 < len(steps):
                bridge = steps[i + 1][1].dagger().compose(layer)
            else:
                bridge = layer
            if not bridge.is_identity():
                out.append(ApplyLocal(bridge))
    return out


def _split_target(target: Hamiltonian):
    """Split into per-site field vectors and per-pair coefficient matrices."""
    fields = [[0.0, 0.0, 0.0] for _ in range(target.n_qubits)]
    pairs: dict[tuple[int, int], np.ndarray] = {}
    for term in target.terms:
        sites = term.sites()
        if len(sites) == 0:
            raise CompileError("constant (identity) terms are not representable")
        if len(sites) == 1:
            q = sites[0]
            fields[q]["XYZ".index(term.ops[q])] = term.coeff
        elif len(sites) == 2:
            a, b = sites
            m = pairs.setdefault((a, b), np.zeros((3, 3)))
            m["XYZ".index(term.ops[a]), "XYZ".index(term.ops[b])] = term.coeff
        else:
            raise CompileError(
                f"term {term.ops} involves {len(sites)} qubits; only 1- and 2-qubit "
                "terms are schedulable (see the commutator gate for 3-body terms)"
            )
    any_field = any(any(v != 0.0 for v in f) for f in fields)
    return (tuple(tuple(f) for f in fields) if any_field else None), pairs


def plan_for_hamiltonian(target: Hamiltonian, hw) -> CyclePlan:
    """Build a cycle plan for a 1-/2-qubit-term target on the given hardware."""
    from . import hardware as hwmod

    fields, pairs = _split_target(target)
    if isinstance(hw, hwmod.LatticeModel):
        return _plan_uqs1(target.n_qubits, fields, pairs, hw)
    if isinstance(hw, hwmod.TrapArrayModel):
        return _plan_uqs2(target.n_qubits, fields, pairs, hw)
    raise CompileError(f"unknown hardware model {type(hw).__name__}")


def _plan_uqs1(n_qubits, fields, pairs, hw) -> CyclePlan:
    from . import hardware as hwmod

    if fields is not None:
        first = fields[0]
        if any(f != first for f in fields):
            raise HardwareConstraintError(
                "site-dependent local terms require single qubit addressability"
            )
    classes = hwmod.displacement_classes(hw)
    remaining = dict(pairs)
    families = []
    for disp, class_pairs in classes:
        keys = [(a, b) for a, b, _ in class_pairs]
        present = [k for k in keys if k in remaining]
        if not present:
            continue
        if len(present) != len(keys):
            missing = [k for k in keys if k not in remaining]
            raise HardwareConstraintError(
                f"translation class {disp} is incomplete (missing pairs {missing}); "
                "non-translation-invariant targets require single qubit addressability"
            )
        # Per-pair interaction must be the class multiplicity times a common
        # unit matrix (multiplicity > 1 only for periodic wrap-around classes).
        unit_m = remaining[keys[0]] / class_pairs[0][2]
        for (a, b, mult) in class_pairs[1:]:
            if not np.allclose(remaining[(a, b)] / mult, unit_m, atol=1e-14, rtol=0.0):
                raise HardwareConstraintError(
                    f"pairs in translation class {disp} carry different interactions; "
                    "requires single qubit addressability"
                )
        seq, cost = compile_pair_interaction(CoeffMatrix(unit_m), hw.gamma, homogeneous_only=True)
        gate = RawGateSpec(
            gate_id=hwmod.displacement_gate_id(disp),
            targets=tuple((a, b, float(mult)) for a, b, mult in class_pairs),
            unit_angle=hw.gamma * cost,
        )
        families.append(PlannedFamily((gate,), seq, cost))
        for k in keys:
            del remaining[k]
    if remaining:
        raise HardwareConstraintError(
            f"pairs {sorted(remaining)} are not lattice displacement classes "
            f"(available j: {sorted(hw.available_j)})"
        )
    return CyclePlan(n_qubits, tuple(families), fields, homogeneous_locals=True)


def _embed_pair_sequence(seq: ControlSequence, a: int, b: int, n: int) -> ControlSequence:
    """Lift a two-qubit pair sequence onto qubits (a, b) of an n-qubit array."""
    if n == 2 and (a, b) == (0, 1):
        return seq
    ident = SingleQubitUnitary.identity()
    steps = []
    for p, layer in seq.steps:
        units = [ident] * n
        units[a] = layer.unitary_at(0)
        units[b] = layer.unitary_at(1)
        steps.append((p, LocalLayer.inhomogeneous(units)))
    return ControlSequence(tuple(steps))


def _plan_uqs2(n_qubits, fields, pairs, hw) -> CyclePlan:
    families = []
    for (a, b), m in sorted(pairs.items()):
        gamma_ab = hw.gamma * hw.inv_cube_distance(a, b)
        seq, cost = compile_pair_interaction(CoeffMatrix(m), gamma_ab, homogeneous_only=False)
        gate = RawGateSpec(
            gate_id=f"push:{a}-{b}",
            targets=((a, b, 1.0),),
            unit_angle=gamma_ab * cost,
        )
        families.append(PlannedFamily((gate,), _embed_pair_sequence(seq, a, b, n_qubits), cost))
    return CyclePlan(n_qubits, tuple(families), fields, homogeneous_locals=False)


def _ceil_guarded(x: float) -> int:
    # Guard against float fuzz pushing an exact integer over the next ceiling.
    return max(0, math.ceil(x - 1e-9))


def trotter_schedule(
    target: Hamiltonian,
    t_prime: float,
    epsilon: float,
    hw,
    *,
    plan: CyclePlan | None = None,
    num_cycles: int | None = None,
) -> tuple[PulseSchedule, CostReport]:
    """Compile `target` for simulated time t_prime within error budget epsilon.

    Emits L identical Trotter cycles with L = ceil(c^2 t'^2 / eps) (or the
    explicit `num_cycles`); each cycle realizes every two-qubit term through
    its control sequence around the raw hardware gate and every one-qubit
    term as a local layer.
    """
    if t_prime < 0 or epsilon <= 0:
        raise CompileError("need t_prime >= 0 and epsilon > 0")
    if plan is None:
        plan = plan_for_hamiltonian(target, hw)
    c = plan.time_cost
    if num_cycles is not None:
        num = int(num_cycles)
    else:
        num = _ceil_guarded(c * c * t_prime * t_prime / epsilon)
        if num == 0 and (plan.families or plan.local_fields) and t_prime > 0:
            num = 1
    if num == 0:
        report = CostReport(c, 0, 0, 0.0, 0.0, epsilon, t_prime, 0.0)
        return PulseSchedule(target.n_qubits, (), report, 0, 0), report
    dt = t_prime / num
    cycle = emit_cycle(plan, dt)
    n_controls = sum(1 for ins in cycle if isinstance(ins, ApplyLocal))
    total_time = c * t_prime
    step_t = total_time / num
    chi = n_controls * num / total_time if total_time > 0 else 0.0
    report = CostReport(c, n_controls, num, step_t, chi, epsilon, t_prime, total_time)
    schedule = PulseSchedule(
        target.n_qubits, tuple(cycle) * num, report, len(cycle), num
    )
    return schedule, report


# ---------------------------------------------------------------------------
# Commutator (three-body) gate and decoupling echo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThreeBodyGate:
    """Four-segment commutator gate; segments are (generator, angle), applied
    first to last as exp(-i*h*angle)."""

    segments: tuple[tuple[Hamiltonian, float], ...]
    generator: Hamiltonian
    effective_time: float


def three_body_gate(h1: Hamiltonian, h2: Hamiltonian, theta: float) -> ThreeBodyGate:
    """Concatenate four short two-body gates whose net effect is the
    commutator generator -i[h1, h2] for effective time theta^2 (plus an
    O(theta^3) remainder).

    Segments execute first to last: exp(-i h1 t), exp(-i h2 t), then their
    inverses; the composite is expm([H1, H2] * theta^2) + O(theta^3), i.e.
    expm(i * generator * theta^2).
    """
    if h1.n_qubits != h2.n_qubits:
        raise CompileError("size mismatch")
    for h in (h1, h2):
        if any(t.weight > 2 for t in h.terms):
            raise CompileError("commutator gate inputs must be two-body Hamiltonians")
    segments = (
        (h1, theta),
        (h2, theta),
        (h1, -theta),
        (h2, -theta),
    )
    return ThreeBodyGate(segments, commutator_generator(h1, h2), theta * theta)


@dataclass(frozen=True)
class EchoSequence:
    """Gate, homogeneous pi flip, gate, inverse flip: cancels single-qubit Z
    phases of the raw generator exactly while doubling its ZZ part."""

    raw: Hamiltonian
    theta: float
    flip: LocalLayer
    zz_part: Hamiltonian

    @property
    def segments(self):
        return (
            ("evolve", self.raw, self.theta),
            ("layer", self.flip.dagger()),
            ("evolve", self.raw, self.theta),
            ("layer", self.flip),
        )

    def effective_angle(self) -> float:
        return 2.0 * self.theta

    def to_schedule(self) -> PulseSchedule:
        """Expand into engine instructions (ZZ gates + diagonal local layers)."""
        n = self.raw.n_qubits
        instructions: list[Instruction] = []
        for kind, *payload in self.segments:
            if kind == "layer":
                instructions.append(ApplyLocal(payload[0]))
                continue
            h, theta = payload
            z_fields = [0.0] * n
            zz_targets = []
            for t in h.terms:
                sites = t.sites()
                if len(sites) == 1:
                    z_fields[sites[0]] += t.coeff
                else:
                    zz_targets.append((sites[0], sites[1], t.coeff))
            if zz_targets:
                instructions.append(RawGate("echo-zz", theta, tuple(zz_targets)))
            if any(z_fields):
                units = [
                    SingleQubitUnitary.rot((0.0, 0.0, 1.0), g * theta)
                    if g != 0.0 else SingleQubitUnitary.identity()
                    for g in z_fields
                ]
                instructions.append(ApplyLocal(LocalLayer.inhomogeneous(units)))
        return PulseSchedule(n, tuple(instructions))


def decoupling_echo(raw: Hamiltonian, theta: float) -> EchoSequence:
    """Echo sequence for a raw generator of Z and ZZ terms only.

    The composite unitary equals exp(-i * 2*theta * sum gamma_ab Z_a Z_b)
    exactly (all generators commute and the flip negates every single Z).
    """
    zz_terms = []
    for t in raw.terms:
        chars = set(t.ops) - {"I"}
        if chars - {"Z"}:
            raise CompileError(f"echo guarantee void: term {t.ops} is not Z/ZZ")
        if t.weight == 2:
            zz_terms.append(t)
        elif t.weight > 2:
            raise CompileError(f"echo raw generator must be at most two-body, got {t.ops}")
    flip = LocalLayer.homogeneous(SingleQubitUnitary.pauli_flip("X"))
    return EchoSequence(raw, theta, flip, Hamiltonian(raw.n_qubits, tuple(zz_terms)))


def magnetic_field_layer(
    b: float,
    direction: Sequence[float],
    dt: float,
    b_per_qubit: Sequence[float] | None = None,
) -> LocalLayer:
    """Local layer exp(-i * B * (n.sigma) * dt), homogeneous by default.

    With `b_per_qubit`, a per-site field magnitude list replaces `b` and the
    layer is inhomogeneous (same direction everywhere).
    """
    n = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(n))
    if abs(norm - 1.0) > 1e-10:
        raise CompileError(f"direction must be a unit vector (|n| = {norm})")
    n = n / norm
    if b_per_qubit is None:
        if b * dt == 0.0:
            return LocalLayer.identity()
        return LocalLayer.homogeneous(SingleQubitUnitary.rot(n, b * dt))
    units = [
        SingleQubitUnitary.rot(n, ba * dt) if ba * dt != 0.0 else SingleQubitUnitary.identity()
        for ba in b_per_qubit
    ]
    return LocalLayer.inhomogeneous(units)
