"""Dense statevector execution of pulse schedules with timing-error
injection, plus the exact-diagonalization oracle used to validate them.

Amplitudes are indexed little-endian (qubit 0 = least significant bit); hot
loops dispatch through :mod:`uqsim.kernels`. Runs are deterministic: the
noise stream is drawn sequentially in instruction order from a seeded PCG64
generator and logged per instruction, so identical (seed, schedule) pairs
give bit-identical final states in single-threaded mode.
"""
from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .compiler import ApplyLocal, PulseSchedule, RawGate
from .pauli import Hamiltonian, LocalLayer, PauliString, SIGMA

RNG_ALGORITHM = "numpy-PCG64"
NORM_TOL = 1e-9
STATEVECTOR_CAP = 24


class EngineError(Exception):
    pass


def dense_cap() -> int:
    """Qubit cap for dense-matrix operations; override with UQS_DENSE_CAP."""
    raw = os.environ.get("UQS_DENSE_CAP", "").strip()
    if raw:
        try:
            return int(raw)
        except ValueError as exc:
            raise EngineError(f"bad UQS_DENSE_CAP value {raw!r}") from exc
    return 12


def _check_dense(n_qubits: int):
    cap = dense_cap()
    if n_qubits > cap:
        raise EngineError(f"{n_qubits} qubits exceeds the dense cap {cap}")


@dataclass
class StateVector:
    """2^N complex amplitudes, unit norm, little-endian qubit order."""

    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1 or self.n_qubits > STATEVECTOR_CAP:
            raise EngineError(f"n_qubits must be in 1..{STATEVECTOR_CAP}")
        a = np.ascontiguousarray(self.amps, dtype=np.complex128)
        if a.shape != (2**self.n_qubits,):
            raise EngineError("amplitude array has wrong length")
        self.amps = a

    @staticmethod
    def zero_state(n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return StateVector(n_qubits, amps)

    @staticmethod
    def from_amplitudes(amps) -> "StateVector":
        a = np.asarray(amps, dtype=np.complex128)
        n = int(round(math.log2(a.size)))
        if 2**n != a.size:
            raise EngineError("amplitude count is not a power of 2")
        return StateVector(n, a.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amps.copy())

    def check_norm(self, instructions: int = 1):
        drift = abs(self.norm() - 1.0)
        if drift > max(NORM_TOL, 1e-12 * max(1, instructions)):
            raise EngineError(f"state norm drifted by {drift:.3e}")

    # -- dump format: header + "index real imag" per nonzero amplitude -------

    def dump_text(self, threshold: float = 1e-15) -> str:
        lines = [f"# statevector n_qubits={self.n_qubits} endian=little norm={self.norm()!r}"]
        for k, z in enumerate(self.amps):
            if abs(z) > threshold:
                lines.append(f"{k} {float(z.real)!r} {float(z.imag)!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def load_text(text: str) -> "StateVector":
        n_qubits = None
        entries = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = re.search(r"n_qubits=(\d+)", line)
                if m:
                    n_qubits = int(m.group(1))
                continue
            parts = line.split()
            if len(parts) != 3:
                raise EngineError(f"line {lineno}: expected 'index real imag'")
            entries.append((int(parts[0]), float(parts[1]), float(parts[2])))
        if n_qubits is None:
            raise EngineError("missing n_qubits header")
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        for k, re_, im in entries:
            amps[k] = complex(re_, im)
        return StateVector(n_qubits, amps)


@dataclass(frozen=True)
class ErrorModel:
    """Fractional timing jitter, uniform on [-eta, +eta] per pulse.

    eta_local applies per qubit per local layer, eta_int per gate entry in a
    ZZ gate list. The distribution is pluggable in principle; only "uniform"
    is implemented.
    """

    eta_local: float = 0.0
    eta_int: float = 0.0
    seed: int | None = None
    distribution: str = "uniform"

    def __post_init__(self):
        for eta in (self.eta_local, self.eta_int):
            if not (0.0 <= eta < 1.0):
                raise EngineError(f"jitter fraction {eta} outside [0, 1)")
        if self.distribution != "uniform":
            raise EngineError(f"unknown jitter distribution {self.distribution!r}")
        if (self.eta_local > 0 or self.eta_int > 0) and self.seed is None:
            raise EngineError("an error model with nonzero jitter needs a seed")

    @property
    def is_noisy(self) -> bool:
        return self.eta_local > 0 or self.eta_int > 0

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed))


@dataclass
class ExecutionLog:
    """Per-instruction jitter draws, sufficient to replay a run."""

    rng_algorithm: str = RNG_ALGORITHM
    seed: int | None = None
    entries: list[tuple[int, str, tuple[float, ...]]] = field(default_factory=list)

    def record(self, index: int, kind: str, draws: tuple[float, ...]):
        self.entries.append((index, kind, draws))

    def to_text(self) -> str:
        lines = [f"# execution log rng={self.rng_algorithm} seed={self.seed}"]
        for index, kind, draws in self.entries:
            payload = ",".join(repr(d) for d in draws) if draws else "-"
            lines.append(f"{index} {kind} {payload}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Gate application
# ---------------------------------------------------------------------------

def _apply_layer_inplace(amps, n_qubits, layer: LocalLayer, deltas=None):
    for q in range(n_qubits):
        u = layer.unitary_at(q)
        if deltas is not None and deltas[q] != 0.0:
            u = u.with_angle_scale(1.0 + deltas[q])
        if not u.is_identity():
            kernels.apply_single_qubit(amps, q, u.matrix)


def apply_local_layer(
    state: StateVector,
    layer: LocalLayer,
    err: ErrorModel | None = None,
    rng: np.random.Generator | None = None,
) -> StateVector:
    """Apply one layer of single-qubit unitaries (pure; returns a new state)."""
    if not layer.matches(state.n_qubits):
        raise EngineError("layer size does not match state")
    out = state.copy()
    deltas = None
    if err is not None and err.eta_local > 0:
        rng = rng if rng is not None else err.rng()
        deltas = rng.uniform(-err.eta_local, err.eta_local, size=state.n_qubits)
    _apply_layer_inplace(out.amps, out.n_qubits, layer, deltas)
    out.check_norm()
    return out


def apply_zz_gates(
    state: StateVector,
    gates,
    err: ErrorModel | None = None,
    rng: np.random.Generator | None = None,
) -> StateVector:
    """Apply a list of (a, b, theta) diagonal ZZ gates (pure)."""
    out = state.copy()
    deltas = None
    if err is not None and err.eta_int > 0:
        rng = rng if rng is not None else err.rng()
        deltas = rng.uniform(-err.eta_int, err.eta_int, size=len(gates))
    for i, (a, b, theta) in enumerate(gates):
        if a == b:
            raise EngineError(f"ZZ gate with identical qubits {a}")
        if not (0 <= a < out.n_qubits and 0 <= b < out.n_qubits):
            raise EngineError(f"gate qubits {(a, b)} out of range")
        if deltas is not None:
            theta = theta * (1.0 + deltas[i])
        if theta != 0.0:
            kernels.apply_zz_phase(out.amps, a, b, theta)
    out.check_norm()
    return out


def execute_instructions(
    amps: np.ndarray,
    n_qubits: int,
    instructions,
    err: ErrorModel | None,
    rng: np.random.Generator | None,
    log: ExecutionLog | None = None,
    base_index: int = 0,
) -> int:
    """Apply instructions to `amps` in place, drawing jitter from `rng`.

    Returns the next instruction index; noise draws are strictly sequential
    in instruction order so runs replay exactly.
    """
    index = base_index
    for ins in instructions:
        if isinstance(ins, ApplyLocal):
            deltas = None
            if err is not None and err.eta_local > 0:
                deltas = rng.uniform(-err.eta_local, err.eta_local, size=n_qubits)
            _apply_layer_inplace(amps, n_qubits, ins.layer, deltas)
            if log is not None:
                log.record(index, "local", tuple(deltas) if deltas is not None else ())
        elif isinstance(ins, RawGate):
            deltas = None
            if err is not None and err.eta_int > 0:
                deltas = rng.uniform(-err.eta_int, err.eta_int, size=len(ins.targets))
            for i, (a, b, w) in enumerate(ins.targets):
                theta = ins.theta * w
                if deltas is not None:
                    theta = theta * (1.0 + deltas[i])
                if theta != 0.0:
                    kernels.apply_zz_phase(amps, a, b, theta)
            if log is not None:
                log.record(index, "gate", tuple(deltas) if deltas is not None else ())
        else:
            raise EngineError(f"unknown instruction {type(ins).__name__}")
        index += 1
    return index


def run_schedule(
    state: StateVector,
    schedule: PulseSchedule,
    err: ErrorModel | None = None,
) -> tuple[StateVector, ExecutionLog]:
    """Execute instructions in order; the log records every jitter draw."""
    if schedule.n_qubits != state.n_qubits:
        raise EngineError(
            f"schedule is for {schedule.n_qubits} qubits, state has {state.n_qubits}"
        )
    log = ExecutionLog(seed=err.seed if err is not None else None)
    rng = err.rng() if err is not None and err.is_noisy else None
    out = state.copy()
    execute_instructions(out.amps, out.n_qubits, schedule.instructions, err, rng, log)
    out.check_norm(len(schedule.instructions) + 1)
    return out, log


# ---------------------------------------------------------------------------
# Exact oracle: dense evolution, spectra, ground states
# ---------------------------------------------------------------------------

def exact_evolve(h: Hamiltonian, t: float, state: StateVector) -> StateVector:
    """exp(-i h t) |state> through eigendecomposition of the dense matrix."""
    if h.n_qubits != state.n_qubits:
        raise EngineError("Hamiltonian and state size mismatch")
    _check_dense(h.n_qubits)
    evals, evecs = _spectrum(h)
    phases = np.exp(-1j * evals * t)
    out = evecs @ (phases * (evecs.conj().T @ state.amps))
    return StateVector(state.n_qubits, out)


_SPECTRUM_CACHE: dict[Hamiltonian, tuple[np.ndarray, np.ndarray]] = {}
_SPECTRUM_CACHE_LIMIT = 8


def _spectrum(h: Hamiltonian):
    hit = _SPECTRUM_CACHE.get(h)
    if hit is not None:
        return hit
    evals, evecs = np.linalg.eigh(h.to_matrix())
    if len(_SPECTRUM_CACHE) >= _SPECTRUM_CACHE_LIMIT:
        _SPECTRUM_CACHE.pop(next(iter(_SPECTRUM_CACHE)))
    _SPECTRUM_CACHE[h] = (evals, evecs)
    return evals, evecs


@dataclass
class SpectrumCache:
    """Sorted eigensystem with eigenvalues grouped into (near-)degenerate sets."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    groups: tuple[tuple[int, int], ...]  # [start, stop) index ranges
    tol: float

    @staticmethod
    def from_hamiltonian(h: Hamiltonian, tol: float | None = None) -> "SpectrumCache":
        _check_dense(h.n_qubits)
        evals, evecs = _spectrum(h)
        if tol is None:
            spread = float(evals[-1] - evals[0]) if evals.size > 1 else 1.0
            tol = 1e-8 * max(1.0, spread)
        groups = []
        start = 0
        for i in range(1, evals.size):
            if evals[i] - evals[i - 1] >= tol:
                groups.append((start, i))
                start = i
        groups.append((start, evals.size))
        return SpectrumCache(evals, evecs, tuple(groups), tol)

    def group_energy(self, g: int) -> float:
        start, stop = self.groups[g]
        return float(np.mean(self.eigenvalues[start:stop]))

    def group_basis(self, g: int) -> np.ndarray:
        start, stop = self.groups[g]
        return self.eigenvectors[:, start:stop]

    def group_weight(self, g: int, state: StateVector) -> float:
        basis = self.group_basis(g)
        overlaps = basis.conj().T @ state.amps
        return float(np.real(np.vdot(overlaps, overlaps)))


@dataclass
class GroundState:
    energy: float
    state: StateVector
    degeneracy: int


def ground_state(h: Hamiltonian, tol: float | None = None) -> GroundState:
    """Lowest eigenvalue with a deterministic, basis-stable representative.

    Within the (possibly degenerate) ground space with projector P, the
    returned vector is P|e_k>/||P|e_k>|| for the computational basis state
    k with the largest diagonal weight <e_k|P|e_k> (ties break to the lowest
    index); its k-th amplitude is then real positive by construction.
    """
    spec = SpectrumCache.from_hamiltonian(h, tol)
    basis = spec.group_basis(0)
    diag = np.sum(np.abs(basis) ** 2, axis=1)
    k = int(np.argmax(diag))
    vec = basis @ basis[k, :].conj()
    vec = vec / np.linalg.norm(vec)
    return GroundState(
        energy=float(spec.eigenvalues[0]),
        state=StateVector(h.n_qubits, vec),
        degeneracy=basis.shape[1],
    )


def fidelity(psi: StateVector, phi: StateVector) -> float:
    """|<psi|phi>|^2 (phase invariant, symmetric)."""
    if psi.n_qubits != phi.n_qubits:
        raise EngineError("size mismatch in fidelity")
    return float(abs(np.vdot(psi.amps, phi.amps)) ** 2)


def subspace_fidelity(psi: StateVector, basis: np.ndarray) -> float:
    """||P psi||^2 for the projector P onto the spanned (orthonormal) columns."""
    overlaps = basis.conj().T @ psi.amps
    return float(np.real(np.vdot(overlaps, overlaps)))


def eigenspace_histogram(
    state: StateVector, h: Hamiltonian, tol: float | None = None
) -> list[tuple[float, float]]:
    """Weights of the state in each (possibly degenerate) eigenspace of h."""
    spec = SpectrumCache.from_hamiltonian(h, tol)
    out = []
    for g in range(len(spec.groups)):
        out.append((spec.group_energy(g), spec.group_weight(g, state)))
    total = sum(w for _, w in out)
    if abs(total - 1.0) > 1e-9:
        raise EngineError(f"histogram weights sum to {total}, expected 1")
    return out


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

_OBS_TOKEN = re.compile(r"([XYZ])(\d+)")


def parse_observable(spec: str, n_qubits: int) -> PauliString:
    """'Z0' or 'X0X1' style requests into a PauliString."""
    tokens = _OBS_TOKEN.findall(spec.replace(" ", ""))
    if not tokens or "".join(c + q for c, q in tokens) != spec.replace(" ", ""):
        raise EngineError(f"bad observable spec {spec!r}")
    ops = ["I"] * n_qubits
    for char, qs in tokens:
        q = int(qs)
        if not (0 <= q < n_qubits):
            raise EngineError(f"observable site {q} out of range")
        if ops[q] != "I":
            raise EngineError(f"observable {spec!r} repeats site {q}")
        ops[q] = char
    return PauliString("".join(ops))


def expectation(state: StateVector, op: PauliString) -> float:
    """<psi| P |psi> for a Pauli string; real within numerical noise."""
    if op.n_qubits != state.n_qubits:
        raise EngineError("operator size mismatch")
    work = state.amps.copy()
    for q, c in enumerate(op.ops):
        if c != "I":
            kernels.apply_single_qubit(work, q, SIGMA[c])
    val = np.vdot(state.amps, work) * op.coeff
    if abs(val.imag) > 1e-10:
        raise EngineError(f"expectation came out complex ({val})")
    return float(val.real)


def expectation_energy(state: StateVector, h: Hamiltonian) -> float:
    """<psi| H |psi> accumulated term by term (no dense matrix needed)."""
    return sum(expectation(state, t) for t in h.terms)


def observables(state: StateVector, specs) -> list[tuple[str, float]]:
    return [(s, expectation(state, parse_observable(s, state.n_qubits))) for s in specs]
