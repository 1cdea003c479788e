"""Benchmark the compiled statevector kernels against the numpy fallback.

Times the two hot operations (single-qubit gate, diagonal ZZ phase) and a
mixed workload shaped like one adiabatic Trotter cycle, across qubit counts.

    python3 benchmarks/bench_kernels.py [--qubits 6 9 12 16] [--repeats 5]
"""
import argparse
import math
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from uqsim import kernels
from uqsim.pauli import SingleQubitUnitary


def random_state(n, seed=1):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return np.ascontiguousarray(amps / np.linalg.norm(amps))


def bench(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workload_single(amps, n, u):
    def run():
        for q in range(n):
            kernels.apply_single_qubit(amps, q, u)
    return run


def workload_zz(amps, n):
    def run():
        for a in range(n - 1):
            kernels.apply_zz_phase(amps, a, a + 1, 0.01)
    return run


def workload_cycle(amps, n, u):
    # one dipole-style cycle: two local sweeps and the all-pairs gate set
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]

    def run():
        for q in range(n):
            kernels.apply_single_qubit(amps, q, u)
        for a, b in pairs:
            kernels.apply_zz_phase(amps, a, b, 0.01 / (b - a) ** 3)
        for q in range(n):
            kernels.apply_single_qubit(amps, q, u)
    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--qubits", type=int, nargs="+", default=[6, 9, 12, 16])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("note: compiled kernels not built; run `python3 setup.py build_ext --inplace`")
    u = SingleQubitUnitary.rot((0.6, 0.0, 0.8), 0.1).matrix

    header = f"{'workload':<14}{'n':>4}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for n in args.qubits:
        for name, factory in (
            ("single-qubit", lambda a: workload_single(a, n, u)),
            ("zz-chain", lambda a: workload_zz(a, n)),
            ("trotter-cycle", lambda a: workload_cycle(a, n, u)),
        ):
            times = {}
            for backend in backends:
                kernels.use_backend(backend)
                amps = random_state(n)
                times[backend] = bench(factory(amps), args.repeats)
            row = f"{name:<14}{n:>4}" + "".join(
                f"{times[b] * 1e6:>12.1f}us" for b in backends
            )
            if len(backends) == 2:
                row += f"{times['python'] / times['compiled']:>9.1f}x"
            print(row)
    kernels.use_backend("compiled" if "compiled" in backends else "python")


if __name__ == "__main__":
    main()
