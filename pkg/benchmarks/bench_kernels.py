"""Time the compiled and pure-Python kernel backends on representative sizes.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--steps 2000]

The split-step problem matches the default cavity-qubit-mirror run (30 USC
levels, 12 phonon levels); the Lindblad problem is a 40-level mirror.
"""

import argparse
import timeit

import numpy as np
from scipy.linalg import expm

from phononpump import _kernels
from phononpump.hilbert import destroy


def split_step_problem(rng, du=30, dp=12, nsteps=2000, dt=1e-3):
    x = rng.normal(size=(3, du, du)) + 1j * rng.normal(size=(3, du, du))
    herm = 0.5 * (x + np.conj(np.swapaxes(x, 1, 2)))
    ua_stack = np.array([expm(-0.5j * dt * a) for a in herm])
    ua_index = np.arange(nsteps) % 3
    phonon_half = np.exp(-0.5j * dt * np.arange(dp))
    y = rng.normal(size=(du, du))
    ey, wy = np.linalg.eigh(y + y.T)
    b = destroy(dp).dense().real
    eq, wq = np.linalg.eigh(b + b.T)
    eb = np.exp(-1j * dt * np.outer(ey, eq))
    psi = rng.normal(size=(du, dp)) + 0j
    psi /= np.linalg.norm(psi)
    return (psi, ua_stack, ua_index, phonon_half, wy, wq, eb, np.array([nsteps]))


def lindblad_problem(rng, n=40, nsteps=2000, dt=1e-3):
    rho = np.diag(rng.random(n)) + 0j
    rho /= np.trace(rho)
    nodes = 0.1 * np.exp(1j * np.linspace(0, 6, 2 * nsteps + 1))
    return (rho, nodes, dt, 0.02, 0.01, 0.005)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--steps", type=int, default=2000)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    cases = {"split_step": (_kernels.split_step, split_step_problem(rng, nsteps=args.steps)),
             "lindblad_rk4": (_kernels.lindblad_rk4, lindblad_problem(rng, nsteps=args.steps))}
    previous = _kernels.active_backend()
    print(f"{'kernel':<14}{'backend':<10}{'us/step':>10}{'speedup':>10}")
    try:
        for name, (fn, problem) in cases.items():
            base = None
            for backend in ("python", "compiled"):
                if backend not in _kernels.available_backends():
                    print(f"{name:<14}{backend:<10}{'n/a':>10}")
                    continue
                _kernels.use_backend(backend)
                fn(*problem)  # warm-up
                best = min(timeit.repeat(lambda: fn(*problem), number=1, repeat=args.repeat))
                per_step = 1e6 * best / args.steps
                base = base or per_step
                print(f"{name:<14}{backend:<10}{per_step:>10.1f}{base / per_step:>9.1f}x")
    finally:
        _kernels.use_backend(previous)


if __name__ == "__main__":
    main()
