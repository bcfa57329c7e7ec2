"""Compare the compiled and pure-Python kernels on realistic workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times one closed-loop RK4 propagation (Table 2 row B3, 20 s at dt=1e-3)
and one full-memory Grünwald-Letnikov sum, then one complete Case II
objective evaluation per backend.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fopid_avr import _kernels_py
from fopid_avr.avr import AvrPlantParams, DerivativeOn, assemble_loop, controller_split
from fopid_avr.folib import OustaloupConfig, gl_weights
from fopid_avr.lti import realize_common, rk4_step_matrices
from fopid_avr.tables import table_row

try:
    from fopid_avr import _kernels as compiled
except ImportError:
    compiled = None


def loop_workload():
    genes = table_row(2, "B3").genes
    loop = assemble_loop(controller_split(genes, OustaloupConfig(), DerivativeOn.ERROR), AvrPlantParams())
    ss = realize_common([loop.y_from_r, loop.u_from_r, loop.e_from_r], loop.den)
    phi, gamma = rk4_step_matrices(ss.A, ss.B, 1e-3)
    u = np.ones(20001)
    return (np.ascontiguousarray(phi), gamma, np.ascontiguousarray(ss.C), ss.D, u, np.zeros(ss.order), 1e12)


def gl_workload(n=20001):
    return np.ones(n), gl_weights(0.5, n)


def time_call(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def time_evaluation(backend: str, repeat: int) -> float:
    code = (
        "import timeit;from fopid_avr.objectives import evaluate, EvalSettings;"
        "from fopid_avr.tables import table_row;g=table_row(2,'B3').genes;s=EvalSettings('II');"
        f"print(min(timeit.repeat(lambda: evaluate(g,s),number=1,repeat={repeat})))"
    )
    env = dict(os.environ, FOPID_AVR_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if compiled is None:
        print("compiled kernels not built; only the Python fallback is available")
        return 1

    rows = []
    la = loop_workload()
    rows.append(("propagate (order %d, 20001 steps)" % la[0].shape[0],
                 time_call(compiled.propagate, la, args.repeat),
                 time_call(_kernels_py.propagate, la, args.repeat)))
    ga = gl_workload()
    rows.append(("gl_convolve (20001 samples)",
                 time_call(compiled.gl_convolve, ga, args.repeat),
                 time_call(_kernels_py.gl_convolve, ga, args.repeat)))
    rows.append(("case II evaluate (B3)", time_evaluation("cython", args.repeat), time_evaluation("python", args.repeat)))

    print(f"{'kernel':<38}{'cython [ms]':>14}{'python [ms]':>14}{'speedup':>10}")
    for name, c, p in rows:
        print(f"{name:<38}{1e3 * c:>14.2f}{1e3 * p:>14.2f}{p / c:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
