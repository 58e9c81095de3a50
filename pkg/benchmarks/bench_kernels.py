"""Timing comparison of the compiled kernels against the NumPy fallback.

Run as a script; prints a per-kernel table plus an end-to-end propagation
timing under each backend.  The end-to-end rows spawn subprocesses so the
import-time backend choice is exercised for real.
"""

import subprocess
import sys
import time

import numpy as np

from hypwave import _kernels_py
from hypwave.surface import default_group

try:
    from hypwave import _kernels as _compiled
except ImportError:
    _compiled = None


def _points(n, seed, rmax=0.97):
    rng = np.random.default_rng(seed)
    r = rmax * np.sqrt(rng.uniform(size=n))
    return r * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=n))


def _time(fn, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_reduce(n=20_000):
    group = default_group()
    z = _points(n, 1)
    rows = []
    py = _time(lambda: _kernels_py.reduce_batch(z, group.gen_a, group.gen_b))
    rows.append(("reduce_batch", n, py, None))
    if _compiled is not None:
        cy = _time(lambda: _compiled.reduce_batch(z, group.gen_a, group.gen_b))
        rows[-1] = ("reduce_batch", n, py, cy)
    return rows


def bench_accum(n_nodes=2_000, n_images=20_000):
    rng = np.random.default_rng(2)
    nodes = _points(n_nodes, 3, rmax=0.8)
    node_w = rng.uniform(0.1, 1.0, size=n_nodes)
    images = _points(n_images, 4, rmax=0.9)
    idx = rng.integers(0, 500, size=n_images).astype(np.int64)

    def run(mod):
        out = np.zeros(500)
        mod.accum_profile(nodes, node_w, images, idx, 0.3, 0, 0.0, out)

    rows = []
    py = _time(lambda: run(_kernels_py))
    if _compiled is not None:
        cy = _time(lambda: run(_compiled))
        rows.append((f"accum_profile {n_nodes}x{n_images}", n_nodes * n_images, py, cy))
    else:
        rows.append((f"accum_profile {n_nodes}x{n_images}", n_nodes * n_images, py, None))
    return rows


_E2E = """
import time
import numpy as np
from hypwave.potential import build_net
from hypwave.lagrangian import LagrangianState
from hypwave import kernels, wkb
job = wkb.PropagationJob(potential=build_net(0.05, 0.3, seed=4),
                         state=LagrangianState(amplitude_radius=0.9), t=1.3,
                         delta=0.05 ** 0.8)
pts = 0.12 * np.exp(2j * np.pi * np.arange(8) / 8)
t0 = time.perf_counter()
for z in pts:
    wkb.prepare_point(job, complex(z))
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def bench_end_to_end():
    rows = []
    for pure in ("", "1"):
        res = subprocess.run(
            [sys.executable, "-c", _E2E],
            capture_output=True,
            text=True,
            env={"HYPWAVE_PURE": pure, "PATH": "/usr/bin:/bin:/usr/local/bin"},
        )
        if res.returncode != 0:
            print(res.stderr, file=sys.stderr)
            continue
        backend, secs = res.stdout.split()
        rows.append((backend, float(secs)))
    return rows


def main():
    print(f"{'kernel':<30}{'python':>12}{'cython':>12}{'speedup':>10}")
    for name, _, py, cy in bench_reduce() + bench_accum():
        if cy is None:
            print(f"{name:<30}{py * 1e3:>10.2f}ms{'-':>12}{'-':>10}")
        else:
            print(f"{name:<30}{py * 1e3:>10.2f}ms{cy * 1e3:>10.2f}ms{py / cy:>9.1f}x")
    print()
    print("end-to-end prepare_point, 8 points at h=0.05:")
    for backend, secs in bench_end_to_end():
        print(f"  {backend:<10}{secs * 1e3:>10.1f}ms")


if __name__ == "__main__":
    main()
