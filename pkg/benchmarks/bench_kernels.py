"""Compare the compiled and numpy element kernels on a disk mesh.

Usage: python3 benchmarks/bench_kernels.py [--h 0.01] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from qtorsion.geometry import disk_polygon
from qtorsion.kernels import backends
from qtorsion.mesh import triangulate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=0.01)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--q", type=float, default=3.0)
    args = ap.parse_args()

    mesh = triangulate(disk_polygon(1.0, 256).polygon, args.h)
    entry_map, _, _, nnz = mesh.free_pattern()
    u = np.random.default_rng(0).random(mesh.n_nodes)
    u[:mesh.n_boundary] = 0.0
    print(f"mesh: {mesh.n_nodes} nodes, {len(mesh.triangles)} triangles, q={args.q}")

    impls = backends()
    results = {}
    for name, k in impls.items():
        area, B = k.element_geometry(mesh.nodes, mesh.triangles)
        g = k.element_gradients(B, mesh.triangles, u)
        calls = {
            "element_geometry": lambda: k.element_geometry(mesh.nodes, mesh.triangles),
            "element_gradients": lambda: k.element_gradients(B, mesh.triangles, u),
            "energy": lambda: k.energy(area, g, args.q, 1e-4),
            "assemble": lambda: k.assemble(B, area, g, mesh.triangles, args.q, 1e-4,
                                           entry_map, nnz, mesh.n_nodes, True),
        }
        results[name] = {fn: min(timeit.repeat(c, number=1, repeat=args.repeat))
                         for fn, c in calls.items()}

    names = list(impls)
    print(f"{'kernel':<20}" + "".join(f"{n:>12}" for n in names)
          + ("     speedup" if len(names) > 1 else ""))
    for fn in results[names[0]]:
        row = f"{fn:<20}" + "".join(f"{results[n][fn] * 1e3:>10.3f}ms" for n in names)
        if len(names) > 1:
            row += f"{results['numpy'][fn] / results['cython'][fn]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
