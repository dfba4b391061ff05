#!/usr/bin/env python3
"""Build the isotropic hyperplane measure and recover the Euclidean metric.

The measure weights hyperplanes by uniform normal direction and Lebesgue
offset.  The induced segment mass is proportional to length (2/pi per unit
in the plane), and the embedding map is the similarity x -> x/2.
"""
import math

import numpy as np

from busemetric import MonteCarlo, crofton, pair_integrals, seg_mass

sc = crofton(2)
rng = np.random.default_rng(0)

print("segment mass per unit length (expect 2/pi = %.6f):" % (2 / math.pi))
for _ in range(5):
    x, y = rng.uniform(-2, 2, (2, 2))
    d = seg_mass(sc.measure, x, y)
    print(f"  d({np.round(x, 3)}, {np.round(y, 3)}) / |x-y| = {d / np.linalg.norm(x - y):.12f}")

f = sc.embedding()
x = np.array([3.0, 4.0])
print(f"\nembedding of {x} (expect x/2): {f.eval(x)}")
print(f"embedding of the basepoint:    {f.eval(sc.basepoint)}")

print("\nthe three integrals over one segment and their exact relations:")
x, y = np.array([0.2, -0.7]), np.array([-1.1, 0.4])
p = pair_integrals(sc.measure, x, y)
r = np.linalg.norm(x - y)
print(f"  mass        = {p.mass:.12f}")
print(f"  sin-alpha   = {p.transversal:.12f}")
print(f"  |f(x)-f(y)| = {np.linalg.norm(p.embed):.12f}")
print(f"  <f(x)-f(y), x-y> - |x-y| * sin-alpha = "
      f"{p.embed @ (x - y) - r * p.transversal:.2e}")

mc = MonteCarlo(budget=200_000, seed=1)
q = mc.pair(sc.measure, x, y)
print(f"\nMonte Carlo cross-check: mass {q.mass:.6f} +- {q.mass_se:.6f} "
      f"(exact {p.mass:.6f})")
