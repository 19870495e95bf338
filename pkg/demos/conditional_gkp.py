"""Walk through conditional GKP generation with a bundled rotation sequence.

Compiles the L=3 sequence into cubic gates and beam splitters, then solves the
meter window for a target acceptance probability with the L=3 and L=7 sets.

Run with ``python demos/conditional_gkp.py``.
"""
import numpy as np

from cvforge.decomp import compile_S, cubic_strengths, gate_census
from cvforge.gkp import optimal_k, squeezing_convert
from cvforge.optimize import find_set
from cvforge.schemes import conditional_gkp, p0_statistics, solve_window

t = np.sqrt(np.pi) / 2
k = optimal_k(t, 5)
print(f"squeezing k = {k:.4f} ({squeezing_convert(k)['dB']:.2f} dB)")

l3 = find_set("square_L3").params()
circ = compile_S(l3, t, strategy="min_strength")
print("L=3 cubic strengths:", np.round(cubic_strengths(circ), 4))
print("gate census:", gate_census(circ))

for name in ("square_L3", "square_L7"):
    params = find_set(name).params()
    peak = conditional_gkp(params, t, k).fidelity
    c = solve_window(params, t, k, 0.002)
    st = p0_statistics(params, t, k, window=(-c, c))
    print(f"{name}: fidelity at p0=0 {peak:.4f}; window +-{c:.4f} accepts {st['probability']:.4f}"
          f" with worst fidelity {st['min_fidelity']:.4f}")
