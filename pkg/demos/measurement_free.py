"""Deterministic comb generation without measuring the ancilla.

Runs two rounds of Rabi-type gates on squeezed vacuum and prints the peaks of
the resulting position density in units of sqrt(pi).

Run with ``python demos/measurement_free.py``.
"""
import numpy as np

from cvforge.gkp import comb_peaks
from cvforge.optimize import find_set
from cvforge.schemes import measurement_free_protocol

k = 10 ** (11.5 / 20)
res = measurement_free_protocol(2, [0.0, 0.093], k, find_set("third_order_L60").params())
x = res["state"].x
pos, heights = comb_peaks(x, res["marginal"] / res["norm"])
print(f"fidelity to the target comb {res['fidelity']:.4f}")
for p, h in zip(pos / np.sqrt(np.pi), heights):
    print(f"  peak at {p:+.3f} sqrt(pi), relative height {h:.3f}")
