"""Photon loss inside the conditional GKP circuit.

Sweeps the loss probability with loss on the inputs only and on all eight
channels, on a reduced grid so the sweep finishes in about a minute.

Run with ``python demos/loss_budget.py``.
"""
from cvforge.schemes import loss_study

for active in ("LC1", "all"):
    for eta in (0.0, 0.01, 0.02):
        res = loss_study(eta, active, points=(128, 1024))
        print(f"{active:>4} eta={eta:<5} fidelity {res.fidelity:.5f} ({res.branches} branches)")
