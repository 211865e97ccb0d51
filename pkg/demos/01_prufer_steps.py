"""
Prufer variables, one site at a time
====================================

A solution of ``u(n+1) + u(n-1) + V(n) u(n) = E u(n)`` is tracked by a
log-radius and an angle.  With no potential the angle advances by the
quasimomentum ``k`` each site and the radius stays put; a small potential
nudges both by at most ``|V| / sin(pi k)``.
"""

# %%
import math

import numpy as np

from embedded_eigen import make_energy_point
from embedded_eigen.model import PruferState
from embedded_eigen.prufer import (
    SolutionPair,
    predicted_angle_increment,
    prufer_step,
    prufer_to_solution,
    solution_to_prufer,
    transfer_step,
)

ep = make_energy_point(1.0)
print(f"E = {ep.E}, k = {ep.k:.6f}, sin(pi k) = {ep.s:.6f}")

# %%
# Free evolution: three sites move the angle by exactly one unit.
st = PruferState(0.0, 0.2)
for _ in range(3):
    st = prufer_step(st, 0.0, ep)
print("angle after 3 free steps:", st.phi, " logR:", st.logR)

# %%
# The same random potential applied to the Prufer state and to the plain
# transfer recursion gives the same solution.
rng = np.random.default_rng(1)
V = rng.uniform(-0.3, 0.3, 500) * ep.s
pair = SolutionPair(1.0, 0.4)
st = solution_to_prufer(pair, ep)
for v in V:
    pair = transfer_step(pair, v, ep.E)
    st = prufer_step(st, v, ep)
back = prufer_to_solution(st, ep)
print(f"transfer u = {pair.uCur:.12f}   prufer u = {back.uCur:.12f}")

# %%
# One-step angle shift against its first-order prediction.
for t in (0.05, 0.01, 0.001):
    st0 = PruferState(0.0, 0.37)
    st1 = prufer_step(st0, t * ep.s, ep)
    resid = st1.phi - st0.phi - predicted_angle_increment(st0, t * ep.s, ep)
    print(f"V/s = {t:<6} residual = {resid: .3e}   residual/(V/s)^2 = {resid / t**2: .4f}")
