"""
Many energies under a slowly growing envelope
=============================================

In countable mode each resonance class enters the schedule only once the
envelope ``h(n) = log(2 + n)`` has room for it, so ``|V(n)| (1 + n)`` never
exceeds ``h(n)`` even though the number of active classes keeps growing.
"""

# %%
import numpy as np

from embedded_eigen import gluer, verify

env = gluer.Envelope("log")
energies = [0.5, 1.0, -1.0, 0.0, 1.5]
p = gluer.plan(energies, [0.3, 0.6, 0.9, 1.2, 1.5], "countable", envelope=env, max_piece_ratio=0.5)
for c in p.classes:
    print(f"class {c.ids}: 102 K1 = {102 * c.K1:.1f}, active from n = {c.activation}")

# %%
res = gluer.build(p, 1_000_000)
print("active classes per step:", [e.N for e in res.scheduleLog])

# %%
count, worst = verify.envelope_violations(res.potential, env, p.classes[0].activation)
print(f"sites above the envelope: {count}; largest |V| (1 + n) / h(n) = {worst:.3f}")

# %%
V = res.potential.values()
n = np.arange(V.size)
for lo in (10, 1000, 100_000):
    hi = 10 * lo
    print(f"[{lo}, {hi}): max |V| (1+n) = {np.max(np.abs(V[lo:hi]) * (1 + n[lo:hi])):.3f}, "
          f"h({hi}) = {float(env(hi)):.3f}")
