"""Trace the two branches that leave the first eigenvalue and draw them.

With eps = 0 the one-dimensional multiplicative problem is solved almost
exactly by a single sine mode, which gives a closed form to compare with.
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from galerkin_branches import DomainSpec, ResidualSystem, positivity_scan, trace_branch

d = DomainSpec(modes=16)
sys = ResidualSystem(d, "multiplicative", eps=0.0)
plus = trace_branch(sys, "+", ds=5e-3, R=1.0)
minus = trace_branch(sys, "-", ds=5e-3, R=1.0)

print(f"+ branch: {len(plus)} points, stopped by {plus.termination}")
print(f"- branch: {len(minus)} points, stopped by {minus.termination}")
print(f"first sign change on +: {positivity_scan(plus)}  (None means positive throughout)")

print(f"\n{'a':>8} {'lambda':>14} {'one-mode 1/(1+3a^2/4)':>22}")
for p in plus.points[::40]:
    a = p.c[0]
    print(f"{a:8.4f} {p.lam:14.10f} {1 / (1 + 0.75 * a * a):22.10f}")

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)
fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot(plus.lambdas, plus.norms, color="tab:red", label="positive")
ax.plot(minus.lambdas, -minus.norms, color="tab:blue", label="negative")
ax.set_xlabel("lambda")
ax.set_ylabel("sign * |u|_X")
ax.legend(frameon=False)
fig.tight_layout()
fig.savefig(out / "branches.png", dpi=120)
print(f"\nwrote {out / 'branches.png'}")
