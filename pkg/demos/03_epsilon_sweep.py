"""How fast do the perturbed branches approach the eps = 0 branch?

Distances are Hausdorff distances inside a ball around the bifurcation
point.  The X norm weighs mode k like k^12, so the perturbation only
becomes small once eps * 3^12 is well below the mode-3 stiffness 9; the
sweep shows the slow approach and then the collapse for tiny eps.
"""
from galerkin_branches import DomainSpec, epsilon_sweep

d = DomainSpec(modes=16)
rep = epsilon_sweep(d, [1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8], R=0.5)

print(f"refinement floor (ds vs ds/2): {rep.floor:.3g}\n")
print(f"{'eps':>8} {'points':>7} {'termination':>12} {'d(C_eps, C_0)':>14}")
for e, dist in zip(rep.eps_list, rep.to_limit + [0.0]):
    br = rep.branches[e]
    print(f"{e:8.0e} {len(br):7d} {br.termination:>12} {dist:14.4g}")
print(f"\nstrictly decreasing: {rep.strictly_decreasing}")
print("eps = 0.1 bifurcates at lambda = 1.8, outside the ball, hence the infinite distance.")
