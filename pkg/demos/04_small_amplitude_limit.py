"""Small solutions look like eigenfunctions.

Along a branch the induced weight 1 + |det D^2 u|^2 tends to 1, and for
the additive nonlinearity the pointwise ratios that measure the deviation
from the linear problem vanish with the amplitude.
"""
from galerkin_branches import (
    DomainSpec,
    NonlinearityKind,
    ResidualSystem,
    refine_at_amplitude,
    trace_branch,
    vanishing_ratio_diagnostic,
    weight_limit_diagnostic,
)

d = DomainSpec(modes=16)
amps = (0.1, 0.05, 0.01)

mult = ResidualSystem(d, "multiplicative", 0.0)
br = trace_branch(mult, "+", ds=5e-3, R=1.0)
wl = weight_limit_diagnostic([refine_at_amplitude(mult, br, a) for a in amps], d)
print("induced weight eigenpair against the unweighted one")
for r in wl["rows"]:
    print(f"  |u|_X = {r['normX']:.4f}  distance = {r['distance']:.3e}")

add = ResidualSystem(d, NonlinearityKind.additive_regularized(0.1), 0.0)
br = trace_branch(add, "+", ds=5e-3, R=1.0)
vr = vanishing_ratio_diagnostic([refine_at_amplitude(add, br, a) for a in amps], add)
print("\nadditive nonlinearity, sup-norm ratios")
for r in vr["rows"]:
    print(f"  a = {r['amplitude']:<5g} det ratio = {r['sup_det_ratio']:.4f}  "
          f"eigen ratio = {r['sup_eig_ratio']:.3e}")
print(f"det ratio reduction over the tail: {vr['det_ratio_reduction']:.2f}")
