"""The desk-scale model: a radial Hamiltonian on R^{2n}.

Shows the capped profile, the closed-form extended flow, the census of
closed orbits per multiplier, and the grading table that the index engine
produces for the critical components.
"""

import numpy as np

from rfhlab.grading import index_report_csv, model_components
from rfhlab.model import ExtendedPoint, extended_flow, make_model, reeb_orbits

sys1 = make_model(n=1)
print("== profile ==")
print(f"h(r) = (r^2 - 1)/2 up to r0 = {sys1.profile.r0}, capped to the")
print(f"constant {sys1.profile.plateau_value():.4f} for r >= {sys1.profile.r_plateau}")
for r in (0.5, 1.0, 1.2, 1.35, 1.5, 2.0):
    print(f"  r = {r:4.2f}: h = {float(sys1.profile.h(r)):+.4f}"
          f"  h' = {float(sys1.profile.hp(r)):.4f}")
print(f"shell bound: lambda(X_H) >= {sys1.alpha0:.4f} on |H| <= {sys1.h_thr:.4f}")

print()
print("== extended flow (closed form) ==")
p = ExtendedPoint(x=np.array([1.1, 0.0]), tau=2.0, sigma=0.0)
for t in (0.0, 0.5, 1.0):
    q = extended_flow(sys1, p, t)
    print(f"  t = {t:.1f}: x = ({q.x[0]:+.4f}, {q.x[1]:+.4f})"
          f"  tau = {q.tau:.1f}  sigma = {q.sigma:+.4f}")
print("  (x rotates rigidly on its shell; sigma drifts at rate H(x))")

print()
print("== closed-orbit census ==")
print("1-periodic orbits exist exactly when the multiplier completes whole")
print("turns of the level flow:")
for tau in (0.0, np.pi, 2 * np.pi, 3 * np.pi, -4 * np.pi):
    fam = reeb_orbits(sys1, tau)
    if fam.kind == "constants":
        print(f"  tau = 0: the constants family, dimension {fam.dim_extended}"
              " upstairs")
    elif fam.is_empty:
        print(f"  tau = {tau:+.3f}: no closed orbits")
    else:
        print(f"  tau = {tau:+.3f}: multiplicity {fam.multiplicity},"
              f" action {fam.action:+.4f}")

print()
print("== gradings across dimensions ==")
for n in (1, 2, 3):
    sy = make_model(n=n)
    print(f"-- n = {n} --")
    print(index_report_csv(model_components(sy, ks=(-1, 1, 2))), end="")
