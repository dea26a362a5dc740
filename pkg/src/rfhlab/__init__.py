"""rfhlab: index calculus, loop-space gradient flows, and Z2 cascade algebra
for the free-period (Rabinowitz) and fixed-period extended-phase-space
Hamiltonian action functionals on a desk-scale model system."""

__version__ = "0.1.0"
