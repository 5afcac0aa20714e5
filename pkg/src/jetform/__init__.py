"""Symbolic workbench for unified Lagrangian-Hamiltonian mechanics.

Build a variational problem on a jet chart, assemble the unified phase-space
form, run the constraint algorithm down to a final submanifold, read off the
Hamilton equations, and (for one-dimensional base) integrate them numerically.
"""

__version__ = "0.1.0"
