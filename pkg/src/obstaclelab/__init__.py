"""Numerical laboratory for the no-sign obstacle problem Lap u = chi_Omega,
Omega = B_1 minus {u = |Du| = 0}: solvers, Monneau traces, blowup fits and
the pencil argument for uniqueness of quadratic blowups."""

__version__ = "0.1.0"
