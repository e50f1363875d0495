"""Finite-difference toolkit for -|Du|^gamma (Delta u + (p-2) <D^2u Du/|Du|, Du/|Du|>) = f.

Modules
-------
field       grids, masks, fields, finite differences, field files
operator    the regularised operator, its frozen linearisation, Pucci bounds
cordes      Cordes margins of coefficient matrices
solver      frozen-coefficient Picard solver with epsilon continuation
oracle      exact and manufactured solutions
regularity  plane fits, gradient Hölder fits, H2 sweeps
cli         config-driven experiment runner
"""
__version__ = "0.1.0"
