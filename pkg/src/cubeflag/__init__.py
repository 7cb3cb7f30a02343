"""Exact integer computations for cubes of chain complexes and flag varieties.

Submodules: ``intlin`` (integer normal forms), ``complexes`` (bounded chain
complexes), ``cubes`` (cubes, cofibers, spectral sequences), ``rootdata``
(root data and Weyl groups), ``flagtheory`` (Chow and K0 rings of G/B and
their invariants) and ``cli``.
"""
__version__ = "0.1.0"
