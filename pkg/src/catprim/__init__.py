"""catprim: exact computation of categorical primitive forms.

From a finite-dimensional cyclic A-infinity algebra (possibly weakly curved,
possibly a direct sum of such) the package computes Hochschild invariants,
splittings of the noncommutative Hodge filtration, primitive forms, and the
genus-zero Frobenius manifold data they induce, all in exact arithmetic over
cyclotomic Puiseux scalars.
"""

__version__ = "0.1.0"
