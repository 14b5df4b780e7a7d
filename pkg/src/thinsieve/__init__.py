"""thinsieve - Affine linear sieve workbench for thin orbits of Pythagorean triples."""

__version__ = "0.1.0"
