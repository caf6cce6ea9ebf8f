"""Uniform generation and exact counting of d-regular k-uniform hypergraphs
via the permutation model and loop-removing switchings."""

__version__ = "0.1.0"
