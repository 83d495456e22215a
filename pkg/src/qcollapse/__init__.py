"""Quantified constraint satisfaction via collapsibility.

Decide QCSP instances through the collapse-to-CSP reduction, verify the
reduction against a brute-force game oracle, and analyze the finite idempotent
algebras the reduction's soundness rests on.
"""

__all__ = ["__version__"]
__version__ = "0.1.0"
