"""Capacity-set analysis of overcomplete dictionaries.

Computes per-atom and per-pair capacity values of a dictionary by linear
programming and turns them into estimation functions: predicted
probabilities that l1 minimization recovers a random support of each
size.
"""

__version__ = "0.1.0"
