"""Concrete eigenpath problems: unstructured search and simulated annealing."""
