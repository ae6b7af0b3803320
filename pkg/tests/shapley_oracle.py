"""Exact Shapley enumeration oracle for small feature counts.

Independent of the estimator under test: computes the textbook weighted
sum over all 2^F coalitions, with absent features replaced by background
rows and the coalition value defined as the mean model output over the
background sample.
"""

import math
from itertools import combinations

import numpy as np


def coalition_value(fn, x, background, subset, n_units, unit_of_feature):
    """Mean output over background rows with only ``subset`` units taken from x."""
    keep = np.isin(unit_of_feature, list(subset))
    batch = np.where(keep, x, background)
    return fn(batch).mean(axis=0)


def exact_shapley(fn, x, background, n_units, unit_of_feature=None):
    """(d_out, n_units) exact Shapley values and the (d_out,) base value."""
    if unit_of_feature is None:
        unit_of_feature = np.arange(n_units)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))

    values = {}
    all_units = tuple(range(n_units))
    for size in range(n_units + 1):
        for subset in combinations(all_units, size):
            values[subset] = coalition_value(fn, x, background, subset, n_units, unit_of_feature)

    d_out = values[()].size
    phi = np.zeros((d_out, n_units))
    fact = math.factorial
    for j in range(n_units):
        others = tuple(u for u in all_units if u != j)
        for size in range(n_units):
            weight = fact(size) * fact(n_units - size - 1) / fact(n_units)
            for subset in combinations(others, size):
                with_j = tuple(sorted(subset + (j,)))
                phi[:, j] += weight * (values[with_j] - values[subset])
    return phi, values[()]
