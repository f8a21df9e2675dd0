"""Independent reference implementations used by the tests."""

import itertools
import math

import numpy as np

from btlab.seqmodel import loss


def brute_force_em(pairs, iterations):
    """EM with posteriors from explicit enumeration of every alignment vector.

    Written against the textbook definition only: p(f, a | e) is the product
    of t(f_j | e_{a_j}) / (I + 1); expected counts are accumulated alignment
    by alignment.
    """
    f_types = sorted({f for fs, _ in pairs for f in fs})
    t = {}
    for fs, es in pairs:
        for e in (None,) + tuple(es):
            for f in fs:
                t[e, f] = 1.0 / len(f_types)
    for _ in range(iterations):
        counts = {k: 0.0 for k in t}
        for fs, es in pairs:
            e_side = (None,) + tuple(es)
            aligns = list(itertools.product(range(len(e_side)), repeat=len(fs)))
            weights = [math.prod(t[e_side[a], f] for a, f in zip(al, fs)) for al in aligns]
            z = sum(weights)
            for al, w in zip(aligns, weights):
                for a, f in zip(al, fs):
                    counts[e_side[a], f] += w / z
        totals = {}
        for (e, f), c in counts.items():
            totals[e] = totals.get(e, 0.0) + c
        t = {(e, f): c / totals[e] for (e, f), c in counts.items()}
    return t


def finite_difference(model, pairs, eps, weights=None, h=1e-5):
    """Central differences of the scalar loss, one parameter at a time."""
    theta = model.get_params()
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        for sign in (1, -1):
            t = theta.copy()
            t[i] += sign * h
            model.set_params(t)
            grad[i] += sign * loss(model, pairs, eps, weights)
    model.set_params(theta)
    return grad / (2 * h)
