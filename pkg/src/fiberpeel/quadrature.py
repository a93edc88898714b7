"""Gauss-Legendre rules, plain and segment-subdivided.

Interaction and contact integrals place an independent Gauss rule on each of
several uniform subdivisions of an element's parameter domain, which bounds
the polynomial degree each rule has to resolve when the integrand has steep
gradients.
"""

import numpy as np


def gauss_rule(n_points):
    """Points and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    if n_points < 1:
        raise ValueError(f"need at least one Gauss point, got {n_points}")
    return np.polynomial.legendre.leggauss(n_points)


def segment_rule(n_segments, n_points):
    """Composite rule on [-1, 1]: ``n_segments`` uniform panels, an
    ``n_points`` Gauss rule on each.

    Returns (xi, w) with sum(w) == 2.
    """
    if n_segments < 1:
        raise ValueError(f"need at least one segment, got {n_segments}")
    base_xi, base_w = gauss_rule(n_points)
    width = 2.0 / n_segments
    xi = np.concatenate(
        [-1.0 + width * (k + 0.5 * (base_xi + 1.0)) for k in range(n_segments)]
    )
    w = np.tile(base_w * (width / 2.0), n_segments)
    return xi, w
