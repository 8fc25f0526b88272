"""Finite-difference helpers shared by the solver modules.

All derivatives are second-order centered in the interior with
second-order one-sided stencils at boundaries (numpy.gradient with
edge_order=2), except the periodic variants which wrap around.
"""

import numpy as np


def deriv(values, coords, axis):
    """d/dx along `axis` on a (possibly nonuniform) strictly increasing grid."""
    return np.gradient(values, coords, axis=axis, edge_order=2)


def second_deriv(values, coords, axis):
    """d2/dx2 along `axis`; centered interior, one-sided at the edges."""
    return deriv(deriv(values, coords, axis), coords, axis)


def periodic_deriv(values, h, axis):
    """Centered first difference on a uniform periodic grid of spacing h."""
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)


def periodic_second_deriv(values, h, axis):
    """Centered second difference on a uniform periodic grid of spacing h."""
    return (
        np.roll(values, -1, axis=axis)
        - 2.0 * values
        + np.roll(values, 1, axis=axis)
    ) / h**2


def fitted_interface_slope(values, h, axis, end, p):
    """Interface slope through a fit that tolerates a d**p singularity.

    Fits v0 + A d + B d**p (d the distance from the interface node at the
    given end) through the interface node and the two nearest interior
    nodes, and returns dA/dlam with the sign convention of
    one_sided_deriv_at.  Exact for affine profiles.  Degenerate fronts
    behave like d**p with p = 1 + 1/m near the interface, where
    polynomial one-sided stencils lose half an order of accuracy; this
    fit keeps the slope first-order accurate there.
    """
    if not 1.0 < p < 2.0:
        raise ValueError(f"need exponent in (1, 2), got {p!r}")
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if end == "first":
        v0, v1, v2 = v[0], v[1], v[2]
        sgn = 1.0
    elif end == "last":
        v0, v1, v2 = v[-1], v[-2], v[-3]
        sgn = -1.0
    else:
        raise ValueError(f"end must be 'first' or 'last', got {end!r}")
    cp = 2.0 ** p
    return sgn * (cp * (v1 - v0) - (v2 - v0)) / (h * (cp - 2.0))


def one_sided_deriv_at(values, h, axis, end):
    """Second-order one-sided d/dx at the first or last index of `axis`.

    end='first' uses nodes 0,1,2; end='last' uses nodes -1,-2,-3.
    Returns the derivative slice with `axis` removed.
    """
    v = np.moveaxis(values, axis, 0)
    if end == "first":
        return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    if end == "last":
        return (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    raise ValueError(f"end must be 'first' or 'last', got {end!r}")
