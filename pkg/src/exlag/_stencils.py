"""Finite-difference weights and local polynomial interpolation helpers.

Weights come from Fornberg's recurrence, so stencils are exact on
polynomials of degree (#nodes - 1) in the stencil coordinate.  Radial
machinery uses the node radii themselves as the coordinate, which makes
first and second derivatives exact on quadratics in r = |x|.
"""

import numpy as np


def fd_weights(nodes, x0, max_der):
    """Fornberg weights for derivatives 0..max_der at x0 from the given nodes.

    Returns an array of shape (max_der+1, len(nodes)); row m holds the
    weights of the m-th derivative.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    w = np.zeros((max_der + 1, n))
    c1 = 1.0
    c4 = nodes[0] - x0
    w[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, max_der)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[k, i] = c1 * (k * w[k - 1, i - 1] - c5 * w[k, i - 1]) / c2
                w[0, i] = -c1 * c5 * w[0, i - 1] / c2
            for k in range(mn, 0, -1):
                w[k, j] = ((nodes[i] - x0) * w[k, j] - k * w[k - 1, j]) / c3
            w[0, j] = (nodes[i] - x0) * w[0, j] / c3
        c1 = c2
    return w


def stencil_window(n, i_center, width):
    """Start index of a width-node window inside [0, n) centered near i_center."""
    lo = i_center - (width - 1) // 2
    return int(np.clip(lo, 0, n - width))


def interp_weights_1d(nodes, x_eval, order=8, deriv=0):
    """Local Lagrange interpolation/differentiation on a 1-d node set.

    For every evaluation point picks the `order` nearest nodes (shifted
    one-sided at the ends) and returns (start_indices, weight_matrix) so
    that values[start:start+order] @ weights reproduces the derivative of
    the local interpolant.
    """
    nodes = np.asarray(nodes, dtype=float)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    n = nodes.size
    width = min(order, n)
    starts = np.empty(x_eval.size, dtype=int)
    weights = np.empty((x_eval.size, width))
    centers = np.searchsorted(nodes, x_eval)
    for k, (x, ic) in enumerate(zip(x_eval, centers)):
        lo = stencil_window(n, ic, width)
        starts[k] = lo
        weights[k] = fd_weights(nodes[lo:lo + width], x, deriv)[deriv]
    return starts, weights


def apply_interp(values, starts, weights):
    """Apply interp_weights_1d output along axis 0 of a 1-d or 2-d array."""
    values = np.asarray(values)
    width = weights.shape[1]
    idx = starts[:, None] + np.arange(width)[None, :]
    if values.ndim == 1:
        return np.einsum("kw,kw->k", weights, values[idx])
    return np.einsum("kw,kwj->kj", weights, values[idx])


def derivative_matrix(nodes, deriv, interior_width=3, edge_width=None):
    """Banded differentiation matrix on arbitrary 1-d nodes (dense rows).

    Interior rows use centered `interior_width`-node stencils; rows too
    close to an end use one-sided `edge_width`-node stencils.  Returned as
    a dense (n, n) array; callers embed it in sparse operators as needed.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    if edge_width is None:
        edge_width = interior_width + (1 if deriv >= 2 else 0)
    if n < max(interior_width, edge_width):
        raise ValueError("not enough nodes for the requested stencil")
    mat = np.zeros((n, n))
    half = (interior_width - 1) // 2
    for i in range(n):
        if i < half or i > n - 1 - half:
            width = edge_width
        else:
            width = interior_width
        lo = stencil_window(n, i, width)
        mat[i, lo:lo + width] = fd_weights(nodes[lo:lo + width], nodes[i], deriv)[deriv]
    return mat
