"""Brute-force reference implementations shared by the unit and acceptance suites.

Everything here recomputes quantities from their definitions with plain
loops and dense arrays: no sparse matrices, no shared code paths with the
package internals they are used to check.
"""

import numpy as np
from scipy.linalg import solve_triangular

from ppfilt.objective import Coefficients, gradient, penalized_nll
from ppfilt.splines import basis_eval_matrix


def binned_filter_value(delta, g_row, lag):
    """Left-bin-edge evaluation with the closed last bin, by linear scan."""
    if lag <= 0 or lag > delta.support:
        return 0.0
    if lag == delta.support:
        return g_row[-1]
    for k in range(delta.n_bins):
        if delta.points[k] <= lag < delta.points[k + 1]:
            return g_row[k]
    raise AssertionError("unreachable")


def brute_force_xi(trial, grid, delta, channels, g_values, beta0):
    """Double sum over channels and events; no sparse matrices involved."""
    xi = np.full(grid.n + 1, float(beta0))
    for l, t_l in enumerate(grid.points):
        for i, ch in enumerate(channels):
            for sigma in trial.events[ch]:
                if sigma < t_l:
                    xi[l] += binned_filter_value(delta, g_values[i], t_l - sigma)
    return xi


def brute_force_nll(trial, grid, delta, channels, g_values, beta0, link):
    """Term-by-term Riemann sum and jump sum."""
    xi = brute_force_xi(trial, grid, delta, channels, g_values, beta0)
    total = 0.0
    for l in range(1, grid.n + 1):
        total += link.phi(xi[l])[0] * (grid.points[l] - grid.points[l - 1])
    for l in grid.jump_indices:
        total -= link.log_phi(xi[l])
    return total


def spec_filter_values(spec, beta):
    """Binned filter evaluations per channel for either parametrization."""
    beta = np.atleast_2d(beta)
    if spec.mode == "direct":
        return beta @ spec.factor.factor.T
    beta0_coefs = solve_triangular(spec.basis_factor.factor.T, beta.T, lower=False).T
    b_eval = basis_eval_matrix(spec.basis, spec.delta.bin_lags)
    return beta0_coefs @ b_eval.T


def finite_difference_gradient(ctx, coef, h_scale=1e-6):
    """Central differences of the penalized objective, coordinate by coordinate."""
    x = coef.pack()
    p, q = ctx.spec.n_channels, ctx.spec.q
    out = np.empty_like(x)
    for i in range(len(x)):
        h = h_scale * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fp = penalized_nll(ctx, Coefficients.unpack(xp, p, q))
        fm = penalized_nll(ctx, Coefficients.unpack(xm, p, q))
        out[i] = (fp - fm) / (2 * h)
    return out


def analytic_gradient_vector(ctx, coef):
    d0, dbeta = gradient(ctx, coef)
    return np.concatenate([[d0], dbeta.ravel()])
