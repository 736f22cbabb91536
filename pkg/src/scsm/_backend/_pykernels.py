"""Pure-NumPy implementations of the sequential kernels.

These are the fallback for the compiled Cython module and the reference
its outputs are tested against.  Both kernels walk the event grid in order
(the recursion is chain-dependent, so the time loop cannot be vectorised)
and recompute the exponential factors afresh from the running cumulative
coefficient at every step.

All array arguments are in the dataset's canonical order.
"""

import numpy as np


def recursive_fit(x, gc, jac, risk_start, ev_pos, ev_off, den_threshold):
    """One pass of the cumulative-coefficient recursion.

    Parameters
    ----------
    x : (n,) exposure, gc : (n,) centered instrument, jac : (n, p)
        instrument-model Jacobian rows, all in canonical order.
    risk_start : (m,) first at-risk canonical position per grid time.
    ev_pos, ev_off : flattened per-time event positions and offsets.
    den_threshold : absolute lower bound on |denominator|.

    Returns
    -------
    (fail_k, num, den, delta, dnum, dden, slope, theta_grad, b_hat)
    where fail_k is -1 on success, otherwise the first failing grid index
    (collapsed or non-finite denominator / non-finite update).
    """
    n = x.shape[0]
    m = risk_start.shape[0]
    p = jac.shape[1]
    num = np.zeros(m)
    den = np.zeros(m)
    delta = np.zeros(m)
    dnum = np.zeros(m)
    dden = np.zeros(m)
    slope = np.zeros(m)
    theta_grad = np.zeros((m, p))
    b_hat = np.zeros(m)

    b = 0.0
    grad = np.zeros(p)
    for k in range(m):
        r = risk_start[k]
        xr = x[r:]
        er = np.exp(b * xr)
        wr = gc[r:] * er
        den_k = float(np.dot(wr, xr))
        if not np.isfinite(den_k) or abs(den_k) < den_threshold:
            return (k, num, den, delta, dnum, dden, slope, theta_grad, b_hat)
        dden_k = float(np.dot(wr * xr, xr))
        dden_th = -(jac[r:] * (er * xr)[:, None]).sum(axis=0)

        ev = ev_pos[ev_off[k]:ev_off[k + 1]]
        ee = np.exp(b * x[ev])
        we = gc[ev] * ee
        num_k = float(we.sum())
        dnum_k = float(np.dot(we, x[ev]))
        dnum_th = -(jac[ev] * ee[:, None]).sum(axis=0)

        delta_k = num_k / den_k
        slope_k = dnum_k / den_k - delta_k * (dden_k / den_k)
        grad = (1.0 + slope_k) * grad + dnum_th / den_k - delta_k * (dden_th / den_k)
        b = b + delta_k
        if not np.isfinite(b):
            return (k, num, den, delta, dnum, dden, slope, theta_grad, b_hat)

        num[k] = num_k
        den[k] = den_k
        delta[k] = delta_k
        dnum[k] = dnum_k
        dden[k] = dden_k
        slope[k] = slope_k
        theta_grad[k] = grad
        b_hat[k] = b
    return (-1, num, den, delta, dnum, dden, slope, theta_grad, b_hat)


def influence_base(x, gc, risk_start, ev_pos, ev_off, den, delta, slope, b_hat):
    """Forward pass of the per-subject influence recurrence.

    Builds the first (martingale) component of the influence matrix on the
    event grid: row k holds, for every subject in canonical order,

        eps_i(t_k) = (1 + slope_k) * eps_i(t_{k-1})
                     + n * h_{i,k} * (dN_i(t_k) - R_i(t_k) X_i delta_k)

    with h_{i,k} = gc_i exp(b_{k-1} x_i) / den_k.  The instrument-model
    correction term is added by the caller.
    """
    n = x.shape[0]
    m = risk_start.shape[0]
    out = np.empty((m, n))
    run = np.zeros(n)
    b = 0.0
    for k in range(m):
        run *= 1.0 + slope[k]
        r = risk_start[k]
        coef = n / den[k]
        run[r:] += coef * gc[r:] * np.exp(b * x[r:]) * (-x[r:] * delta[k])
        ev = ev_pos[ev_off[k]:ev_off[k + 1]]
        run[ev] += coef * gc[ev] * np.exp(b * x[ev])
        out[k] = run
        b = b_hat[k]
    return out
