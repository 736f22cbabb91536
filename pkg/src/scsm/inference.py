"""Inference for the recursive cumulative-coefficient fit.

The recursion admits a per-subject (iid) linearization: the estimation
error at each grid time is, to first order, an average of n influence
paths.  :func:`iid_decomposition` materializes those paths, propagating
one-step factors along the grid and correcting for the estimated
instrument-model parameters.  On top of it sit pointwise variance bands
(:func:`variance_bands`), a wild-multiplier resampler
(:func:`multiplier_draws`) for the law of the full process, and
sup-statistic tests: no effect at all (:func:`test_causal_null`),
constant effect (:func:`test_constant_effect`), piecewise-constant effect
(:func:`test_piecewise_gof`), and a diagnostic for whether competing
events behave as the model assumes (:func:`competing_risk_test`).
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _backend
from .dataset import build_event_grid
from .errors import (
    CovariateInstrumentModel,
    NoCompetingEvents,
    NoEvents,
    NoJumpsInWindow,
    TraceMismatch,
)
from .estimators import StepFunction

__all__ = [
    "IidDecomposition",
    "VarianceBands",
    "TestReport",
    "iid_decomposition",
    "variance_bands",
    "multiplier_draws",
    "constant_effect_se",
    "test_causal_null",
    "test_constant_effect",
    "test_piecewise_gof",
    "competing_risk_test",
]


def _frozen(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class IidDecomposition:
    """Per-subject influence paths of the recursive fit.

    ``eps[i, k]`` is subject ``i``'s influence on the estimate at grid
    time ``k`` (rows follow the dataset's original row order), scaled so
    that the estimation error is approximately ``mean(eps[:, k])``.  The
    paths sum to zero over subjects at every grid time.
    """

    grid: np.ndarray
    eps: np.ndarray
    b_values: np.ndarray
    one_step_factors: np.ndarray
    theta_grad: np.ndarray
    theta_eps: np.ndarray
    q_order: np.ndarray
    instrument_kind: str
    n: int

    def __post_init__(self):
        for name in ("grid", "eps", "b_values", "one_step_factors",
                     "theta_grad", "theta_eps"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "q_order", _frozen(self.q_order, dtype=np.int64))

    @property
    def m(self):
        return self.grid.size

    def propagation(self, l, k):
        """Product of one-step factors from grid index ``l`` to ``k``.

        ``propagation(l, k) = prod_{l < j <= k} (1 + slope_j)``; this is
        how an innovation entering at step ``l`` is carried to step ``k``.
        """
        if not -1 <= l <= k < self.m:
            raise IndexError("need -1 <= l <= k < m")
        return float(np.prod(self.one_step_factors[l + 1:k + 1]))

    def increments(self):
        """Per-subject jumps of the influence paths at each grid time."""
        return np.diff(self.eps, axis=1, prepend=0.0)


def iid_decomposition(trace, dataset, instrument_fit):
    """Materialize the influence paths for a fitted recursion.

    ``trace`` must come from :func:`fit_recursive` on the same dataset and
    instrument fit; mismatches (different size, different event grid, or a
    different instrument-model dimension) raise :class:`TraceMismatch`.
    """
    if trace.n != dataset.n or instrument_fit.n != dataset.n:
        raise TraceMismatch(
            "trace, dataset and instrument fit disagree on the number of subjects"
        )
    if trace.theta_grad.shape[1] != instrument_fit.p:
        raise TraceMismatch(
            "trace and instrument fit disagree on the parameter dimension"
        )
    if not np.any(dataset.status == 1):
        if trace.m != 0:
            raise TraceMismatch(
                "the trace was computed on a different dataset: event grids differ"
            )
        n = dataset.n
        return IidDecomposition(
            grid=np.zeros(0), eps=np.zeros((n, 0)), b_values=np.zeros(0),
            one_step_factors=np.zeros(0), theta_grad=trace.theta_grad,
            theta_eps=instrument_fit.influence,
            q_order=np.lexsort((np.arange(n), dataset.status, dataset.time)),
            instrument_kind=instrument_fit.spec.kind, n=n,
        )
    grid = build_event_grid(dataset, cause=1)
    if not np.array_equal(grid.times, trace.times):
        raise TraceMismatch(
            "the trace was computed on a different dataset: event grids differ"
        )

    order = dataset.canonical_order
    x = np.ascontiguousarray(dataset.exposure[order])
    gc = np.ascontiguousarray(instrument_fit.residuals[order])
    base = _backend.influence_base(
        x, gc, grid.risk_start, grid.event_positions, grid.event_offsets,
        trace.den, trace.delta, trace.slope, trace.b_values,
    )
    theta_eps = instrument_fit.influence
    base = base + trace.theta_grad @ theta_eps[order].T

    n, m = dataset.n, grid.m
    eps = np.empty((n, m))
    eps[order] = base.T

    q_order = np.lexsort((np.arange(n), dataset.status, dataset.time))
    return IidDecomposition(
        grid=grid.times, eps=eps, b_values=trace.b_values,
        one_step_factors=1.0 + trace.slope, theta_grad=trace.theta_grad,
        theta_eps=theta_eps, q_order=q_order,
        instrument_kind=instrument_fit.spec.kind, n=n,
    )


@dataclass(frozen=True, eq=False)
class VarianceBands:
    """Pointwise standard errors and confidence band for the cumulative fit."""

    grid: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float

    def __post_init__(self):
        for name in ("grid", "se", "lower", "upper"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def se_at(self, t):
        """Standard error at time ``t`` (0 before the first event)."""
        return StepFunction(self.grid, self.se, initial=0.0)(t)

    def interval_at(self, t):
        """Confidence interval at time ``t`` (degenerate before the grid)."""
        lo = StepFunction(self.grid, self.lower, initial=0.0)(t)
        hi = StepFunction(self.grid, self.upper, initial=0.0)(t)
        return lo, hi


def variance_bands(dec, level=0.95):
    """Pointwise normal confidence bands from the influence paths.

    The variance estimate at each grid time is the mean square of the
    influence values divided by n; the band is the estimate plus/minus the
    normal quantile times the standard error.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be strictly between 0 and 1")
    sigma2 = np.mean(dec.eps**2, axis=0)
    se = np.sqrt(sigma2 / dec.n)
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    return VarianceBands(
        grid=dec.grid, se=se,
        lower=dec.b_values - z * se, upper=dec.b_values + z * se,
        level=float(level),
    )


def constant_effect_se(dec, summary):
    """Standard error of the constant-slope summary.

    The slope's per-subject influence is the weight-averaged jump of each
    influence path over the window; the variance is the mean square of
    those contributions divided by n.
    """
    if summary.kind != "constant":
        raise ValueError("constant_effect_se needs a constant summary")
    c = _summary_influences(dec, summary)[0]
    return float(np.sqrt(np.sum(c**2)) / dec.n)


def _window_indices(grid, jump_times):
    """Grid indices of a summary window's jump times (exact matches)."""
    idx = np.searchsorted(grid, jump_times)
    if np.any(idx >= grid.size) or not np.array_equal(grid[idx], jump_times):
        raise TraceMismatch(
            "the effect summary was computed on a different grid"
        )
    return idx


def _summary_influences(dec, summary):
    """Per-subject influences of each window slope of a summary."""
    deps = dec.increments()
    out = []
    for jumps, weights in zip(summary.jump_times, summary.jump_weights):
        idx = _window_indices(dec.grid, jumps)
        out.append(deps[:, idx] @ weights)
    return out


def _multiplier_matrix(n, m_draws, seed, q_order):
    """Standard-normal multipliers, one column per draw.

    Column ``m`` is the stream of ``SeedSequence([seed, m])`` laid out in
    the canonical multiplier order, so the draw a subject receives does
    not depend on the row order of the input file.
    """
    q = np.empty((n, m_draws))
    for m in range(m_draws):
        gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([seed, m]))
        )
        q[q_order, m] = gen.standard_normal(n)
    return q


def _multiplier_processes(contrib, q_order, m_draws, seed):
    """Resampled processes ``(K, M)``: columns are draws of the limit law."""
    n = contrib.shape[0]
    q = _multiplier_matrix(n, int(m_draws), seed, q_order)
    return contrib.T @ q / np.sqrt(n)


def multiplier_draws(dec, m_draws, seed):
    """Draws of the limiting process of the scaled estimation error.

    Returns an ``(m, M)`` array whose column ``j`` is one resampled path
    of ``sqrt(n) * (estimate - truth)`` on the event grid: the influence
    paths weighted by fresh standard-normal multipliers.  Draws are fully
    determined by ``seed`` and the dataset, independent of row order.
    """
    if m_draws < 1:
        raise ValueError("the number of draws must be at least 1")
    return _multiplier_processes(dec.eps, dec.q_order, m_draws, seed)


@dataclass(frozen=True, eq=False)
class TestReport:
    """Result of a sup-statistic multiplier test.

    ``process`` is the observed test process on its evaluation grid,
    ``statistic`` its supremum in absolute value, and ``p_value`` the
    fraction of resampled suprema at least as large.
    """

    kind: str
    statistic: float
    p_value: float
    m_draws: int
    seed: int
    process: StepFunction
    resampled_sups: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "resampled_sups", _frozen(self.resampled_sups))


def _check_alignment(b_hat, dec):
    """The fit handed in must be the one the decomposition was built from."""
    if not (np.array_equal(b_hat.grid, dec.grid)
            and np.array_equal(b_hat.values, dec.b_values)):
        raise TraceMismatch(
            "the cumulative fit and the influence decomposition disagree"
        )


def _sup_test(kind, grid, observed, contrib, dec, m_draws, seed):
    if m_draws < 1:
        raise ValueError("the number of draws must be at least 1")
    stat = float(np.max(np.abs(observed)))
    draws = _multiplier_processes(contrib, dec.q_order, m_draws, seed)
    sups = np.max(np.abs(draws), axis=0)
    p = float(np.count_nonzero(sups >= stat)) / m_draws
    return TestReport(
        kind=kind, statistic=stat, p_value=p, m_draws=int(m_draws),
        seed=int(seed), process=StepFunction(grid, observed, initial=0.0),
        resampled_sups=sups,
    )


def test_causal_null(b_hat, dec, m_draws, seed, tau=None):
    """Sup test of no exposure effect: is the cumulative fit flat at zero?

    The statistic is ``sup_k sqrt(n) |B(t_k)|`` over grid times (restricted
    to ``t <= tau`` when given); its null law is resampled by weighting the
    influence paths with standard-normal multipliers.
    """
    _check_alignment(b_hat, dec)
    if dec.m == 0:
        raise NoEvents("no cause-1 events: the test statistic is undefined")
    mask = np.ones(dec.m, dtype=bool) if tau is None else dec.grid <= float(tau)
    if not np.any(mask):
        raise NoJumpsInWindow("no event times at or before tau")
    root_n = np.sqrt(dec.n)
    observed = root_n * dec.b_values[mask]
    return _sup_test(
        "causal-null", dec.grid[mask], observed, dec.eps[:, mask],
        dec, m_draws, seed,
    )


def test_constant_effect(b_hat, summary, dec, m_draws, seed):
    """Sup test of a constant effect slope over the summary window.

    Compares the cumulative fit with the fitted straight line
    ``beta * t``; the influence of the estimated slope is subtracted from
    each path, so the resampled law accounts for both estimation steps.
    """
    if summary.kind != "constant":
        raise ValueError("test_constant_effect needs a constant summary")
    _check_alignment(b_hat, dec)
    mask = dec.grid <= summary.tau
    if not np.any(mask):
        raise NoJumpsInWindow("no event times at or before tau")
    t_cols = dec.grid[mask]
    c = _summary_influences(dec, summary)[0]
    contrib = dec.eps[:, mask] - np.outer(c, t_cols)
    root_n = np.sqrt(dec.n)
    observed = root_n * (dec.b_values[mask] - summary.beta * t_cols)
    return _sup_test(
        "constant-effect", t_cols, observed, contrib, dec, m_draws, seed
    )


def test_piecewise_gof(b_hat, summary, dec, m_draws, seed, sup_window=None):
    """Sup goodness-of-fit test of the two-slope summary.

    Compares the cumulative fit with the fitted piecewise line; both
    window slopes' estimation influences are subtracted.  ``sup_window``
    (a ``(lo, hi)`` pair) restricts which grid times enter the supremum --
    the default is the full summary window ``[0, tau]``.
    """
    if summary.kind != "piecewise":
        raise ValueError("test_piecewise_gof needs a piecewise summary")
    _check_alignment(b_hat, dec)
    mask = dec.grid <= summary.tau
    if sup_window is not None:
        lo, hi = (float(sup_window[0]), float(sup_window[1]))
        if not lo < hi:
            raise ValueError("sup_window must satisfy lo < hi")
        mask &= (dec.grid >= lo) & (dec.grid <= hi)
    if not np.any(mask):
        raise NoJumpsInWindow("no event times inside the sup window")
    t_cols = dec.grid[mask]
    c0, c1 = _summary_influences(dec, summary)
    xi = summary.changepoint
    g0 = np.minimum(t_cols, xi)
    g1 = np.clip(t_cols - xi, 0.0, None)
    contrib = dec.eps[:, mask] - np.outer(c0, g0) - np.outer(c1, g1)
    root_n = np.sqrt(dec.n)
    observed = root_n * (dec.b_values[mask] - summary.predicted(t_cols))
    return _sup_test(
        "piecewise-gof", t_cols, observed, contrib, dec, m_draws, seed
    )


def competing_risk_test(dataset, b_hat, dec, m_draws, seed):
    """Diagnostic for dependence between the instrument and competing events.

    Accumulates the centered instrument, tilted by the fitted cumulative
    coefficient, over competing (cause-2) event times; under the model the
    resulting process fluctuates around zero.  The statistic is the
    supremum of the absolute process on the cause-2 grid, calibrated by
    multiplier resampling of its influence decomposition.  Implemented for
    the intercept-only instrument model.
    """
    if dec.instrument_kind != "mean":
        raise CovariateInstrumentModel(
            "the competing-risk diagnostic requires the intercept-only "
            f"instrument model, got {dec.instrument_kind!r}"
        )
    _check_alignment(b_hat, dec)
    status = dataset.status
    if not np.any(status == 2):
        raise NoCompetingEvents("the dataset contains no cause-2 events")
    n = dataset.n
    x = dataset.exposure
    g = dataset.instrument
    gc = g - g.mean()

    is2 = status == 2
    t2 = dataset.time[is2]
    x2 = x[is2]
    gc2 = gc[is2]
    grid2 = np.unique(t2)

    # Observed process: running sum of tilted centered instruments over
    # cause-2 events, the tilt using the fit just before each event.
    tilt_left = np.exp(b_hat.value_before(t2) * x2)
    order2 = np.argsort(t2, kind="stable")
    _, first = np.unique(t2[order2], return_index=True)
    per_time = np.add.reduceat((gc2 * tilt_left)[order2], first)
    h_vals = np.cumsum(per_time) / np.sqrt(n)

    # Influence paths on the cause-2 grid.
    reach = t2[:, None] <= grid2[None, :]
    i_vals = np.exp(b_hat(t2) * x2)
    i_full = np.zeros((n, grid2.size))
    i_full[is2] = i_vals[:, None] * reach
    zeta1 = i_full.sum(axis=0) / n
    term1 = gc[:, None] * (i_full - zeta1[None, :])

    def zeta2(at):
        b_at = np.asarray(b_hat(at), dtype=float)
        tilt = np.exp(np.outer(x2, b_at))
        inside = t2[:, None] <= np.asarray(at)[None, :]
        return ((gc2 * x2)[:, None] * tilt * inside).sum(axis=0) / n

    cols = np.searchsorted(dec.grid, grid2, side="right") - 1
    eps_at = np.where(cols[None, :] >= 0, dec.eps[:, np.maximum(cols, 0)], 0.0)
    term2 = eps_at * zeta2(grid2)[None, :]

    zeta2_grid1 = zeta2(dec.grid)
    carried = np.cumsum(dec.increments() * zeta2_grid1[None, :], axis=1)
    term3 = np.where(cols[None, :] >= 0, carried[:, np.maximum(cols, 0)], 0.0)

    contrib = term1 + term2 - term3
    return _sup_test(
        "competing-risk", grid2, h_vals, contrib, dec, m_draws, seed
    )
