"""Core estimators for cumulative exposure effects on the hazard scale.

The main entry point is :func:`fit_recursive`, which estimates the
cumulative exposure coefficient ``B(t)`` by an instrumental-variable
recursion over the event times of cause 1.  For binary exposures,
:func:`fit_volterra_binary` solves the closed-form sample analogue of the
corresponding integral equation and provides an independent route to the
same estimand.  :func:`constant_effect` and :func:`piecewise_effect`
collapse the cumulative fit onto low-dimensional summaries via
risk-weighted averages of its increments.  :func:`naive_aalen` (additive
hazards least squares, ignoring unmeasured confounding) and
:func:`two_stage_ls` (two-stage least squares on the instrument-predicted
exposure) are the reference estimators the recursion is compared against.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import _backend
from .dataset import SurvivalDataset, build_event_grid
from .errors import (
    EmptyWindow,
    InvalidTime,
    MissingColumn,
    NoJumpsInWindow,
    NonBinaryExposure,
    RankDeficientRiskSet,
    SingularSecondStage,
    DegenerateFirstStage,
    WeakInstrument,
)
from .instrument import InstrumentModelFit, _newton_logistic

__all__ = [
    "StepFunction",
    "RecursionTrace",
    "EffectSummary",
    "VolterraFit",
    "TwoStageFit",
    "fit_recursive",
    "fit_volterra_binary",
    "constant_effect",
    "piecewise_effect",
    "naive_aalen",
    "two_stage_ls",
]

#: Default lower bound on |denominator| / n before the recursion is
#: declared numerically unusable.
DEN_THRESHOLD = 1e-8

_RANK_RTOL = 1e-12


def _frozen(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous step function on a finite grid.

    ``f(t) = initial`` for ``t < grid[0]`` and ``f(t) = values[j]`` for
    ``grid[j] <= t < grid[j + 1]`` (the last value extends to infinity).
    """

    grid: np.ndarray
    values: np.ndarray
    initial: float = 0.0

    def __post_init__(self):
        grid = _frozen(self.grid)
        values = _frozen(self.values)
        if grid.ndim != 1 or values.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if grid.size and np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "initial", float(self.initial))

    @property
    def m(self):
        """Number of grid points."""
        return self.grid.size

    def __call__(self, t):
        """Evaluate ``f(t)`` (right-continuous); scalar or array ``t``."""
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.grid, t_arr, side="right") - 1
        padded = np.concatenate([[self.initial], self.values])
        out = padded[idx + 1]
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def value_before(self, t):
        """Left limit ``f(t-)``; scalar or array ``t``."""
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.grid, t_arr, side="left") - 1
        padded = np.concatenate([[self.initial], self.values])
        out = padded[idx + 1]
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def increments(self):
        """Jump sizes at the grid points, ``f(grid[j]) - f(grid[j]-)``."""
        if not self.grid.size:
            return np.empty(0)
        return np.diff(np.concatenate([[self.initial], self.values]))

    def integrate(self, a, b):
        """Exact integral of the step function over ``[a, b]``."""
        a = float(a)
        b = float(b)
        if b < a:
            raise ValueError("integration bounds must satisfy a <= b")
        inner = self.grid[(self.grid > a) & (self.grid < b)]
        knots = np.concatenate([[a], inner, [b]])
        return float(np.sum(np.diff(knots) * self(knots[:-1])))


@dataclass(frozen=True, eq=False)
class RecursionTrace:
    """Per-step internals of the recursive fit, in event-grid order.

    Everything downstream inference needs is recorded here: the raw
    numerator/denominator of each increment, their exposure-weighted
    derivatives (``dnum``, ``dden``), the one-step propagation slope, the
    accumulated sensitivity of the path to the instrument-model
    parameters (``theta_grad``, one row per grid time), and the running
    estimate itself.
    """

    times: np.ndarray
    num: np.ndarray
    den: np.ndarray
    delta: np.ndarray
    dnum: np.ndarray
    dden: np.ndarray
    slope: np.ndarray
    theta_grad: np.ndarray
    b_values: np.ndarray
    n: int
    den_threshold: float

    def __post_init__(self):
        for name in ("times", "num", "den", "delta", "dnum", "dden",
                     "slope", "theta_grad", "b_values"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def m(self):
        return self.times.size

    @property
    def min_den_over_n(self):
        """Smallest |denominator| / n along the path (instrument strength).

        ``None`` when the trace is empty (no cause-1 events).
        """
        if self.m == 0:
            return None
        return float(np.min(np.abs(self.den)) / self.n)


def fit_recursive(dataset, instrument_fit, den_threshold=DEN_THRESHOLD):
    """Recursive instrumental-variable fit of the cumulative coefficient.

    Starting from ``B(0) = 0``, each event time of cause 1 contributes the
    increment

        delta_k = sum_{events at t_k} Gc_i exp(b X_i)
                  / sum_{at risk at t_k} Gc_i exp(b X_i) X_i

    where ``Gc_i`` is the centered instrument from ``instrument_fit`` and
    ``b`` is the estimate just before ``t_k``.  The exponential factors
    are recomputed from the running estimate at every step.

    Parameters
    ----------
    dataset : SurvivalDataset
    instrument_fit : InstrumentModelFit
        Fitted instrument model; its residuals center the instrument and
        its Jacobian feeds the parameter-sensitivity recursion recorded in
        the trace.
    den_threshold : float
        Lower bound on ``|denominator| / n``.  A step below it raises
        :class:`WeakInstrument` with the offending time.

    Returns
    -------
    (StepFunction, RecursionTrace)
        The estimated cumulative coefficient (right-continuous, 0 before
        the first event) and the per-step trace.
    """
    if not isinstance(instrument_fit, InstrumentModelFit):
        raise TypeError("instrument_fit must be an InstrumentModelFit")
    if instrument_fit.n != dataset.n:
        raise ValueError("instrument fit and dataset have different sizes")
    if not np.any(dataset.status == 1):
        # No jumps: the estimate is identically zero and the trace is empty.
        empty = np.zeros(0)
        trace = RecursionTrace(
            times=empty, num=empty, den=empty, delta=empty, dnum=empty,
            dden=empty, slope=empty,
            theta_grad=np.zeros((0, instrument_fit.p)), b_values=empty,
            n=dataset.n, den_threshold=float(den_threshold),
        )
        return StepFunction(grid=empty, values=empty, initial=0.0), trace
    grid = build_event_grid(dataset, cause=1)
    order = dataset.canonical_order
    x = np.ascontiguousarray(dataset.exposure[order])
    gc = np.ascontiguousarray(instrument_fit.residuals[order])
    jac = np.ascontiguousarray(instrument_fit.jacobian[order])

    fail_k, num, den, delta, dnum, dden, slope, theta_grad, b_values = (
        _backend.recursive_fit(
            x, gc, jac,
            grid.risk_start, grid.event_positions, grid.event_offsets,
            float(den_threshold) * dataset.n,
        )
    )
    if fail_k >= 0:
        seen = np.abs(den[:fail_k]) / dataset.n
        observed = float(seen.min()) if fail_k else float("nan")
        raise WeakInstrument(
            "recursion denominator collapsed or overflowed at time "
            f"{grid.times[fail_k]:g} (threshold {den_threshold:g} per subject)",
            time=float(grid.times[fail_k]),
            min_den_over_n=observed,
        )
    trace = RecursionTrace(
        times=grid.times, num=num, den=den, delta=delta, dnum=dnum,
        dden=dden, slope=slope, theta_grad=theta_grad, b_values=b_values,
        n=dataset.n, den_threshold=float(den_threshold),
    )
    b_hat = StepFunction(grid=grid.times, values=b_values, initial=0.0)
    return b_hat, trace


@dataclass(frozen=True, eq=False)
class VolterraFit:
    """Closed-form cumulative fit for a binary exposure.

    ``survival_ratio`` estimates the exponentiated cumulative coefficient
    directly (value 1 before the first event); its logarithm should track
    the recursive fit, with agreement improving as the sample grows.
    ``min_den_over_n`` is the conditioning diagnostic (``None`` when the
    dataset has no cause-1 events).
    """

    survival_ratio: StepFunction
    min_den_over_n: float

    def log_ratio(self):
        """Logarithm of the fitted ratio (NaN wherever the ratio is <= 0)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = np.log(self.survival_ratio.values)
        return StepFunction(self.survival_ratio.grid, vals, initial=0.0)


def fit_volterra_binary(dataset, instrument_fit, den_threshold=DEN_THRESHOLD):
    """Closed-form estimator of the exponentiated cumulative coefficient.

    Requires a 0/1 exposure.  With ``Gc`` the centered instrument and
    ``den0_k = sum_{at risk} Gc_i X_i``, each cause-1 event time
    contributes

        dW_k = sum_{events} Gc_i (1 - X_i) / den0_k,
        dU_k = sum_{events} Gc_i X_i / den0_k,

    and the estimate solves ``A(t_k) = A(t_{k-1}) (1 + dU_k) + dW_k`` with
    ``A(0) = 1`` -- the one-pass solution of the sample integral equation.
    """
    x = dataset.exposure
    if not np.all((x == 0.0) | (x == 1.0)):
        raise NonBinaryExposure(
            "closed-form fit requires a binary (0/1) exposure column"
        )
    if instrument_fit.n != dataset.n:
        raise ValueError("instrument fit and dataset have different sizes")
    if not np.any(dataset.status == 1):
        # No jumps: the fitted ratio is identically one.
        empty = np.zeros(0)
        return VolterraFit(
            survival_ratio=StepFunction(grid=empty, values=empty, initial=1.0),
            min_den_over_n=None,
        )
    grid = build_event_grid(dataset, cause=1)
    order = dataset.canonical_order
    xs = x[order]
    gc = instrument_fit.residuals[order]

    gx = gc * xs
    suffix = np.concatenate([np.cumsum(gx[::-1])[::-1], [0.0]])
    den0 = suffix[grid.risk_start]
    bad = np.abs(den0) < float(den_threshold) * dataset.n
    if np.any(bad):
        k = int(np.argmax(bad))
        seen = np.abs(den0[:k]) / dataset.n
        raise WeakInstrument(
            "closed-form denominator collapsed at time "
            f"{grid.times[k]:g} (threshold {den_threshold:g} per subject)",
            time=float(grid.times[k]),
            min_den_over_n=float(seen.min()) if k else float("nan"),
        )

    ev = grid.event_positions
    starts = grid.event_offsets[:-1]
    dw = np.add.reduceat(gc[ev] * (1.0 - xs[ev]), starts) / den0
    du = np.add.reduceat(gc[ev] * xs[ev], starts) / den0

    a_vals = np.empty(grid.m)
    a = 1.0
    for k in range(grid.m):
        a = a * (1.0 + du[k]) + dw[k]
        a_vals[k] = a
    ratio = StepFunction(grid=grid.times, values=a_vals, initial=1.0)
    return VolterraFit(
        survival_ratio=ratio,
        min_den_over_n=float(np.min(np.abs(den0)) / dataset.n),
    )


@dataclass(frozen=True, eq=False)
class EffectSummary:
    """Low-dimensional summary of a cumulative coefficient fit.

    ``kind`` is ``"constant"`` (one slope over ``[0, tau]``) or
    ``"piecewise"`` (one slope per window split at a changepoint).  Each
    window carries its normalized risk-weight function (a reporting step
    function integrating to one over the window), plus the jump times and
    the exact weights applied to the increments there.
    """

    kind: str
    tau: float
    betas: tuple
    changepoints: tuple
    weights: tuple
    jump_times: tuple
    jump_weights: tuple
    fitted: StepFunction

    @property
    def beta(self):
        """The single slope (constant summaries only)."""
        if self.kind != "constant":
            raise AttributeError("beta is defined for constant summaries only")
        return self.betas[0]

    @property
    def beta0(self):
        if self.kind != "piecewise":
            raise AttributeError("beta0 is defined for piecewise summaries only")
        return self.betas[0]

    @property
    def beta1(self):
        if self.kind != "piecewise":
            raise AttributeError("beta1 is defined for piecewise summaries only")
        return self.betas[1]

    @property
    def changepoint(self):
        if self.kind != "piecewise":
            raise AttributeError(
                "changepoint is defined for piecewise summaries only"
            )
        return self.changepoints[0]

    def predicted(self, t):
        """Fitted cumulative coefficient, evaluated exactly.

        Piecewise linear with the summary slopes between the window knots
        ``0, changepoints..., tau``; constant beyond ``tau``.  Accepts a
        scalar or an array.
        """
        t_arr = np.asarray(t, dtype=float)
        knots = (0.0,) + self.changepoints + (self.tau,)
        out = np.zeros_like(t_arr, dtype=float)
        for j, beta in enumerate(self.betas):
            seg = np.clip(np.minimum(t_arr, knots[j + 1]) - knots[j], 0.0, None)
            out = out + beta * seg
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def _risk_counts(times, at):
    """Number of subjects still under observation at each time in ``at``."""
    t_sorted = np.sort(times)
    return times.size - np.searchsorted(t_sorted, at, side="left")


def _risk_integral(times, a, b):
    """Exact ``integral_a^b #{i : T_i >= s} ds = sum_i (min(T_i,b) - min(T_i,a))``."""
    return float(np.sum(np.minimum(times, b) - np.minimum(times, a)))


def _weight_step(times, a, b, norm):
    """Reporting step function for ``t -> #{T_i >= t} / norm`` on ``[a, b)``.

    Right-continuous: on each interval between observation exits the
    stored value is the post-exit risk count, so the function integrates
    to the exact risk integral over the window; it is zero outside.
    """
    t_sorted = np.sort(times)
    cuts = np.unique(t_sorted[(t_sorted > a) & (t_sorted < b)])
    grid = np.concatenate([[a], cuts, [b]])
    counts = times.size - np.searchsorted(t_sorted, grid[:-1], side="right")
    values = np.concatenate([counts / norm, [0.0]])
    return StepFunction(grid=grid, values=values, initial=0.0)


def _fitted_values(t, betas, knots):
    """Piecewise-linear fit: slope ``betas[j]`` on ``[knots[j], knots[j+1])``."""
    out = np.zeros_like(t, dtype=float)
    for j, beta in enumerate(betas):
        out += beta * np.clip(np.minimum(t, knots[j + 1]) - knots[j], 0.0, None)
    return out


def _window_summary(b_hat, times, lo, hi, include_lo, include_hi, label):
    """Weighted slope of ``b_hat`` increments over one window.

    Returns ``(beta, weight_sf, jump_times, jump_weights)`` for the window
    from ``lo`` to ``hi``; the ``include_*`` flags decide whether a jump
    exactly on a boundary belongs to this window.
    """
    grid = b_hat.grid
    mask = (grid >= lo if include_lo else grid > lo) & (
        grid <= hi if include_hi else grid < hi
    )
    if not np.any(mask):
        raise NoJumpsInWindow(
            f"the cumulative fit has no jumps inside the {label} window"
        )
    norm = _risk_integral(times, lo, hi)
    if norm <= 0.0:
        raise EmptyWindow(f"the risk integral over the {label} window is zero")
    jumps = grid[mask]
    weights = _risk_counts(times, jumps) / norm
    beta = float(np.dot(weights, b_hat.increments()[mask]))
    return beta, _weight_step(times, lo, hi, norm), jumps, weights


def constant_effect(b_hat, dataset, tau):
    """Constant-slope summary of the cumulative coefficient over ``[0, tau]``.

    The slope is the risk-weighted average of the increments,
    ``sum_k w(t_k) dB(t_k)`` with ``w(t) = #{T_i >= t} / sum_i min(T_i, tau)``,
    so the weight function integrates to one over the window.
    """
    tau = float(tau)
    if not np.isfinite(tau) or tau <= 0.0:
        raise InvalidTime("tau must be a positive, finite time")
    beta, w_sf, jumps, weights = _window_summary(
        b_hat, dataset.time, 0.0, tau,
        include_lo=False, include_hi=True, label="[0, tau]",
    )
    fit_grid = b_hat.grid[b_hat.grid <= tau]
    return EffectSummary(
        kind="constant", tau=tau, betas=(beta,), changepoints=(),
        weights=(w_sf,), jump_times=(_frozen(jumps),),
        jump_weights=(_frozen(weights),),
        fitted=StepFunction(
            fit_grid, _fitted_values(fit_grid, (beta,), (0.0, tau)), initial=0.0
        ),
    )


def piecewise_effect(b_hat, dataset, changepoint, tau):
    """Two-slope summary split at ``changepoint`` inside ``(0, tau)``.

    The first slope averages increments over ``[0, changepoint)``, the
    second over ``[changepoint, tau]``, each with the window's own
    normalized risk weights.
    """
    tau = float(tau)
    xi = float(changepoint)
    if not np.isfinite(tau) or tau <= 0.0:
        raise InvalidTime("tau must be a positive, finite time")
    if not np.isfinite(xi) or not 0.0 < xi < tau:
        raise EmptyWindow(
            "changepoint must lie strictly between 0 and tau; got "
            f"changepoint={xi:g}, tau={tau:g}"
        )
    times = dataset.time
    beta0, w0, j0, wt0 = _window_summary(
        b_hat, times, 0.0, xi,
        include_lo=False, include_hi=False, label="[0, changepoint)",
    )
    beta1, w1, j1, wt1 = _window_summary(
        b_hat, times, xi, tau,
        include_lo=True, include_hi=True, label="[changepoint, tau]",
    )
    fit_grid = b_hat.grid[b_hat.grid <= tau]
    return EffectSummary(
        kind="piecewise", tau=tau, betas=(beta0, beta1), changepoints=(xi,),
        weights=(w0, w1), jump_times=(_frozen(j0), _frozen(j1)),
        jump_weights=(_frozen(wt0), _frozen(wt1)),
        fitted=StepFunction(
            fit_grid, _fitted_values(fit_grid, (beta0, beta1), (0.0, xi, tau)),
            initial=0.0,
        ),
    )


def naive_aalen(dataset, columns=("exposure", "instrument")):
    """Additive-hazards least squares, ignoring unmeasured confounding.

    At every cause-1 event time the increment of the cumulative regression
    function solves the normal equations of the at-risk design
    ``(1, columns...)`` against the event indicator; cumulative sums are
    returned per coefficient.  With ``columns=()`` this reduces to the
    events-over-risk-count cumulative hazard.

    Returns
    -------
    dict[str, StepFunction]
        Keyed by ``"intercept"`` and the requested column names.
    """
    columns = tuple(columns)
    for name in columns:
        dataset.column(name)  # raises MissingColumn for unknown names
    if len(set(columns)) != len(columns):
        raise MissingColumn("duplicate column names in design")
    grid = build_event_grid(dataset, cause=1)
    order = dataset.canonical_order
    n = dataset.n
    p = 1 + len(columns)
    design = np.empty((n, p))
    design[:, 0] = 1.0
    for j, name in enumerate(columns):
        design[:, j + 1] = dataset.column(name)[order]

    outer = design[:, :, None] * design[:, None, :]
    suffix = np.concatenate(
        [np.cumsum(outer[::-1], axis=0)[::-1], np.zeros((1, p, p))]
    )
    risk_mats = suffix[grid.risk_start]

    singulars = np.linalg.svd(risk_mats, compute_uv=False)
    deficient = singulars[:, -1] <= _RANK_RTOL * singulars[:, 0]
    if np.any(deficient):
        k = int(np.argmax(deficient))
        raise RankDeficientRiskSet(
            "at-risk design is rank deficient at time "
            f"{grid.times[k]:g}; drop collinear columns or stop earlier",
            time=float(grid.times[k]),
        )

    event_sums = np.add.reduceat(
        design[grid.event_positions], grid.event_offsets[:-1], axis=0
    )
    increments = np.linalg.solve(risk_mats, event_sums[:, :, None])[:, :, 0]
    cumulative = np.cumsum(increments, axis=0)
    names = ("intercept",) + columns
    return {
        name: StepFunction(grid.times, cumulative[:, j], initial=0.0)
        for j, name in enumerate(names)
    }


@dataclass(frozen=True, eq=False)
class TwoStageFit:
    """Two-stage fit of a constant exposure effect on the hazard.

    Stage one regresses the exposure on the instrument; stage two fits a
    constant-coefficient additive-hazards model on the predicted exposure
    alone, and ``beta_exposure`` is that single coefficient.  The
    substitution is exact when the first stage is the true exposure model
    and inherits the prediction error otherwise, so the fit doubles as a
    sensitivity probe for first-stage misspecification.
    """

    first_stage: str
    coef: np.ndarray
    coef_names: tuple
    stage1_coef: np.ndarray
    tau: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "coef", _frozen(self.coef))
        object.__setattr__(self, "stage1_coef", _frozen(self.stage1_coef))

    @property
    def beta_exposure(self):
        return float(self.coef[0])


def _lin_ying(dataset, covariates, names):
    """Constant-coefficient additive-hazards fit (cause-1 events).

    Solves ``A beta = b`` with ``A`` the time-integrated at-risk
    covariance of the covariates up to the longest follow-up and ``b``
    the sum of centered covariates over event times.  The integral is
    exact: the at-risk set is constant between consecutive exits.
    """
    order = dataset.canonical_order
    t = dataset.time[order]
    status = dataset.status[order]
    z = np.ascontiguousarray(covariates[order])
    n, p = z.shape

    distinct = np.unique(t)
    tau = float(distinct[-1])
    starts = np.searchsorted(t, distinct, side="left")
    zz = z[:, :, None] * z[:, None, :]
    suffix_z = np.concatenate([np.cumsum(z[::-1], axis=0)[::-1], np.zeros((1, p))])
    suffix_zz = np.concatenate(
        [np.cumsum(zz[::-1], axis=0)[::-1], np.zeros((1, p, p))]
    )
    s0 = (n - starts).astype(float)
    s1 = suffix_z[starts]
    s2 = suffix_zz[starts]

    lengths = np.diff(np.concatenate([[0.0], distinct]))
    centered = s2 - s1[:, :, None] * s1[:, None, :] / s0[:, None, None]
    a_mat = np.einsum("j,jkl->kl", lengths, centered)

    events = status == 1
    seg = np.searchsorted(distinct, t[events])
    zbar = s1 / s0[:, None]
    b_vec = z[events].sum(axis=0) - zbar[seg].sum(axis=0)

    singulars = np.linalg.svd(a_mat, compute_uv=False)
    if singulars[-1] <= _RANK_RTOL * singulars[0]:
        raise SingularSecondStage(
            "the integrated covariance of the second-stage covariates "
            f"({', '.join(names)}) is singular"
        )
    return np.linalg.solve(a_mat, b_vec), tau


def two_stage_ls(dataset, first_stage="linear"):
    """Two-stage least squares for a constant exposure effect on the hazard.

    Stage one predicts the exposure from the instrument -- ordinary least
    squares (``first_stage="linear"``) or logistic maximum likelihood
    (``first_stage="logistic"``, binary exposures only).  Stage two runs a
    constant-coefficient additive-hazards fit with the predicted exposure
    as its single regressor and reports that coefficient as
    ``beta_exposure``.  When the exposure equals the instrument the first
    stage is a perfect fit and the result reduces to the plain
    one-regressor additive-hazards fit of the exposure.
    """
    if first_stage not in ("linear", "logistic"):
        raise ValueError("first_stage must be 'linear' or 'logistic'")
    x = dataset.exposure
    g = dataset.instrument
    n = dataset.n
    design = np.column_stack([np.ones(n), g])

    if first_stage == "linear":
        stage1, *_ = np.linalg.lstsq(design, x, rcond=None)
        xhat = design @ stage1
    else:
        if not np.all((x == 0.0) | (x == 1.0)):
            raise DegenerateFirstStage(
                "a logistic first stage requires a binary (0/1) exposure"
            )
        stage1, _ = _newton_logistic(design, x)
        xhat = expit(design @ stage1)

    if float(np.std(xhat)) <= 1e-12 * max(1.0, float(np.std(x))):
        raise DegenerateFirstStage(
            "the first-stage fitted values are constant; the instrument "
            "carries no variation in the exposure"
        )
    names = ("predicted_exposure",)
    coef, tau = _lin_ying(dataset, xhat[:, None], names)
    return TwoStageFit(
        first_stage=first_stage, coef=coef, coef_names=names,
        stage1_coef=np.asarray(stage1, dtype=float), tau=tau, n=n,
    )
