"""Models for the instrument mean E(G | L) used to center the instrument.

Three model kinds are supported:

* ``"mean"`` (alias ``"intercept-only"``): mu(L) = theta, fitted by the
  sample mean of G;
* ``"linear"``: mu(L; theta) = (1, L_sel) theta, ordinary least squares;
* ``"logistic"``: mu(L; theta) = expit{(1, L_sel) theta}, maximum
  likelihood via damped Newton (binary instrument required).

Every fit carries the per-subject residual G_i - mu(L_i; theta_hat), the
Jacobian d mu / d theta evaluated per subject, and the influence vectors
eps_i^theta normalised so that theta_hat - theta ~ n^{-1} sum_i eps_i^theta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataset import SurvivalDataset
from .errors import (
    InputError,
    LogisticNoConvergence,
    LogisticNonBinaryInstrument,
    RankDeficientDesign,
)

_KINDS = ("mean", "linear", "logistic")
_NEWTON_TOL = 1e-10
_NEWTON_MAX_ITER = 100
_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class InstrumentModelSpec:
    """Which instrument-mean model to fit and on which covariates."""

    kind: str
    covariates: tuple[str, ...] = ()

    def __post_init__(self):
        kind = {"intercept-only": "mean"}.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if kind not in _KINDS:
            raise InputError(f"unknown instrument model kind {self.kind!r}")
        if kind == "mean" and self.covariates:
            raise InputError("the intercept-only model takes no covariates")
        if kind in ("linear", "logistic") and not self.covariates:
            raise InputError(f"the {kind} model needs at least one covariate")


@dataclass(frozen=True)
class InstrumentModelFit:
    """Fitted instrument-mean model.

    Attributes
    ----------
    theta : (p,) parameter estimate.
    mu : (n,) fitted means mu(L_i; theta_hat).
    residuals : (n,) centered instrument G_i - mu_i.
    jacobian : (n, p) rows d mu(L_i; theta) / d theta at theta_hat.
    influence : (n, p) rows eps_i^theta with
        theta_hat - theta ~ n^{-1} sum_i eps_i^theta.
    """

    spec: InstrumentModelSpec
    theta: np.ndarray
    mu: np.ndarray
    residuals: np.ndarray
    jacobian: np.ndarray
    influence: np.ndarray
    iterations: int = 0

    def __post_init__(self):
        for arr in (self.theta, self.mu, self.residuals, self.jacobian,
                    self.influence):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return self.residuals.shape[0]

    @property
    def p(self) -> int:
        return self.theta.shape[0]


def fit_instrument_model(ds: SurvivalDataset, spec: InstrumentModelSpec) -> InstrumentModelFit:
    """Fit the requested instrument-mean model on the dataset."""
    g = ds.instrument
    n = ds.n
    if spec.kind == "mean":
        theta = np.array([g.mean()])
        mu = np.full(n, theta[0])
        resid = g - mu
        ones = np.ones((n, 1))
        return InstrumentModelFit(spec=spec, theta=theta, mu=mu, residuals=resid,
                                  jacobian=ones, influence=resid[:, None].copy())

    design = _design_matrix(ds, spec.covariates)
    _check_rank(design)
    if spec.kind == "linear":
        dtd = design.T @ design
        theta = np.linalg.solve(dtd, design.T @ g)
        mu = design @ theta
        resid = g - mu
        influence = n * (resid[:, None] * (design @ np.linalg.inv(dtd)))
        return InstrumentModelFit(spec=spec, theta=theta, mu=mu, residuals=resid,
                                  jacobian=design.copy(), influence=influence)

    # logistic
    if not np.isin(g, (0.0, 1.0)).all():
        raise LogisticNonBinaryInstrument(
            "logistic instrument model requires G in {0, 1}")
    theta, iterations = _newton_logistic(design, g)
    mu = expit(design @ theta)
    resid = g - mu
    w = mu * (1.0 - mu)
    info = design.T @ (w[:, None] * design)
    try:
        info_inv = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise RankDeficientDesign(
            "logistic information matrix is singular at the optimum") from None
    influence = n * (resid[:, None] * design) @ info_inv
    return InstrumentModelFit(spec=spec, theta=theta, mu=mu, residuals=resid,
                              jacobian=w[:, None] * design, influence=influence,
                              iterations=iterations)


def center_instrument(fit: InstrumentModelFit, i: int) -> float:
    """Centered instrument G_i - mu(L_i; theta_hat) for subject i."""
    return float(fit.residuals[i])


def _design_matrix(ds: SurvivalDataset, covariates) -> np.ndarray:
    cols = [np.ones(ds.n)]
    cols += [ds.covariate(name) for name in covariates]
    return np.column_stack(cols)


def _check_rank(design: np.ndarray) -> None:
    s = np.linalg.svd(design, compute_uv=False)
    if s[-1] <= _RANK_RTOL * s[0]:
        raise RankDeficientDesign(
            f"instrument-model design is rank deficient "
            f"(singular values {s[0]:.3e} .. {s[-1]:.3e})")


def _log_likelihood(eta: np.ndarray, g: np.ndarray) -> float:
    return float(np.sum(g * eta - np.logaddexp(0.0, eta)))


def _newton_logistic(design: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, int]:
    """Damped Newton ascent; converged when max |score| < 1e-10."""
    theta = np.zeros(design.shape[1])
    eta = design @ theta
    loglik = _log_likelihood(eta, g)
    for iteration in range(1, _NEWTON_MAX_ITER + 1):
        mu = expit(eta)
        score = design.T @ (g - mu)
        if np.max(np.abs(score)) < _NEWTON_TOL:
            return theta, iteration - 1
        w = mu * (1.0 - mu)
        info = design.T @ (w[:, None] * design)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise LogisticNoConvergence(
                f"Newton information matrix singular at iteration {iteration}") from None
        scale = 1.0
        for _ in range(30):
            cand = theta + scale * step
            cand_eta = design @ cand
            cand_loglik = _log_likelihood(cand_eta, g)
            if cand_loglik >= loglik:
                break
            scale *= 0.5
        theta, eta, loglik = cand, cand_eta, cand_loglik
    raise LogisticNoConvergence(
        f"logistic fit did not reach max|score| < {_NEWTON_TOL:g} "
        f"within {_NEWTON_MAX_ITER} iterations")
