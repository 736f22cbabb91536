"""Synthetic data designs and replication studies.

Four designs generate right-censored data with an unmeasured confounder
``U`` and a randomized instrument:

* ``continuous`` -- binary instrument, Gaussian exposure correlated with
  ``U``, constant exposure effect on an additive hazard;
* ``continuous-timevarying`` -- the same with a piecewise-constant effect
  that changes sign and then vanishes;
* ``binary`` -- the Gaussian exposure is thresholded to 0/1;
* ``misspec-binary`` -- a deliberately misspecified pair: Gaussian
  instrument entering the exposure model through a quadratic, squared
  confounder, exponential event times, administrative censoring.

:func:`run_study` runs the full estimation pipeline (instrument model,
recursive fit, influence-based standard errors, a naive additive-hazards
fit, the constant-effect summary and the two-stage fits, optionally the
constant-effect multiplier test) on every replicate and aggregates
bias / spread / coverage into a :class:`SimReport` whose JSON rendering
is byte-stable for a given configuration.

Randomness is fully pinned: replicate ``r`` of a study with seed ``s``
draws from ``Philox(SeedSequence([s, r]))``, and its test seed is derived
from ``SeedSequence([s, r, 0x7357])``, so studies are reproducible and
independent of how replicates are scheduled across processes.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from ._version import __version__
from .dataset import SINGLE_CAUSE, SurvivalDataset
from .errors import ConfigError, ScsmError
from .estimators import constant_effect, fit_recursive, naive_aalen, two_stage_ls
from .inference import (
    constant_effect_se,
    iid_decomposition,
    test_constant_effect,
    variance_bands,
)
from .instrument import InstrumentModelSpec, fit_instrument_model

__all__ = [
    "EffectSchedule",
    "SimConfig",
    "SimulatedData",
    "SimReport",
    "generate",
    "run_study",
]

DESIGNS = ("continuous", "continuous-timevarying", "binary", "misspec-binary")

#: Hazards are truncated below at this value before event times are drawn.
HAZARD_FLOOR = 1e-8

_TEST_SEED_TAG = 0x7357


@dataclass(frozen=True)
class EffectSchedule:
    """Piecewise-constant exposure effect on the hazard.

    ``betas[j]`` applies on ``[knots[j-1], knots[j])`` with an implicit
    leading knot at 0 and a final unbounded segment, so ``len(betas) ==
    len(knots) + 1``.
    """

    knots: tuple = ()
    betas: tuple = (0.0,)

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        betas = tuple(float(b) for b in self.betas)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "betas", betas)
        if len(betas) != len(knots) + 1:
            raise ConfigError(
                "effect.betas must have exactly one more entry than effect.knots"
            )
        if any(not np.isfinite(b) for b in betas):
            raise ConfigError("effect.betas must be finite")
        if any(not np.isfinite(k) or k <= 0 for k in knots):
            raise ConfigError("effect.knots must be positive and finite")
        if any(nxt <= cur for cur, nxt in zip(knots, knots[1:])):
            raise ConfigError("effect.knots must be strictly increasing")

    @classmethod
    def constant(cls, beta):
        return cls(knots=(), betas=(float(beta),))

    @property
    def is_constant(self):
        return not self.knots

    def edges(self):
        """Segment boundaries ``(0, knots..., inf)``."""
        return np.concatenate([[0.0], self.knots, [np.inf]])

    def slope(self, t):
        """Effect size at time ``t`` (scalar or array)."""
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.asarray(self.knots), t_arr, side="right")
        out = np.asarray(self.betas)[idx]
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def cumulative(self, t):
        """Integrated effect ``int_0^t slope(s) ds`` (scalar or array)."""
        t_arr = np.asarray(t, dtype=float)
        edges = self.edges()
        out = np.zeros_like(t_arr, dtype=float)
        for j, beta in enumerate(self.betas):
            seg = np.clip(np.minimum(t_arr, edges[j + 1]) - edges[j], 0.0, None)
            out = out + beta * seg
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def to_dict(self):
        if self.is_constant:
            return {"kind": "constant", "beta": self.betas[0]}
        return {"kind": "piecewise", "knots": list(self.knots),
                "betas": list(self.betas)}

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("effect must be an object with a 'kind' field")
        d = dict(d)
        kind = d.pop("kind")
        if kind == "constant":
            beta = d.pop("beta", None)
            if d:
                raise ConfigError(f"unknown effect field {sorted(d)[0]!r}")
            if not isinstance(beta, (int, float)):
                raise ConfigError("effect.beta must be a number")
            return cls.constant(beta)
        if kind == "piecewise":
            knots = d.pop("knots", None)
            betas = d.pop("betas", None)
            if d:
                raise ConfigError(f"unknown effect field {sorted(d)[0]!r}")
            if not isinstance(knots, (list, tuple)) or not isinstance(
                    betas, (list, tuple)):
                raise ConfigError("effect.knots and effect.betas must be lists")
            return cls(knots=tuple(knots), betas=tuple(betas))
        raise ConfigError(f"effect.kind must be 'constant' or 'piecewise', got {kind!r}")


_DESIGN_DEFAULTS = {
    "continuous": {
        "effect": EffectSchedule.constant(0.1), "tau": 3.0,
        "report_times": (1.0, 2.0, 3.0),
    },
    "continuous-timevarying": {
        "effect": EffectSchedule(knots=(1.5, 3.0), betas=(0.1, -0.1, 0.0)),
        "tau": 3.0, "report_times": (1.0, 2.0, 3.0),
    },
    "binary": {
        "effect": EffectSchedule.constant(0.1), "tau": 3.0,
        "report_times": (1.0, 2.0, 3.0),
    },
    "misspec-binary": {
        "effect": EffectSchedule.constant(0.4), "tau": 2.0,
        "report_times": (0.5, 1.0, 1.5),
    },
}


@dataclass(frozen=True)
class SimConfig:
    """One replication study: a design plus its knobs.

    ``rho`` is the target exposure-instrument correlation of the Gaussian
    designs (ignored by ``misspec-binary``).  ``tau`` is the horizon of
    the constant-effect summary, ``report_times`` the grid where the
    cumulative fit is scored, and ``test_draws > 0`` additionally runs the
    constant-effect multiplier test with that many draws per replicate.
    """

    design: str
    n: int
    reps: int = 1
    seed: int = 0
    rho: float = 0.5
    effect: EffectSchedule = None
    tau: float = None
    report_times: tuple = None
    test_draws: int = 0
    level: float = 0.95

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ConfigError(
                f"design must be one of {', '.join(DESIGNS)}; got {self.design!r}"
            )
        defaults = _DESIGN_DEFAULTS[self.design]
        if self.effect is None:
            object.__setattr__(self, "effect", defaults["effect"])
        if self.tau is None:
            object.__setattr__(self, "tau", defaults["tau"])
        if self.report_times is None:
            object.__setattr__(self, "report_times", defaults["report_times"])
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(
            self, "report_times", tuple(float(t) for t in self.report_times)
        )
        if not isinstance(self.effect, EffectSchedule):
            raise ConfigError("effect must be an EffectSchedule")
        for name, minimum in (("n", 2), ("reps", 1), ("seed", 0),
                              ("test_draws", 0)):
            value = getattr(self, name)
            if isinstance(value, (bool, float)) or not isinstance(
                    value, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer")
            object.__setattr__(self, name, int(value))
            if getattr(self, name) < minimum:
                raise ConfigError(f"{name} must be an integer >= {minimum}")
        if not np.isfinite(self.rho) or not -0.99 <= self.rho <= 0.99:
            raise ConfigError("rho must lie in [-0.99, 0.99]")
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise ConfigError("tau must be a positive time")
        if not self.report_times or any(
                not np.isfinite(t) or t <= 0 for t in self.report_times):
            raise ConfigError("report_times must be positive times")
        if any(b <= a for a, b in zip(self.report_times, self.report_times[1:])) \
                and len(self.report_times) > 1:
            raise ConfigError("report_times must be strictly increasing")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must be strictly between 0 and 1")
        if self.design == "misspec-binary" and not self.effect.is_constant:
            raise ConfigError(
                "the misspec-binary design supports constant effects only"
            )

    def to_dict(self):
        return {
            "design": self.design, "n": self.n, "reps": self.reps,
            "seed": self.seed, "rho": self.rho,
            "effect": self.effect.to_dict(), "tau": self.tau,
            "report_times": list(self.report_times),
            "test_draws": self.test_draws, "level": self.level,
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("the configuration must be a JSON object")
        d = dict(d)
        if "design" not in d:
            raise ConfigError("missing required config field 'design'")
        if "n" not in d:
            raise ConfigError("missing required config field 'n'")
        kwargs = {}
        for key in ("design", "n", "reps", "seed", "rho", "tau",
                    "test_draws", "level"):
            if key in d:
                kwargs[key] = d.pop(key)
        if "report_times" in d:
            rt = d.pop("report_times")
            if not isinstance(rt, (list, tuple)):
                raise ConfigError("report_times must be a list of times")
            kwargs["report_times"] = tuple(rt)
        if "effect" in d:
            kwargs["effect"] = EffectSchedule.from_dict(d.pop("effect"))
        if d:
            raise ConfigError(f"unknown config field {sorted(d)[0]!r}")
        for key in ("n", "reps", "seed", "test_draws"):
            if key in kwargs and isinstance(kwargs[key], float):
                if float(kwargs[key]).is_integer():
                    kwargs[key] = int(kwargs[key])
        return cls(**kwargs)


class SimulatedData(SurvivalDataset):
    """A simulated dataset plus the latent quantities behind it.

    ``latent_u`` is the unmeasured confounder, ``latent_time`` the
    uncensored event time, and ``n_clamped`` counts subjects whose hazard
    hit the floor on any segment (a design-health diagnostic).
    """

    def __init__(self, time, status, exposure, instrument, latent_u,
                 latent_time, n_clamped, cause_mode=SINGLE_CAUSE):
        super().__init__(time, status, exposure, instrument,
                         cause_mode=cause_mode)
        latent_u = np.ascontiguousarray(latent_u, dtype=np.float64)
        latent_time = np.ascontiguousarray(latent_time, dtype=np.float64)
        latent_u.flags.writeable = False
        latent_time.flags.writeable = False
        self._latent_u = latent_u
        self._latent_time = latent_time
        self._n_clamped = int(n_clamped)

    @property
    def latent_u(self):
        return self._latent_u

    @property
    def latent_time(self):
        return self._latent_time

    @property
    def n_clamped(self):
        return self._n_clamped


def _replicate_rng(cfg, replicate):
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([cfg.seed, int(replicate)]))
    )


def _replicate_test_seed(cfg, replicate):
    ss = np.random.SeedSequence([cfg.seed, int(replicate), _TEST_SEED_TAG])
    return int(ss.generate_state(1)[0])


def _invert_piecewise_hazard(x, u, effect, exponentials):
    """Event times from unit exponentials via the segmentwise hazard.

    The hazard ``0.25 + effect.slope(t) * x + 0.15 * u`` is constant on
    each effect segment (floored at :data:`HAZARD_FLOOR`), so its
    cumulative is piecewise linear and inverts exactly.  Also returns the
    number of subjects whose hazard was floored on any segment.
    """
    edges = effect.edges()
    betas = np.asarray(effect.betas)
    raw = 0.25 + betas[None, :] * x[:, None] + 0.15 * u[:, None]
    n_clamped = int(np.count_nonzero((raw < HAZARD_FLOOR).any(axis=1)))
    slopes = np.maximum(raw, HAZARD_FLOOR)
    seg_len = np.diff(edges)
    cum_end = np.cumsum(slopes * seg_len[None, :], axis=1)
    cum_start = np.concatenate(
        [np.zeros((x.shape[0], 1)), cum_end[:, :-1]], axis=1
    )
    seg = np.argmax(cum_end >= exponentials[:, None], axis=1)
    rows = np.arange(x.shape[0])
    times = edges[seg] + (exponentials - cum_start[rows, seg]) / slopes[rows, seg]
    return times, n_clamped


def _gaussian_pair(rng, n, rho):
    """Instrument, exposure and confounder for the Gaussian designs.

    ``G`` is Bernoulli(1/2).  Given ``G``, the exposure and confounder are
    bivariate normal with variances 1/4, covariance -1/6, and means
    ``0.5 + rho / sqrt(1 - rho^2) * G`` and ``1.5``, which makes the
    marginal exposure-instrument correlation exactly ``rho``.
    """
    g = (rng.random(n) < 0.5).astype(float)
    normals = rng.standard_normal((n, 2))
    gamma = rho / np.sqrt(1.0 - rho**2)
    chol_21 = -1.0 / 3.0
    chol_22 = np.sqrt(0.25 - chol_21**2)
    x = 0.5 + gamma * g + 0.5 * normals[:, 0]
    u = 1.5 + chol_21 * normals[:, 0] + chol_22 * normals[:, 1]
    return g, x, u


def _censor(rng, n, latent_time, horizon=3.5, flag_prob=0.2):
    """Early uniform censoring for a random 20%, administrative otherwise."""
    flags = rng.random(n) < flag_prob
    uniforms = rng.uniform(0.0, horizon, n)
    c = np.where(flags, uniforms, horizon)
    time = np.minimum(latent_time, c)
    status = (latent_time <= c).astype(np.int64)
    return time, status


def _generate_gaussian(cfg, rng, binary):
    # Draw order is frozen for reproducibility: instrument, the two
    # normals, the unit exponential, censoring flags, censoring uniforms.
    g, x_raw, u = _gaussian_pair(rng, cfg.n, cfg.rho)
    e = rng.standard_exponential(cfg.n)
    x = (x_raw > 0.5).astype(float) if binary else x_raw
    latent, n_clamped = _invert_piecewise_hazard(x, u, cfg.effect, e)
    time, status = _censor(rng, cfg.n, latent)
    return SimulatedData(time, status, x, g, u, latent, n_clamped)


def _generate_misspec(cfg, rng):
    # Draw order: instrument, confounder normal, exposure uniforms, the
    # unit exponential.  Censoring is administrative at t = 2.
    n = cfg.n
    g = rng.normal(2.0, 1.5, n)
    z = rng.normal(1.0, 0.25, n)
    u = 1.5 * z**2
    mean_u = 1.5 * (1.0 + 0.25**2)
    eta = -1.0 + 0.2 * g + 0.5 * g**2 + u - mean_u
    x = (rng.random(n) < expit(eta)).astype(float)
    e = rng.standard_exponential(n)
    beta = cfg.effect.betas[0]
    rate = 0.05 + beta * x + 0.3 * u
    latent = e / rate
    horizon = 2.0
    time = np.minimum(latent, horizon)
    status = (latent <= horizon).astype(np.int64)
    return SimulatedData(time, status, x, g, u, latent, 0)


def generate(cfg, replicate=0):
    """Generate one replicate of the configured design."""
    rng = _replicate_rng(cfg, replicate)
    if cfg.design == "continuous":
        return _generate_gaussian(cfg, rng, binary=False)
    if cfg.design == "continuous-timevarying":
        return _generate_gaussian(cfg, rng, binary=False)
    if cfg.design == "binary":
        return _generate_gaussian(cfg, rng, binary=True)
    return _generate_misspec(cfg, rng)


def _run_replicate(cfg, replicate):
    """Full pipeline on one replicate; returns a metrics dict or a failure."""
    data = generate(cfg, replicate)
    out = {
        "censoring": data.censoring_rate,
        "n_clamped": data.n_clamped,
    }
    try:
        inst = fit_instrument_model(data, InstrumentModelSpec("mean"))
        b_hat, trace = fit_recursive(data, inst)
        dec = iid_decomposition(trace, data, inst)
        bands = variance_bands(dec, level=cfg.level)
        out["min_den_over_n"] = trace.min_den_over_n

        naive = naive_aalen(data, columns=("exposure", "instrument"))
        rows = []
        for t in cfg.report_times:
            lo, hi = bands.interval_at(t)
            truth = cfg.effect.cumulative(t)
            rows.append({
                "estimate": float(b_hat(t)),
                "se": float(bands.se_at(t)),
                "covered": bool(lo <= truth <= hi),
                "naive": float(naive["exposure"](t)),
            })
        out["at_times"] = rows

        summary = constant_effect(b_hat, data, cfg.tau)
        se_beta = constant_effect_se(dec, summary)
        z = float(norm.ppf(0.5 + cfg.level / 2.0))
        out["beta"] = summary.beta
        out["beta_se"] = se_beta
        if cfg.effect.is_constant:
            out["beta_covered"] = bool(
                abs(summary.beta - cfg.effect.betas[0]) <= z * se_beta
            )

        ts_lin = two_stage_ls(data, first_stage="linear")
        out["two_stage_linear"] = ts_lin.beta_exposure
        if np.all((data.exposure == 0.0) | (data.exposure == 1.0)):
            ts_log = two_stage_ls(data, first_stage="logistic")
            out["two_stage_logistic"] = ts_log.beta_exposure

        if cfg.test_draws > 0:
            report = test_constant_effect(
                b_hat, summary, dec,
                m_draws=cfg.test_draws,
                seed=_replicate_test_seed(cfg, replicate),
            )
            out["test_p"] = report.p_value
            out["test_reject"] = bool(report.p_value < 1.0 - cfg.level)
    except ScsmError as err:
        return {"failure": type(err).__name__, "censoring": out["censoring"],
                "n_clamped": out["n_clamped"]}
    return out


def _replicate_task(args):
    cfg, replicate = args
    return _run_replicate(cfg, replicate)


def _mean(values):
    return float(np.mean(values)) if len(values) else None


def _sd(values):
    if len(values) < 2:
        return None
    return float(np.std(values, ddof=1))


@dataclass(frozen=True)
class SimReport:
    """Aggregated study results; ``to_json`` is deterministic."""

    config: dict
    cumulative: tuple
    constant: dict
    two_stage: dict
    test: dict
    diagnostics: dict
    version: str = __version__

    def to_dict(self):
        return {
            "config": self.config,
            "cumulative": list(self.cumulative),
            "constant_effect": self.constant,
            "two_stage": self.two_stage,
            "test": self.test,
            "diagnostics": self.diagnostics,
            "version": self.version,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def render_table(self):
        """Small human-readable summary of the study."""
        cfg = self.config
        lines = [
            f"design={cfg['design']} n={cfg['n']} reps={cfg['reps']} "
            f"seed={cfg['seed']}",
            f"{'time':>6} {'truth':>8} {'mean':>8} {'bias':>8} {'sd':>8} "
            f"{'mean-se':>8} {'cover':>6} {'naive-bias':>10}",
        ]

        def fmt(v, width=8, digits=3):
            if v is None:
                return " " * (width - 1) + "-"
            return f"{v:>{width}.{digits}f}"

        for row in self.cumulative:
            lines.append(
                f"{row['time']:>6.2f} {fmt(row['truth'])} {fmt(row['mean'])} "
                f"{fmt(row['bias'])} {fmt(row['sd'])} {fmt(row['mean_se'])} "
                f"{fmt(row['coverage'], 6)} {fmt(row['naive_bias'], 10)}"
            )
        c = self.constant
        lines.append(
            f"constant effect over [0, {cfg['tau']:g}]: mean {fmt(c['mean'])} "
            f"sd {fmt(c['sd'])} mean-se {fmt(c['mean_se'])} "
            f"cover {fmt(c['coverage'], 6)}"
        )
        ts = self.two_stage
        lines.append(
            f"two-stage linear: mean {fmt(ts['linear']['mean'])} "
            f"sd {fmt(ts['linear']['sd'])}"
        )
        if ts.get("logistic") is not None:
            lines.append(
                f"two-stage logistic: mean {fmt(ts['logistic']['mean'])} "
                f"sd {fmt(ts['logistic']['sd'])}"
            )
        if self.test is not None:
            lines.append(
                f"constant-effect test (draws={self.test['draws']}): "
                f"rejection rate {fmt(self.test['rejection_rate'], 6)}"
            )
        d = self.diagnostics
        lines.append(
            f"replicates ok {d['n_success']}/{cfg['reps']}; censoring "
            f"{fmt(d['censoring_mean'], 6)}; hazard-floor subjects "
            f"{d['clamped_total']}"
        )
        return "\n".join(lines) + "\n"


def run_study(cfg, jobs=1):
    """Run all replicates of a study and aggregate them into a report.

    ``jobs > 1`` distributes replicates over processes; results are
    identical to a serial run because every replicate derives its own
    random streams from the study seed.
    """
    if jobs < 1:
        raise ConfigError("jobs must be a positive integer")
    tasks = [(cfg, r) for r in range(cfg.reps)]
    if jobs == 1 or cfg.reps == 1:
        results = [_replicate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, cfg.reps // (8 * jobs))
            results = list(pool.map(_replicate_task, tasks, chunksize=chunk))
    return _aggregate(cfg, results)


def _aggregate(cfg, results):
    ok = [r for r in results if "failure" not in r]
    failures = {}
    for r in results:
        if "failure" in r:
            failures[r["failure"]] = failures.get(r["failure"], 0) + 1

    cumulative = []
    for j, t in enumerate(cfg.report_times):
        truth = float(cfg.effect.cumulative(t))
        est = [r["at_times"][j]["estimate"] for r in ok]
        ses = [r["at_times"][j]["se"] for r in ok]
        cov = [r["at_times"][j]["covered"] for r in ok]
        naive = [r["at_times"][j]["naive"] for r in ok]
        mean = _mean(est)
        sd = _sd(est)
        mean_se = _mean(ses)
        cumulative.append({
            "time": float(t),
            "truth": truth,
            "mean": mean,
            "bias": None if mean is None else mean - truth,
            "sd": sd,
            "mean_se": mean_se,
            "se_ratio": (None if sd in (None, 0.0) or mean_se is None
                         else mean_se / sd),
            "coverage": _mean([float(c) for c in cov]),
            "naive_mean": _mean(naive),
            "naive_bias": None if _mean(naive) is None else _mean(naive) - truth,
            "mc_se": (None if sd is None or not ok
                      else sd / float(np.sqrt(len(ok)))),
        })

    betas = [r["beta"] for r in ok]
    beta_ses = [r["beta_se"] for r in ok]
    truth_beta = cfg.effect.betas[0] if cfg.effect.is_constant else None
    mean_beta = _mean(betas)
    sd_beta = _sd(betas)
    mean_se_beta = _mean(beta_ses)
    beta_coverage = None
    if truth_beta is not None:
        beta_coverage = _mean(
            [float(r["beta_covered"]) for r in ok if "beta_covered" in r]
        )
    constant = {
        "truth": truth_beta,
        "mean": mean_beta,
        "bias": (None if mean_beta is None or truth_beta is None
                 else mean_beta - truth_beta),
        "sd": sd_beta,
        "mean_se": mean_se_beta,
        "se_ratio": (None if sd_beta in (None, 0.0) or mean_se_beta is None
                     else mean_se_beta / sd_beta),
        "coverage": beta_coverage,
        "mc_se": (None if sd_beta is None or not ok
                  else sd_beta / float(np.sqrt(len(ok)))),
    }

    lin = [r["two_stage_linear"] for r in ok if "two_stage_linear" in r]
    log = [r["two_stage_logistic"] for r in ok if "two_stage_logistic" in r]

    def _ts_block(values):
        if not values:
            return None
        mean = _mean(values)
        return {
            "mean": mean,
            "sd": _sd(values),
            "displacement": (None if truth_beta is None else mean - truth_beta),
        }

    two_stage = {"linear": _ts_block(lin), "logistic": _ts_block(log)}

    test = None
    if cfg.test_draws > 0:
        ps = [r["test_p"] for r in ok if "test_p" in r]
        rejects = [float(r["test_reject"]) for r in ok if "test_reject" in r]
        test = {
            "draws": cfg.test_draws,
            "rejection_rate": _mean(rejects),
            "mean_p": _mean(ps),
        }

    n_attempted = len(results)
    diagnostics = {
        "n_success": len(ok),
        "n_failed": n_attempted - len(ok),
        "failures": dict(sorted(failures.items())),
        "censoring_mean": _mean([r["censoring"] for r in results]),
        "clamped_total": int(sum(r["n_clamped"] for r in results)),
        "min_den_over_n_mean": _mean(
            [r["min_den_over_n"] for r in ok if "min_den_over_n" in r]
        ),
    }
    return SimReport(
        config=cfg.to_dict(),
        cumulative=tuple(cumulative),
        constant=constant,
        two_stage=two_stage,
        test=test,
        diagnostics=diagnostics,
    )
