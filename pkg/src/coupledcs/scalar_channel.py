"""Scalar complex AWGN channel with a Bernoulli-Gaussian prior.

The channel is y = x + varsigma^{-1/2} z with z standard complex Gaussian
and varsigma the channel precision (inverse noise variance).  The prior
puts mass 1-rho at zero and draws the remaining entries from a standard
complex Gaussian, so the prior second moment is rho.

Provides the posterior mean, the exact scalar mmse by 1-D quadrature
(the circularly-symmetric 2-D integral reduces to a radial one), and a
Monte-Carlo estimator used as an independent cross-check of the
quadrature.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import QuadratureError

# e^{-T}(T+1) < 1e-16: the truncated exponential tail is below quadrature
# tolerance for every integrand used here.
_TAIL_CUTOFF = 40.0
_QUAD_TOL = 1e-12


@dataclass(frozen=True)
class BernoulliGaussianPrior:
    """Sparse prior: zero w.p. 1-rho, standard complex Gaussian w.p. rho."""

    rho: float

    def __post_init__(self):
        if not (0.0 <= self.rho <= 1.0):
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")


@dataclass(frozen=True)
class ScalarChannel:
    """Effective scalar channel with precision varsigma >= 0.

    varsigma = 0 is the pure-noise channel carrying no information.
    """

    varsigma: float

    def __post_init__(self):
        if not (self.varsigma >= 0.0):
            raise ValueError(f"varsigma must be >= 0, got {self.varsigma}")


def posterior_mean(y, ch: ScalarChannel, prior: BernoulliGaussianPrior):
    """Posterior mean E{x | y} of the scalar channel.

    Accepts a scalar or an ndarray of observations.  The Gaussian-ratio
    weight is evaluated in log space so large |y|^2 * varsigma does not
    underflow.  By convention varsigma = 0 returns the prior mean 0.
    """
    y = np.asarray(y, dtype=complex)
    if not np.all(np.isfinite(y.real) & np.isfinite(y.imag)):
        raise ValueError("observation y must be finite")
    vs, rho = ch.varsigma, prior.rho
    if vs == 0.0 or rho == 0.0:
        out = np.zeros_like(y)
        return out if out.ndim else complex(out)
    shrink = y / (1.0 + 1.0 / vs)
    if rho == 1.0:
        return shrink if shrink.ndim else complex(shrink)
    u = np.abs(y) ** 2
    # log weights of the mixture components CN(0, 1+1/vs) and CN(0, 1/vs)
    log_on = np.log(rho) - np.log1p(1.0 / vs) - u / (1.0 + 1.0 / vs)
    log_off = np.log1p(-rho) + np.log(vs) - vs * u
    w = 1.0 / (1.0 + np.exp(log_off - log_on))
    out = w * shrink
    return out if out.ndim else complex(out)


def mmse(varsigma: float, prior: BernoulliGaussianPrior) -> float:
    """Exact scalar mmse of the Bernoulli-Gaussian channel at precision varsigma.

    The radial reduction turns the complex-plane Gaussian integral into a
    1-D integral in t = |z|^2 ~ Exp(1).  The integrand is rearranged into
    an everywhere-positive form, which avoids the catastrophic
    cancellation of the direct ``rho - rho^2 (...) I`` evaluation at large
    varsigma.
    """
    if not np.isfinite(varsigma) or varsigma < 0:
        raise ValueError(f"varsigma must be finite and >= 0, got {varsigma}")
    rho = prior.rho
    if varsigma == 0.0 or rho == 0.0:
        return rho
    c = varsigma + 1.0
    one_m = 1.0 - rho

    def integrand(t):
        e = np.exp(-t * varsigma)
        return t * np.exp(-t) * (rho + one_m * c * c * e) / (c * (rho + one_m * c * e))

    points = None
    if rho < 1.0:
        # denominator switches from the Gaussian-dominated to the
        # spike-dominated regime around t*; guide the adaptive rule there
        with np.errstate(over="ignore"):
            t_star = (np.log1p(-rho) + np.log(c) - np.log(rho)) / varsigma
        if 0 < t_star < _TAIL_CUTOFF:
            points = [p for p in (t_star, 3 * t_star, 9 * t_star) if p < _TAIL_CUTOFF]
    value, err = quad(integrand, 0.0, _TAIL_CUTOFF, points=points, limit=300,
                      epsabs=1e-13, epsrel=1e-13)
    value *= rho
    if err * rho > max(_QUAD_TOL, abs(value) * _QUAD_TOL):
        raise QuadratureError(
            f"mmse quadrature error {err * rho:.3e} above tolerance at varsigma={varsigma}",
            value=value, error_estimate=err * rho)
    return value


def mmse_mc_oracle(varsigma: float, prior: BernoulliGaussianPrior,
                   n_samples: int, seed: int, chunk: int = 10 ** 6):
    """Monte-Carlo estimate of the scalar mmse, with its standard error.

    Samples x from the prior, passes it through the channel and averages
    |x - E{x|y}|^2.  Deterministic for a fixed seed; sampling is chunked
    so n_samples = 1e7 stays within a few hundred MB.

    Returns (estimate, std_err).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not varsigma > 0:
        raise ValueError("varsigma must be > 0 for the Monte-Carlo oracle")
    rho = prior.rho
    ch = ScalarChannel(varsigma)
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    left = int(n_samples)
    noise_scale = 1.0 / np.sqrt(varsigma)
    while left > 0:
        m = min(chunk, left)
        left -= m
        x = np.zeros(m, dtype=complex)
        on = rng.random(m) < rho
        k = int(on.sum())
        if k:
            x[on] = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
        z = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)
        y = x + noise_scale * z
        sq = np.abs(x - posterior_mean(y, ch, prior)) ** 2
        total += sq.sum()
        total_sq += (sq ** 2).sum()
    n = float(n_samples)
    mean = total / n
    var = max(total_sq / n - mean ** 2, 0.0)
    std_err = np.sqrt(var / n)
    return mean, std_err
