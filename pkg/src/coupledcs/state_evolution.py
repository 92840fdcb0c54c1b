"""Coupled MSE state evolution.

One iteration refreshes the per-block MSE through the scalar channel,

    eps_p <- mmse(sum_q varsigma[q, p]),

then re-solves the conjugate precisions at the new eps (warm-started from
the previous conjugates).  Fixed points of this map are stationary points
of the replica free entropy; iterating from eps = rho tracks what message
passing can reach, since large MSE is the only algorithmically possible
initialization.  At sigma2 = 0 the conjugate formulas stay finite even
though the free entropy itself diverges, so noise-free evolutions are
allowed.
"""

from dataclasses import dataclass, field

import numpy as np

from .replica_core import ConjugateState, CouplingSpec, Ensemble, conjugate_fixed_point
from .scalar_channel import mmse

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10 ** 5
_CYCLE_TOL = 1e-10


@dataclass
class EvolutionTrace:
    """Record of one state-evolution run.

    history[t] is the per-block MSE vector after t iterations
    (history[0] is the initialization).  ``oscillating`` flags a period-2
    cycle detected at the iteration cap; ``clamped`` flags any inner-solver
    positivity clamp along the way.
    """

    history: np.ndarray
    converged: bool
    iterations: int
    final_state: ConjugateState
    oscillating: bool = field(default=False)
    clamped: bool = field(default=False)

    @property
    def final_eps(self) -> np.ndarray:
        return self.history[-1]


def good_mse_reached(eps, sigma2: float) -> bool:
    """Noise-dominated regime predicate: max_p eps_p < 10 * sigma2."""
    return bool(np.max(eps) < 10.0 * sigma2)


def se_step(state: ConjugateState, spec: CouplingSpec, kind: Ensemble) -> ConjugateState:
    """One state-evolution iteration.

    The MSE update uses the incoming conjugates; the returned conjugates
    are re-extremized at the new eps, warm-started at the incoming Lambda.
    Feeding a converged state returns it unchanged up to solver tolerance.
    """
    sig_p = state.varsigma.sum(axis=0)
    eps_new = np.array([mmse(float(v), spec.prior) for v in sig_p])
    new = conjugate_fixed_point(eps_new, spec, kind, Lambda0=state.Lambda)
    new.clamped = new.clamped or state.clamped
    return new


def run_evolution(spec: CouplingSpec, kind: Ensemble, init=None,
                  tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  damping: float = 0.0) -> EvolutionTrace:
    """Iterate the state evolution to a fixed point.

    init defaults to eps_p = rho, the large-MSE starting point (with no
    prior channel information, mmse(0) = rho).  damping in [0, 1) mixes
    theta * old + (1 - theta) * new conjugate precisions; the plain
    iteration is damping = 0.  Non-convergence at max_iter is reported in
    the trace rather than raised.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if not (0.0 <= damping < 1.0):
        raise ValueError("damping must lie in [0, 1)")
    rho = spec.prior.rho
    eps = np.full(spec.L_c, rho) if init is None else np.asarray(init, dtype=float).copy()
    if eps.shape != (spec.L_c,):
        raise ValueError(f"init must have shape ({spec.L_c},)")
    if np.any(eps <= 0) or np.any(eps > rho + 1e-15):
        raise ValueError("init must satisfy 0 < eps_p <= rho")

    state = conjugate_fixed_point(eps, spec, kind)
    history = [eps.copy()]
    converged = False
    oscillating = False
    clamped = state.clamped
    iterations = 0
    for t in range(int(max_iter)):
        new = se_step(state, spec, kind)
        if damping > 0.0 and t > 0:
            mixed = (1.0 - damping) * new.varsigma + damping * state.varsigma
            new = ConjugateState(eps=new.eps, varsigma=mixed, Lambda=new.Lambda,
                                 Delta=new.Delta, clamped=new.clamped)
        clamped = clamped or new.clamped
        history.append(new.eps.copy())
        iterations = t + 1
        if np.abs(new.eps - state.eps).max() < tol:
            state = new
            converged = True
            break
        state = new
    if not converged and len(history) >= 3:
        oscillating = bool(np.abs(history[-1] - history[-3]).max() < _CYCLE_TOL)
    return EvolutionTrace(history=np.array(history), converged=converged,
                          iterations=iterations, final_state=state,
                          oscillating=oscillating, clamped=clamped)


def iterations_to_good_mse(trace: EvolutionTrace, sigma2: float):
    """First iteration index whose MSE profile is noise-dominated, or None."""
    below = np.where(trace.history.max(axis=1) < 10.0 * sigma2)[0]
    return int(below[0]) if below.size else None
