"""First-order solvers.

Strong-Wolfe linesearch, full-gradient descent with iterate-change and
gradient-norm stopping rules, the subgradient method with 1/k steps and
best-iterate tracking, and mini-batch SGD with classic momentum.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WolfeParams:
    """Constants of the strong Wolfe conditions and the bracket budget."""

    c1: float = 1e-4
    c2: float = 0.9
    max_bracket_steps: int = 30
    alpha_init: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise InvalidInputError("need 0 < c1 < c2 < 1")
        if self.alpha_init <= 0 or self.max_bracket_steps < 1:
            raise InvalidInputError("alpha_init > 0 and max_bracket_steps >= 1 required")


@dataclass(frozen=True)
class LineSearchResult:
    """Step accepted by the linesearch plus which conditions it certifies."""

    alpha: float
    value: float
    slope: float
    sufficient_decrease: bool
    curvature: bool
    evals: int


@dataclass(frozen=True)
class GdConfig:
    """Gradient-descent stopping rules and starting point."""

    w0: np.ndarray
    step_tol: float = 1e-4
    grad_tol: float = 1e-4
    max_iters: int = 2000

    def __post_init__(self):
        if self.step_tol <= 0 or self.grad_tol <= 0:
            raise InvalidInputError("tolerances must be positive")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")


@dataclass
class FitReport:
    """Outcome of a solver run."""

    stop_reason: str
    iterations: int
    objective_trajectory: list = field(default_factory=list)
    final_grad_norm: float = float("nan")
    linesearch_warnings: int = 0


def wolfe_linesearch(phi, f0, slope0, params=None):
    """Find a step satisfying the strong Wolfe conditions along a ray.

    Parameters
    ----------
    phi : callable
        ``phi(alpha) -> (value, slope)``: the objective restricted to the
        ray and its directional derivative at ``alpha``.
    f0, slope0 : float
        Value and slope at ``alpha = 0``; ``slope0`` must be negative.
    params : WolfeParams, optional

    Returns
    -------
    LineSearchResult
        A step with ``sufficient_decrease`` and ``curvature`` both true
        when the search succeeded.  If the bracket budget runs out, the
        best sufficient-decrease step seen is returned with the
        ``curvature`` flag reporting its actual status.
    """
    p = params or WolfeParams()
    if not (np.isfinite(f0) and np.isfinite(slope0)):
        raise InvalidInputError("f0 and slope0 must be finite")
    if slope0 >= 0:
        raise InvalidInputError(f"not a descent direction: slope0 = {slope0:.3e}")
    c1, c2 = p.c1, p.c2
    evals = 0

    def eval_phi(alpha):
        nonlocal evals
        fa, ga = phi(alpha)
        evals += 1
        fa = float(fa) if np.isfinite(fa) else np.inf
        return fa, float(ga)

    def armijo(alpha, fa):
        return fa <= f0 + c1 * alpha * slope0

    def curv(ga):
        return np.isfinite(ga) and abs(ga) <= c2 * abs(slope0)

    best = None  # (alpha, value, slope) with lowest value among Armijo points

    def track(alpha, fa, ga):
        nonlocal best
        if armijo(alpha, fa) and (best is None or fa < best[1]):
            best = (alpha, fa, ga)

    def result(alpha, fa, ga):
        return LineSearchResult(
            alpha=alpha,
            value=fa,
            slope=ga,
            sufficient_decrease=bool(alpha > 0 and armijo(alpha, fa)),
            curvature=bool(curv(ga)),
            evals=evals,
        )

    def fallback():
        if best is not None:
            return result(*best)
        return result(0.0, f0, slope0)

    def zoom(lo, f_lo, g_lo, hi, f_hi):
        for _ in range(p.max_bracket_steps):
            if abs(hi - lo) <= 1e-16 * (1.0 + abs(lo) + abs(hi)):
                break
            alpha = 0.5 * (lo + hi)
            fa, ga = eval_phi(alpha)
            track(alpha, fa, ga)
            if not armijo(alpha, fa) or fa >= f_lo:
                hi, f_hi = alpha, fa
            else:
                if curv(ga):
                    return result(alpha, fa, ga)
                if ga * (hi - lo) >= 0:
                    hi, f_hi = lo, f_lo
                lo, f_lo, g_lo = alpha, fa, ga
        return fallback()

    a_prev, f_prev, g_prev = 0.0, f0, slope0
    alpha = p.alpha_init
    for i in range(p.max_bracket_steps):
        fa, ga = eval_phi(alpha)
        track(alpha, fa, ga)
        if not armijo(alpha, fa) or (i > 0 and fa >= f_prev):
            return zoom(a_prev, f_prev, g_prev, alpha, fa)
        if curv(ga):
            return result(alpha, fa, ga)
        if ga >= 0:
            return zoom(alpha, fa, ga, a_prev, f_prev)
        a_prev, f_prev, g_prev = alpha, fa, ga
        alpha *= 2.0
    return fallback()


def gradient_descent(value_and_grad, cfg, wolfe=None):
    """Minimize a smooth objective by steepest descent with Wolfe linesearch.

    ``value_and_grad(w) -> (float, ndarray)`` evaluates the objective and
    its gradient.  Each iteration steps along ``-grad`` with a strong-Wolfe
    step, so the objective trajectory is nonincreasing.  Stops when the
    iterate change ``<= cfg.step_tol``, the gradient Frobenius norm
    ``<= cfg.grad_tol``, or after ``cfg.max_iters`` iterations.

    Returns ``(w, FitReport)``.
    """
    wolfe = wolfe or WolfeParams()
    w = np.array(cfg.w0, dtype=float, copy=True)
    f, g = value_and_grad(w)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericalError("objective not finite at the starting point")
    trajectory = [float(f)]
    warnings = 0
    stop_reason = "max-iters"
    iterations = 0
    alpha_prev = None
    for _ in range(cfg.max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= cfg.grad_tol:
            stop_reason = "grad-tol"
            break
        d = -g
        slope0 = -(gnorm * gnorm)
        cache = {}

        def phi(alpha, d=d, cache=cache):
            wa = w + alpha * d
            fa, ga = value_and_grad(wa)
            cache[alpha] = (wa, fa, ga)
            return fa, float(np.sum(ga * d))

        init = wolfe.alpha_init if alpha_prev is None else alpha_prev
        res = wolfe_linesearch(
            phi,
            f,
            slope0,
            WolfeParams(
                c1=wolfe.c1,
                c2=wolfe.c2,
                max_bracket_steps=wolfe.max_bracket_steps,
                alpha_init=init,
            ),
        )
        if not res.sufficient_decrease or res.alpha <= 0:
            raise NumericalError(
                f"linesearch failed at iteration {iterations + 1}: no sufficient-"
                f"decrease step found (f = {f:.6e}, |grad| = {gnorm:.3e})"
            )
        if not res.curvature:
            warnings += 1
            logger.warning(
                "linesearch bracket budget exhausted at iteration %d; using best "
                "sufficient-decrease step %.3e",
                iterations + 1,
                res.alpha,
            )
        w_new, f_new, g_new = cache[res.alpha]
        step_norm = res.alpha * gnorm
        alpha_prev = res.alpha
        w, f, g = w_new, float(f_new), g_new
        iterations += 1
        trajectory.append(f)
        if step_norm <= cfg.step_tol:
            stop_reason = "step-tol"
            break
    report = FitReport(
        stop_reason=stop_reason,
        iterations=iterations,
        objective_trajectory=trajectory,
        final_grad_norm=float(np.linalg.norm(g)),
        linesearch_warnings=warnings,
    )
    return w, report


def subgradient_descent(value_and_subgrad, x0, *, step_rule=None, grad_tol=1e-2,
                        max_iters=50):
    """Subgradient method with diminishing steps and best-iterate tracking.

    ``value_and_subgrad(x) -> (float, ndarray)`` returns the objective and
    any subgradient.  The step at iteration k is ``step_rule(k)`` (default
    ``1/k``).  Keeps the lowest-objective iterate seen; stops early when
    the current subgradient norm drops below ``grad_tol``.

    Returns ``(best_x, FitReport)`` where the report's trajectory is the
    nonincreasing best-objective sequence.
    """
    step = step_rule or (lambda k: 1.0 / k)
    if max_iters < 0:
        raise InvalidInputError("max_iters must be >= 0")
    x = np.array(x0, dtype=float, copy=True)
    f, g = value_and_subgrad(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericalError("objective not finite at the starting point")
    best_x, best_f = x.copy(), float(f)
    trajectory = [best_f]
    gnorm = float(np.linalg.norm(g))
    stop_reason = "max-iters"
    iterations = 0
    if gnorm < grad_tol:
        stop_reason = "grad-tol"
    else:
        for k in range(1, max_iters + 1):
            x = x - step(k) * g
            iterations = k
            if not np.all(np.isfinite(x)):
                stop_reason = "diverged"
                break
            try:
                f, g = value_and_subgrad(x)
            except NumericalError:
                stop_reason = "diverged"
                break
            if np.isfinite(f) and f < best_f:
                best_f = float(f)
                best_x = x.copy()
            trajectory.append(best_f)
            gnorm = float(np.linalg.norm(g)) if np.all(np.isfinite(g)) else np.inf
            if gnorm < grad_tol:
                stop_reason = "grad-tol"
                break
    report = FitReport(
        stop_reason=stop_reason,
        iterations=iterations,
        objective_trajectory=trajectory,
        final_grad_norm=gnorm,
    )
    return best_x, report


def two_phase_lr(r0, total_epochs):
    """Fixed rate ``r0`` for the first half of the epochs, then ``r0 / 10``."""
    half = total_epochs / 2.0

    def schedule(epoch):
        return r0 if epoch < half else r0 / 10.0

    return schedule


def sgd_momentum(batch_value_and_grads, params0, n_samples, *, epochs, lr,
                 momentum=0.9, batch_size=128, seed=0, epoch_offset=0,
                 velocity0=None):
    """Mini-batch SGD with classic momentum ``v <- m v - lr g; p <- p + v``.

    Parameters
    ----------
    batch_value_and_grads : callable
        ``f(params, idx) -> (value, grads)`` where ``params`` and ``grads``
        are matching lists of arrays and ``idx`` indexes the mini-batch.
    params0 : list of ndarray
        Starting parameters (copied, not mutated).
    n_samples : int
        Dataset size; shuffled once per epoch with its own generator so a
        fixed ``seed`` reproduces the parameter trajectory bit-for-bit.
    epochs : int
    lr : float or callable
        Learning rate, or a schedule called with the global epoch index
        ``epoch_offset + e``.
    momentum, batch_size, seed, epoch_offset
        See above.
    velocity0 : list of ndarray, optional
        Momentum state to continue from; updated in place so a caller that
        chains several runs keeps one optimizer stream.  Starts at zero
        when omitted.

    Returns ``(params, epoch_losses)`` with the mean mini-batch objective
    per epoch.
    """
    if n_samples <= 0:
        raise InvalidInputError("dataset must be nonempty")
    params = [np.array(p, dtype=float, copy=True) for p in params0]
    velocity = velocity0 if velocity0 is not None else [np.zeros_like(p) for p in params]
    rate_at = lr if callable(lr) else (lambda _e: lr)
    rng = np.random.default_rng(seed)
    epoch_losses = []
    for e in range(epochs):
        rate = float(rate_at(epoch_offset + e))
        order = rng.permutation(n_samples)
        total, batches = 0.0, 0
        for start in range(0, n_samples, batch_size):
            idx = order[start:start + batch_size]
            value, grads = batch_value_and_grads(params, idx)
            for g in grads:
                if not np.all(np.isfinite(g)):
                    raise NumericalError("non-finite gradient in SGD step")
            for pvec, vvec, g in zip(params, velocity, grads):
                vvec *= momentum
                vvec -= rate * g
                pvec += vvec
            total += float(value)
            batches += 1
        epoch_losses.append(total / batches)
    return params, epoch_losses
