"""Small fully-connected network trained under the quadratic penalty.

A ReLU MLP with identity output, the penalty objective
``L(theta) + lam * ||[X, xi]||_* + (mu/2) ||f_theta(X) - xi||_F^2``,
the two subproblem steps (SGD over theta, subgradient method over xi),
and the alternating-minimization driver with its per-outer-iteration
descent bookkeeping.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import optim
from .errors import InvalidInputError, NumericalError
from .linalg import _as_matrix
from .mlr import softmax_cross_entropy
from .regularizers import concat_value_and_subgrad

logger = logging.getLogger(__name__)


@dataclass
class MlpParams:
    """Per-layer weights ``(out, in)`` and bias vectors; ReLU on hidden layers."""

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise InvalidInputError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise InvalidInputError(f"layer {i}: bias shape {b.shape} vs weight {w.shape}")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise InvalidInputError(f"layer {i} input dim does not chain")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidInputError(f"layer {i} has non-finite entries")

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def copy(self):
        return MlpParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def to_list(self):
        """Flatten to ``[w0, b0, w1, b1, ...]`` for the generic SGD driver."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    @staticmethod
    def from_list(arrays):
        return MlpParams(weights=list(arrays[0::2]), biases=list(arrays[1::2]))


def init_mlp(layer_sizes, seed=0):
    """He-initialized network for the given ``(m, h1, ..., c)`` sizes."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise InvalidInputError(f"invalid layer sizes {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases)


def _forward_cached(weights, biases, x):
    """Forward pass keeping activations and pre-activations for backprop."""
    acts = [x]
    pre = []
    a = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w.T + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        acts.append(a)
    return acts, pre


def mlp_forward(theta, x):
    """Logits ``f_theta(x)`` of shape (n, c)."""
    x = _as_matrix(x, "x")
    if x.shape[1] != theta.weights[0].shape[1]:
        raise InvalidInputError(
            f"input has {x.shape[1]} features, network expects {theta.weights[0].shape[1]}"
        )
    acts, _ = _forward_cached(theta.weights, theta.biases, x)
    return acts[-1]


def _backward(weights, acts, pre, dlogits):
    """Backpropagate a logits gradient; ReLU derivative at 0 is taken as 0."""
    n_layers = len(weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    d = dlogits
    for i in reversed(range(n_layers)):
        gw[i] = d.T @ acts[i]
        gb[i] = d.sum(axis=0)
        if i > 0:
            d = (d @ weights[i]) * (pre[i - 1] > 0)
    return gw, gb


def mlp_value_and_grads(theta, x, y, *, xi=None, mu=0.0, penalty_scale=1.0):
    """Objective and parameter gradients of the theta-subproblem on a batch.

    Value is ``mean cross-entropy + 0.5 * mu * penalty_scale * ||f - xi||^2``;
    with ``penalty_scale = n_total / batch`` this is an unbiased mini-batch
    estimate of ``L(theta) + (mu/2) ||f_theta(X) - xi||_F^2``.

    Returns ``(value, grads)`` with ``grads`` in ``to_list`` order.
    """
    acts, pre = _forward_cached(theta.weights, theta.biases, x)
    logits = acts[-1]
    loss, dlogits = softmax_cross_entropy(logits, y)
    value = loss
    if xi is not None and mu != 0.0:
        r = logits - xi
        value += 0.5 * mu * penalty_scale * float(np.sum(r * r))
        dlogits = dlogits + mu * penalty_scale * r
    gw, gb = _backward(theta.weights, acts, pre, dlogits)
    grads = []
    for w_g, b_g in zip(gw, gb):
        grads.append(w_g)
        grads.append(b_g)
    return value, grads


@dataclass
class PenaltyState:
    """Current (theta, xi) pair plus penalty hyperparameters and history."""

    theta: MlpParams
    xi: np.ndarray
    lam: float
    mu: float
    outer_iter: int = 0
    objective_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.mu < 0 or self.lam < 0:
            raise InvalidInputError("mu and lam must be nonnegative")
        self.xi = np.asarray(self.xi, dtype=float)
        if self.xi.ndim != 2 or self.xi.shape[1] != self.theta.layer_sizes[-1]:
            raise InvalidInputError("xi must be (n, c) matching the output layer")


def penalty_objective(state, x, y):
    """Full penalty objective at the state's (theta, xi)."""
    logits = mlp_forward(state.theta, x)
    loss, _ = softmax_cross_entropy(logits, y)
    value = loss
    if state.lam > 0.0:
        value += state.lam * concat_value_and_subgrad(x, state.xi).value
    r = logits - state.xi
    value += 0.5 * state.mu * float(np.sum(r * r))
    return value


def _subproblem_value(theta, x, y, xi, mu):
    return mlp_value_and_grads(theta, x, y, xi=xi, mu=mu)[0]


def theta_step(state, x, y, *, epochs=2, lr=0.01, momentum=0.9, batch_size=128,
               seed=0, epoch_offset=0, eps_mono=None, max_retries=3,
               sgd_state=None):
    """SGD epochs on ``L(theta) + (mu/2)||f_theta(X) - xi||^2`` with xi fixed.

    The subproblem objective at the returned parameters may not exceed its
    starting value by more than ``eps_mono``; otherwise the epochs are
    re-run with a halved learning rate and a fresh momentum buffer (up to
    ``max_retries`` times) and finally accepted with a logged violation.

    ``sgd_state`` is an optional dict carrying ``"velocity"`` between
    calls, so an outer loop drives one continuous optimizer stream rather
    than restarting momentum every step; it is updated on acceptance.
    """
    x = _as_matrix(x, "x")
    n = x.shape[0]
    xi, mu = state.xi, state.mu
    base = _subproblem_value(state.theta, x, y, xi, mu)
    if eps_mono is None:
        eps_mono = 1e-6 * (1.0 + abs(base))
    rate_at = lr if callable(lr) else (lambda _e: lr)

    def batch_fn(param_list, idx):
        theta = MlpParams.from_list(param_list)
        return mlp_value_and_grads(
            theta,
            x[idx],
            y[idx],
            xi=xi[idx] if mu != 0.0 else None,
            mu=mu,
            penalty_scale=n / len(idx),
        )

    carried = sgd_state.get("velocity") if sgd_state else None
    best_candidate, best_value, best_velocity = None, np.inf, None
    for attempt in range(max_retries + 1):
        scale = 0.5 ** attempt
        if attempt == 0 and carried is not None:
            velocity = [v.copy() for v in carried]
        else:
            velocity = [np.zeros_like(p) for p in state.theta.to_list()]
        try:
            arrays, _ = optim.sgd_momentum(
                batch_fn,
                state.theta.to_list(),
                n,
                epochs=epochs,
                lr=lambda e, s=scale: s * rate_at(e),
                momentum=momentum,
                batch_size=batch_size,
                seed=seed,
                epoch_offset=epoch_offset,
                velocity0=velocity,
            )
        except NumericalError:
            # diverged mid-run; halve the rate and try again
            continue
        candidate = MlpParams.from_list(arrays)
        value = _subproblem_value(candidate, x, y, xi, mu)
        if value <= base + eps_mono:
            if sgd_state is not None:
                sgd_state["velocity"] = velocity
            return candidate
        if np.isfinite(value) and value < best_value:
            best_candidate, best_value, best_velocity = candidate, value, velocity
    if best_candidate is None:
        logger.warning("theta step made no finite progress; keeping parameters")
        if sgd_state is not None:
            sgd_state["velocity"] = None
        return state.theta.copy()
    logger.warning(
        "theta step accepted with objective increase %.3e after %d retries",
        best_value - base,
        max_retries,
    )
    if sgd_state is not None:
        sgd_state["velocity"] = best_velocity
    return best_candidate


def xi_step(state, x, *, grad_tol=1e-2, max_iters=50, step_rule=None):
    """Approximately minimize ``lam ||[X, xi]||_* + (mu/2)||f - xi||^2`` over xi.

    Runs the 1/k-step subgradient method warm-started at the state's xi,
    then keeps whichever of the solver's best iterate and the unpenalized
    optimum ``f = f_theta(X)`` has the lower objective, so the returned
    point never exceeds the warm start.  With ``lam = 0`` the subproblem
    is a plain quadratic and ``f`` is returned exactly.
    """
    x = _as_matrix(x, "x")
    f_out = mlp_forward(state.theta, x)
    lam, mu = state.lam, state.mu
    if lam == 0.0:
        return f_out.copy()

    def objective(xi):
        cs = concat_value_and_subgrad(x, xi)
        r = xi - f_out
        value = lam * cs.value + 0.5 * mu * float(np.sum(r * r))
        return value, lam * cs.subgrad + mu * r

    best, report = optim.subgradient_descent(
        objective, state.xi, step_rule=step_rule, grad_tol=grad_tol,
        max_iters=max_iters,
    )
    best_val = report.objective_trajectory[-1]
    cand_val = objective(f_out)[0]
    if cand_val < best_val:
        return f_out.copy()
    return best


@dataclass
class AltMinReport:
    """Per-outer-iteration record of an alternating-minimization run."""

    objective_history: list
    xi_deltas: list
    descent_slacks: list
    eps_mono: float
    outer_iters: int
    stop_reason: str
    xi_fallbacks: int = 0


def alternating_minimize(x, y, lam, mu, hidden_sizes=(256,), *, max_outer=25,
                         epochs_per_outer=2, r0=0.01, momentum=0.9,
                         batch_size=128, xi_grad_tol=1e-2, xi_max_iters=50,
                         outer_tol=None, seed=0):
    """Alternate theta and xi steps on the quadratic-penalty objective.

    Starts from a seeded network and ``xi = 0``, runs ``epochs_per_outer``
    SGD epochs per outer iteration (learning rate ``r0`` for the first half
    of the total epoch budget, then ``r0/10``), then the xi subproblem.
    Stops when ``||xi_k - xi_{k+1}||_F <= outer_tol`` (default
    ``1e-3 * sqrt(n c)``) or after ``max_outer`` iterations.

    Each accepted xi update must satisfy the per-iteration descent
    inequality ``(mu/2) ||xi_k - xi_{k+1}||^2 <= L_k - L_{k+1} + eps_mono``
    with ``eps_mono = 1e-6 (1 + |L_0|)``; a violating update is replaced by
    keeping the previous xi (counted in the report).

    Returns ``(theta, PenaltyState, AltMinReport)``.
    """
    x = _as_matrix(x, "x")
    y = _as_matrix(y, "y")
    if lam <= 0 or mu <= 0:
        raise InvalidInputError("lam and mu must be positive")
    n, m = x.shape
    c = y.shape[1]
    if outer_tol is None:
        outer_tol = 1e-3 * np.sqrt(n * c)
    master = np.random.default_rng(seed)
    theta = init_mlp([m, *hidden_sizes, c], seed=int(master.integers(2**31)))
    state = PenaltyState(theta=theta, xi=np.zeros((n, c)), lam=lam, mu=mu)
    total_epochs = epochs_per_outer * max_outer
    lr = optim.two_phase_lr(r0, total_epochs)

    current = penalty_objective(state, x, y)
    eps_mono = 1e-6 * (1.0 + abs(current))
    history = [current]
    deltas, slacks = [], []
    fallbacks = 0
    stop_reason = "max-outer"
    sgd_state = {}
    for k in range(max_outer):
        sgd_seed = int(master.integers(2**31))
        state.theta = theta_step(
            state, x, y,
            epochs=epochs_per_outer, lr=lr, momentum=momentum,
            batch_size=batch_size, seed=sgd_seed,
            epoch_offset=k * epochs_per_outer, eps_mono=eps_mono,
            sgd_state=sgd_state,
        )
        xi_new = xi_step(state, x, grad_tol=xi_grad_tol, max_iters=xi_max_iters)
        delta = float(np.linalg.norm(xi_new - state.xi))
        proposed = PenaltyState(theta=state.theta, xi=xi_new, lam=lam, mu=mu)
        value = penalty_objective(proposed, x, y)
        if 0.5 * mu * delta**2 > current - value + eps_mono:
            # keep the previous xi; the theta update alone cannot break
            # the descent inequality beyond eps_mono
            fallbacks += 1
            xi_new = state.xi
            delta = 0.0
            value = penalty_objective(state, x, y)
        state.xi = xi_new
        state.outer_iter = k + 1
        slack = (current - value + eps_mono) - 0.5 * mu * delta**2
        history.append(value)
        deltas.append(delta)
        slacks.append(slack)
        current = value
        if delta <= outer_tol:
            stop_reason = "outer-tol"
            break
    state.objective_history = history
    report = AltMinReport(
        objective_history=history,
        xi_deltas=deltas,
        descent_slacks=slacks,
        eps_mono=eps_mono,
        outer_iters=state.outer_iter,
        stop_reason=stop_reason,
        xi_fallbacks=fallbacks,
    )
    return state.theta, state, report


def predict(theta, x):
    """Class indices by argmax of the network logits; ties to the lowest index."""
    return np.argmax(mlp_forward(theta, x), axis=1)


def accuracy(theta, x, y):
    """Fraction of rows whose predicted class matches the one-hot label."""
    return float(np.mean(predict(theta, x) == np.argmax(y, axis=1)))


def fit_mlp_sgd(x, y, hidden_sizes=(256,), reg=None, *, epochs=100, r0=0.01,
                momentum=0.9, batch_size=128, seed=0):
    """Plain SGD training of the MLP, optionally with a baseline weight penalty.

    ``reg`` (a RegularizerSpec of kind none/l1/l2/tikhonov) is applied to
    every weight matrix, not to biases.  Returns ``(theta, epoch_losses)``.
    """
    from .regularizers import baseline_reg

    x = _as_matrix(x, "x")
    n, m = x.shape
    c = y.shape[1]
    master = np.random.default_rng(seed)
    theta0 = init_mlp([m, *hidden_sizes, c], seed=int(master.integers(2**31)))
    lam = reg.weight if reg is not None else 0.0

    def batch_fn(param_list, idx):
        theta = MlpParams.from_list(param_list)
        value, grads = mlp_value_and_grads(theta, x[idx], y[idx])
        if lam > 0.0:
            for i, w in enumerate(theta.weights):
                rval, rsub = baseline_reg(w, reg)
                value += lam * rval
                grads[2 * i] = grads[2 * i] + lam * rsub
        return value, grads

    arrays, losses = optim.sgd_momentum(
        batch_fn,
        theta0.to_list(),
        n,
        epochs=epochs,
        lr=optim.two_phase_lr(r0, epochs),
        momentum=momentum,
        batch_size=batch_size,
        seed=int(master.integers(2**31)),
    )
    return MlpParams.from_list(arrays), losses


def save_checkpoint(theta, directory, extra=None):
    """Write a JSON manifest plus one raw little-endian float64 file per array.

    The manifest records layer sizes and, per array, the companion file
    name and shape; ``extra`` (seeds, hyperparameters) is stored under
    ``"extra"``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arrays = []
    for i, (w, b) in enumerate(zip(theta.weights, theta.biases)):
        for kind, arr in (("weight", w), ("bias", b)):
            fname = f"layer_{i:02d}_{kind}.f64"
            (directory / fname).write_bytes(np.ascontiguousarray(arr, dtype="<f8").tobytes())
            arrays.append({"file": fname, "kind": kind, "layer": i, "shape": list(arr.shape)})
    manifest = {
        "format": "ctnreg-mlp-checkpoint",
        "dtype": "<f8",
        "layer_sizes": theta.layer_sizes,
        "arrays": arrays,
        "extra": extra or {},
    }
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return directory / "manifest.json"


def load_checkpoint(directory):
    """Load a checkpoint written by :func:`save_checkpoint`.

    Returns ``(MlpParams, manifest_dict)``.
    """
    directory = Path(directory)
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    n_layers = len(manifest["layer_sizes"]) - 1
    weights = [None] * n_layers
    biases = [None] * n_layers
    for entry in manifest["arrays"]:
        raw = (directory / entry["file"]).read_bytes()
        arr = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).astype(float)
        if entry["kind"] == "weight":
            weights[entry["layer"]] = arr
        else:
            biases[entry["layer"]] = arr
    return MlpParams(weights=weights, biases=biases), manifest
