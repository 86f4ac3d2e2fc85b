"""Automatic relevance determination (ARD) for Tucker multilinear ranks.

Every factor column ``A_d^(n)`` carries its own precision ``alpha_d^(n)``
and the core carries a single precision ``alpha_core``. Alternating MAP
updates of the factors, the core and the precisions drive irrelevant
columns towards zero; columns whose norm falls below ``prune_ratio`` times
the largest column norm of their mode are removed for good. The surviving
ranks are then refit with HOOI so the returned model has orthonormal
factors.

Negative log-posterior minimized here (``N = I1*I2*I3``, ``J = J1*J2*J3``,
``R = ||t - reconstruct||_F^2``):

Gaussian::

    R/(2 s2) + 1/2 sum alpha_d ||A_d||_F^2 + 1/2 alpha_core ||core||_F^2
      + N/2 log s2 - 1/2 sum I_n log alpha_d - J/2 log alpha_core

Laplace::

    R/(2 s2) + sum alpha_d ||A_d||_1 + alpha_core ||core||_1
      + N/2 log s2 - sum I_n log alpha_d - J log alpha_core
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .tensor_core import (
    TensorError,
    TuckerModel,
    as_tensor,
    hosvd_init,
    matricize,
    multi_mode_product,
    n_mode_product,
    reconstruct,
    tucker_hooi,
)

__all__ = [
    "Prior",
    "ArdConfig",
    "ArdState",
    "ArdResult",
    "ALPHA_CAP",
    "SIGMA2_FLOOR",
    "estimate_sigma_from_snr",
    "update_hyperparams",
    "solve_regularized_factor",
    "solve_regularized_core",
    "neg_log_posterior",
    "ard_select_ranks",
]

ALPHA_CAP = 1e12
SIGMA2_FLOOR = 1e-12
L1_TOL = 1e-8
L1_MAX_ITER = 1000
KRON_CORE_LIMIT = 1024  # largest core handled with an explicit Kronecker Gram


class Prior(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"


@dataclass(frozen=True)
class ArdConfig:
    prior: Prior = Prior.GAUSSIAN
    snr_db: float = 20.0
    learn_sigma: bool = False
    max_ranks: tuple = (8, 6, 8)
    prune_ratio: float = 1e-2
    max_iter: int = 200
    tol: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "prior", Prior(self.prior))
        object.__setattr__(self, "max_ranks", tuple(int(r) for r in self.max_ranks))
        if len(self.max_ranks) != 3 or min(self.max_ranks) < 1:
            raise ValueError(f"max_ranks must be three positive integers, got {self.max_ranks}")
        if not 0.0 < self.prune_ratio < 1.0:
            raise ValueError("prune_ratio must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def clipped_to(self, dims) -> tuple:
        """max_ranks capped componentwise at the tensor dims."""
        return tuple(min(r, int(d)) for r, d in zip(self.max_ranks, dims))


@dataclass(frozen=True)
class ArdState:
    alpha_factor: tuple  # one 1-D array per mode
    alpha_core: float
    sigma2: float

    def __post_init__(self):
        alphas = tuple(np.asarray(a, dtype=np.float64) for a in self.alpha_factor)
        object.__setattr__(self, "alpha_factor", alphas)
        values = np.concatenate([*alphas, [self.alpha_core, self.sigma2]])
        if not (np.all(np.isfinite(values)) and np.all(values > 0)):
            raise ValueError("ARD hyperparameters must be positive and finite")


@dataclass(frozen=True)
class ArdResult:
    selected_ranks: tuple
    model: TuckerModel
    trace: list = field(default_factory=list)  # dicts: iteration, objective, ranks


def estimate_sigma_from_snr(t: np.ndarray, snr_db: float) -> float:
    """Noise variance implied by ``snr_db`` relative to the mean squared entry."""
    t = np.asarray(t, dtype=np.float64)
    power = float(np.mean(t**2))
    if power == 0.0:
        raise TensorError("SNR-based noise estimate is undefined for a zero tensor")
    return max(power * 10.0 ** (-snr_db / 10.0), SIGMA2_FLOOR)


def _column_norms(a: np.ndarray, prior: Prior) -> np.ndarray:
    if prior is Prior.GAUSSIAN:
        return np.sqrt(np.sum(a**2, axis=0))
    return np.sum(np.abs(a), axis=0)


def _safe_ratio(num: float, den) -> np.ndarray:
    den = np.asarray(den, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), ALPHA_CAP)
    return np.minimum(out, ALPHA_CAP)


def update_hyperparams(
    model: TuckerModel,
    t: np.ndarray,
    prior: Prior = Prior.GAUSSIAN,
    learn_sigma: bool = False,
    sigma2: float | None = None,
    snr_db: float = 20.0,
) -> ArdState:
    """Closed-form stationary point of the objective in the precisions.

    With ``learn_sigma`` the noise variance is the mean squared residual,
    otherwise ``sigma2`` is kept (or estimated from ``snr_db`` when None).
    Precisions are capped at ``ALPHA_CAP`` and the variance floored at
    ``SIGMA2_FLOOR`` so exact fits stay finite.
    """
    prior = Prior(prior)
    t = np.asarray(t, dtype=np.float64)
    if t.shape != model.dims:
        raise TensorError(f"tensor dims {t.shape} do not match model dims {model.dims}")
    if learn_sigma:
        resid = float(np.sum((t - reconstruct(model)) ** 2))
        s2 = max(resid / t.size, SIGMA2_FLOOR)
    elif sigma2 is not None:
        s2 = max(float(sigma2), SIGMA2_FLOOR)
    else:
        s2 = estimate_sigma_from_snr(t, snr_db)

    alphas = []
    for a in model.factors:
        rows = a.shape[0]
        if prior is Prior.GAUSSIAN:
            alphas.append(_safe_ratio(rows, np.sum(a**2, axis=0)))
        else:
            alphas.append(_safe_ratio(rows, np.sum(np.abs(a), axis=0)))
    n_core = model.core.size
    if prior is Prior.GAUSSIAN:
        a_core = float(_safe_ratio(n_core, np.sum(model.core**2)))
    else:
        a_core = float(_safe_ratio(n_core, np.sum(np.abs(model.core))))
    return ArdState(tuple(alphas), a_core, s2)


def neg_log_posterior(t: np.ndarray, model: TuckerModel, state: ArdState, prior: Prior) -> float:
    """Objective value up to the additive constant (see module docstring)."""
    prior = Prior(prior)
    resid = float(np.sum((np.asarray(t) - reconstruct(model)) ** 2))
    value = resid / (2.0 * state.sigma2) + 0.5 * t.size * np.log(state.sigma2)
    scale = 0.5 if prior is Prior.GAUSSIAN else 1.0
    for a, alpha in zip(model.factors, state.alpha_factor):
        if prior is Prior.GAUSSIAN:
            value += 0.5 * float(np.sum(alpha * np.sum(a**2, axis=0)))
        else:
            value += float(np.sum(alpha * np.sum(np.abs(a), axis=0)))
        value -= scale * a.shape[0] * float(np.sum(np.log(alpha)))
    if prior is Prior.GAUSSIAN:
        value += 0.5 * state.alpha_core * float(np.sum(model.core**2))
    else:
        value += state.alpha_core * float(np.sum(np.abs(model.core)))
    value -= scale * model.core.size * np.log(state.alpha_core)
    return float(value)


def _normal_equations(t: np.ndarray, model: TuckerModel, mode: int):
    """Gram ``G G^T`` and right-hand side ``X_(n) G^T`` for the mode-n factor,
    where ``X_(n) ~ A^(n) G``."""
    n = mode - 1
    others = [None if m == n else model.factors[m] for m in range(3)]
    core_n = matricize(model.core, mode)
    projected = matricize(multi_mode_product(t, others, transpose=True), mode)
    rhs = projected @ core_n.T
    grams = [None if m == n else model.factors[m].T @ model.factors[m] for m in range(3)]
    gram = matricize(multi_mode_product(model.core, grams), mode) @ core_n.T
    return 0.5 * (gram + gram.T), rhs


def _soft(x, thresh):
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def _lasso_rows(gram: np.ndarray, rhs: np.ndarray, penalty: np.ndarray, start: np.ndarray):
    """Cyclic coordinate descent for every row ``a`` of
    ``0.5 a G G^T a^T - a . rhs + sum_d penalty_d |a_d|`` at once."""
    a = start.copy()
    diag = np.diag(gram)
    for _ in range(L1_MAX_ITER):
        biggest = 0.0
        for d in range(a.shape[1]):
            if diag[d] <= 0:
                new = np.zeros(a.shape[0])
            else:
                partial = rhs[:, d] - a @ gram[:, d] + a[:, d] * diag[d]
                new = _soft(partial, penalty[d]) / diag[d]
            biggest = max(biggest, float(np.max(np.abs(new - a[:, d]))))
            a[:, d] = new
        if biggest < L1_TOL * max(1.0, float(np.max(np.abs(a)))):
            break
    return a


def solve_regularized_factor(
    t: np.ndarray, model: TuckerModel, mode: int, state: ArdState, prior: Prior = Prior.GAUSSIAN
) -> np.ndarray:
    """Minimize the objective over ``A^(mode)`` with everything else fixed.

    Gaussian prior: ridge regression with per-column penalty
    ``sigma2 * alpha_d``, solved in closed form (pseudo-inverse for singular
    systems). Laplace prior: lasso with soft-threshold ``sigma2 * alpha_d``,
    solved by cyclic coordinate descent.
    """
    prior = Prior(prior)
    if mode not in (1, 2, 3):
        raise TensorError(f"mode must be 1, 2 or 3, got {mode!r}")
    t = np.asarray(t, dtype=np.float64)
    gram, rhs = _normal_equations(t, model, mode)
    penalty = state.sigma2 * state.alpha_factor[mode - 1]
    if prior is Prior.GAUSSIAN:
        lhs = gram + np.diag(penalty)
        return (np.linalg.pinv(lhs, hermitian=True) @ rhs.T).T
    return _lasso_rows(gram, rhs, penalty, model.factors[mode - 1])


def _fista(quad, rhs: np.ndarray, penalty: float, start: np.ndarray, lipschitz: float) -> np.ndarray:
    """Monotone FISTA for ``0.5 c . quad(c) - c . rhs + penalty ||c||_1``."""

    def objective(c, qc):
        return 0.5 * float(np.vdot(c, qc)) - float(np.vdot(c, rhs)) + penalty * float(np.abs(c).sum())

    step = 1.0 / lipschitz
    x = start.copy()
    y = x.copy()
    f_x = objective(x, quad(x))
    theta = 1.0
    for _ in range(L1_MAX_ITER):
        z = _soft(y - step * (quad(y) - rhs), step * penalty)
        f_z = objective(z, quad(z))
        x_prev = x
        if f_z <= f_x:
            x, f_x = z, f_z
        theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta**2))
        y = x + (theta / theta_next) * (z - x) + ((theta - 1.0) / theta_next) * (x - x_prev)
        theta = theta_next
        if np.max(np.abs(x - x_prev)) < L1_TOL * max(1.0, float(np.max(np.abs(x)))) and f_z <= f_x:
            break
    return x


def _core_lasso(grams, rhs: np.ndarray, penalty: float, start: np.ndarray) -> np.ndarray:
    """L1-penalized core update ``0.5 c^T (kron grams) c - c . rhs + penalty ||c||_1``.

    Small cores use the explicit Kronecker Gram (vectorized with the first
    index fastest); larger ones apply it through mode products.
    """
    lipschitz = float(np.prod([np.linalg.eigvalsh(g)[-1] for g in grams]))
    if lipschitz <= 0:
        return np.zeros_like(rhs)
    if rhs.size <= KRON_CORE_LIMIT:
        q = np.kron(np.kron(grams[2], grams[1]), grams[0])
        vec = _fista(
            lambda c: q @ c, rhs.ravel(order="F"), penalty, start.ravel(order="F"), lipschitz
        )
        return vec.reshape(rhs.shape, order="F")
    return _fista(lambda c: multi_mode_product(c, grams), rhs, penalty, start, lipschitz)


def solve_regularized_core(
    t: np.ndarray, model: TuckerModel, state: ArdState, prior: Prior = Prior.GAUSSIAN
) -> np.ndarray:
    """Minimize the objective over the core with the factors fixed."""
    prior = Prior(prior)
    t = np.asarray(t, dtype=np.float64)
    rhs = multi_mode_product(t, model.factors, transpose=True)
    grams = [a.T @ a for a in model.factors]
    penalty = state.sigma2 * state.alpha_core
    if prior is Prior.LAPLACE:
        return _core_lasso(grams, rhs, penalty, model.core)
    # (kron G + penalty I) c = rhs, diagonalized mode by mode
    eig = [np.linalg.eigh(0.5 * (g + g.T)) for g in grams]
    rotated = multi_mode_product(rhs, [v for _, v in eig], transpose=True)
    d1, d2, d3 = (np.clip(w, 0.0, None) for w, _ in eig)
    denom = d1[:, None, None] * d2[None, :, None] * d3[None, None, :] + penalty
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(denom > 0, rotated / np.where(denom > 0, denom, 1.0), 0.0)
    return multi_mode_product(scaled, [v for _, v in eig])


def _prune(model: TuckerModel, state: ArdState, prior: Prior, ratio: float):
    factors = list(model.factors)
    core = model.core
    alphas = list(state.alpha_factor)
    changed = False
    for n in range(3):
        norms = _column_norms(factors[n], prior)
        top = float(np.max(norms)) if norms.size else 0.0
        keep = norms >= ratio * top
        if not np.any(keep):
            keep[int(np.argmax(norms))] = True
        if np.all(keep):
            continue
        changed = True
        idx = np.flatnonzero(keep)
        factors[n] = factors[n][:, idx]
        alphas[n] = alphas[n][idx]
        core = np.take(core, idx, axis=n)
    return TuckerModel(core, tuple(factors)), ArdState(tuple(alphas), state.alpha_core, state.sigma2), changed


def ard_select_ranks(t: np.ndarray, config: ArdConfig = ArdConfig()) -> ArdResult:
    """Select Tucker ranks by ARD, then refit the surviving ranks with HOOI.

    Starts from the HOSVD at ``config.max_ranks`` and alternates factor,
    core and precision updates, pruning columns after every iteration.
    Stops once the objective changes by less than ``config.tol`` (relative)
    in an iteration without pruning, or after ``config.max_iter`` iterations.
    Deterministic: no random initialization is involved.
    """
    t = as_tensor(t)
    prior = config.prior
    max_ranks = config.clipped_to(t.shape)
    model = hosvd_init(t, max_ranks)
    if not np.any(t):
        return ArdResult((1, 1, 1), tucker_hooi(t, (1, 1, 1)), [])

    s2 = None if config.learn_sigma else estimate_sigma_from_snr(t, config.snr_db)
    state = update_hyperparams(model, t, prior, config.learn_sigma, sigma2=s2, snr_db=config.snr_db)
    trace = []
    prev = neg_log_posterior(t, model, state, prior)
    for it in range(config.max_iter):
        factors = list(model.factors)
        for n in range(3):
            current = TuckerModel(model.core, tuple(factors))
            factors[n] = solve_regularized_factor(t, current, n + 1, state, prior)
        model = TuckerModel(model.core, tuple(factors))
        model = TuckerModel(solve_regularized_core(t, model, state, prior), model.factors)
        fit_value = neg_log_posterior(t, model, state, prior)

        state = update_hyperparams(model, t, prior, config.learn_sigma, sigma2=state.sigma2)
        model, state, pruned = _prune(model, state, prior, config.prune_ratio)
        value = neg_log_posterior(t, model, state, prior)
        trace.append(
            {"iteration": it, "objective": value, "fit_objective": fit_value, "ranks": model.ranks}
        )
        if not pruned and abs(prev - value) < config.tol * max(abs(value), 1.0):
            break
        prev = value

    ranks = model.ranks
    return ArdResult(ranks, tucker_hooi(t, ranks), trace)
