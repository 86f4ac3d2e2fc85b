"""Dense third-order tensor algebra and Tucker decomposition.

Tensors are plain ``numpy.ndarray`` objects of shape ``(I1, I2, I3)`` and
dtype float64. The documented linearization is Fortran order (index ``i1``
varies fastest, then ``i2``, then ``i3``), i.e. ``t.ravel(order="F")``.

Matricization follows the Kolda convention: the mode-n fibers become the
columns, and among the remaining modes the lower-numbered index varies
fastest. Modes are numbered 1, 2, 3 throughout the public API.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TensorError",
    "TuckerModel",
    "as_tensor",
    "matricize",
    "fold",
    "n_mode_product",
    "multi_mode_product",
    "leading_left_singular_vectors",
    "hosvd_init",
    "tucker_hooi",
    "reconstruct",
    "reconstruction_error",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
ORTHONORMAL_TOL = 1e-8


class TensorError(ValueError):
    """Raised on shape, rank or finiteness violations."""


def _check_mode(mode: int) -> int:
    if mode not in (1, 2, 3):
        raise TensorError(f"mode must be 1, 2 or 3, got {mode!r}")
    return mode - 1


def as_tensor(data, dims=None) -> np.ndarray:
    """Validate and promote ``data`` to a finite float64 third-order tensor.

    A flat sequence is accepted together with ``dims`` and is read in the
    documented Fortran linearization.
    """
    arr = np.asarray(data, dtype=np.float64)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or min(dims) < 1:
            raise TensorError(f"dims must be three positive integers, got {dims}")
        if arr.size != dims[0] * dims[1] * dims[2]:
            raise TensorError(f"data length {arr.size} does not match dims {dims}")
        arr = arr.reshape(dims, order="F")
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise TensorError(f"expected a non-empty third-order tensor, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise TensorError("tensor contains non-finite entries")
    return arr


def matricize(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-n unfolding: an ``In x prod(other dims)`` matrix of mode-n fibers."""
    n = _check_mode(mode)
    t = np.asarray(t, dtype=np.float64)
    # moveaxis keeps the remaining axes in increasing order; Fortran reshape
    # then makes the lower-numbered one vary fastest.
    return np.reshape(np.moveaxis(t, n, 0), (t.shape[n], -1), order="F")


def fold(m: np.ndarray, mode: int, dims) -> np.ndarray:
    """Inverse of :func:`matricize`."""
    n = _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    m = np.asarray(m, dtype=np.float64)
    rest = [d for i, d in enumerate(dims) if i != n]
    if m.ndim != 2 or m.shape != (dims[n], rest[0] * rest[1]):
        raise TensorError(
            f"matrix of shape {m.shape} cannot be folded to {dims} along mode {mode}"
        )
    moved = np.reshape(m, (dims[n], *rest), order="F")
    return np.ascontiguousarray(np.moveaxis(moved, 0, n))


def n_mode_product(t: np.ndarray, u: np.ndarray, mode: int) -> np.ndarray:
    """Multiply every mode-n fiber of ``t`` by ``u`` (shape ``J x In``)."""
    n = _check_mode(mode)
    t = np.asarray(t, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] != t.shape[n]:
        raise TensorError(
            f"matrix with {u.shape[-1] if u.ndim else 0} columns cannot multiply "
            f"mode {mode} of size {t.shape[n]}"
        )
    out = np.tensordot(u, t, axes=([1], [n]))
    return np.ascontiguousarray(np.moveaxis(out, 0, n))


def multi_mode_product(t: np.ndarray, mats, transpose: bool = False) -> np.ndarray:
    """Apply ``mats[0]`` along mode 1, ``mats[1]`` along mode 2, ``mats[2]`` along mode 3.

    ``None`` entries are skipped. With ``transpose`` each matrix is transposed first.
    """
    out = t
    for n, m in enumerate(mats):
        if m is None:
            continue
        out = n_mode_product(out, m.T if transpose else m, n + 1)
    return out


def leading_left_singular_vectors(m: np.ndarray, k: int) -> np.ndarray:
    """The ``k`` leading left singular vectors of ``m`` with a fixed sign.

    Each vector is flipped so that its largest-magnitude entry is positive
    (first such entry on exact ties). Degenerate singular values keep the
    order returned by LAPACK, so the basis inside a degenerate subspace is
    only as reproducible as the underlying SVD.
    """
    m = np.asarray(m, dtype=np.float64)
    if not 1 <= k <= m.shape[0]:
        raise TensorError(f"requested {k} singular vectors of a matrix with {m.shape[0]} rows")
    if m.shape[1] < m.shape[0]:
        # pad so that the full left basis is always available
        m = np.hstack([m, np.zeros((m.shape[0], m.shape[0] - m.shape[1]))])
    u, _, _ = np.linalg.svd(m, full_matrices=False)
    u = u[:, :k].copy()
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(k)])
    signs[signs == 0] = 1.0
    return u * signs


@dataclass(frozen=True)
class TuckerModel:
    """Core tensor plus one factor matrix per mode.

    ``trace`` holds the reconstruction error after each sweep when the model
    came out of :func:`tucker_hooi`; it is empty otherwise.
    """

    core: np.ndarray
    factors: tuple
    trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        core = np.asarray(self.core, dtype=np.float64)
        if core.ndim != 3:
            raise TensorError("core must be a third-order tensor")
        factors = tuple(np.asarray(f, dtype=np.float64) for f in self.factors)
        if len(factors) != 3:
            raise TensorError("a Tucker model needs exactly three factors")
        for n, f in enumerate(factors):
            if f.ndim != 2 or f.shape[1] != core.shape[n]:
                raise TensorError(
                    f"factor {n + 1} has shape {f.shape}, core mode size {core.shape[n]}"
                )
            if f.shape[1] > f.shape[0]:
                raise TensorError(f"factor {n + 1} has more columns than rows")
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "factors", factors)

    @property
    def ranks(self) -> tuple:
        return tuple(int(j) for j in self.core.shape)

    @property
    def dims(self) -> tuple:
        return tuple(int(f.shape[0]) for f in self.factors)

    def is_orthonormal(self, tol: float = ORTHONORMAL_TOL) -> bool:
        return all(
            np.allclose(f.T @ f, np.eye(f.shape[1]), rtol=0.0, atol=tol) for f in self.factors
        )


def _check_ranks(dims, ranks) -> tuple:
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != 3:
        raise TensorError(f"ranks must have three entries, got {ranks}")
    for n, (j, i) in enumerate(zip(ranks, dims)):
        if not 1 <= j <= i:
            raise TensorError(f"rank {j} for mode {n + 1} outside [1, {i}]")
    return ranks


def hosvd_init(t: np.ndarray, ranks) -> TuckerModel:
    """Truncated higher-order SVD: per-mode leading singular vectors, projected core."""
    t = as_tensor(t)
    ranks = _check_ranks(t.shape, ranks)
    factors = tuple(
        leading_left_singular_vectors(matricize(t, n + 1), ranks[n]) for n in range(3)
    )
    core = multi_mode_product(t, factors, transpose=True)
    return TuckerModel(core, factors)


def _kron_projection(t: np.ndarray, factors, mode: int) -> np.ndarray:
    """W = X_(n) (A^(3) kron ... kron A^(1)) with the mode-n factor left out."""
    mats = [None if m == mode - 1 else factors[m] for m in range(3)]
    projected = multi_mode_product(t, mats, transpose=True)
    return matricize(projected, mode)


def tucker_hooi(
    t: np.ndarray, ranks, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> TuckerModel:
    """Tucker decomposition by higher-order orthogonal iteration.

    Starts from :func:`hosvd_init` and alternates over modes, replacing each
    factor by the leading left singular vectors of the projection ``W``.
    Stops when the error decrease between sweeps falls below ``tol`` times
    ``||t||`` or after ``max_iter`` sweeps. The per-sweep errors are kept on
    ``model.trace``.
    """
    t = as_tensor(t)
    ranks = _check_ranks(t.shape, ranks)
    if not tol > 0:
        raise TensorError("tol must be positive")
    if max_iter < 1:
        raise TensorError("max_iter must be at least 1")

    init = hosvd_init(t, ranks)
    factors = list(init.factors)
    norm_t = float(np.linalg.norm(t))
    prev = reconstruction_error(t, init)
    trace = [prev]
    core = init.core
    for _ in range(max_iter):
        for n in range(3):
            w = _kron_projection(t, factors, n + 1)
            factors[n] = leading_left_singular_vectors(w, ranks[n])
        core = multi_mode_product(t, factors, transpose=True)
        err = reconstruction_error(t, TuckerModel(core, tuple(factors)))
        trace.append(err)
        if prev - err < tol * max(norm_t, 1.0):
            break
        prev = err
    return TuckerModel(core, tuple(factors), tuple(trace))


def reconstruct(model: TuckerModel) -> np.ndarray:
    return multi_mode_product(model.core, model.factors)


def reconstruction_error(t: np.ndarray, model: TuckerModel) -> float:
    """Frobenius norm of ``t - reconstruct(model)``."""
    t = np.asarray(t, dtype=np.float64)
    if t.shape != model.dims:
        raise TensorError(f"tensor dims {t.shape} do not match model dims {model.dims}")
    return float(np.linalg.norm(t - reconstruct(model)))
