"""Regularized nonnegative RESCAL fitted with multiplicative updates.

Each frontal slice is approximated as ``X_t ~ A @ R_t @ A.T`` with a shared
nonnegative node-factor matrix ``A`` (N x k) and per-slice nonnegative cores
``R_t`` (k x k). The loss is::

    1/2 sum_t ||X_t - A R_t A^T||_F^2 + 1/2 (lam_A ||A||_F^2 + lam_R sum_t ||R_t||_F^2)
"""
from __future__ import annotations

import csv
import io
import zipfile
from dataclasses import dataclass, replace
from typing import IO

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NumericalError
from .temporal import AdjacencyTensor

INIT_LOW, INIT_HIGH = 0.1, 1.0
MAX_HALVINGS = 30
SPARSE_DENSITY = 0.1  # at or below this fill, products with X use CSR storage


@dataclass(frozen=True)
class Hyperparams:
    k: int
    lambda_A: float = 0.2
    lambda_R: float = 0.07
    max_iters: int = 500
    tol: float = 1e-6
    epsilon: float = 1e-12
    seed: int = 0
    descent_guard: bool = True
    restarts: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.lambda_A < 0 or self.lambda_R < 0:
            raise ConfigError("regularization coefficients must be >= 0")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")
        if self.tol < 0:
            raise ConfigError("tol must be >= 0")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")


@dataclass(frozen=True, eq=False)
class DecompositionState:
    A: np.ndarray  # (N, k)
    R: np.ndarray  # (T, k, k); R[t] is the core of slice t
    objective_history: tuple = ()
    iterations_run: int = 0
    converged: bool = False

    @property
    def k(self) -> int:
        return self.A.shape[1]

    def reconstruct(self) -> np.ndarray:
        """A R_t A^T for every slice, shape (T, N, N)."""
        return self.A @ self.R @ self.A.T


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def make_state(A, R, **kw) -> DecompositionState:
    return DecompositionState(_frozen(A), _frozen(R), **kw)


def _restart_seed(seed: int, restart: int):
    return seed if restart == 0 else [seed, restart]


def init_decomposition(N: int, hyper: Hyperparams, T: int, restart: int = 0) -> DecompositionState:
    """Uniform(0.1, 1) draws for A and every R_t; restart r > 0 uses its own stream."""
    if N < 1 or T < 1:
        raise ConfigError("need N >= 1 and T >= 1")
    if hyper.k > N:
        raise ConfigError(f"rank k={hyper.k} exceeds node count N={N}")
    rng = np.random.default_rng(_restart_seed(hyper.seed, restart))
    A = rng.uniform(INIT_LOW, INIT_HIGH, size=(N, hyper.k))
    R = rng.uniform(INIT_LOW, INIT_HIGH, size=(T, hyper.k, hyper.k))
    return make_state(A, R)


def _check_dims(state: DecompositionState, X: AdjacencyTensor):
    T, N, _ = X.frontal.shape
    if state.A.shape[0] != N or state.R.shape[0] != T:
        raise ConfigError(
            f"state is for N={state.A.shape[0]}, T={state.R.shape[0]}; tensor has N={N}, T={T}"
        )


def objective(state: DecompositionState, X: AdjacencyTensor, hyper: Hyperparams) -> float:
    _check_dims(state, X)
    resid = X.frontal - state.reconstruct()
    fit = np.sum(resid * resid)
    reg = hyper.lambda_A * np.sum(state.A**2) + hyper.lambda_R * np.sum(state.R**2)
    return 0.5 * float(fit) + 0.5 * float(reg)


def _loss_from(A, R, AtXA, x_sq: float, hyper: Hyperparams) -> float:
    """Loss from the cached products, via ||X||^2 - 2<A^T X A, R> + <G R G, R>.

    Never forms the N x N reconstruction. ``x_sq`` is ||X||_F^2.
    """
    G = A.T @ A
    cross = np.sum(AtXA * R)
    quad = np.sum((G @ R @ G) * R)
    fit = max(x_sq - 2.0 * cross + quad, 0.0)
    reg = hyper.lambda_A * np.sum(A * A) + hyper.lambda_R * np.sum(R * R)
    return 0.5 * float(fit) + 0.5 * float(reg)


def _finite(a: np.ndarray, what: str, iteration=None):
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"non-finite entries in {what}", iteration)


def _a_rule(A, R, XA, XtA, hyper: Hyperparams) -> np.ndarray:
    Rt = R.transpose(0, 2, 1)
    numer = (XA @ Rt + XtA @ R).sum(axis=0)
    AtA = A.T @ A
    inner = (R @ AtA @ Rt + Rt @ AtA @ R).sum(axis=0)
    inner = inner + hyper.lambda_A * np.eye(A.shape[1])
    A_new = A * numer / (A @ inner + hyper.epsilon)
    _finite(A_new, "A")
    return A_new


def _r_rule(A, R, AtXA, hyper: Hyperparams) -> np.ndarray:
    AtA = A.T @ A
    denom = AtA @ R @ AtA + hyper.lambda_R * R + hyper.epsilon
    R_new = R * AtXA / denom
    _finite(R_new, "R")
    return R_new


def update_A(state: DecompositionState, X: AdjacencyTensor, hyper: Hyperparams) -> DecompositionState:
    _check_dims(state, X)
    A, Xs = state.A, X.frontal
    XA, XtA = Xs @ A, Xs.transpose(0, 2, 1) @ A
    return replace(state, A=_frozen(_a_rule(state.A, state.R, XA, XtA, hyper)))


def update_R(state: DecompositionState, X: AdjacencyTensor, hyper: Hyperparams) -> DecompositionState:
    _check_dims(state, X)
    A = state.A
    return replace(state, R=_frozen(_r_rule(A, state.R, A.T @ X.frontal @ A, hyper)))


def converged(prev: float, cur: float, tol: float) -> bool:
    return abs(cur - prev) / (1.0 + prev) < tol


class _TensorOps:
    """Products with a fixed tensor X, computed from CSR storage when X is sparse."""

    def __init__(self, X: AdjacencyTensor):
        Xs = X.frontal
        T, N, _ = Xs.shape
        self.shape = (T, N)
        self.x_sq = float(np.sum(Xs * Xs))
        self.symmetric = bool(np.array_equal(Xs, Xs.transpose(0, 2, 1)))
        self.sparse = np.count_nonzero(Xs) <= SPARSE_DENSITY * Xs.size
        if self.sparse:
            self.X = sp.csr_matrix(Xs.reshape(T * N, N))
            self.Xt = None if self.symmetric else sp.csr_matrix(Xs.transpose(0, 2, 1).reshape(T * N, N))
        else:
            self.X, self.Xt = Xs, None if self.symmetric else Xs.transpose(0, 2, 1)

    def products(self, A):
        """X_t A and X_t^T A for every slice (the same array when X is symmetric)."""
        if not self.sparse:
            XA = self.X @ A
            return XA, XA if self.symmetric else self.Xt @ A
        T, N = self.shape
        k = A.shape[1]
        XA = np.asarray(self.X @ A).reshape(T, N, k)
        return XA, XA if self.symmetric else np.asarray(self.Xt @ A).reshape(T, N, k)


class _Factors:
    """A, R and the products with X that depend on A, kept in step.

    Every product with X is linear in A, so a backtracked A reuses the
    products of the old and proposed A instead of touching X again. A sweep
    therefore reads X once (twice when X is not symmetric).
    """

    def __init__(self, ops: _TensorOps, A, R, XA=None, XtA=None):
        self.ops, self.A, self.R, self.symmetric = ops, A, R, ops.symmetric
        if XA is None:
            XA, XtA = ops.products(A)
        self.XA, self.XtA = XA, XtA
        self.AtXA = A.T @ XA

    def with_A(self, A, XA=None, XtA=None):
        return _Factors(self.ops, A, self.R, XA, XtA)

    def loss(self, hyper):
        return _loss_from(self.A, self.R, self.AtXA, self.ops.x_sq, hyper)


def _guarded_A_step(f: _Factors, hyper: Hyperparams, loss: float) -> _Factors:
    """Multiplicative A update, backtracked toward the old A if it raises the loss.

    The raw A rule is not a descent step for this quartic loss; shrinking the
    step along the segment old -> proposed keeps A nonnegative and restores
    monotone descent. Gives up (keeps the old A) after MAX_HALVINGS.
    """
    proposed = f.with_A(_a_rule(f.A, f.R, f.XA, f.XtA, hyper))
    if not hyper.descent_guard or proposed.loss(hyper) <= loss:
        return proposed
    step = proposed.A - f.A
    d_XA = proposed.XA - f.XA
    d_XtA = None if f.symmetric else proposed.XtA - f.XtA
    beta = 0.5
    for _ in range(MAX_HALVINGS):
        XA = f.XA + beta * d_XA
        XtA = XA if f.symmetric else f.XtA + beta * d_XtA
        cand = f.with_A(f.A + beta * step, XA, XtA)
        if cand.loss(hyper) <= loss:
            return cand
        beta *= 0.5
    return f


def fit(
    X: AdjacencyTensor, hyper: Hyperparams, init: DecompositionState | None = None
) -> DecompositionState:
    """Alternate one A update and one sweep of R updates until the relative
    change of the loss drops below ``tol`` or ``max_iters`` sweeps ran.

    ``objective_history[0]`` is the loss at initialization; one entry is
    appended per sweep. With ``hyper.descent_guard`` the A step is
    backtracked whenever it would increase the loss. With ``hyper.restarts``
    > 1 (and no explicit ``init``) independent random starts are fitted and
    the one with the lowest final loss is returned.
    """
    T, N, _ = X.frontal.shape
    ops = _TensorOps(X)
    if init is not None:
        return _fit_from(init, X, hyper, ops)
    best = None
    for r in range(hyper.restarts):
        state = _fit_from(init_decomposition(N, hyper, T, restart=r), X, hyper, ops)
        if best is None or state.objective_history[-1] < best.objective_history[-1]:
            best = state
    return best


def _fit_from(state: DecompositionState, X: AdjacencyTensor, hyper: Hyperparams, ops: _TensorOps) -> DecompositionState:
    _check_dims(state, X)
    f = _Factors(ops, state.A, state.R)
    history = [f.loss(hyper)]
    done = False
    n = 0
    while n < hyper.max_iters and not done:
        try:
            f = _guarded_A_step(f, hyper, history[-1])
            f.R = _r_rule(f.A, f.R, f.AtXA, hyper)
        except NumericalError as exc:
            raise NumericalError(f"iteration {n + 1}: {exc}", n + 1) from exc
        history.append(f.loss(hyper))
        n += 1
        done = converged(history[-2], history[-1], hyper.tol)
    return make_state(f.A, f.R, objective_history=tuple(history), iterations_run=n, converged=done)


def relative_error(state: DecompositionState, X: AdjacencyTensor) -> float:
    return float(np.linalg.norm(X.frontal - state.reconstruct()) / np.linalg.norm(X.frontal))


def write_history(state: DecompositionState, out: IO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["iter", "objective"])
    for i, v in enumerate(state.objective_history):
        w.writerow([i, repr(float(v))])


def save_factors(state: DecompositionState, path) -> None:
    """Checkpoint as an ``.npz`` archive readable by ``np.load``.

    Members: ``A`` (N, k) and ``R`` (T, k, k) in C (row-major) order, with
    their shapes in the ``.npy`` headers, plus ``objective_history``,
    ``iterations_run`` and ``converged``. Zip timestamps are pinned so equal
    states give byte-identical files.
    """
    arrays = {
        "A": state.A,
        "R": state.R,
        "objective_history": np.asarray(state.objective_history, dtype=float),
        "iterations_run": np.asarray(state.iterations_run),
        "converged": np.asarray(state.converged),
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arr, order="C"), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())


def load_factors(path) -> DecompositionState:
    with np.load(path) as z:
        return make_state(
            z["A"],
            z["R"],
            objective_history=tuple(float(v) for v in z["objective_history"]),
            iterations_run=int(z["iterations_run"]),
            converged=bool(z["converged"]),
        )
