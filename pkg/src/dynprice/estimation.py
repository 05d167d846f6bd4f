"""Log-likelihood, (ridge) maximum likelihood and design-matrix bookkeeping."""

from __future__ import annotations

import numpy as np

from .glm import GlmFamily, ModelParams, as_params, psi_derivatives

MAX_NEWTON_ITER = 100
GRAD_TOL = 1e-10
RANK_TOL = 1e-10
REFRESH_EVERY = 512


class EstimationError(RuntimeError):
    pass


class SingularDesignError(EstimationError):
    """The design matrix is numerically rank deficient."""


class ConvergenceError(EstimationError):
    """Newton iterations did not reach the gradient tolerance.

    ``last`` holds the final iterate as ModelParams.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class Dataset:
    """Records ``(x_i, y_i)`` stored as a design array ``X`` (n, 2d) and response ``y``."""

    def __init__(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError(f"incompatible shapes X{X.shape}, y{y.shape}")
        self.X = X
        self.y = y

    @classmethod
    def from_records(cls, records, dim=None) -> "Dataset":
        records = list(records)
        if not records:
            if dim is None:
                raise ValueError("dimension required for an empty dataset")
            return cls(np.empty((0, dim)), np.empty(0))
        xs = [np.asarray(x, dtype=float) for x, _ in records]
        if len({x.shape for x in xs}) != 1:
            raise ValueError("all records must share the covariate length")
        return cls(np.vstack(xs), np.array([float(y) for _, y in records]))

    def __len__(self):
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def records(self):
        return list(zip(self.X, self.y))


class DataBuffer:
    """Growable dataset with amortized O(1) appends."""

    def __init__(self, dim: int, capacity: int = 256):
        self._X = np.empty((capacity, dim))
        self._y = np.empty(capacity)
        self.n = 0

    def _reserve(self, extra):
        need = self.n + extra
        if need > self._X.shape[0]:
            cap = max(need, 2 * self._X.shape[0])
            X = np.empty((cap, self._X.shape[1]))
            y = np.empty(cap)
            X[: self.n] = self._X[: self.n]
            y[: self.n] = self._y[: self.n]
            self._X, self._y = X, y

    def append(self, x, y):
        self._reserve(1)
        self._X[self.n] = x
        self._y[self.n] = y
        self.n += 1

    def extend(self, X, y):
        X = np.atleast_2d(X)
        self._reserve(X.shape[0])
        self._X[self.n:self.n + X.shape[0]] = X
        self._y[self.n:self.n + X.shape[0]] = y
        self.n += X.shape[0]

    def __len__(self):
        return self.n

    def view(self) -> Dataset:
        return Dataset(self._X[: self.n], self._y[: self.n])


def _check(theta, data: Dataset) -> np.ndarray:
    if len(data) == 0:
        raise ValueError("log-likelihood of an empty dataset")
    th = as_params(theta).theta if isinstance(theta, ModelParams) else np.asarray(theta, dtype=float)
    if th.shape != (data.dim,):
        raise ValueError(f"theta length {th.size} does not match covariate length {data.dim}")
    return th


def log_likelihood(family: GlmFamily, theta, data: Dataset) -> float:
    """``sum_i y_i x_i'theta - psi(x_i'theta)``."""
    th = _check(theta, data)
    a = data.X @ th
    return float(data.y @ a - np.sum(psi_derivatives(family, a, 0)))


def log_likelihood_gradient(family: GlmFamily, theta, data: Dataset) -> np.ndarray:
    th = _check(theta, data)
    a = data.X @ th
    return data.X.T @ (data.y - psi_derivatives(family, a, 1))


def log_likelihood_hessian(family: GlmFamily, theta, data: Dataset) -> np.ndarray:
    th = _check(theta, data)
    w = psi_derivatives(family, data.X @ th, 2)
    return -(data.X.T @ (w[:, None] * data.X))


def check_full_rank(X: np.ndarray, tol: float = RANK_TOL) -> None:
    if X.shape[0] < X.shape[1]:
        raise SingularDesignError(f"{X.shape[0]} records cannot identify {X.shape[1]} parameters")
    eig = np.linalg.eigvalsh(X.T @ X)
    if eig[-1] <= 0 or eig[0] < tol * eig[-1]:
        raise SingularDesignError(f"design matrix is rank deficient (eigenvalue ratio {eig[0] / max(eig[-1], 1e-300):.3g})")


def fit_mle(family: GlmFamily, data: Dataset, ridge: float = 0.0, init=None,
            max_iter: int = MAX_NEWTON_ITER, check_rank: bool = True) -> ModelParams:
    """Maximize ``L(theta) - ridge/2 ||theta||^2`` by damped Newton.

    Starts at zero unless ``init`` is given (a warm start changes nothing
    about the maximizer, only the iteration count).  Converges when the
    gradient sup-norm drops below 1e-10, or when the Newton step itself is
    at floating-point resolution (large samples where the summed gradient
    cannot get below the absolute tolerance).
    """
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    X, y = data.X, data.y
    p = data.dim
    if len(data) == 0 and ridge == 0:
        raise SingularDesignError("no records")
    if ridge == 0 and check_rank:
        check_full_rank(X)
    theta = np.zeros(p) if init is None else np.array(as_params(init).theta if isinstance(init, ModelParams) else init, dtype=float)
    if not np.all(np.isfinite(theta)):
        theta = np.zeros(p)

    def objective(th):
        a = X @ th
        return float(y @ a - np.sum(psi_derivatives(family, a, 0))) - 0.5 * ridge * float(th @ th)

    a = X @ theta
    obj = float(y @ a - np.sum(psi_derivatives(family, a, 0))) - 0.5 * ridge * float(theta @ theta)
    eye = np.eye(p)
    for _ in range(max_iter):
        grad = X.T @ (y - psi_derivatives(family, a, 1)) - ridge * theta
        if np.max(np.abs(grad)) < GRAD_TOL:
            return ModelParams.from_theta(theta)
        w = psi_derivatives(family, a, 2)
        info = X.T @ (w[:, None] * X) + ridge * eye
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        if np.max(np.abs(step)) <= 1e-13 * (1.0 + np.max(np.abs(theta))):
            return ModelParams.from_theta(theta)
        s = 1.0
        # near the optimum the gain is below the objective's rounding error
        slack = 64 * np.finfo(float).eps * (1.0 + abs(obj))
        for _ in range(60):
            cand = theta + s * step
            cobj = objective(cand)
            if np.isfinite(cobj) and cobj >= obj - slack:
                break
            s *= 0.5
        else:
            # no ascent possible along the Newton direction: at numerical optimum
            if np.max(np.abs(grad)) < 1e-6 * max(1, len(data)):
                return ModelParams.from_theta(theta)
            break
        theta, obj = cand, cobj
        a = X @ theta
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations",
                           last=ModelParams.from_theta(theta) if np.all(np.isfinite(theta)) else None)


class DesignMatrix:
    """Running ``V = ridge*I + sum x x'`` with a maintained inverse.

    The inverse is updated by Sherman-Morrison and recomputed from scratch
    every ``REFRESH_EVERY`` updates.  Without ridge it stays unavailable
    until ``V`` becomes full rank.
    """

    def __init__(self, dim: int, ridge: float = 0.0):
        if dim < 1:
            raise ValueError("dim must be positive")
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        self.dim = dim
        self.ridge = float(ridge)
        self.v = self.ridge * np.eye(dim)
        self.v_inv = np.eye(dim) / self.ridge if ridge > 0 else None
        self.count = 0
        self._since_refresh = 0

    def copy(self) -> "DesignMatrix":
        out = DesignMatrix.__new__(DesignMatrix)
        out.__dict__.update(self.__dict__)
        out.v = self.v.copy()
        out.v_inv = None if self.v_inv is None else self.v_inv.copy()
        return out

    def _refresh(self):
        self._since_refresh = 0
        if self.ridge > 0:
            self.v_inv = np.linalg.inv(self.v)
            return
        eig = np.linalg.eigvalsh(self.v)
        if eig[-1] > 0 and eig[0] >= RANK_TOL * eig[-1]:
            self.v_inv = np.linalg.inv(self.v)
        else:
            self.v_inv = None

    def update(self, x) -> "DesignMatrix":
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}")
        self.v += np.outer(x, x)
        self.count += 1
        self._since_refresh += 1
        if self.v_inv is not None and self._since_refresh < REFRESH_EVERY:
            vx = self.v_inv @ x
            self.v_inv -= np.outer(vx, vx) / (1.0 + x @ vx)
        else:
            self._refresh()
        return self

    def update_many(self, X) -> "DesignMatrix":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[0] == 0:
            return self
        self.v += X.T @ X
        self.count += X.shape[0]
        self._refresh()
        return self

    def inverse(self) -> np.ndarray:
        if self.v_inv is None:
            raise SingularDesignError("design matrix is not invertible")
        return self.v_inv


def update_design(dm: DesignMatrix, x) -> DesignMatrix:
    """Rank-one update ``V += x x'`` (in place; returns ``dm``)."""
    return dm.update(x)


def mahalanobis_norm(x, dm: DesignMatrix) -> float:
    """``sqrt(x' V^{-1} x)`` using the maintained inverse."""
    x = np.asarray(x, dtype=float)
    q = float(x @ dm.inverse() @ x)
    return float(np.sqrt(max(q, 0.0)))


def mahalanobis_norms(X, v_inv: np.ndarray) -> np.ndarray:
    """Row-wise ``sqrt(x' V^{-1} x)``."""
    X = np.atleast_2d(X)
    return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", X, v_inv, X), 0.0))
