"""Multivariate Chebyshev models on a box.

A model of degree d in n variables uses the tensor-product basis
T_{i1}(z1) * ... * T_{in}(zn) with every i_m <= d.  Coefficients are stored
flat in row-major order (i1 slowest).  Inputs are mapped onto [-1, 1]^n by an
affine per-dimension scaling that clamps out-of-box values to the edge.

Evaluation uses the three-term recurrence by default.  An instrumented nested
Horner evaluation over the exact power-basis expansion is provided for
operation-count measurements; it performs exactly (d+1)^n - 1 multiplications
and additions per call.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError

MAX_POWER_DEGREE = 30  # the Chebyshev -> monomial change of basis is integer-exact up to here
MAX_COEFFS = 1_000_000


@dataclass
class ChebyModel:
    n: int
    d: int
    coeffs: np.ndarray
    bounds: np.ndarray  # shape (n, 2) rows (lo, hi)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(self.n, 2)
        if self.n < 1 or self.d < 0:
            raise ConfigError("need n >= 1 and d >= 0")
        if (self.d + 1) ** self.n > MAX_COEFFS:
            raise ConfigError(f"(d+1)^n exceeds the {MAX_COEFFS} coefficient guard")
        if self.coeffs.size != (self.d + 1) ** self.n:
            raise ConfigError(
                f"expected {(self.d + 1) ** self.n} coefficients, got {self.coeffs.size}"
            )
        if not np.all(self.bounds[:, 0] < self.bounds[:, 1]):
            raise ConfigError("each bounds row must satisfy lo < hi")
        if not (np.all(np.isfinite(self.coeffs)) and np.all(np.isfinite(self.bounds))):
            raise ConfigError("coefficients and bounds must be finite")

    def copy(self) -> "ChebyModel":
        return ChebyModel(self.n, self.d, self.coeffs.copy(), self.bounds.copy())

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "bounds": self.bounds.tolist(),
            "coeffs": self.coeffs.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ChebyModel":
        extra = set(obj) - {"n", "d", "bounds", "coeffs"}
        if extra:
            raise ConfigError(f"unknown model keys: {sorted(extra)}")
        return cls(
            n=int(obj["n"]),
            d=int(obj["d"]),
            coeffs=np.asarray(obj["coeffs"], dtype=float),
            bounds=np.asarray(obj["bounds"], dtype=float),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "ChebyModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def scale_input(x, bounds: np.ndarray) -> np.ndarray:
    """Affine map of points onto [-1, 1]^n, clamping anything outside the box.

    x may be a single point (n,) or a batch (m, n).
    """
    x = np.asarray(x, dtype=float)
    lo = bounds[:, 0]
    hi = bounds[:, 1]
    z = 2.0 * (x - lo) / (hi - lo) - 1.0
    return np.clip(z, -1.0, 1.0)


def cheby_1d(z, d: int) -> np.ndarray:
    """T_0..T_d at z via the three-term recurrence; z scalar or (m,)."""
    z = np.asarray(z, dtype=float)
    out = np.empty((d + 1,) + z.shape)
    out[0] = 1.0
    if d >= 1:
        out[1] = z
        for i in range(2, d + 1):
            out[i] = 2.0 * z * out[i - 1] - out[i - 2]
    return out


def basis_values(model: ChebyModel, x) -> np.ndarray:
    """Flat tensor-product basis at one point x (raw units), row-major i1 slowest."""
    z = scale_input(np.asarray(x, dtype=float).reshape(model.n), model.bounds)
    acc = np.ones(1)
    for dim in range(model.n):
        t = cheby_1d(z[dim], model.d)
        acc = np.multiply.outer(acc, t).ravel()
    return acc


def batch_basis(model: ChebyModel, X: np.ndarray) -> np.ndarray:
    """Basis rows for a batch of points, shape (m, (d+1)^n)."""
    X = np.asarray(X, dtype=float).reshape(-1, model.n)
    Z = scale_input(X, model.bounds)
    acc = np.ones((X.shape[0], 1))
    for dim in range(model.n):
        t = cheby_1d(Z[:, dim], model.d).T  # (m, d+1)
        acc = (acc[:, :, None] * t[:, None, :]).reshape(X.shape[0], -1)
    return acc


def evaluate(model: ChebyModel, x) -> float | np.ndarray:
    """Model value at one point (returns float) or a batch (m, n) (returns (m,))."""
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:
        return float(basis_values(model, x) @ model.coeffs)
    return batch_basis(model, x) @ model.coeffs


@lru_cache(maxsize=None)
def cheb2power_matrix(d: int) -> np.ndarray:
    """Integer matrix M with T_i(z) = sum_j M[i, j] z^j, exact for d <= 30."""
    if d > MAX_POWER_DEGREE:
        raise ConfigError(f"power-basis conversion limited to degree {MAX_POWER_DEGREE}")
    m = np.zeros((d + 1, d + 1), dtype=np.int64)
    m[0, 0] = 1
    if d >= 1:
        m[1, 1] = 1
        for i in range(2, d + 1):
            m[i, 1:] = 2 * m[i - 1, :-1]
            m[i, :] -= m[i - 2, :]
    m.setflags(write=False)
    return m


def power_tensor(model: ChebyModel) -> np.ndarray:
    """Monomial coefficient tensor of shape (d+1,)*n over the scaled inputs.

    Kept in extended precision: the monomial basis is badly conditioned at
    higher degrees, and the 1e-10 agreement contract with the recurrence path
    needs headroom beyond double rounding.
    """
    m = cheb2power_matrix(model.d).astype(np.longdouble)
    t = model.coeffs.astype(np.longdouble).reshape((model.d + 1,) * model.n)
    for axis in range(model.n):
        t = np.moveaxis(np.tensordot(t, m, axes=([axis], [0])), -1, axis)
    return t


@dataclass
class OpCount:
    mults: int = 0
    adds: int = 0


def _horner_rec(tensor: np.ndarray, z: np.ndarray, ops: OpCount):
    if tensor.ndim == 0:
        return tensor[()]
    vals = [_horner_rec(tensor[i], z[1:], ops) for i in range(tensor.shape[0])]
    acc = vals[-1]
    for i in range(tensor.shape[0] - 2, -1, -1):
        acc = acc * z[0] + vals[i]
        ops.mults += 1
        ops.adds += 1
    return acc


def eval_horner(model: ChebyModel, x, tensor: np.ndarray | None = None) -> tuple[float, OpCount]:
    """Nested Horner evaluation over the power tensor with exact op counting.

    Returns (value, ops); ops.mults == ops.adds == (d+1)^n - 1.
    """
    if tensor is None:
        tensor = power_tensor(model)
    z = scale_input(np.asarray(x, dtype=float).reshape(model.n), model.bounds)
    ops = OpCount()
    val = float(_horner_rec(tensor, z.astype(tensor.dtype), ops))
    return val, ops


def gauss_chebyshev_nodes(m: int) -> np.ndarray:
    j = np.arange(1, m + 1)
    return np.cos((2.0 * j - 1.0) * np.pi / (2.0 * m))


def weighted_inner_product(
    idx_f: tuple[int, ...], idx_g: tuple[int, ...], m: int | None = None
) -> float:
    """<T_f, T_g> under the product weight 1/sqrt(1-z^2) per dimension.

    Computed by tensorized Gauss-Chebyshev quadrature with m nodes per
    dimension (default 2*max_degree + 1; the weight and integrand factorize,
    so the tensor sum reduces to a product of per-dimension sums).
    """
    idx_f = tuple(int(i) for i in idx_f)
    idx_g = tuple(int(i) for i in idx_g)
    if len(idx_f) != len(idx_g):
        raise ConfigError("multi-indices must have equal length")
    if min(idx_f + idx_g) < 0:
        raise ConfigError("degrees must be non-negative")
    d = max(idx_f + idx_g)
    if m is None:
        m = 2 * d + 1
    elif m < 2 * d + 1:
        raise ConfigError(f"need at least {2 * d + 1} nodes per dimension for degree {d}")
    nodes = gauss_chebyshev_nodes(m)
    t = cheby_1d(nodes, d)  # (d+1, m)
    total = 1.0
    for a, b in zip(idx_f, idx_g):
        total *= (np.pi / m) * float(np.sum(t[a] * t[b]))
    return total
