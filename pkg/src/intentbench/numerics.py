"""Deterministic numeric kernel: seeded counter-based RNG, sparse/dense vector
carriers, cosine similarity, truncated SVD, and a finite-difference gradient
checker used to validate every analytic gradient in the package."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ConvergenceError, DimensionError, NumericError

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4B7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    """SplitMix64 output function on a 64-bit integer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *parts) -> int:
    """Mix a parent seed with arbitrary labels into a new 64-bit seed.

    Stable across processes and platforms (SHA-256 based, no use of the
    randomized builtin ``hash``).
    """
    h = hashlib.sha256()
    h.update((seed & _MASK64).to_bytes(8, "little"))
    for part in parts:
        payload = repr(part).encode("utf-8")
        h.update(len(payload).to_bytes(4, "little"))
        h.update(payload)
    return int.from_bytes(h.digest()[:8], "little")


class RngStream:
    """Counter-based SplitMix64 stream: draw i is a pure function of
    (seed, i), so identical seeds give bit-identical sequences everywhere.

    A stream is single-owner; concurrent consumers should ``derive`` child
    streams instead of sharing one.
    """

    def __init__(self, seed: int):
        self._seed = int(seed) & _MASK64
        self._counter = 0

    @property
    def seed(self) -> int:
        return self._seed

    def derive(self, *parts) -> "RngStream":
        """Child stream keyed by (this seed, parts); independent of how many
        draws either stream has made."""
        return RngStream(derive_seed(self._seed, *parts))

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self._seed) + np.uint64(_GAMMA) * idx
        return _mix64_array(z)

    def next_uint64(self) -> int:
        self._counter += 1
        return _mix64(self._seed + _GAMMA * self._counter)

    def uniform(self, n: int | None = None, low: float = 0.0, high: float = 1.0):
        """Uniform floats in [low, high); scalar when n is None."""
        if n is None:
            u = (self.next_uint64() >> 11) * 2.0**-53
            return low + (high - low) * u
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u

    def integers(self, n: int, bound: int) -> np.ndarray:
        """n integers uniform on [0, bound). Modulo reduction; the bias is
        below bound/2**64 and irrelevant at the bounds used here."""
        if bound <= 0:
            raise ArgumentError("integer bound must be positive")
        return (self._raw(n) % np.uint64(bound)).astype(np.int64)

    def randint(self, bound: int) -> int:
        if bound <= 0:
            raise ArgumentError("integer bound must be positive")
        return self.next_uint64() % bound

    def normal(self, shape, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """Seeded Gaussians via Box-Muller on stream uniforms."""
        if isinstance(shape, int):
            shape = (shape,)
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        raw = self._raw(2 * m)
        # map to (0, 1] so log never sees zero
        u1 = ((raw[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (raw[m:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
        return (mean + std * z[:n]).reshape(shape)

    def shuffle(self, seq) -> None:
        """In-place Fisher-Yates shuffle of a list or 1-D array."""
        n = len(seq)
        if n < 2:
            return
        draws = self._raw(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(draws[n - 1 - i] % np.uint64(i + 1))
            seq[i], seq[j] = seq[j], seq[i]

    def permutation(self, n: int) -> np.ndarray:
        out = np.arange(n)
        self.shuffle(out)
        return out

    def choice(self, seq):
        return seq[self.randint(len(seq))]


def as_dense(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array (the DenseVector carrier)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    return arr


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array (the Matrix carrier)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SparseVector:
    """Sparse float vector: strictly increasing indices below ``dim`` and no
    stored zeros."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.shape != val.shape or idx.ndim != 1:
            raise DimensionError("indices and values must be 1-D and equal length")
        if self.dim < 0:
            raise ArgumentError("dim must be nonnegative")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ArgumentError("indices must lie in [0, dim)")
            if np.any(np.diff(idx) <= 0):
                raise ArgumentError("indices must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise NumericError("sparse values contain non-finite entries")
        if np.any(val == 0.0):
            raise ArgumentError("sparse vectors must not store zeros")

    @classmethod
    def from_pairs(cls, pairs: dict[int, float], dim: int) -> "SparseVector":
        items = sorted((i, v) for i, v in pairs.items() if v != 0.0)
        idx = np.array([i for i, _ in items], dtype=np.int64)
        val = np.array([v for _, v in items], dtype=np.float64)
        return cls(idx, val, dim)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values * self.values)))

    def scale(self, factor: float) -> "SparseVector":
        if factor == 0.0:
            return SparseVector(np.array([], dtype=np.int64), np.array([]), self.dim)
        return SparseVector(self.indices, self.values * factor, self.dim)


def stack_vectors(vectors, dim: int | None = None) -> np.ndarray:
    """Stack sparse/dense vectors into a read-only dense (N, dim) matrix."""
    rows = []
    for v in vectors:
        if isinstance(v, SparseVector):
            if dim is None:
                dim = v.dim
            elif v.dim != dim:
                raise DimensionError("mixed dimensions while stacking")
            rows.append(v.to_dense())
        else:
            arr = as_dense(v)
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise DimensionError("mixed dimensions while stacking")
            rows.append(arr)
    if not rows:
        raise ArgumentError("cannot stack an empty vector list")
    out = np.vstack(rows)
    out.flags.writeable = False
    return out


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two equal-length vectors.

    Returns 0.0 when either vector has zero norm so empty encodings flow
    through similarity-based classifiers without aborting.
    """
    va = as_dense(a, "a")
    vb = as_dense(b, "b")
    if va.shape != vb.shape:
        raise DimensionError(f"length mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na = math.sqrt(float(va @ va))
    nb = math.sqrt(float(vb @ vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(min(1.0, max(-1.0, float(va @ vb) / (na * nb))))


def sigmoid(x):
    """Numerically stable logistic function, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def softmax(z, axis: int = -1) -> np.ndarray:
    """Stable softmax along ``axis``; rows sum to 1."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - np.max(z, axis=axis, keepdims=True)
    ez = np.exp(shifted)
    return ez / np.sum(ez, axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# Truncated SVD
# ---------------------------------------------------------------------------

_RANDOMIZED_THRESHOLD = 2000
_JACOBI_MAX_SWEEPS = 100


def _jacobi_eigh(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi.

    Returns (eigenvalues descending, eigenvectors as columns).
    """
    A = G.copy()
    s = A.shape[0]
    Q = np.eye(s)
    if s == 1:
        return A.diagonal().copy(), Q
    fro = float(np.linalg.norm(A))
    if fro == 0.0:
        return np.zeros(s), Q
    tol = 1e-14 * fro

    def _off_norm() -> float:
        B = A.copy()
        np.fill_diagonal(B, 0.0)
        return float(np.linalg.norm(B))

    for sweep in range(_JACOBI_MAX_SWEEPS):
        if _off_norm() <= tol:
            break
        for p in range(s - 1):
            for q in range(p + 1, s):
                apq = A[p, q]
                if abs(apq) <= tol / s:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - sn * rq
                A[q, :] = sn * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - sn * cq
                A[:, q] = sn * cp + c * cq
                qp = Q[:, p].copy()
                qq = Q[:, q].copy()
                Q[:, p] = c * qp - sn * qq
                Q[:, q] = sn * qp + c * qq
    else:
        if _off_norm() > tol:
            raise ConvergenceError(
                f"Jacobi eigendecomposition did not converge in {_JACOBI_MAX_SWEEPS} sweeps",
                iterations=_JACOBI_MAX_SWEEPS,
            )
    w = A.diagonal().copy()
    order = np.argsort(-w, kind="stable")
    return w[order], Q[:, order]


def _complete_orthonormal(cols: list[np.ndarray], m: int, count: int) -> list[np.ndarray]:
    """Deterministically extend ``cols`` with ``count`` extra orthonormal
    columns by Gram-Schmidt against the canonical basis."""
    out = []
    basis = 0
    while len(out) < count and basis < m:
        v = np.zeros(m)
        v[basis] = 1.0
        basis += 1
        for u in cols + out:
            v -= (u @ v) * u
        nv = float(np.linalg.norm(v))
        if nv > 1e-10:
            out.append(v / nv)
    if len(out) < count:
        raise NumericError("failed to complete an orthonormal basis")
    return out


def _svd_from_gram(M: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m, n = M.shape
    if n <= m:
        w, Q = _jacobi_eigh(M.T @ M)
        # eigenvalues at the Gram noise floor are indistinguishable from zero
        null_tol = n * np.finfo(np.float64).eps * max(float(w[0]), 0.0)
        sing = np.sqrt(np.maximum(w[:k], 0.0))
        sing[w[:k] <= null_tol] = 0.0
        V = Q[:, :k]
        ucols: list[np.ndarray] = []
        pending: list[int] = []
        for i in range(k):
            if sing[i] > 0.0:
                ucols.append((M @ V[:, i]) / sing[i])
            else:
                ucols.append(None)  # type: ignore[arg-type]
                pending.append(i)
        if pending:
            fillers = _complete_orthonormal([u for u in ucols if u is not None], m, len(pending))
            for i, f in zip(pending, fillers):
                ucols[i] = f
        U = np.column_stack(ucols)
        return U, sing, V
    flipped_u, sing, flipped_v = _svd_from_gram(M.T, k)
    return flipped_v, sing, flipped_u


def _svd_randomized(M: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m, n = M.shape
    rng = RngStream(derive_seed(0x5BD1E995, m, n, k))
    width = min(k + 10, min(m, n))
    omega = rng.normal((n, width))
    Y = M @ omega
    for _ in range(2):
        Y = M @ (M.T @ Y)
    Q, _ = np.linalg.qr(Y)
    B = Q.T @ M
    Ub, sing, V = _svd_from_gram(B, k)
    return Q @ Ub, sing, V


def truncated_svd(M, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-k singular value decomposition M ~= U @ diag(S) @ V.T.

    U is (m, k), S the k leading singular values in nonincreasing order, and
    V is (n, k); U and V have orthonormal columns. Desk-scale matrices go
    through a cyclic-Jacobi eigendecomposition of the smaller Gram matrix;
    matrices beyond 2000 rows or columns use seeded randomized subspace
    iteration.
    """
    A = as_matrix(M, "M")
    m, n = A.shape
    if k < 1 or k > min(m, n):
        raise ArgumentError(f"k={k} out of range for a {m}x{n} matrix")
    if max(m, n) > _RANDOMIZED_THRESHOLD:
        return _svd_randomized(A, k)
    return _svd_from_gram(A, k)


def finite_diff_grad(f, theta, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a vector."""
    t = as_dense(theta, "theta").copy()
    grad = np.empty_like(t)
    for i in range(t.shape[0]):
        orig = t[i]
        t[i] = orig + h
        fp = float(f(t))
        t[i] = orig - h
        fm = float(f(t))
        t[i] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericError(f"non-finite function value at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def max_relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    """max_i |a_i - n_i| / max(|a_i|, |n_i|, floor); the gradient-check metric."""
    a = as_dense(analytic, "analytic")
    b = as_dense(numeric, "numeric")
    if a.shape != b.shape:
        raise DimensionError("gradient shapes differ")
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
