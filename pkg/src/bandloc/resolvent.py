"""Resolvent entries of block-tridiagonal matrices by Schur-complement chains.

For ``X - lambda`` with diagonal blocks ``V_k`` and couplings ``T_k`` the
forward chain is::

    Gamma_1 = V_1 - lambda
    Gamma_k = V_k - lambda - T_{k-1}^† Gamma_{k-1}^{-1} T_{k-1}

and ``Gamma_k^{-1}`` is the corner block of the resolvent of the top-left
``k``-block truncation.  The backward chain ``Ghat`` runs the same recursion
from the bottom.  The two meet in the diagonal blocks::

    G(j, j)^{-1} = Gamma_j - T_j Ghat_{j+1}^{-1} T_j^†

and off-diagonal blocks are products (``i < j``)::

    G(i, j) = (-1)^{j-i} Gamma_i^{-1} T_i ... Gamma_{j-1}^{-1} T_{j-1} G(j, j)

Every ``Gamma_k`` is factorized once: the solve ``Gamma_k^{-1} T_k`` feeds both
the next recursion step and the product formula.

Block indices ``1..n`` and site indices ``1..N`` are 1-based in the public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .ensemble import BlockBandMatrix, Symmetry, to_dense

__all__ = [
    "COND_LIMIT",
    "DENSE_CAP",
    "SingularBlock",
    "SingularShift",
    "GammaChain",
    "ResolventEntry",
    "Resolvent",
    "forward_gamma_chain",
    "backward_ghat_chain",
    "diag_block",
    "offdiag_block",
    "entry",
    "dense_resolvent_oracle",
    "reverse_blocks",
    "batched_chains",
    "batched_column",
]

COND_LIMIT = 1e12
DENSE_CAP = 2048


class SingularBlock(ArithmeticError):
    """A Schur complement is numerically singular (condition estimate above the limit)."""

    def __init__(self, k: int, cond: float, direction: str = "forward"):
        self.k = k
        self.cond = cond
        self.direction = direction
        super().__init__(f"{direction} block {k} is numerically singular (cond ~ {cond:.3g})")


class SingularShift(ArithmeticError):
    """The dense matrix ``X - lambda`` is numerically singular."""


def _herm(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def _ct(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def _cond_hermitian(A: np.ndarray) -> np.ndarray:
    """2-norm condition numbers of (stacks of) Hermitian matrices; inf if singular or non-finite."""
    A = np.asarray(A)
    finite = np.isfinite(A).all(axis=(-1, -2))
    safe = np.where(finite[..., None, None], A, 0.0)
    ev = np.abs(np.linalg.eigvalsh(safe))
    hi = ev.max(axis=-1)
    lo = ev.min(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(lo > 0, hi / np.where(lo > 0, lo, 1.0), np.inf)
    return np.where(finite, c, np.inf)


def _hsolve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``A X = B`` with a symmetric/Hermitian indefinite factorization."""
    assume = "her" if np.iscomplexobj(A) else "sym"
    return scipy.linalg.solve(A, B, assume_a=assume, check_finite=False)


def _hinv_apply(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape[-1] == 1:
        return B / A[0, 0]
    return _hsolve(A, B)


# ---------------------------------------------------------------------------
# single-matrix chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GammaChain:
    """Schur complements at a fixed real spectral parameter.

    ``gamma[k - 1]`` is ``Gamma_k`` (forward) or ``Ghat_k`` (backward).
    ``factors`` caches ``Gamma_k^{-1} T_k`` for the forward chain and
    ``Ghat_{k+1}^{-1} T_k^†`` for the backward chain (length ``n - 1``).
    """

    lam: float
    gamma: np.ndarray
    cond: np.ndarray
    direction: str
    factors: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.gamma, self.cond, self.factors):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    def corner_inverse(self, k: int) -> np.ndarray:
        """``Gamma_k^{-1}``, the corner block of the truncated resolvent."""
        g = self.gamma[k - 1]
        return _hinv_apply(g, np.eye(g.shape[0], dtype=g.dtype))


def _check(cond: float, k: int, direction: str):
    if not cond <= COND_LIMIT:
        raise SingularBlock(k, cond, direction)


def _scalar_forward(v: np.ndarray, t: np.ndarray, lam: float):
    # W = 1: gamma_k = v_k - lam - |t_{k-1}|^2 / gamma_{k-1}, evaluated scalar-wise
    n = v.shape[0]
    g = np.empty(n, dtype=v.dtype)
    g[0] = v[0] - lam
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(1, n):
            g[k] = v[k] - lam - np.abs(t[k - 1]) ** 2 / g[k - 1]
    return g


def forward_gamma_chain(M: BlockBandMatrix, lam: float) -> GammaChain:
    """Forward Schur-complement chain ``Gamma_1..Gamma_n`` at ``lam``.

    Raises
    ------
    SingularBlock
        If some ``Gamma_k`` has condition estimate above ``COND_LIMIT``.
    """
    lam = float(lam)
    V, T = M.V, M.T
    n, W = V.shape[0], V.shape[-1]
    I = np.eye(W, dtype=V.dtype)
    gamma = np.empty_like(V)
    factors = np.empty_like(T)
    cond = np.empty(n)
    if W == 1:
        g = _scalar_forward(V[:, 0, 0], T[:, 0, 0], lam)
        gamma[:, 0, 0] = g
        for k in range(n):
            c = 1.0 if g[k] != 0 and np.isfinite(g[k]) else np.inf
            _check(c, k + 1, "forward")
            cond[k] = c
            if k < n - 1:
                factors[k] = T[k] / g[k]
        return GammaChain(lam, gamma, cond, "forward", factors)
    gamma[0] = V[0] - lam * I
    for k in range(n):
        cond[k] = float(_cond_hermitian(gamma[k]))
        _check(cond[k], k + 1, "forward")
        if k == n - 1:
            break
        factors[k] = _hsolve(gamma[k], T[k])
        gamma[k + 1] = _herm(V[k + 1] - lam * I - _ct(T[k]) @ factors[k])
    return GammaChain(lam, gamma, cond, "forward", factors)


def reverse_blocks(M: BlockBandMatrix) -> BlockBandMatrix:
    """The matrix with block order reversed: ``V_n..V_1`` and couplings ``T_{n-1}^†..T_1^†``."""
    return BlockBandMatrix(M.spec, M.V[::-1].copy(), _ct(M.T[::-1]).copy())


def backward_ghat_chain(M: BlockBandMatrix, lam: float) -> GammaChain:
    """Backward chain: ``Ghat_n = V_n - lam`` and
    ``Ghat_k = V_k - lam - T_k Ghat_{k+1}^{-1} T_k^†``."""
    try:
        fwd = forward_gamma_chain(reverse_blocks(M), lam)
    except SingularBlock as exc:
        raise SingularBlock(M.spec.n + 1 - exc.k, exc.cond, "backward") from None
    # the reversed forward factor Gamma'^{-1} T' equals Ghat^{-1} T^†
    gamma = fwd.gamma[::-1].copy()
    cond = fwd.cond[::-1].copy()
    factors = fwd.factors[::-1].copy()
    return GammaChain(float(lam), gamma, cond, "backward", factors)


# ---------------------------------------------------------------------------
# resolvent blocks and entries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResolventEntry:
    value: complex
    x: int
    y: int
    lam: float
    max_cond: float


class Resolvent:
    """Blocks and entries of ``(X - lam)^{-1}`` from the two chains.

    The chains are built once at construction; blocks are computed on demand
    and cached.
    """

    def __init__(self, M: BlockBandMatrix, lam: float):
        self.M = M
        self.lam = float(lam)
        self.forward = forward_gamma_chain(M, lam)
        self.backward = backward_ghat_chain(M, lam) if M.spec.n > 1 else None
        self._D: dict[int, np.ndarray] = {}
        self._Mj: dict[int, np.ndarray] = {}
        self._cond_M: dict[int, float] = {}

    @property
    def n(self) -> int:
        return self.M.spec.n

    @property
    def W(self) -> int:
        return self.M.spec.W

    @property
    def max_cond(self) -> float:
        c = float(self.forward.cond.max())
        if self.backward is not None:
            c = max(c, float(self.backward.cond.max()))
        if self._cond_M:
            c = max(c, max(self._cond_M.values()))
        return c

    def _check_block(self, j: int):
        if not 1 <= j <= self.n:
            raise IndexError(f"block index {j} outside 1..{self.n}")

    def schur(self, j: int) -> np.ndarray:
        """``G(j, j)^{-1} = Gamma_j - T_j Ghat_{j+1}^{-1} T_j^†``."""
        self._check_block(j)
        if j not in self._Mj:
            g = self.forward.gamma[j - 1]
            if j == self.n:
                Mj = g
                c = float(self.forward.cond[j - 1])
            else:
                R = self.backward.factors[j - 1]  # Ghat_{j+1}^{-1} T_j^†
                if self.W == 1:
                    Mj = g - self.M.T[j - 1] * R
                    c = 1.0 if Mj[0, 0] != 0 and np.isfinite(Mj[0, 0]) else np.inf
                else:
                    Mj = _herm(g - self.M.T[j - 1] @ R)
                    c = float(_cond_hermitian(Mj))
                _check(c, j, "diagonal")
            self._Mj[j] = Mj
            self._cond_M[j] = c
        return self._Mj[j]

    def diag_block(self, j: int) -> np.ndarray:
        if j not in self._D:
            Mj = self.schur(j)
            self._D[j] = _hinv_apply(Mj, np.eye(self.W, dtype=Mj.dtype))
        return self._D[j]

    def block(self, i: int, j: int) -> np.ndarray:
        """Block ``G(i, j)``; for ``i > j`` the adjoint of ``G(j, i)``."""
        self._check_block(i)
        self._check_block(j)
        if i > j:
            return _ct(self.block(j, i))
        out = self.diag_block(j)
        # right-to-left accumulation of Gamma_i^{-1} T_i ... Gamma_{j-1}^{-1} T_{j-1} D_j
        for k in range(j - 1, i - 1, -1):
            out = self.forward.factors[k - 1] @ out
        return out if (j - i) % 2 == 0 else -out

    def entry(self, x: int, y: int) -> ResolventEntry:
        N = self.M.N
        if not (1 <= x <= N and 1 <= y <= N):
            raise IndexError(f"site indices must lie in 1..{N}")
        W = self.W
        bi, oi = divmod(x - 1, W)
        bj, oj = divmod(y - 1, W)
        val = self.block(bi + 1, bj + 1)[oi, oj]
        if self.M.spec.symmetry is Symmetry.REAL and np.iscomplexobj(val):
            val = val.real
        return ResolventEntry(val.item() if hasattr(val, "item") else val, x, y, self.lam, self.max_cond)

    def dense(self) -> np.ndarray:
        """All blocks assembled; intended for small matrices and tests."""
        n, W = self.n, self.W
        G = np.empty((n * W, n * W), dtype=self.M.V.dtype)
        for i in range(1, n + 1):
            for j in range(i, n + 1):
                B = self.block(i, j)
                G[(i - 1) * W:i * W, (j - 1) * W:j * W] = B
                if i != j:
                    G[(j - 1) * W:j * W, (i - 1) * W:i * W] = _ct(B)
        return G


def diag_block(M: BlockBandMatrix, lam: float, j: int) -> np.ndarray:
    """``G(j, j) = (Gamma_j - T_j Ghat_{j+1}^{-1} T_j^†)^{-1}``."""
    return Resolvent(M, lam).diag_block(j)


def offdiag_block(M: BlockBandMatrix, lam: float, i: int, j: int) -> np.ndarray:
    """``G(i, j)`` by the product formula (adjoint symmetry for ``i > j``)."""
    return Resolvent(M, lam).block(i, j)


def entry(M: BlockBandMatrix, lam: float, x: int, y: int) -> ResolventEntry:
    """``<e_x, (X - lam)^{-1} e_y>`` for 1-based sites ``x, y``."""
    return Resolvent(M, lam).entry(x, y)


def dense_resolvent_oracle(M, lam: float, cap: int = DENSE_CAP) -> np.ndarray:
    """Full inverse of ``X - lam`` by a dense symmetric-indefinite solve.

    ``M`` may be a :class:`BlockBandMatrix` or a dense Hermitian array.
    """
    X = to_dense(M) if isinstance(M, BlockBandMatrix) else np.asarray(M)
    N = X.shape[0]
    if N > cap:
        raise ValueError(f"dense oracle limited to N <= {cap}, got {N}")
    A = X - float(lam) * np.eye(N, dtype=X.dtype)
    assume = "her" if np.iscomplexobj(A) else "sym"
    try:
        with np.errstate(all="raise"):
            G = scipy.linalg.solve(A, np.eye(N, dtype=A.dtype), assume_a=assume)
    except (np.linalg.LinAlgError, FloatingPointError, scipy.linalg.LinAlgWarning) as exc:
        raise SingularShift(f"X - {lam} is numerically singular") from exc
    if not np.isfinite(G).all():
        raise SingularShift(f"X - {lam} is numerically singular")
    return G


# ---------------------------------------------------------------------------
# batched kernel for Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class BatchChains:
    """Chains for a stack of ``S`` samples (0-based block axis).

    ``S_fwd[:, k] = Gamma_k^{-1} T_k`` and ``R_bwd[:, k] = Ghat_{k+1}^{-1} T_k^†``;
    ``Mdiag[:, j] = G(j, j)^{-1}``.  ``ok`` marks samples whose every block
    passed the conditioning check.
    """

    S_fwd: np.ndarray
    R_bwd: np.ndarray
    Mdiag: np.ndarray
    ok: np.ndarray
    max_cond: np.ndarray


def _batched_solve(A: np.ndarray, B: np.ndarray, ok: np.ndarray) -> np.ndarray:
    """Stacked LU solves; singular members are marked in ``ok`` and left as NaN."""
    try:
        return np.linalg.solve(A, B)
    except np.linalg.LinAlgError:
        out = np.full(np.broadcast_shapes(A.shape[:-2], B.shape[:-2]) + B.shape[-2:], np.nan,
                      dtype=np.result_type(A, B))
        for s in range(A.shape[0]):
            try:
                out[s] = np.linalg.solve(A[s], B[s])
            except np.linalg.LinAlgError:
                ok[s] = False
        return out


def batched_chains(V: np.ndarray, T: np.ndarray, lam: float, cond_limit: float = COND_LIMIT) -> BatchChains:
    """Forward and backward chains for stacked blocks ``V (S, n, W, W)``, ``T (S, n-1, W, W)``."""
    S, n, W = V.shape[0], V.shape[1], V.shape[-1]
    lam = float(lam)
    ok = np.ones(S, dtype=bool)
    with np.errstate(all="ignore"):
        if W == 1:
            v = V[:, :, 0, 0]
            t = T[:, :, 0, 0]
            t2 = np.abs(t) ** 2
            g = np.empty_like(v)
            gh = np.empty_like(v)
            g[:, 0] = v[:, 0] - lam
            for k in range(1, n):
                g[:, k] = v[:, k] - lam - t2[:, k - 1] / g[:, k - 1]
            gh[:, n - 1] = v[:, n - 1] - lam
            for k in range(n - 2, -1, -1):
                gh[:, k] = v[:, k] - lam - t2[:, k] / gh[:, k + 1]
            Sf = (t / g[:, :-1])[..., None, None]
            Rb = (np.conj(t) / gh[:, 1:])[..., None, None]
            m = g.copy()
            m[:, :-1] = g[:, :-1] - t2 / gh[:, 1:]
            vals = np.concatenate([g, gh, m], axis=1)
            bad = ~np.isfinite(vals) | (vals == 0)
            ok &= ~bad.any(axis=1)
            cond = np.where(ok, 1.0, np.inf)
            return BatchChains(Sf, Rb, m[..., None, None], ok, cond)

        I = np.eye(W, dtype=V.dtype)
        Th = _ct(T)
        gam = np.empty_like(V)
        ghat = np.empty_like(V)
        Sf = np.empty_like(T)
        Rb = np.empty_like(T)
        gam[:, 0] = V[:, 0] - lam * I
        for k in range(n - 1):
            Sf[:, k] = _batched_solve(gam[:, k], T[:, k], ok)
            gam[:, k + 1] = _herm(V[:, k + 1] - lam * I - Th[:, k] @ Sf[:, k])
        ghat[:, n - 1] = V[:, n - 1] - lam * I
        for k in range(n - 2, -1, -1):
            Rb[:, k] = _batched_solve(ghat[:, k + 1], Th[:, k], ok)
            ghat[:, k] = _herm(V[:, k] - lam * I - T[:, k] @ Rb[:, k])
        Md = gam.copy()
        if n > 1:
            Md[:, :-1] = _herm(gam[:, :-1] - T @ Rb)
        cond = np.concatenate([_cond_hermitian(gam), _cond_hermitian(ghat), _cond_hermitian(Md)], axis=1).max(axis=1)
    ok &= cond <= cond_limit
    return BatchChains(Sf, Rb, Md, ok, cond)


def batched_column(ch: BatchChains, x: int) -> np.ndarray:
    """Resolvent column ``G(:, x)`` for every sample, shape ``(S, N)``.

    ``x`` is a 1-based site.  Entries of samples with ``ok == False`` are
    meaningless.  Rows are ``G(y, x)``; ``|G(x, y)| = |G(y, x)|`` by adjoint
    symmetry.
    """
    Sn, n, W = ch.Mdiag.shape[0], ch.Mdiag.shape[1], ch.Mdiag.shape[-1]
    bi, xo = divmod(x - 1, W)
    dtype = np.result_type(ch.Mdiag, ch.S_fwd)
    col = np.empty((Sn, n, W), dtype=dtype)
    with np.errstate(all="ignore"):
        if W == 1:
            c = 1.0 / ch.Mdiag[:, bi, 0, 0]
            col[:, bi, 0] = c
            cur = c
            for j in range(bi - 1, -1, -1):
                cur = -ch.S_fwd[:, j, 0, 0] * cur
                col[:, j, 0] = cur
            cur = c
            for j in range(bi + 1, n):
                cur = -ch.R_bwd[:, j - 1, 0, 0] * cur
                col[:, j, 0] = cur
            return col.reshape(Sn, n * W)
        e = np.zeros((Sn, W, 1), dtype=dtype)
        e[:, xo, 0] = 1.0
        ok = np.ones(Sn, dtype=bool)
        c = _batched_solve(ch.Mdiag[:, bi], e, ok)
        col[:, bi] = c[..., 0]
        # above the anchor: G(j, i) = -Gamma_j^{-1} T_j G(j+1, i)
        cur = c
        for j in range(bi - 1, -1, -1):
            cur = -(ch.S_fwd[:, j] @ cur)
            col[:, j] = cur[..., 0]
        # below the anchor: G(j, i) = -Ghat_j^{-1} T_{j-1}^† G(j-1, i)
        cur = c
        for j in range(bi + 1, n):
            cur = -(ch.R_bwd[:, j - 1] @ cur)
            col[:, j] = cur[..., 0]
    return col.reshape(Sn, n * W)
