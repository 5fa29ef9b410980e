"""Random block-band ensembles.

A band matrix of width ``W`` and size ``N = n W`` is stored as ``n``
Hermitian diagonal blocks ``V_1..V_n`` and ``n - 1`` coupling blocks
``T_1..T_{n-1}``::

    X = [[V_1,  T_1,            ],
         [T_1^†, V_2,  T_2,      ],
         [      T_2^†, V_3, ...  ]]

Entry conventions (``d`` diagonal, ``a`` off-diagonal, before the ``1/sqrt(W)``
scaling of a Wigner block): ``d ~ N(0, 1)``; real ``a ~ N(0, 1)``; complex
``a = (x + i y)/sqrt(2)`` with ``x, y ~ N(0, 1)``, so ``E|a|^2 = 1``.

Site and block indices in the public API are 1-based.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np
from scipy import integrate, special

from .rng import TAG_MATRIX, map_chunks, substream

__all__ = [
    "Symmetry",
    "GaussianWigner",
    "HolderWigner",
    "BoxWigner",
    "ScalarDensity",
    "GaussianTriangular",
    "UniformTriangular",
    "Deterministic",
    "BandMatrixSpec",
    "BlockBandMatrix",
    "DegenerateDensity",
    "NormSummary",
    "gaussian_band_spec",
    "sample_gaussian_band",
    "sample_block_band",
    "sample_batch",
    "to_dense",
    "dense_batch",
    "density_ratio",
    "operator_norm_statistic",
    "bulk_row_variance",
    "law_from_dict",
    "law_to_dict",
]


class Symmetry(enum.Enum):
    REAL = 1
    COMPLEX = 2

    @property
    def beta(self) -> int:
        return self.value

    @property
    def dtype(self):
        return np.float64 if self is Symmetry.REAL else np.complex128

    @classmethod
    def parse(cls, value: Union[str, int, "Symmetry"]) -> "Symmetry":
        if isinstance(value, Symmetry):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower()
        if key in ("real", "r", "goe", "1"):
            return cls.REAL
        if key in ("complex", "c", "gue", "2"):
            return cls.COMPLEX
        raise ValueError(f"unknown symmetry class {value!r}")


class DegenerateDensity(ZeroDivisionError):
    """The reference block of a density ratio lies outside the support."""


# ---------------------------------------------------------------------------
# entry-level helpers
# ---------------------------------------------------------------------------

def _complex_unit_normal(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)


def _disk(rng: np.random.Generator, shape, radius: float) -> np.ndarray:
    u = rng.random(shape + (2,))
    return radius * np.sqrt(u[..., 0]) * np.exp(2j * np.pi * u[..., 1])


def _wigner_assemble(d: np.ndarray, a: np.ndarray, W: int) -> np.ndarray:
    """Hermitian blocks from diagonal draws ``d`` (count, W) and a full draw array ``a``."""
    upper = np.triu(a, k=1)
    V = upper + np.conj(np.swapaxes(upper, -1, -2))
    idx = np.arange(W)
    V[..., idx, idx] = d
    return V / math.sqrt(W)


# ---------------------------------------------------------------------------
# diagonal-block laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianWigner:
    """GOE/GUE blocks.

    ``normalization="unit"`` uses unit-variance entries.  ``"trace"`` uses the
    invariant weight ``exp(-beta W tr V^2)``, i.e. ``Var d = 1/(2 beta)`` and
    ``E|a|^2 = 1/4``.
    """

    normalization: str = "unit"

    def __post_init__(self):
        if self.normalization not in ("unit", "trace"):
            raise ValueError("normalization must be 'unit' or 'trace'")

    kind = "gaussian_wigner"

    def draw(self, rng, W: int, sym: Symmetry, count: int) -> np.ndarray:
        d = rng.standard_normal((count, W))
        if sym is Symmetry.REAL:
            a = rng.standard_normal((count, W, W))
        else:
            a = _complex_unit_normal(rng, (count, W, W))
        if self.normalization == "trace":
            d = d / math.sqrt(2.0 * sym.beta)
            a = a / 2.0
        return _wigner_assemble(d, a, W)

    def log_h(self, d, sym: Symmetry):
        if self.normalization == "trace":
            return -sym.beta * d**2
        return -0.5 * d**2

    def log_g(self, a, sym: Symmetry):
        if self.normalization == "trace":
            return -2.0 * sym.beta * np.abs(a) ** 2
        if sym is Symmetry.REAL:
            return -0.5 * a**2
        return -np.abs(a) ** 2

    def diag_pdf(self, x, sym: Symmetry = Symmetry.COMPLEX):
        var = 1.0 / (2.0 * sym.beta) if self.normalization == "trace" else 1.0
        return np.exp(-0.5 * np.asarray(x) ** 2 / var) / math.sqrt(2 * math.pi * var)

    def sup_h(self, sym: Symmetry) -> float:
        var = 1.0 / (2.0 * sym.beta) if self.normalization == "trace" else 1.0
        return 1.0 / math.sqrt(2 * math.pi * var)

    def second_moments(self, sym: Symmetry) -> tuple[float, float]:
        """``(E d^2, E|a|^2)``."""
        if self.normalization == "trace":
            return 1.0 / (2.0 * sym.beta), 0.25
        return 1.0, 1.0


@dataclass(frozen=True)
class HolderWigner:
    """Entries with density ``c_alpha exp(-|x|^alpha)``, ``0 < alpha <= 1``."""

    alpha: float
    c_real: float = field(init=False, repr=False, compare=False)
    c_complex: float = field(init=False, repr=False, compare=False)

    kind = "holder_wigner"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("Holder exponent alpha must lie in (0, 1]")
        al = self.alpha
        # normalizations by quadrature; tested against the Gamma-function closed form
        zr = 2.0 * integrate.quad(lambda x: math.exp(-(x**al)), 0.0, np.inf)[0]
        zc = 2.0 * math.pi * integrate.quad(lambda r: r * math.exp(-(r**al)), 0.0, np.inf)[0]
        object.__setattr__(self, "c_real", 1.0 / zr)
        object.__setattr__(self, "c_complex", 1.0 / zc)

    def _radial(self, rng, shape, dim: int) -> np.ndarray:
        # |x|^alpha ~ Gamma(dim/alpha)
        return rng.gamma(dim / self.alpha, 1.0, size=shape) ** (1.0 / self.alpha)

    def draw(self, rng, W: int, sym: Symmetry, count: int) -> np.ndarray:
        d = self._radial(rng, (count, W), 1) * rng.choice([-1.0, 1.0], size=(count, W))
        if sym is Symmetry.REAL:
            a = self._radial(rng, (count, W, W), 1) * rng.choice([-1.0, 1.0], size=(count, W, W))
        else:
            r = self._radial(rng, (count, W, W), 2)
            a = r * np.exp(2j * np.pi * rng.random((count, W, W)))
        return _wigner_assemble(d, a, W)

    def log_h(self, d, sym):
        return -np.abs(d) ** self.alpha

    def log_g(self, a, sym):
        return -np.abs(a) ** self.alpha

    def diag_pdf(self, x, sym: Symmetry = Symmetry.COMPLEX):
        return self.c_real * np.exp(-np.abs(np.asarray(x)) ** self.alpha)

    def sup_h(self, sym) -> float:
        return self.c_real

    def second_moments(self, sym: Symmetry) -> tuple[float, float]:
        al = self.alpha
        ed2 = math.exp(special.gammaln(3 / al) - special.gammaln(1 / al))
        if sym is Symmetry.REAL:
            return ed2, ed2
        return ed2, math.exp(special.gammaln(4 / al) - special.gammaln(2 / al))


@dataclass(frozen=True)
class BoxWigner:
    """Uniform entries: ``|d| < D`` on the diagonal, ``|a| < A`` off it (disk if complex)."""

    D: float = 1.0
    A: float = 1.0

    kind = "box_wigner"

    def __post_init__(self):
        if not (self.D > 0 and self.A > 0):
            raise ValueError("box half-widths D and A must be positive")

    def draw(self, rng, W: int, sym: Symmetry, count: int) -> np.ndarray:
        d = rng.uniform(-self.D, self.D, size=(count, W))
        if sym is Symmetry.REAL:
            a = rng.uniform(-self.A, self.A, size=(count, W, W))
        else:
            a = _disk(rng, (count, W, W), self.A)
        return _wigner_assemble(d, a, W)

    def log_h(self, d, sym):
        return np.where(np.abs(d) < self.D, 0.0, -np.inf)

    def log_g(self, a, sym):
        return np.where(np.abs(a) < self.A, 0.0, -np.inf)

    def diag_pdf(self, x, sym: Symmetry = Symmetry.COMPLEX):
        return np.where(np.abs(np.asarray(x)) < self.D, 0.5 / self.D, 0.0)

    def sup_h(self, sym) -> float:
        return 0.5 / self.D

    def second_moments(self, sym: Symmetry) -> tuple[float, float]:
        if sym is Symmetry.REAL:
            return self.D**2 / 3.0, self.A**2 / 3.0
        return self.D**2 / 3.0, self.A**2 / 2.0


@dataclass(frozen=True)
class ScalarDensity:
    """A named scalar law for ``W = 1`` chains: gaussian, cauchy or uniform(a, b)."""

    name: str = "gaussian"
    a: float = -1.0
    b: float = 1.0

    kind = "scalar"

    def __post_init__(self):
        if self.name not in ("gaussian", "cauchy", "uniform"):
            raise ValueError(f"unknown scalar law {self.name!r}")
        if self.name == "uniform" and not self.b > self.a:
            raise ValueError("uniform law needs a < b")

    def draw(self, rng, W: int, sym: Symmetry, count: int) -> np.ndarray:
        if W != 1:
            raise ValueError("scalar laws are defined for W = 1 only")
        if self.name == "gaussian":
            x = rng.standard_normal(count)
        elif self.name == "cauchy":
            x = rng.standard_cauchy(count)
        else:
            x = rng.uniform(self.a, self.b, size=count)
        return x.reshape(count, 1, 1).astype(sym.dtype)

    def diag_pdf(self, x, sym: Symmetry = Symmetry.COMPLEX):
        x = np.asarray(x, dtype=float)
        if self.name == "gaussian":
            return np.exp(-0.5 * x**2) / math.sqrt(2 * math.pi)
        if self.name == "cauchy":
            return 1.0 / (math.pi * (1.0 + x**2))
        return np.where((x > self.a) & (x < self.b), 1.0 / (self.b - self.a), 0.0)

    def log_h(self, d, sym):
        with np.errstate(divide="ignore"):
            return np.log(self.diag_pdf(d))

    def log_g(self, a, sym):
        return np.where(np.asarray(a) == 0, 0.0, -np.inf)

    def sup_h(self, sym) -> float:
        return float(self.diag_pdf(0.0 if self.name != "uniform" else 0.5 * (self.a + self.b)))

    def second_moments(self, sym: Symmetry) -> tuple[float, float]:
        if self.name == "gaussian":
            return 1.0, 0.0
        if self.name == "cauchy":
            return math.inf, 0.0
        return (self.a**2 + self.a * self.b + self.b**2) / 3.0, 0.0


# ---------------------------------------------------------------------------
# coupling-block laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianTriangular:
    """Strictly lower-triangular blocks with unit Gaussian entries, scaled by ``1/sqrt(W)``."""

    kind = "gaussian_triangular"

    def draw(self, rng, W: int, sym: Symmetry, count: int) -> np.ndarray:
        if sym is Symmetry.REAL:
            t = rng.standard_normal((count, W, W))
        else:
            t = _complex_unit_normal(rng, (count, W, W))
        return np.tril(t, k=-1) / math.sqrt(W)

    def second_moment(self, sym) -> float:
        return 1.0

    def row_weight(self, W: int, sym) -> float:
        return (W - 1) / (2.0 * W)


@dataclass(frozen=True)
class UniformTriangular:
    """Strictly lower-triangular blocks, entries uniform in ``[-h, h]`` (disk if complex)."""

    half_width: float = 1.0

    kind = "uniform_triangular"

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    def draw(self, rng, W: int, sym: Symmetry, count: int) -> np.ndarray:
        h = self.half_width
        if sym is Symmetry.REAL:
            t = rng.uniform(-h, h, size=(count, W, W))
        else:
            t = _disk(rng, (count, W, W), h)
        return np.tril(t, k=-1) / math.sqrt(W)

    def second_moment(self, sym) -> float:
        return self.half_width**2 / (3.0 if sym is Symmetry.REAL else 2.0)

    def row_weight(self, W: int, sym) -> float:
        return (W - 1) / (2.0 * W) * self.second_moment(sym)


@dataclass(frozen=True, eq=False)
class Deterministic:
    """Every coupling block equals ``payload``."""

    payload: np.ndarray
    norm: float = field(init=False)

    kind = "deterministic"

    def __post_init__(self):
        p = np.array(self.payload, dtype=complex if np.iscomplexobj(self.payload) else float, ndmin=2)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("deterministic payload must be a square matrix")
        p.setflags(write=False)
        object.__setattr__(self, "payload", p)
        object.__setattr__(self, "norm", float(np.linalg.norm(p, 2)))

    @classmethod
    def identity(cls, W: int) -> "Deterministic":
        return cls(np.eye(W))

    def __eq__(self, other):
        return isinstance(other, Deterministic) and np.array_equal(self.payload, other.payload)

    def __hash__(self):
        return hash(self.payload.tobytes())

    def draw(self, rng, W: int, sym: Symmetry, count: int) -> np.ndarray:
        if self.payload.shape != (W, W):
            raise ValueError(f"payload shape {self.payload.shape} does not match W={W}")
        if sym is Symmetry.REAL and np.iscomplexobj(self.payload):
            raise ValueError("complex payload in a real ensemble")
        return np.broadcast_to(self.payload, (count, W, W)).astype(sym.dtype)

    def row_weight(self, W: int, sym) -> float:
        return float(np.sum(np.abs(self.payload) ** 2)) / W


DiagonalBlockLaw = Union[GaussianWigner, HolderWigner, BoxWigner, ScalarDensity]
OffDiagonalBlockLaw = Union[GaussianTriangular, UniformTriangular, Deterministic]


# ---------------------------------------------------------------------------
# specs and matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BandMatrixSpec:
    W: int
    n: int
    symmetry: Symmetry = Symmetry.COMPLEX
    diag_law: Any = field(default_factory=GaussianWigner)
    offdiag_law: Any = field(default_factory=GaussianTriangular)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "symmetry", Symmetry.parse(self.symmetry))
        if int(self.W) != self.W or self.W < 1:
            raise ValueError(f"block width W must be a positive integer, got {self.W}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"block count n must be a positive integer, got {self.n}")
        if isinstance(self.diag_law, ScalarDensity) and self.W != 1:
            raise ValueError("scalar diagonal laws require W = 1")
        if isinstance(self.offdiag_law, Deterministic) and self.offdiag_law.payload.shape != (self.W, self.W):
            raise ValueError("deterministic coupling payload must be W x W")

    @property
    def N(self) -> int:
        return self.n * self.W

    @classmethod
    def from_size(cls, W: int, N: int, **kw) -> "BandMatrixSpec":
        if W > N:
            raise ValueError(f"band width W={W} exceeds matrix size N={N}")
        if N % W:
            raise ValueError(f"N={N} is not a multiple of W={W}")
        return cls(W=W, n=N // W, **kw)

    def replace(self, **kw) -> "BandMatrixSpec":
        d = dict(W=self.W, n=self.n, symmetry=self.symmetry, diag_law=self.diag_law,
                 offdiag_law=self.offdiag_law, seed=self.seed)
        d.update(kw)
        return BandMatrixSpec(**d)

    @property
    def dtype(self):
        if self.symmetry is Symmetry.COMPLEX:
            return np.complex128
        return np.float64

    def to_dict(self) -> dict:
        return {
            "W": self.W,
            "n": self.n,
            "symmetry": self.symmetry.name.lower(),
            "diag_law": law_to_dict(self.diag_law),
            "offdiag_law": law_to_dict(self.offdiag_law),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BandMatrixSpec":
        W = int(d["W"])
        if "n" in d:
            n = int(d["n"])
        elif "N" in d:
            N = int(d["N"])
            if N % W:
                raise ValueError(f"N={N} is not a multiple of W={W}")
            n = N // W
        else:
            raise ValueError("ensemble needs either n or N")
        return cls(
            W=W,
            n=n,
            symmetry=d.get("symmetry", "complex"),
            diag_law=law_from_dict(d.get("diag_law", {"kind": "gaussian_wigner"}), W),
            offdiag_law=law_from_dict(d.get("offdiag_law", {"kind": "gaussian_triangular"}), W),
            seed=int(d.get("seed", 0)),
        )


def gaussian_band_spec(W: int, N: int, seed: int = 0, symmetry="complex") -> BandMatrixSpec:
    """The Gaussian band ensemble of width ``W`` and size ``N``."""
    return BandMatrixSpec.from_size(W, N, symmetry=symmetry, diag_law=GaussianWigner(),
                                    offdiag_law=GaussianTriangular(), seed=seed)


@dataclass(frozen=True, eq=False)
class BlockBandMatrix:
    spec: BandMatrixSpec
    V: np.ndarray  # (n, W, W)
    T: np.ndarray  # (n - 1, W, W)

    def __post_init__(self):
        n, W = self.spec.n, self.spec.W
        if self.V.shape != (n, W, W) or self.T.shape != (n - 1, W, W):
            raise ValueError("block shapes do not match the BandMatrixSpec")
        for arr in (self.V, self.T):
            arr.setflags(write=False)

    @property
    def N(self) -> int:
        return self.spec.N

    def to_dense(self) -> np.ndarray:
        return to_dense(self)

    @classmethod
    def from_blocks(cls, V, T=None, symmetry=None) -> "BlockBandMatrix":
        """Wrap explicit blocks (handy for hand-built test matrices)."""
        V = np.array(V, ndmin=3)
        n, W = V.shape[0], V.shape[-1]
        T = np.zeros((n - 1, W, W)) if T is None else np.array(T).reshape(n - 1, W, W)
        if symmetry is None:
            symmetry = Symmetry.COMPLEX if (np.iscomplexobj(V) or np.iscomplexobj(T)) else Symmetry.REAL
        sym = Symmetry.parse(symmetry)
        spec = BandMatrixSpec(W=W, n=n, symmetry=sym, diag_law=GaussianWigner(),
                              offdiag_law=GaussianTriangular())
        return cls(spec, V.astype(sym.dtype), T.astype(sym.dtype))


def _draw_blocks(spec: BandMatrixSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    # fixed draw order: all diagonal blocks, then all couplings
    V = spec.diag_law.draw(rng, spec.W, spec.symmetry, spec.n)
    T = spec.offdiag_law.draw(rng, spec.W, spec.symmetry, spec.n - 1)
    return V.astype(spec.dtype, copy=False), T.astype(spec.dtype, copy=False)


def sample_block_band(spec: BandMatrixSpec, stream: np.random.Generator | int | None = None) -> BlockBandMatrix:
    """Draw one matrix.  ``stream`` is a generator or a sample index under ``spec.seed``."""
    if stream is None or isinstance(stream, (int, np.integer)):
        stream = substream(spec.seed, int(stream or 0))
    V, T = _draw_blocks(spec, stream)
    return BlockBandMatrix(spec, V, T)


def sample_gaussian_band(spec: BandMatrixSpec, stream=None) -> BlockBandMatrix:
    """Draw from the Gaussian band ensemble (Wigner blocks, triangular couplings)."""
    if not isinstance(spec.diag_law, GaussianWigner) or not isinstance(spec.offdiag_law, GaussianTriangular):
        raise ValueError("sample_gaussian_band needs GaussianWigner blocks and GaussianTriangular couplings")
    return sample_block_band(spec, stream)


def sample_batch(spec: BandMatrixSpec, start: int, stop: int, attempts=None, seed=None):
    """Stack the draws of samples ``start..stop-1``.

    Returns ``V`` of shape ``(S, n, W, W)`` and ``T`` of shape ``(S, n-1, W, W)``.
    ``attempts`` optionally gives the resampling counter of every sample.
    """
    seed = spec.seed if seed is None else seed
    S = stop - start
    V = np.empty((S, spec.n, spec.W, spec.W), dtype=spec.dtype)
    T = np.empty((S, spec.n - 1, spec.W, spec.W), dtype=spec.dtype)
    for k in range(S):
        att = 0 if attempts is None else int(attempts[k])
        V[k], T[k] = _draw_blocks(spec, substream(seed, start + k, att, TAG_MATRIX))
    return V, T


def dense_batch(V: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Dense expansion of stacked blocks; leading axes are batch axes."""
    n, W = V.shape[-3], V.shape[-1]
    batch = V.shape[:-3]
    dtype = np.result_type(V, T)
    X = np.zeros(batch + (n * W, n * W), dtype=dtype)
    for j in range(n):
        s = slice(j * W, (j + 1) * W)
        X[..., s, s] = V[..., j, :, :]
        if j < n - 1:
            s2 = slice((j + 1) * W, (j + 2) * W)
            X[..., s, s2] = T[..., j, :, :]
            X[..., s2, s] = np.conj(np.swapaxes(T[..., j, :, :], -1, -2))
    return X


def to_dense(M: BlockBandMatrix) -> np.ndarray:
    return dense_batch(M.V, M.T)


# ---------------------------------------------------------------------------
# densities and norms
# ---------------------------------------------------------------------------

def _log_density(law, V: np.ndarray, sym: Symmetry) -> float:
    V = np.asarray(V)
    W = V.shape[-1]
    if not np.allclose(V, np.conj(V.T), atol=1e-12 * max(1.0, np.abs(V).max())):
        return -np.inf
    if sym is Symmetry.REAL and np.iscomplexobj(V) and np.any(V.imag != 0):
        return -np.inf
    raw = math.sqrt(W) * V
    d = np.real(np.diag(raw))
    iu = np.triu_indices(W, k=1)
    a = raw[iu]
    if sym is Symmetry.REAL:
        a = np.real(a)
    return float(np.sum(law.log_h(d, sym)) + np.sum(law.log_g(a, sym)))


def density_ratio(law, V1, V2, symmetry=None) -> float:
    """``rho_W(V1) / rho_W(V2)`` for the block law ``law``.

    Raises :class:`DegenerateDensity` when ``V2`` is outside the support.
    """
    V1 = np.atleast_2d(np.asarray(V1))
    V2 = np.atleast_2d(np.asarray(V2))
    if symmetry is None:
        symmetry = Symmetry.COMPLEX if (np.iscomplexobj(V1) or np.iscomplexobj(V2)) else Symmetry.REAL
    sym = Symmetry.parse(symmetry)
    if isinstance(law, GaussianWigner) and law.normalization == "trace":
        # closed form of the invariant weight
        l2 = _log_density(law, V2, sym)
        if l2 == -np.inf:
            raise DegenerateDensity("reference block outside the support")
        if _log_density(law, V1, sym) == -np.inf:
            return 0.0
        W = V1.shape[-1]
        diff = np.real(np.trace(V1 @ V1) - np.trace(V2 @ V2))
        return float(math.exp(-sym.beta * W * diff))
    l1 = _log_density(law, V1, sym)
    l2 = _log_density(law, V2, sym)
    if l2 == -np.inf:
        raise DegenerateDensity("reference block outside the support")
    if l1 == -np.inf:
        return 0.0
    return float(math.exp(l1 - l2))


@dataclass(frozen=True)
class NormSummary:
    mean: float
    std: float
    quantiles: dict
    reference: float  # 2 sigma for Wigner laws, the exact norm for deterministic blocks
    samples: int
    norms: np.ndarray = field(repr=False)


def _norm_chunk(start, stop, law, W, sym, seed):
    out = np.empty(stop - start)
    for k in range(stop - start):
        rng = substream(seed, start + k)
        B = law.draw(rng, W, sym, 1)[0]
        out[k] = np.linalg.norm(B, 2)
    return out


def operator_norm_statistic(law, W: int, samples: int, seed: int = 0, symmetry="complex",
                            workers: int = 1) -> NormSummary:
    """Distribution of the operator norm of sampled ``W x W`` blocks."""
    sym = Symmetry.parse(symmetry)
    norms = np.concatenate(map_chunks(_norm_chunk, samples, workers, chunk=max(1, 2**20 // (W * W)),
                                      law=law, W=W, sym=sym, seed=seed)) if samples else np.empty(0)
    if isinstance(law, Deterministic):
        ref = law.norm
    elif hasattr(law, "second_moments"):
        ref = 2.0 * math.sqrt(law.second_moments(sym)[1]) if not isinstance(law, ScalarDensity) else math.nan
    else:
        ref = math.nan
    qs = {q: float(np.quantile(norms, q)) for q in (0.05, 0.5, 0.95)} if samples else {}
    return NormSummary(
        mean=float(norms.mean()) if samples else math.nan,
        std=float(norms.std(ddof=1)) if samples > 1 else 0.0,
        quantiles=qs,
        reference=ref,
        samples=samples,
        norms=norms,
    )


def bulk_row_variance(spec: BandMatrixSpec) -> float:
    """``sum_y E|X_xy|^2`` for a row away from the matrix edges.

    The semicircle radius of the density of states is twice its square root.
    """
    W, sym = spec.W, spec.symmetry
    ed2, ea2 = spec.diag_law.second_moments(sym)
    inside = ed2 / W + (W - 1) * ea2 / W
    if spec.n == 1:
        return inside
    # a bulk row sees one T block to its right and one T^dagger to its left;
    # row_weight is the row-averaged weight of one of them
    return inside + 2.0 * spec.offdiag_law.row_weight(W, sym)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_DIAG_KINDS = {
    "gaussian_wigner": GaussianWigner,
    "holder_wigner": HolderWigner,
    "box_wigner": BoxWigner,
    "scalar": ScalarDensity,
}
_OFF_KINDS = {"gaussian_triangular", "uniform_triangular", "deterministic"}


def law_to_dict(law) -> dict:
    if isinstance(law, GaussianWigner):
        return {"kind": law.kind, "normalization": law.normalization}
    if isinstance(law, HolderWigner):
        return {"kind": law.kind, "alpha": law.alpha}
    if isinstance(law, BoxWigner):
        return {"kind": law.kind, "D": law.D, "A": law.A}
    if isinstance(law, ScalarDensity):
        return {"kind": law.kind, "name": law.name, "a": law.a, "b": law.b}
    if isinstance(law, GaussianTriangular):
        return {"kind": law.kind}
    if isinstance(law, UniformTriangular):
        return {"kind": law.kind, "half_width": law.half_width}
    if isinstance(law, Deterministic):
        p = law.payload
        if np.iscomplexobj(p):
            return {"kind": law.kind, "real": p.real.tolist(), "imag": p.imag.tolist()}
        return {"kind": law.kind, "payload": p.tolist()}
    raise TypeError(f"unknown law {law!r}")


def law_from_dict(d: dict, W: int | None = None):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind in _DIAG_KINDS:
        return _DIAG_KINDS[kind](**d)
    if kind == "gaussian_triangular":
        return GaussianTriangular()
    if kind == "uniform_triangular":
        return UniformTriangular(**d)
    if kind == "deterministic":
        if "real" in d:
            return Deterministic(np.array(d["real"]) + 1j * np.array(d.get("imag", 0.0)))
        payload = d.get("payload", "identity")
        if isinstance(payload, str):
            if payload != "identity" or W is None:
                raise ValueError("payload must be a matrix or 'identity' with known W")
            return Deterministic.identity(W)
        if np.ndim(payload) == 0:
            return Deterministic(np.eye(W or 1) * float(payload))
        return Deterministic(np.array(payload, dtype=float))
    raise ValueError(f"unknown law kind {kind!r}")
