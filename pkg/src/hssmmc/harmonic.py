"""Harmonic-domain algebra: truncated Fourier vectors, Toeplitz convolution
operators, the frequency (differentiation) matrix, and time-domain
synthesis/analysis.

Coefficients are stored for harmonic indices k = -h..+h in ascending order,
so ``coeffs[k + h]`` is the coefficient of ``exp(1j*k*w1*t)``. Every block
matrix in the toolkit uses the same ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    InsufficientSamplesError,
    OrderMismatchError,
    ResidualImaginaryError,
)

# Relative tolerance used for conjugate-symmetry and residual-imaginary
# checks; sized for double-precision round-off over (2h+1)^2 operations.
SYMMETRY_RTOL = 1e-9


def _as_coeff_array(coeffs, order: int) -> np.ndarray:
    arr = np.asarray(coeffs, dtype=complex)
    if arr.shape != (2 * order + 1,):
        raise OrderMismatchError(
            f"expected {2 * order + 1} coefficients for order {order}, got shape {arr.shape}"
        )
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class HarmonicVector:
    """Truncated two-sided Fourier coefficient vector of a periodic scalar.

    Parameters
    ----------
    order : int
        Highest retained harmonic index h (>= 0).
    base_frequency : float
        Fundamental angular frequency w1 in rad/s.
    coeffs : array_like of complex, length 2*order+1
        Coefficients for k = -h..+h ascending.
    """

    order: int
    base_frequency: float
    coeffs: np.ndarray

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be >= 0")
        object.__setattr__(self, "coeffs", _as_coeff_array(self.coeffs, self.order))

    # -- constructors ------------------------------------------------

    @classmethod
    def zeros(cls, order: int, base_frequency: float) -> "HarmonicVector":
        return cls(order, base_frequency, np.zeros(2 * order + 1, dtype=complex))

    @classmethod
    def constant(cls, value: complex, order: int, base_frequency: float) -> "HarmonicVector":
        c = np.zeros(2 * order + 1, dtype=complex)
        c[order] = value
        return cls(order, base_frequency, c)

    @classmethod
    def from_dict(cls, entries: dict[int, complex], order: int, base_frequency: float) -> "HarmonicVector":
        c = np.zeros(2 * order + 1, dtype=complex)
        for k, v in entries.items():
            if abs(k) > order:
                raise OrderMismatchError(f"harmonic index {k} exceeds order {order}")
            c[k + order] = v
        return cls(order, base_frequency, c)

    @classmethod
    def cosine(
        cls,
        dc: float,
        amplitude: float,
        phase: float,
        order: int,
        base_frequency: float,
    ) -> "HarmonicVector":
        """Vector of ``dc + amplitude*cos(w1*t - phase)``."""
        if order < 1 and amplitude != 0.0:
            raise OrderMismatchError("order >= 1 required for a fundamental component")
        c = np.zeros(2 * order + 1, dtype=complex)
        c[order] = dc
        if order >= 1:
            c[order + 1] = 0.5 * amplitude * np.exp(-1j * phase)
            c[order - 1] = 0.5 * amplitude * np.exp(+1j * phase)
        return cls(order, base_frequency, c)

    # -- indexing and algebra ----------------------------------------

    def __getitem__(self, k: int) -> complex:
        if abs(k) > self.order:
            raise OrderMismatchError(f"harmonic index {k} exceeds order {self.order}")
        return complex(self.coeffs[k + self.order])

    def _check_compatible(self, other: "HarmonicVector"):
        if self.order != other.order or self.base_frequency != other.base_frequency:
            raise OrderMismatchError(
                f"incompatible grids: (h={self.order}, w1={self.base_frequency}) vs "
                f"(h={other.order}, w1={other.base_frequency})"
            )

    def __add__(self, other: "HarmonicVector") -> "HarmonicVector":
        self._check_compatible(other)
        return HarmonicVector(self.order, self.base_frequency, self.coeffs + other.coeffs)

    def __sub__(self, other: "HarmonicVector") -> "HarmonicVector":
        self._check_compatible(other)
        return HarmonicVector(self.order, self.base_frequency, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "HarmonicVector":
        return HarmonicVector(self.order, self.base_frequency, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "HarmonicVector":
        return HarmonicVector(self.order, self.base_frequency, -self.coeffs)

    # -- properties ---------------------------------------------------

    @property
    def harmonic_indices(self) -> np.ndarray:
        return np.arange(-self.order, self.order + 1)

    def magnitude(self, k: int) -> float:
        return abs(self[k])

    def conjugate_symmetry_defect(self) -> float:
        """Max |c[-k] - conj(c[k])| relative to the largest coefficient."""
        scale = float(np.max(np.abs(self.coeffs)))
        if scale == 0.0:
            return 0.0
        defect = float(np.max(np.abs(self.coeffs[::-1] - np.conj(self.coeffs))))
        return defect / scale

    def is_real_signal(self, rtol: float = SYMMETRY_RTOL) -> bool:
        return self.conjugate_symmetry_defect() <= rtol

    def truncate(self, order: int) -> "HarmonicVector":
        """Shrink or zero-pad to a new truncation order."""
        if order == self.order:
            return self
        c = np.zeros(2 * order + 1, dtype=complex)
        m = min(order, self.order)
        c[order - m : order + m + 1] = self.coeffs[self.order - m : self.order + m + 1]
        return HarmonicVector(order, self.base_frequency, c)

    def derivative(self) -> "HarmonicVector":
        """Coefficient vector of the time derivative (j*k*w1 scaling)."""
        k = self.harmonic_indices
        return HarmonicVector(
            self.order, self.base_frequency, 1j * k * self.base_frequency * self.coeffs
        )


@dataclass(frozen=True)
class ToeplitzOperator:
    """Banded Toeplitz matrix realizing frequency-domain convolution."""

    order: int
    matrix: np.ndarray

    def __post_init__(self):
        n = 2 * self.order + 1
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (n, n):
            raise OrderMismatchError(f"expected {(n, n)} matrix, got {m.shape}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def apply(self, vec: HarmonicVector) -> HarmonicVector:
        if vec.order != self.order:
            raise OrderMismatchError(
                f"operator order {self.order} does not match vector order {vec.order}"
            )
        return HarmonicVector(vec.order, vec.base_frequency, self.matrix @ vec.coeffs)

    def __matmul__(self, vec: HarmonicVector) -> HarmonicVector:
        return self.apply(vec)


def toeplitz(src: HarmonicVector) -> ToeplitzOperator:
    """Toeplitz convolution operator of ``src``.

    Entry (i, j) is the coefficient of harmonic i - j, zero beyond the
    retained band. Multiplying the result by another vector's coefficient
    column gives the h-truncated Fourier coefficients of the time-domain
    product of the two signals.
    """
    h = src.order
    n = 2 * h + 1
    mat = np.zeros((n, n), dtype=complex)
    for d in range(-h, h + 1):
        # d = i - j: the coefficient of harmonic d sits on diagonal -d of
        # numpy's convention (offset j - i).
        idx = np.arange(max(0, d), min(n, n + d))
        mat[idx, idx - d] = src.coeffs[d + h]
    return ToeplitzOperator(h, mat)


@dataclass(frozen=True)
class FrequencyMatrix:
    """Diagonal of j*k*w1 terms: differentiation of each harmonic frame."""

    order: int
    base_frequency: float
    diagonal: np.ndarray = field(init=False)

    def __post_init__(self):
        k = np.arange(-self.order, self.order + 1)
        diag = 1j * k * self.base_frequency
        diag.flags.writeable = False
        object.__setattr__(self, "diagonal", diag)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)


def frequency_matrix(h: int, base_frequency: float) -> FrequencyMatrix:
    """Differentiation matrix diag(j*k*w1), k = -h..h."""
    if h < 0:
        raise ValueError("h must be >= 0")
    if base_frequency <= 0:
        raise ValueError("base_frequency must be > 0")
    return FrequencyMatrix(h, base_frequency)


def synthesize(src: HarmonicVector, t, rtol: float = SYMMETRY_RTOL):
    """Evaluate the real time-domain signal of ``src`` at time(s) ``t``.

    Raises ResidualImaginaryError when the reconstruction is not real to
    within ``rtol`` relative to the largest coefficient, which signals a
    vector that does not describe a real signal.
    """
    t_arr = np.asarray(t, dtype=float)
    k = src.harmonic_indices
    phases = np.exp(1j * np.multiply.outer(t_arr, k) * src.base_frequency)
    values = phases @ src.coeffs
    scale = float(np.max(np.abs(src.coeffs))) or 1.0
    max_imag = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if max_imag > rtol * scale:
        raise ResidualImaginaryError(
            f"imaginary residual {max_imag:.3e} exceeds {rtol:.1e} * {scale:.3e}"
        )
    out = values.real
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def analyze(samples, h: int, base_frequency: float, t0: float = 0.0) -> HarmonicVector:
    """Fourier coefficients k = -h..h of one fundamental period of samples.

    ``samples`` must cover exactly one period, uniformly sampled starting
    at ``t0`` with the endpoint excluded. Uses the rectangle-rule discrete
    Fourier sum, which is spectrally exact for band-limited inputs with
    bandwidth at or below Nyquist.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 4 * (2 * h + 1):
        raise InsufficientSamplesError(
            f"{n} samples cannot resolve order {h}; need at least {4 * (2 * h + 1)}"
        )
    spectrum = np.fft.fft(x) / n
    coeffs = np.zeros(2 * h + 1, dtype=complex)
    for k in range(-h, h + 1):
        coeffs[k + h] = spectrum[k % n]
    if t0 != 0.0:
        k = np.arange(-h, h + 1)
        coeffs = coeffs * np.exp(-1j * k * base_frequency * t0)
    return HarmonicVector(h, base_frequency, coeffs)


def convolve(a: HarmonicVector, b: HarmonicVector) -> HarmonicVector:
    """h-truncated coefficient convolution (the product signal's spectrum)."""
    a._check_compatible(b)
    h = a.order
    full = np.convolve(a.coeffs, b.coeffs)
    return HarmonicVector(h, a.base_frequency, full[h : 3 * h + 1])


class HarmonicBlockMatrix:
    """Dense complex matrix organized as labeled (2h+1)-square blocks.

    Row and column block labels are fixed at construction; blocks are
    written with :meth:`set_block` and read back bit-identically with
    :meth:`get_block`. ``dense`` is the assembled matrix.
    """

    def __init__(self, block_rows: list[str], block_cols: list[str], order: int):
        self.block_rows = list(block_rows)
        self.block_cols = list(block_cols)
        self.order = order
        self._n = 2 * order + 1
        self._row_index = {lbl: i for i, lbl in enumerate(self.block_rows)}
        self._col_index = {lbl: i for i, lbl in enumerate(self.block_cols)}
        if len(self._row_index) != len(self.block_rows) or len(self._col_index) != len(self.block_cols):
            raise DimensionMismatchError("duplicate block labels")
        self._data = np.zeros(
            (len(self.block_rows) * self._n, len(self.block_cols) * self._n), dtype=complex
        )

    def _slice(self, row: str, col: str):
        try:
            i = self._row_index[row]
            j = self._col_index[col]
        except KeyError as exc:
            raise KeyError(f"unknown block label {exc.args[0]!r}") from None
        n = self._n
        return slice(i * n, (i + 1) * n), slice(j * n, (j + 1) * n)

    def set_block(self, row: str, col: str, block: np.ndarray):
        rs, cs = self._slice(row, col)
        blk = np.asarray(block, dtype=complex)
        if blk.shape != (self._n, self._n):
            raise DimensionMismatchError(
                f"block {row!r},{col!r} must be {(self._n, self._n)}, got {blk.shape}"
            )
        self._data[rs, cs] = blk

    def add_to_block(self, row: str, col: str, block: np.ndarray):
        rs, cs = self._slice(row, col)
        self._data[rs, cs] += block

    def get_block(self, row: str, col: str) -> np.ndarray:
        rs, cs = self._slice(row, col)
        return self._data[rs, cs].copy()

    @property
    def dense(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    def row_slice(self, row: str) -> slice:
        i = self._row_index[row]
        return slice(i * self._n, (i + 1) * self._n)

    def col_slice(self, col: str) -> slice:
        j = self._col_index[col]
        return slice(j * self._n, (j + 1) * self._n)
