"""Sparse spectral fields on the torus T^d = [0,1]^d with exact frequency
bookkeeping.

A field is a finite map from integer lattice frequencies to complex
amplitudes.  All construction fields (slabs, increments, products of few
modes) are supported on a handful of balls or lines in frequency space, so a
hash-map representation is used throughout; dense grids are materialized only
for products and L^p quadrature.

Products are exact convolutions of the coefficient maps.  The engine
decomposes each operand's support into frequency clusters and, per cluster
pair, either enumerates coefficient pairs directly or runs an FFT convolution
on the cluster bounding boxes.  Both paths agree to roundoff.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .kernels import ShellKernel

__all__ = [
    "SpectralField",
    "GridBuffer",
    "SupportError",
    "synthesize",
    "analyze",
    "multiply",
    "divergence_defect",
    "lp_norm",
    "lp_norm_detailed",
    "sobolev_norm",
    "besov_norm",
    "shell_project",
    "low_pass",
    "fractional_laplacian",
    "mean_part",
    "nonzero_part",
    "gradient",
    "divergence",
    "save_snapshot",
    "load_snapshot",
    "field_to_snapshot",
    "field_from_snapshot",
]

PRUNE_REL = 1e-15
DEFAULT_GRID_BUDGET = 8192
# direct pair enumeration is used for cluster pairs below this many pairs
_DIRECT_PAIR_CAP = 1 << 21


class SupportError(ValueError):
    """Raised when a grid cannot hold a field or product without aliasing."""


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


@dataclass
class GridBuffer:
    """Samples of a field at x = j/N, j in {0..N-1}^d."""

    dim: int
    N: int
    values: np.ndarray  # shape (N,)*dim, complex or real; vector: (d,) + (N,)*dim


class SpectralField:
    """Finite map from lattice frequencies to complex amplitudes.

    ``rank`` 0 is a scalar field (amplitudes are complex numbers), rank 1 a
    vector field (amplitudes are complex d-vectors).  Fields are treated as
    immutable after construction; every operation returns a new field.
    """

    __slots__ = ("dim", "rank", "coeffs", "reality", "_max_freq")

    def __init__(self, dim, rank, coeffs, reality=False):
        self.dim = int(dim)
        self.rank = int(rank)
        self.coeffs = coeffs
        self.reality = bool(reality)
        self._max_freq = None

    # -- construction -----------------------------------------------------

    @classmethod
    def scalar(cls, dim, entries, reality=None):
        coeffs = {tuple(int(c) for c in xi): complex(a) for xi, a in entries.items()}
        f = cls(dim, 0, coeffs)
        f = f.pruned()
        f.reality = f.is_hermitian() if reality is None else bool(reality)
        return f

    @classmethod
    def vector(cls, dim, entries, reality=None):
        coeffs = {
            tuple(int(c) for c in xi): np.asarray(a, dtype=complex)
            for xi, a in entries.items()
        }
        f = cls(dim, 1, coeffs)
        f = f.pruned()
        f.reality = f.is_hermitian() if reality is None else bool(reality)
        return f

    @classmethod
    def zero(cls, dim, rank=0):
        return cls(dim, rank, {}, reality=True)

    @classmethod
    def from_components(cls, comps):
        dim = comps[0].dim
        keys = set()
        for c in comps:
            keys.update(c.coeffs)
        coeffs = {
            xi: np.array([c.coeffs.get(xi, 0.0) for c in comps], dtype=complex)
            for xi in keys
        }
        f = cls(dim, 1, coeffs, reality=all(c.reality for c in comps))
        return f.pruned()

    # -- basic queries ----------------------------------------------------

    def __len__(self):
        return len(self.coeffs)

    def is_zero(self):
        return not self.coeffs

    def component(self, i):
        coeffs = {xi: a[i] for xi, a in self.coeffs.items()}
        return SpectralField(self.dim, 0, coeffs, reality=self.reality).pruned()

    def freq_array(self):
        """Frequencies as an (K, d) int array, sorted lexicographically."""
        if not self.coeffs:
            return np.zeros((0, self.dim), dtype=np.int64)
        keys = sorted(self.coeffs)
        return np.array(keys, dtype=np.int64)

    def amp_array(self):
        """Amplitudes in the order of :meth:`freq_array`."""
        keys = sorted(self.coeffs)
        if self.rank == 0:
            return np.array([self.coeffs[k] for k in keys], dtype=complex)
        return np.array([self.coeffs[k] for k in keys], dtype=complex)

    @property
    def max_freq(self):
        """Largest Euclidean frequency magnitude in the support."""
        if self._max_freq is None:
            if not self.coeffs:
                self._max_freq = 0.0
            else:
                fa = self.freq_array().astype(float)
                self._max_freq = float(np.max(np.linalg.norm(fa, axis=1)))
        return self._max_freq

    def max_axis_freq(self):
        """Per-axis maximum |xi_i|; zero vector for the empty field."""
        if not self.coeffs:
            return np.zeros(self.dim, dtype=np.int64)
        return np.max(np.abs(self.freq_array()), axis=0)

    def max_amp(self):
        if not self.coeffs:
            return 0.0
        if self.rank == 0:
            return max(abs(a) for a in self.coeffs.values())
        return max(float(np.max(np.abs(a))) for a in self.coeffs.values())

    def is_hermitian(self, rtol=1e-13):
        """Check f(-xi) == conj(f(xi)) for every stored frequency."""
        scale = self.max_amp()
        if scale == 0.0:
            return True
        for xi, a in self.coeffs.items():
            neg = tuple(-c for c in xi)
            b = self.coeffs.get(neg)
            if b is None:
                return False
            if self.rank == 0:
                if abs(a - np.conj(b)) > rtol * scale:
                    return False
            else:
                if np.max(np.abs(a - np.conj(b))) > rtol * scale:
                    return False
        return True

    # -- arithmetic -------------------------------------------------------

    def pruned(self, rel=PRUNE_REL):
        scale = self.max_amp()
        if scale == 0.0:
            return SpectralField(self.dim, self.rank, {}, reality=self.reality)
        thresh = rel * scale
        if self.rank == 0:
            coeffs = {xi: a for xi, a in self.coeffs.items() if abs(a) > thresh}
        else:
            coeffs = {
                xi: a
                for xi, a in self.coeffs.items()
                if float(np.max(np.abs(a))) > thresh
            }
        return SpectralField(self.dim, self.rank, coeffs, reality=self.reality)

    def scaled(self, c):
        if self.rank == 0:
            coeffs = {xi: c * a for xi, a in self.coeffs.items()}
        else:
            coeffs = {xi: c * a for xi, a in self.coeffs.items()}
        reality = self.reality and (np.imag(c) == 0)
        return SpectralField(self.dim, self.rank, coeffs, reality=reality)

    def __add__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.dim != self.dim or other.rank != self.rank:
            raise ValueError("incompatible fields")
        coeffs = dict(self.coeffs)
        for xi, a in other.coeffs.items():
            if xi in coeffs:
                coeffs[xi] = coeffs[xi] + a
            else:
                coeffs[xi] = a
        f = SpectralField(self.dim, self.rank, coeffs, reality=self.reality and other.reality)
        return f.pruned()

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def shifted(self, shift):
        """Modulation: multiply by e^{2 pi i shift . x}, i.e. translate spectrum."""
        shift = tuple(int(s) for s in shift)
        coeffs = {
            tuple(x + s for x, s in zip(xi, shift)): a for xi, a in self.coeffs.items()
        }
        return SpectralField(self.dim, self.rank, coeffs, reality=False)

    def coefficient(self, xi):
        xi = tuple(int(c) for c in xi)
        if self.rank == 0:
            return self.coeffs.get(xi, 0.0 + 0.0j)
        return self.coeffs.get(xi, np.zeros(self.dim, dtype=complex))


# -- sampling and analysis ------------------------------------------------


def _scatter(field: SpectralField, N: int) -> np.ndarray:
    """Place coefficients into an FFT-layout array, wrapping frequencies mod N."""
    if field.rank != 0:
        raise ValueError("scalar fields only")
    arr = np.zeros((N,) * field.dim, dtype=complex)
    if field.coeffs:
        freqs = field.freq_array() % N
        amps = field.amp_array()
        np.add.at(arr, tuple(freqs.T), amps)
    return arr


def sample(field: SpectralField, N: int) -> np.ndarray:
    """Exact samples of the field at the N^d grid points.

    Wrapping frequencies mod N leaves grid-point values exact because
    e^{2 pi i xi j / N} only depends on xi mod N; only coefficient recovery
    requires an unaliased grid.
    """
    if field.rank == 1:
        return np.stack([sample(field.component(i), N) for i in range(field.dim)])
    arr = _scatter(field, N)
    return np.fft.ifftn(arr) * N**field.dim


def synthesize(field: SpectralField, N: int) -> GridBuffer:
    """Inverse-transform the field onto an N^d grid.

    Requires N to exceed twice the field's max frequency magnitude so that
    ``analyze`` recovers the coefficients exactly.
    """
    if N <= 2 * field.max_freq:
        raise SupportError(
            f"grid N={N} cannot resolve max frequency {field.max_freq:.1f}"
        )
    values = sample(field, N)
    if field.reality:
        values = np.real(values)
    return GridBuffer(field.dim, N, values)


def analyze(grid: GridBuffer, rel=PRUNE_REL) -> SpectralField:
    """Recover the sparse coefficient map from grid samples."""
    values = np.asarray(grid.values)
    if values.ndim == grid.dim + 1:  # vector field, leading component axis
        comps = [
            analyze(GridBuffer(grid.dim, grid.N, values[i]), rel)
            for i in range(values.shape[0])
        ]
        return SpectralField.from_components(comps)
    N = grid.N
    arr = np.fft.fftn(values) / N**grid.dim
    mags = np.abs(arr)
    scale = mags.max()
    if scale == 0.0:
        return SpectralField.zero(grid.dim, 0)
    idx = np.argwhere(mags > rel * scale)
    centered = ((idx + N // 2) % N) - N // 2
    coeffs = {
        tuple(int(c) for c in xi): complex(arr[tuple(i)])
        for xi, i in zip(centered, idx)
    }
    f = SpectralField(grid.dim, 0, coeffs)
    f.reality = bool(np.isrealobj(values)) or f.is_hermitian()
    return f


# -- products -------------------------------------------------------------


def _clusters(freqs: np.ndarray, cell: int = 64):
    """Partition frequencies into connected clusters of occupied coarse cells."""
    cells = freqs // cell
    cell_keys = [tuple(int(c) for c in row) for row in cells]
    uniq = sorted(set(cell_keys))
    comp = {}
    nxt = 0
    d = freqs.shape[1]
    # union of cells adjacent in Chebyshev distance <= 1 via BFS
    uniq_set = set(uniq)
    offsets = np.array(
        np.meshgrid(*([[-1, 0, 1]] * d), indexing="ij")
    ).reshape(d, -1).T
    for c in uniq:
        if c in comp:
            continue
        stack = [c]
        comp[c] = nxt
        while stack:
            cur = stack.pop()
            for off in offsets:
                nb = tuple(int(x + o) for x, o in zip(cur, off))
                if nb in uniq_set and nb not in comp:
                    comp[nb] = nxt
                    stack.append(nb)
        nxt += 1
    labels = np.array([comp[k] for k in cell_keys], dtype=np.int64)
    return [np.nonzero(labels == i)[0] for i in range(nxt)]


def _accumulate(out: dict, freqs: np.ndarray, amps: np.ndarray, dim: int):
    for xi, a in zip(freqs, amps):
        key = tuple(int(c) for c in xi)
        if key in out:
            out[key] = out[key] + a
        else:
            out[key] = a


def _pair_convolve(fa, aa, fb, ab, out, dim):
    """Direct convolution of two coefficient lists by pair enumeration."""
    sums = (fa[:, None, :] + fb[None, :, :]).reshape(-1, dim)
    prods = (aa[:, None] * ab[None, :]).reshape(-1)
    # aggregate duplicates before touching the python dict
    order = np.lexsort(sums.T[::-1])
    sums = sums[order]
    prods = prods[order]
    change = np.any(np.diff(sums, axis=0) != 0, axis=1)
    bounds = np.concatenate(([0], np.nonzero(change)[0] + 1, [len(prods)]))
    agg = np.add.reduceat(prods, bounds[:-1])
    _accumulate(out, sums[bounds[:-1]], agg, dim)


def _box_convolve(fa, aa, fb, ab, out, dim):
    """FFT convolution on the dense bounding boxes of two clusters."""
    lo_a, hi_a = fa.min(axis=0), fa.max(axis=0)
    lo_b, hi_b = fb.min(axis=0), fb.max(axis=0)
    shape_a = tuple(int(h - l + 1) for l, h in zip(lo_a, hi_a))
    shape_b = tuple(int(h - l + 1) for l, h in zip(lo_b, hi_b))
    A = np.zeros(shape_a, dtype=complex)
    B = np.zeros(shape_b, dtype=complex)
    A[tuple((fa - lo_a).T)] = aa
    B[tuple((fb - lo_b).T)] = ab
    C = fftconvolve(A, B)
    mags = np.abs(C)
    scale = mags.max()
    if scale == 0.0:
        return
    idx = np.argwhere(mags > PRUNE_REL * scale)
    freqs = idx + (lo_a + lo_b)
    _accumulate(out, freqs, C[tuple(idx.T)], dim)


def _multiply_scalar(f: SpectralField, g: SpectralField) -> SpectralField:
    if f.is_zero() or g.is_zero():
        return SpectralField.zero(f.dim, 0)
    dim = f.dim
    ff, fg = f.freq_array(), g.freq_array()
    af, ag = f.amp_array(), g.amp_array()
    out: dict = {}
    cl_f = _clusters(ff)
    cl_g = _clusters(fg)
    for ia in cl_f:
        for ib in cl_g:
            fa, aa = ff[ia], af[ia]
            fb, ab = fg[ib], ag[ib]
            if len(ia) * len(ib) <= _DIRECT_PAIR_CAP:
                _pair_convolve(fa, aa, fb, ab, out, dim)
            else:
                _box_convolve(fa, aa, fb, ab, out, dim)
    prod = SpectralField(dim, 0, out, reality=f.reality and g.reality)
    return prod.pruned()


def multiply(f: SpectralField, g: SpectralField) -> SpectralField:
    """Exact product of two fields (convolution of coefficient maps).

    Supported ranks: scalar x scalar and scalar x vector (componentwise).
    """
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    if f.rank == 1 and g.rank == 0:
        f, g = g, f
    if f.rank == 0 and g.rank == 0:
        return _multiply_scalar(f, g)
    if f.rank == 0 and g.rank == 1:
        comps = [_multiply_scalar(f, g.component(i)) for i in range(g.dim)]
        return SpectralField.from_components(comps)
    raise ValueError("vector x vector products are not defined here")


# -- calculus -------------------------------------------------------------


def mean_part(f: SpectralField):
    """Coefficient at the zero frequency."""
    return f.coefficient((0,) * f.dim)


def nonzero_part(f: SpectralField) -> SpectralField:
    coeffs = {xi: a for xi, a in f.coeffs.items() if any(c != 0 for c in xi)}
    return SpectralField(f.dim, f.rank, coeffs, reality=f.reality)


def gradient(f: SpectralField) -> SpectralField:
    """Componentwise multiplication by 2 pi i xi."""
    if f.rank != 0:
        raise ValueError("gradient of scalar fields only")
    coeffs = {
        xi: 2j * np.pi * np.asarray(xi, dtype=float) * a for xi, a in f.coeffs.items()
    }
    return SpectralField(f.dim, 1, coeffs, reality=f.reality).pruned()


def divergence(u: SpectralField) -> SpectralField:
    """Contraction of 2 pi i xi with the components of a vector field."""
    if u.rank != 1:
        raise ValueError("divergence of vector fields only")
    coeffs = {
        xi: 2j * np.pi * complex(np.dot(np.asarray(xi, dtype=float), a))
        for xi, a in u.coeffs.items()
    }
    return SpectralField(u.dim, 0, coeffs, reality=u.reality).pruned()


def divergence_defect(u: SpectralField) -> float:
    """How far a vector field is from divergence-free, relative to its
    gradient scale max 2 pi |xi| |u(xi)| (the size the divergence would have
    with no cancellation at all)."""
    if u.rank != 1:
        raise ValueError("divergence defect of vector fields only")
    if u.is_zero():
        return 0.0
    freqs = u.freq_array().astype(float)
    amps = np.max(np.abs(u.amp_array()), axis=1)
    scale = 2.0 * np.pi * float(np.max(np.linalg.norm(freqs, axis=1) * amps))
    if scale == 0.0:
        return 0.0
    return divergence(u).max_amp() / scale


def fractional_laplacian(f: SpectralField, s: float) -> SpectralField:
    """Coefficientwise multiplication by |2 pi xi|^s.

    The zero mode is untouched for s >= 0 and removed for s < 0.
    """
    zero = (0,) * f.dim
    coeffs = {}
    for xi, a in f.coeffs.items():
        if xi == zero:
            # |2 pi 0|^s: kept for s = 0, annihilated for s > 0, dropped for s < 0
            if s == 0:
                coeffs[xi] = a
            continue
        mag = 2.0 * np.pi * math.sqrt(sum(c * c for c in xi))
        coeffs[xi] = mag**s * a
    return SpectralField(f.dim, f.rank, coeffs, reality=f.reality).pruned()


def low_pass(f: SpectralField, lam: float, kernel: ShellKernel) -> SpectralField:
    """Multiply coefficients by the low-pass bump evaluated at xi / lam."""
    if lam <= 0:
        raise ValueError("low-pass scale must be positive")
    if not f.coeffs:
        return f
    freqs = f.freq_array()
    w = kernel.lowpass_weight(freqs.astype(float), lam)
    keys = sorted(f.coeffs)
    coeffs = {}
    for key, wi in zip(keys, w):
        if wi > 0.0:
            coeffs[key] = wi * f.coeffs[key]
    return SpectralField(f.dim, f.rank, coeffs, reality=f.reality).pruned()


def shell_project(f: SpectralField, j: int, kernel: ShellKernel) -> SpectralField:
    """Restrict to the j-th dyadic shell via the smooth shell profile."""
    if not f.coeffs:
        return f
    freqs = f.freq_array()
    w = kernel.shell_weight(freqs.astype(float), j)
    keys = sorted(f.coeffs)
    coeffs = {}
    for key, wi in zip(keys, w):
        if wi > 0.0:
            coeffs[key] = wi * f.coeffs[key]
    return SpectralField(f.dim, f.rank, coeffs, reality=f.reality).pruned()


# -- norms ----------------------------------------------------------------


def lp_norm_detailed(f: SpectralField, p: float, grid_budget: int = DEFAULT_GRID_BUDGET):
    """L^p norm by grid quadrature, with an estimated quadrature error.

    The grid obeys the dealias rule for |f|^ceil(p) when that fits in the
    budget; otherwise the largest budget grid is used (the sampled values are
    still exact) and the error estimate reflects the unresolved quadrature.
    """
    if not f.reality:
        raise ValueError("L^p norms are defined for real fields here")
    if f.is_zero():
        return 0.0, 0.0
    if f.rank == 1:
        raise ValueError("scalar fields only")
    band = int(np.max(f.max_axis_freq()))
    if p == math.inf:
        N = min(_next_pow2(4 * band + 1), grid_budget)
        N = max(N, 8)
        vals = np.abs(np.real(sample(f, N)))
        coarse = float(np.max(vals[(slice(None, None, 2),) * f.dim]))
        fine = float(np.max(vals))
        return fine, abs(fine - coarse)
    if p < 1:
        raise ValueError("p must be >= 1")
    N_ideal = _next_pow2(2 * int(math.ceil(p)) * band + 1)
    N = max(8, min(N_ideal, grid_budget))
    vals = np.abs(np.real(sample(f, N))) ** p
    fine = float(np.mean(vals)) ** (1.0 / p)
    coarse = float(np.mean(vals[(slice(None, None, 2),) * f.dim])) ** (1.0 / p)
    return fine, abs(fine - coarse)


def lp_norm(f: SpectralField, p: float, grid_budget: int = DEFAULT_GRID_BUDGET) -> float:
    return lp_norm_detailed(f, p, grid_budget)[0]


def sobolev_norm(f: SpectralField, s: float) -> float:
    """Homogeneous Sobolev norm (sum over xi != 0 of |xi|^{2s} |f(xi)|^2)^{1/2}.

    Uses the bare Euclidean |xi| without 2 pi factors, matching the space's
    definition (the fractional Laplacian, by contrast, uses |2 pi xi|).
    """
    if not f.coeffs:
        return 0.0
    freqs = f.freq_array().astype(float)
    amps = f.amp_array()
    mag2 = np.sum(freqs * freqs, axis=1)
    keep = mag2 > 0
    if f.rank == 0:
        amp2 = np.abs(amps) ** 2
    else:
        amp2 = np.sum(np.abs(amps) ** 2, axis=1)
    total = float(np.sum(mag2[keep] ** s * amp2[keep]))
    return math.sqrt(total)


def besov_norm(
    f: SpectralField,
    alpha: float,
    kernel: ShellKernel,
    grid_budget: int = DEFAULT_GRID_BUDGET,
) -> float:
    """Homogeneous Besov (infinity, infinity) norm: sup_j 2^{j alpha} ||P_j f||_inf.

    Only shells intersecting the support are evaluated.
    """
    if f.is_zero():
        return 0.0
    freqs = f.freq_array().astype(float)
    mags = np.linalg.norm(freqs, axis=1)
    mags = mags[mags > 0]
    if len(mags) == 0:
        return 0.0
    j_lo = max(0, int(math.floor(math.log2(mags.min() / 2.0))))
    j_hi = int(math.ceil(math.log2(mags.max() / (6.0 / 7.0)))) + 1
    best = 0.0
    for j in range(j_lo, j_hi + 1):
        pj = shell_project(f, j, kernel)
        if pj.is_zero():
            continue
        pj.reality = f.reality
        val = 2.0 ** (j * alpha) * lp_norm(pj, math.inf, grid_budget)
        best = max(best, val)
    return best


# -- snapshots ------------------------------------------------------------

SNAPSHOT_VERSION = 1


def field_to_snapshot(f: SpectralField) -> dict:
    entries = []
    for xi in sorted(f.coeffs):
        a = f.coeffs[xi]
        if f.rank == 0:
            entries.append(list(xi) + [float(np.real(a)), float(np.imag(a))])
        else:
            row = list(xi)
            for c in np.asarray(a):
                row += [float(np.real(c)), float(np.imag(c))]
            entries.append(row)
    return {
        "version": SNAPSHOT_VERSION,
        "d": f.dim,
        "rank": f.rank,
        "reality": f.reality,
        "entries": entries,
    }


def field_from_snapshot(data: dict) -> SpectralField:
    if data.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {data.get('version')!r}")
    d = int(data["d"])
    rank = int(data["rank"])
    coeffs = {}
    for row in data["entries"]:
        xi = tuple(int(c) for c in row[:d])
        rest = row[d:]
        if rank == 0:
            coeffs[xi] = complex(rest[0], rest[1])
        else:
            coeffs[xi] = np.array(
                [complex(rest[2 * i], rest[2 * i + 1]) for i in range(d)],
                dtype=complex,
            )
    return SpectralField(d, rank, coeffs, reality=bool(data["reality"]))


def save_snapshot(f: SpectralField, path) -> None:
    with open(path, "w") as fh:
        json.dump(field_to_snapshot(f), fh, sort_keys=True)


def load_snapshot(path) -> SpectralField:
    with open(path) as fh:
        return field_from_snapshot(json.load(fh))
