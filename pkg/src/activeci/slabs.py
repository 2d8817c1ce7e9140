"""Intermittent slab building blocks.

A slab is a 1-D profile oscillating at frequency lam along a lattice
direction k, periodized at scale lam^{-eps}:

    rho(x) = sum_n lam^{(1-eps)/2} phi(lam k.x + lam^{1-eps} n).

Its Fourier series lives on the line {lam^eps n k} with coefficients
lam^{(eps-1)/2} phihat(lam^{eps-1} n), which is how the iteration consumes
it.  eps tunes the L^p family: ||rho||_{L^p} ~ lam^{(1-eps)(1/2 - 1/p)}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .fields import SpectralField

__all__ = [
    "Profile",
    "SlabSpec",
    "TailTooFat",
    "build_profile",
    "slab_fourier",
    "slab_physical",
    "certify_scaling",
    "write_scaling_csv",
]


class TailTooFat(ValueError):
    """No admissible mode cap meets the Fourier-tail tolerance."""


@dataclass
class Profile:
    """Smooth odd L2-normalized bump supported in (-1, 1)."""

    kind: str
    norm_const: float
    _fhat_cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 1.0
        xi = x[inside]
        out[inside] = self.norm_const * np.sin(np.pi * xi) * np.exp(-1.0 / (1.0 - xi * xi))
        return out

    def fhat(self, t: float) -> complex:
        """Fourier transform phihat(t) = int phi(x) e^{-2 pi i t x} dx.

        phi odd and real, so phihat(t) = -2i int_0^1 phi(x) sin(2 pi t x) dx,
        purely imaginary with phihat(-t) = conj(phihat(t)).
        """
        key = round(float(t), 12)
        if key not in self._fhat_cache:
            tt = abs(key)
            if tt == 0.0:
                val = 0.0j
            else:
                # quad's oscillatory weight handles large t robustly
                integral, _ = quad(
                    lambda x: float(self(np.array([x]))[0]),
                    0.0,
                    1.0,
                    weight="sin",
                    wvar=2.0 * np.pi * tt,
                    limit=400,
                    epsabs=1e-14,
                    epsrel=1e-12,
                )
                val = -2.0j * integral
            self._fhat_cache[key] = val
            self._fhat_cache[-key] = np.conj(val)
        return self._fhat_cache[key]


def build_profile(kind: str = "odd-bump") -> Profile:
    """Construct the default profile C sin(pi x) exp(-1/(1-x^2)), C fixed by
    L2 normalization with adaptive quadrature."""
    if kind != "odd-bump":
        raise ValueError(f"unknown profile kind {kind!r}")
    mass, _ = quad(
        lambda x: math.sin(math.pi * x) ** 2 * math.exp(-2.0 / (1.0 - x * x)),
        -1.0,
        1.0,
        epsabs=1e-14,
        epsrel=1e-13,
        limit=200,
    )
    return Profile(kind=kind, norm_const=1.0 / math.sqrt(mass))


@dataclass
class SlabSpec:
    k: tuple
    lam: int
    eps: float
    profile: Profile

    def __post_init__(self):
        self.k = tuple(int(c) for c in self.k)
        self.lam = int(self.lam)
        if self.lam < 2 or self.lam & (self.lam - 1):
            raise ValueError(f"lam must be a power of two, got {self.lam}")
        if not (0 < self.eps <= 1):
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        sigma = self.lam**self.eps
        if abs(sigma - round(sigma)) > 1e-9:
            raise ValueError(f"lam^eps = {sigma} is not an integer")
        # translated copies along k have supports of width 2 spaced lam^{1-eps}
        # apart in the lam k.x variable; require strict disjointness
        self.disjointness_threshold = 2.0
        if self.lam ** (1.0 - self.eps) < self.disjointness_threshold:
            raise ValueError(
                f"lam^(1-eps) = {self.lam ** (1.0 - self.eps):.3g} below the "
                f"disjoint-support threshold {self.disjointness_threshold}"
            )

    @property
    def harmonic_step(self) -> int:
        """Integer lam^eps: Fourier support spacing along k."""
        return int(round(self.lam**self.eps))


def _choose_cap(spec: SlabSpec, tol: float = 1e-12, hard_cap: int = 20000) -> int:
    """Smallest mode cap whose dropped |phihat| tail is <= tol of the kept mass."""
    step = spec.lam ** (spec.eps - 1.0)
    kept = 0.0
    mags = []
    n = 1
    while n <= hard_cap:
        mag = abs(spec.profile.fhat(step * n))
        mags.append(mag)
        kept += mag
        # super-polynomial decay: once the last few terms are tiny relative to
        # the mass, bound the tail by a geometric comparison
        if n >= 4 and kept > 0:
            recent = mags[-3:]
            if max(recent) <= 0.25 * tol * kept:
                return n
        n += 1
    raise TailTooFat(
        f"tail tolerance {tol} not reached within {hard_cap} modes at "
        f"lam={spec.lam}, eps={spec.eps}"
    )


def slab_fourier(spec: SlabSpec, mode_cap: int | None = None) -> SpectralField:
    """Fourier-series form of the slab: modes at lam^eps n k, 0 < |n| <= cap,
    with coefficients lam^{(eps-1)/2} phihat(lam^{eps-1} n).  Mean-free by the
    oddness of the profile (phihat(0) = 0, never stored)."""
    if mode_cap is None:
        mode_cap = _choose_cap(spec)
    step = spec.lam ** (spec.eps - 1.0)
    amp = spec.lam ** ((spec.eps - 1.0) / 2.0)
    sigma = spec.harmonic_step
    d = len(spec.k)
    coeffs = {}
    for n in range(1, mode_cap + 1):
        c = amp * spec.profile.fhat(step * n)
        if c == 0:
            continue
        xi = tuple(sigma * n * ki for ki in spec.k)
        coeffs[xi] = complex(c)
        coeffs[tuple(-x for x in xi)] = complex(np.conj(c))
    return SpectralField(d, 0, coeffs, reality=True).pruned()


def slab_physical(spec: SlabSpec, x) -> float:
    """Direct translated-profile sum at one point of the torus."""
    x = np.asarray(x, dtype=float)
    t = spec.lam * float(np.dot(spec.k, x))
    spacing = spec.lam ** (1.0 - spec.eps)
    # phi(t + spacing * n) != 0 needs |t + spacing * n| < 1
    n_lo = math.floor((-1.0 - t) / spacing)
    n_hi = math.ceil((1.0 - t) / spacing)
    total = 0.0
    amp = spec.lam ** ((1.0 - spec.eps) / 2.0)
    for n in range(n_lo, n_hi + 1):
        total += amp * float(spec.profile(np.array([t + spacing * n]))[0])
    return total


def _line_norm(spec: SlabSpec, p: float, pts_per_copy: int = 256) -> float:
    """L^p norm of the slab via its 1-D reduction.

    With gcd of the direction entries equal to 1, the map x -> k.x pushes the
    torus measure to the uniform measure on the circle, so the d-dimensional
    L^p norm equals the L^p(T) norm of g(t) = sum_n lam^{(1-eps)/2}
    phi(lam t + lam^{1-eps} n).
    """
    g = math.gcd(*[abs(c) for c in spec.k])
    if g != 1:
        raise ValueError(f"direction {spec.k} must have coprime entries")
    amp = spec.lam ** ((1.0 - spec.eps) / 2.0)
    # one period of g in t has length lam^{-eps} and holds a single copy of
    # phi(lam t); integrate that copy on a fine grid and replicate
    copies = spec.harmonic_step  # lam^eps copies tile the circle
    u = np.linspace(-1.0, 1.0, 2 * pts_per_copy, endpoint=False)
    vals = amp * spec.profile(u)
    if np.isinf(p):
        return float(np.max(np.abs(vals)))
    du = (u[1] - u[0]) / spec.lam  # dt = du / lam
    integral_one_copy = float(np.sum(np.abs(vals) ** p) * du)
    return (copies * integral_one_copy) ** (1.0 / p)


def certify_scaling(k, profile: Profile, lam_list, eps: float, p_list) -> list:
    """Measure ||rho||_{L^p} across scales and fit log-log slopes against the
    target exponent (1-eps)(1/2 - 1/p).  Returns report rows; deviations are
    entries, never errors."""
    rows = []
    for p in p_list:
        pf = float(p)
        norms = []
        for lam in lam_list:
            spec = SlabSpec(k=k, lam=lam, eps=eps, profile=profile)
            norms.append(_line_norm(spec, pf))
        logs_l = np.log2(np.asarray(lam_list, dtype=float))
        logs_n = np.log2(np.asarray(norms))
        slope = float(np.polyfit(logs_l, logs_n, 1)[0])
        inv_p = 0.0 if np.isinf(pf) else 1.0 / pf
        target = (1.0 - eps) * (0.5 - inv_p)
        for lam, norm in zip(lam_list, norms):
            rows.append(
                {
                    "p": "inf" if np.isinf(pf) else pf,
                    "lam": int(lam),
                    "norm": norm,
                    "fitted_slope": slope,
                    "target_slope": target,
                    "deviation": slope - target,
                }
            )
    return rows


def write_scaling_csv(rows, path) -> None:
    fieldnames = ["p", "lam", "norm", "fitted_slope", "target_slope", "deviation"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fieldnames})
