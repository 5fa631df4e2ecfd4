"""Filtering functions f(E; tau) and their expectation values.

All families are meant for energies rescaled to [0, 1]. ``f**2`` is strictly
decreasing in E on that interval for every tau > 0 (the Chebyshev family is
checked numerically, see :func:`check_monotone`).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .problem import ValidationError

FAMILIES = ("inverse", "logarithm", "exponential", "power", "cosine", "chebyshev")


class FilterDomainError(ValueError):
    """Energy outside the domain on which the filter is defined."""


class DegenerateFilterError(ArithmeticError):
    """The filter vanishes on the whole sampled support."""


class MonotonicityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FilterSpec:
    family: str
    tau: float

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in FAMILIES:
            raise ValidationError(f"unknown filter family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if fam == "chebyshev":
            if float(self.tau) != int(self.tau) or self.tau < 1:
                raise ValidationError("Chebyshev filter order must be a positive integer")
            object.__setattr__(self, "tau", int(self.tau))
        elif not self.tau >= 0:
            # tau = 0 is accepted as the identity limit; the adaptive search starts above it
            raise ValidationError("tau must be non-negative")

    def with_tau(self, tau) -> "FilterSpec":
        return FilterSpec(self.family, tau)

    def to_dict(self) -> dict:
        return {"family": self.family, "tau": self.tau}

    @classmethod
    def from_dict(cls, d) -> "FilterSpec":
        return cls(d["family"], d["tau"])


def _check_domain(family: str, E: np.ndarray) -> None:
    if not np.all(np.isfinite(E)):
        raise FilterDomainError("energies must be finite")
    if family == "inverse":
        bad = E <= 0
    elif family == "logarithm":
        bad = (E <= 0) | (E > 1)
    elif family == "power":
        bad = E > 1
    elif family == "cosine":
        bad = (E < 0) | (E >= math.pi / 2)
    elif family == "chebyshev":
        bad = np.abs(E) > 1
    else:
        bad = np.zeros(E.shape, dtype=bool)
    if np.any(bad):
        raise FilterDomainError(
            f"{family} filter undefined at E={np.asarray(E)[bad].ravel()[0]!r}")


def log_filter_value(spec: FilterSpec, E) -> np.ndarray:
    """log f(E; tau) for the five non-negative families (-inf where f = 0)."""
    E = np.asarray(E, dtype=float)
    fam, tau = spec.family, float(spec.tau)
    if fam == "chebyshev":
        raise ValidationError("Chebyshev filter can be negative; no log form")
    _check_domain(fam, E)
    with np.errstate(divide="ignore"):
        if fam == "inverse":
            base = -np.log(E)
        elif fam == "logarithm":
            base = np.log(-np.log(E))
        elif fam == "exponential":
            return -tau * E
        elif fam == "power":
            base = np.log1p(-E)
        else:
            base = np.log(np.cos(E))
    if tau == 0:
        return np.zeros_like(E)
    return tau * base


def filter_value(spec: FilterSpec, E):
    """f(E; tau). Raises :class:`FilterDomainError` outside the domain."""
    E_arr = np.asarray(E, dtype=float)
    if spec.family == "chebyshev":
        out = chebyshev_filter_value(E_arr, int(spec.tau))
    else:
        out = np.exp(log_filter_value(spec, E_arr))
    return float(out) if np.ndim(E) == 0 else out


def chebyshev_coefficient(s: int, tau: int) -> float:
    if not 0 <= s <= tau:
        raise ValidationError(f"need 0 <= s <= tau, got s={s}, tau={tau}")
    a = math.pi / (tau + 1)
    cot = math.cos(a) / math.sin(a)
    return ((tau - s + 1) * math.cos(s * a) + math.sin(s * a) * cot) / (tau + 1)


def chebyshev_polynomials(E, order: int) -> np.ndarray:
    """T_0 .. T_order at E via the three-term recursion, shape (order+1, *E.shape)."""
    x = np.asarray(E, dtype=float)
    T = np.empty((order + 1,) + x.shape)
    T[0] = 1.0
    if order >= 1:
        T[1] = x
    for s in range(1, order):
        T[s + 1] = 2 * x * T[s] - T[s - 1]
    return T


def chebyshev_filter_value(E, tau: int):
    E_arr = np.asarray(E, dtype=float)
    if tau < 1:
        raise ValidationError("Chebyshev order must be >= 1")
    _check_domain("chebyshev", E_arr)
    T = chebyshev_polynomials(E_arr, 2 * (tau // 2))
    out = np.zeros(E_arr.shape)
    for r in range(tau // 2 + 1):
        weight = (2 - (r == 0)) / math.pi * chebyshev_coefficient(2 * r, tau)
        out += (-1) ** r * weight * T[2 * r]
    return float(out) if np.ndim(E) == 0 else out


def scaled_filter_values(spec: FilterSpec, E, support=None) -> np.ndarray:
    """f(E)/max|f| over ``support`` (all entries if None).

    Ratios of filter expectations are invariant under rescaling f, and the
    rescaled values never overflow for large tau.
    """
    E = np.asarray(E, dtype=float)
    mask = np.ones(E.shape, dtype=bool) if support is None else np.asarray(support, dtype=bool)
    if spec.family == "chebyshev":
        out = np.zeros(E.shape)
        out[mask] = chebyshev_filter_value(E[mask], int(spec.tau))
        peak = np.max(np.abs(out[mask])) if mask.any() else 0.0
        return out / peak if peak > 0 else out
    logf = np.full(E.shape, -np.inf)
    logf[mask] = log_filter_value(spec, E[mask])
    top = np.max(logf[mask]) if mask.any() else -np.inf
    if not np.isfinite(top):
        return np.zeros(E.shape)
    return np.exp(logf - top)


def filtered_distribution(P, H, spec: FilterSpec) -> np.ndarray:
    """Distribution after applying F = f(H; tau) to a state with distribution P."""
    P = np.asarray(P, dtype=float)
    E = np.asarray(H.energies if hasattr(H, "energies") else H, dtype=float)
    if P.shape != E.shape:
        raise ValidationError("distribution and energies differ in length")
    if abs(P.sum() - 1) > 1e-9 or np.any(P < 0):
        raise ValidationError("P must be a normalized distribution")
    f = scaled_filter_values(spec, E, support=P > 0)
    w = f**2 * P
    Z = w.sum()
    if Z <= 0:
        raise DegenerateFilterError("filter vanishes on the support of P")
    return w / Z


def _support_weights(samples, dim):
    from .sim import SampleSet

    if isinstance(samples, SampleSet):
        if samples.shots < 1:
            raise ValidationError("empty sample set")
        return samples.outcomes, samples.counts / samples.shots
    p = np.asarray(samples, dtype=float)
    if p.ndim != 1 or (dim is not None and p.shape[0] != dim):
        raise ValidationError("exact-mode input must be a probability vector")
    if p.sum() <= 0:
        raise ValidationError("empty distribution")
    idx = np.flatnonzero(p)
    return idx, p[idx] / p.sum()


def _energies_at(H, idx):
    if hasattr(H, "energies"):
        return H.energies[idx]
    return np.asarray(H, dtype=float)[idx]


def estimate_expectation(samples, H, spec: FilterSpec, power: int = 1,
                         return_log_scale: bool = False):
    """Monte Carlo estimate (1/M) sum_x M_x f(E_x)**power.

    ``samples`` is a :class:`~fvqe.sim.SampleSet` or, in exact mode, a
    probability vector. With ``return_log_scale`` the result comes back as
    ``(mean, log_scale)`` with the true value ``mean * exp(log_scale)``;
    this form never overflows.
    """
    if power not in (1, 2):
        raise ValidationError("power must be 1 or 2")
    dim = 1 << H.n_qubits if hasattr(H, "n_qubits") else None
    idx, w = _support_weights(samples, dim)
    E = _energies_at(H, idx)
    if spec.family == "chebyshev":
        vals = chebyshev_filter_value(E, int(spec.tau)) ** power
        mean = float(w @ vals)
        return (mean, 0.0) if return_log_scale else mean
    logf = log_filter_value(spec, E)
    top = float(np.max(logf))
    if not np.isfinite(top):
        return (0.0, 0.0) if return_log_scale else 0.0
    mean = float(w @ np.exp(power * (logf - top)))
    if return_log_scale:
        return mean, power * top
    return mean * math.exp(power * top)


def estimate_energy(samples, H) -> float:
    """Same-sample energy estimate (1/M) sum_x M_x E_x."""
    dim = 1 << H.n_qubits
    idx, w = _support_weights(samples, dim)
    return float(w @ _energies_at(H, idx))


def check_monotone(spec: FilterSpec, lo: float = 1e-3, hi: float = 1.0,
                   num: int = 2001, warn: bool = True) -> bool:
    """Whether f**2 strictly decreases on a grid of [lo, hi]."""
    grid = np.linspace(lo, hi, num)
    if spec.family == "chebyshev":
        f2 = chebyshev_filter_value(grid, int(spec.tau)) ** 2
        ok = bool(np.all(np.diff(f2) < 0))
    else:
        # compare in the log domain; f = 0 only at endpoints (power, logarithm at E = 1)
        logf = log_filter_value(spec, grid)
        d = np.diff(logf)
        ok = bool(np.all((d < 0) | (np.isneginf(logf[1:]) & np.isfinite(logf[:-1]))))
    if not ok and warn:
        warnings.warn(f"f^2 not strictly decreasing for {spec}", MonotonicityWarning)
    return ok
