"""Continuous semigroups of distributions and Monte Carlo expectations.

Four laws are offered: the point mass ``Dirac`` (``Gamma(t) = delta_t``),
``ScaledPoisson(lam)`` (``N/lam`` with ``N ~ Poisson(lam t)``),
``AuxiliaryPoisson(lam)`` (a ``Poisson(lam t)`` number of independent
``Exp(lam)`` durations, the count and the durations coming from independent
streams) and ``Gaussian(mu, sigma2)``.

Seeding: a master seed is expanded with :class:`numpy.random.SeedSequence`
into fixed sub-streams ``(chunk, stream)``.  Samples are drawn in fixed-size
chunks so the batch for a given ``(law, t, n, seed)`` does not depend on how
many workers produced it.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linalg import matrix_exponential, matrix_exponential_batch
from .semigroup import _as_generator, is_dissipative

CHUNK = 1 << 18
COUNT_STREAM = 0
DURATION_STREAM = 1


@dataclass(frozen=True)
class Dirac:
    kind = "dirac"

    def describe(self) -> dict:
        return {"law": self.kind}


@dataclass(frozen=True)
class ScaledPoisson:
    rate: float
    kind = "scaled-poisson"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def describe(self) -> dict:
        return {"law": self.kind, "rate": self.rate}


@dataclass(frozen=True)
class AuxiliaryPoisson:
    rate: float
    kind = "aux-poisson"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def describe(self) -> dict:
        return {"law": self.kind, "rate": self.rate}


@dataclass(frozen=True)
class Gaussian:
    drift: float = 0.0
    diffusion: float = 1.0
    kind = "gaussian"

    def __post_init__(self):
        if self.diffusion < 0:
            raise ValueError("diffusion (variance rate) must be >= 0")

    def describe(self) -> dict:
        return {"law": self.kind, "drift": self.drift, "diffusion": self.diffusion}


NONNEGATIVE_LAWS = (Dirac, ScaledPoisson, AuxiliaryPoisson)


def law_from_name(name: str, rate: float = 1.0, drift: float = 0.0, diffusion: float = 1.0):
    name = name.lower()
    if name == "dirac":
        return Dirac()
    if name in ("scaled-poisson", "poisson", "hille"):
        return ScaledPoisson(rate)
    if name in ("aux-poisson", "auxiliary-poisson", "yosida"):
        return AuxiliaryPoisson(rate)
    if name == "gaussian":
        return Gaussian(drift, diffusion)
    raise ValueError(f"unknown law {name!r}")


@dataclass(frozen=True)
class SampleBatch:
    values: np.ndarray
    seed: int
    law: object
    t: float

    def __len__(self):
        return self.values.size


def _stream(seed: int, chunk: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk, stream)))


def _sample_chunk(ds, t: float, n: int, seed: int, chunk: int, method: str) -> np.ndarray:
    if isinstance(ds, Dirac):
        return np.full(n, float(t))
    if isinstance(ds, ScaledPoisson):
        counts = _stream(seed, chunk, COUNT_STREAM).poisson(ds.rate * t, n)
        return counts / ds.rate
    if isinstance(ds, AuxiliaryPoisson):
        counts = _stream(seed, chunk, COUNT_STREAM).poisson(ds.rate * t, n)
        durations = _stream(seed, chunk, DURATION_STREAM)
        if method == "sum":
            # Literal construction: add up N_t exponential durations.
            out = np.zeros(n)
            total = int(counts.sum())
            if total:
                taus = durations.exponential(1.0 / ds.rate, total)
                owner = np.repeat(np.arange(n), counts)
                np.add.at(out, owner, taus)
            return out
        # A sum of N iid Exp(lam) variables is Gamma(N, 1/lam).
        out = np.zeros(n)
        pos = counts > 0
        out[pos] = durations.gamma(counts[pos], 1.0 / ds.rate)
        return out
    if isinstance(ds, Gaussian):
        z = _stream(seed, chunk, COUNT_STREAM).standard_normal(n)
        return ds.drift * t + np.sqrt(ds.diffusion * t) * z
    raise TypeError(f"unsupported law {ds!r}")


def sample(ds, t: float, n: int, seed: int = 0, method: str = "gamma", threads: int = 1) -> SampleBatch:
    """``n`` independent draws from ``Gamma(t)``; ``t = 0`` gives all zeros."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    if method not in ("gamma", "sum"):
        raise ValueError("method is 'gamma' or 'sum'")
    if t == 0:
        return SampleBatch(np.zeros(n), seed, ds, t)
    sizes = [min(CHUNK, n - start) for start in range(0, n, CHUNK)]
    jobs = [(ds, t, size, seed, c, method) for c, size in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda a: _sample_chunk(*a), jobs))
    else:
        parts = [_sample_chunk(*a) for a in jobs]
    return SampleBatch(np.concatenate(parts), seed, ds, t)


def moments(ds, t: float) -> tuple:
    """Closed-form ``(mean, variance)`` of ``Gamma(t)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if isinstance(ds, Dirac):
        return float(t), 0.0
    if isinstance(ds, ScaledPoisson):
        return float(t), t / ds.rate
    if isinstance(ds, AuxiliaryPoisson):
        return float(t), 2 * t / ds.rate
    if isinstance(ds, Gaussian):
        return ds.drift * t, ds.diffusion * t
    raise TypeError(f"unsupported law {ds!r}")


def characteristic_fn(ds, t: float, omega) -> complex:
    """``E[exp(i omega theta)]`` for ``theta ~ Gamma(t)``; vectorised over ``omega``."""
    omega = np.asarray(omega, dtype=float)
    if isinstance(ds, Dirac):
        out = np.exp(1j * omega * t)
    elif isinstance(ds, ScaledPoisson):
        lam = ds.rate
        out = np.exp(lam * t * (np.exp(1j * omega / lam) - 1))
    elif isinstance(ds, AuxiliaryPoisson):
        lam = ds.rate
        out = np.exp(1j * omega / (lam - 1j * omega) * lam * t)
    elif isinstance(ds, Gaussian):
        out = np.exp(1j * omega * ds.drift * t - 0.5 * ds.diffusion * t * omega**2)
    else:
        raise TypeError(f"unsupported law {ds!r}")
    return out[()] if out.ndim == 0 else out


def empirical_char_fn(batch, omega) -> complex:
    values = batch.values if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    if values.size == 0:
        raise ValueError("empty batch")
    omega = np.asarray(omega, dtype=float)
    out = np.array([np.mean(np.exp(1j * w * values)) for w in omega.ravel()]).reshape(omega.shape)
    return out[()] if out.ndim == 0 else out


def semigroup_law_check(ds, s: float, t: float, n: int, omegas, seed: int = 0) -> float:
    """Max over ``omegas`` of ``|phi_emp(theta_1 + theta_2) - phi_{s+t}|``.

    ``theta_1 ~ Gamma(s)`` and ``theta_2 ~ Gamma(t)`` come from disjoint seeds.
    """
    a = sample(ds, s, n, seed=seed)
    b = sample(ds, t, n, seed=seed + 0x9E3779B9)
    total = SampleBatch(a.values + b.values, seed, ds, s + t)
    emp = np.atleast_1d(empirical_char_fn(total, omegas))
    exact = np.atleast_1d(characteristic_fn(ds, s + t, omegas))
    return float(np.max(np.abs(emp - exact)))


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo average of a matrix-valued random variable."""

    mean: np.ndarray
    stderr: np.ndarray   # entrywise standard error of the mean
    n: int

    @property
    def error(self) -> float:
        """Frobenius norm of the entrywise standard errors."""
        return float(np.sqrt(np.sum(self.stderr**2)))


def mc_average(times: np.ndarray, fn_batch) -> MCEstimate:
    """Average ``fn_batch(unique_times)`` weighted by multiplicity.

    ``fn_batch`` maps a 1-d array of distinct times to a stack of matrices.
    Lattice-valued samples (e.g. scaled Poisson) collapse to a handful of
    distinct times, which keeps this cheap.
    """
    times = np.asarray(times, dtype=float)
    n = times.size
    uniq, counts = np.unique(times, return_counts=True)
    X = fn_batch(uniq)
    w = counts[:, None, None] / n
    mean = np.sum(w * X, axis=0)
    second = np.sum(w * np.abs(X) ** 2, axis=0)
    var = np.maximum(second - np.abs(mean) ** 2, 0.0) * n / max(n - 1, 1)
    return MCEstimate(mean, np.sqrt(var / n), n)


def expectation_of_semigroup(g, ds, t: float, n: int, seed: int = 0, return_estimate: bool = False):
    """Monte Carlo ``E[exp(theta A)]`` with ``theta ~ Gamma(t)``.

    Only contractive semigroups on non-negative laws are accepted.
    """
    g = _as_generator(g)
    if not isinstance(ds, NONNEGATIVE_LAWS):
        raise ValueError(f"{ds.kind} samples can be negative; T(theta) is undefined there")
    if not is_dissipative(g):
        raise ValueError("expectation_of_semigroup requires a dissipative generator")
    if isinstance(ds, Dirac) or t == 0:
        E = matrix_exponential(g.A, t)
        est = MCEstimate(E, np.zeros(E.shape), n)
    else:
        batch = sample(ds, t, n, seed)
        est = mc_average(batch.values, lambda u: matrix_exponential_batch(g.A, u))
    return est if return_estimate else est.mean
