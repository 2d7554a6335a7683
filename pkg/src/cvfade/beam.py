"""Monte Carlo transmittance of a turbulent free-space optical link.

The instantaneous beam at the receiver is an elliptic Gaussian spot described
by five parameters: centroid offsets (x0, y0), log-scaled squared semiaxes
(Theta1, Theta2) with W_i^2 = W0^2 exp(Theta_i), and the ellipse orientation
phi, uniform on [0, pi/2].  The single-shot aperture transmittance is

    eta = eta0 * exp( -[ (r0/a) / R(2/W_eff(phi - phi0)) ] ^ lambda(2/W_eff(phi - phi0)) )

with scale/shape functions R, lambda built from scaled Bessel I0/I1, an
effective spot radius W_eff obtained through the Lambert W function, and eta0
the centered-beam transmittance.  The turbulence statistics of (x0, y0,
Theta1, Theta2) come from a versioned coefficient table shipped with the
package (see data/beam_spread_model.json for provenance notes).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, NumericalFailure
from .specialfn import bessel_i0e, bessel_i1e, lambert_w_exp

DEFAULT_TABLE_PATH = Path(__file__).parent / "data" / "beam_spread_model.json"
GENERATOR_NAME = "philox"

_CHUNK = 8192          # samples per generator chunk
_CHUNK_STRIDE = 2**40  # Philox counter stride between chunks (>> draws used)
_TABLE_KEYS = (
    "version",
    "rytov_normalization",
    "centroid_wander",
    "theta_gain",
    "theta_variance",
    "theta_covariance",
)

_table_cache: dict[str, dict] = {}


def load_coefficient_table(path=None) -> dict:
    """Load (and cache) the turbulence-moment coefficient table."""
    p = Path(path) if path is not None else DEFAULT_TABLE_PATH
    key = str(p)
    if key in _table_cache:
        return _table_cache[key]
    if not p.exists():
        raise ConfigError(f"coefficient table not found: {p}")
    try:
        table = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"coefficient table is not valid JSON: {p}") from exc
    missing = [k for k in _TABLE_KEYS if k not in table]
    if missing:
        raise ConfigError(f"coefficient table {p} missing keys: {missing}")
    for k in _TABLE_KEYS[1:]:
        if not isinstance(table[k], (int, float)) or table[k] <= 0:
            raise ConfigError(f"coefficient table entry {k!r} must be a positive number")
    _table_cache[key] = table
    return table


def rytov(cn2: float, k: float, distance: float) -> float:
    """Rytov variance 1.23 Cn^2 k^(7/6) L^(11/6) (plane-wave normalization)."""
    if cn2 < 0 or k <= 0 or distance <= 0:
        raise DomainError("rytov requires cn2 >= 0 and positive k, distance")
    return 1.23 * cn2 * k ** (7.0 / 6.0) * distance ** (11.0 / 6.0)


@dataclass(frozen=True)
class BeamScenario:
    """Geometry and turbulence strength of one free-space link.

    Lengths in meters.  Exactly one of cn2 / sigma_r2 must be given; cn2 is
    converted through the Rytov power law.  tracking=True models receiver-side
    beam tracking (centroid wander suppressed).
    """

    wavelength: float
    w0: float
    aperture: float
    distance: float
    cn2: float | None = None
    sigma_r2: float | None = None
    tracking: bool = False

    def __post_init__(self):
        for name in ("wavelength", "w0", "aperture", "distance"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0")
        if (self.cn2 is None) == (self.sigma_r2 is None):
            raise DomainError("give exactly one of cn2 / sigma_r2")
        if self.cn2 is not None and self.cn2 < 0:
            raise DomainError("cn2 must be >= 0")
        if self.sigma_r2 is not None and self.sigma_r2 < 0:
            raise DomainError("sigma_r2 must be >= 0")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def fresnel_omega(self) -> float:
        """Omega = k W0^2 / (2 L)."""
        return self.wavenumber * self.w0**2 / (2.0 * self.distance)

    @property
    def rytov_variance(self) -> float:
        if self.sigma_r2 is not None:
            return self.sigma_r2
        return rytov(self.cn2, self.wavenumber, self.distance)

    def to_dict(self) -> dict:
        return {
            "wavelength": self.wavelength,
            "w0": self.w0,
            "aperture": self.aperture,
            "distance": self.distance,
            "cn2": self.cn2,
            "sigma_r2": self.sigma_r2,
            "tracking": self.tracking,
        }


@dataclass(frozen=True)
class EllipticSample:
    """One realization of the beam-shape parameter vector."""

    x0: float
    y0: float
    theta1: float
    theta2: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.phi <= math.pi / 2:
            raise DomainError(f"phi must lie in [0, pi/2], got {self.phi}")


def turbulence_gaussian_params(sigma_r2: float, omega: float, w0: float,
                               tracking: bool = False, table: dict | None = None):
    """Mean vector and covariance of v = (x0, y0, Theta1, Theta2).

    Centroid wander is zero-mean isotropic with variance proportional to
    W0^2 sigma_R^2 Omega^(-7/6) (zero under tracking); the log-semiaxis
    moments are functions of sigma_R^2 Omega^(5/6).  Coefficients come from
    the versioned table.
    """
    if sigma_r2 < 0 or omega <= 0 or w0 <= 0:
        raise DomainError("turbulence_gaussian_params requires sigma_r2 >= 0, omega > 0, w0 > 0")
    t = table if table is not None else load_coefficient_table()
    norm = t["rytov_normalization"]
    s = norm * sigma_r2 * omega ** (5.0 / 6.0)
    base = (1.0 + t["theta_gain"] * s) ** 2
    mean_theta = math.log(base / (omega**2 * math.sqrt(base + t["theta_variance"] * s)))
    var_theta = math.log1p(t["theta_variance"] * s / base)
    cov_theta = math.log1p(-t["theta_covariance"] * s / base)
    var_bw = 0.0 if tracking else t["centroid_wander"] * w0**2 * norm * sigma_r2 * omega ** (-7.0 / 6.0)

    mu = np.array([0.0, 0.0, mean_theta, mean_theta])
    cov = np.zeros((4, 4))
    cov[0, 0] = cov[1, 1] = var_bw
    cov[2, 2] = cov[3, 3] = var_theta
    cov[2, 3] = cov[3, 2] = cov_theta
    return mu, cov


def _one_minus_i0e(z):
    """1 - e^-z I0(z), series below z = 1e-3 to avoid cancellation."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 1e-3
    zs = z[small]
    out[small] = zs - 0.75 * zs**2 + (5.0 / 12.0) * zs**3
    zb = z[~small]
    if zb.size:
        out[~small] = 1.0 - bessel_i0e(zb)
    return out


def _scale_shape(z):
    """Scale R(z) and shape lambda(z) with z = a^2 xi^2 (dimensionless).

    R(z)      = [ln(2 (1 - e^(-z/2)) / (1 - e^-z I0(z)))]^(-1/lambda)
    lambda(z) = 2 z e^-z I1(z) / (1 - e^-z I0(z)) / ln(...)
    Small-z branch uses series expansions (lambda -> 2).
    """
    z = np.asarray(z, dtype=float)
    d = _one_minus_i0e(z)
    lnterm = np.empty_like(z)
    lam = np.empty_like(z)
    small = z < 1e-3
    zs = z[small]
    lnterm[small] = 0.5 * zs - zs**2 / 8.0 + zs**3 / 96.0
    lam[small] = 2.0
    zb = z[~small]
    if zb.size:
        num = -2.0 * np.expm1(-0.5 * zb)
        lnterm[~small] = np.log(num / d[~small])
        lam[~small] = 2.0 * zb * bessel_i1e(zb) / d[~small] / lnterm[~small]
    return lnterm ** (-1.0 / lam), lam


def _eta0(w1sq, w2sq, a):
    """Centered-beam transmittance of an elliptic Gaussian spot through a disk."""
    inv1, inv2 = 1.0 / w1sq, 1.0 / w2sq
    u = a * a * np.abs(inv1 - inv2)
    v = a * a * (inv1 + inv2)
    t1 = bessel_i0e(u) * np.exp(u - v)  # I0(u) e^-v without overflow (v >= u)

    w1, w2 = np.sqrt(w1sq), np.sqrt(w2sq)
    z = a * a * (1.0 / w1 - 1.0 / w2) ** 2
    small = z < 1e-3
    q = np.empty_like(z)   # q = [(W1+W2)^2 / |W1^2 - W2^2|] / R
    lam = np.empty_like(z)
    zs = z[small]
    # closed-form limit of G/R as W2 -> W1 (G and R both diverge)
    q[small] = a * (w1[small] + w2[small]) / (math.sqrt(2.0) * w1[small] * w2[small]) * (1.0 - zs / 8.0)
    lam[small] = 2.0
    if np.any(~small):
        r_big, lam_big = _scale_shape(z[~small])
        g_big = (w1[~small] + w2[~small]) / np.abs(w1[~small] - w2[~small])
        q[~small] = g_big / r_big
        lam[~small] = lam_big
    t3 = -2.0 * np.expm1(-0.5 * z) * np.exp(-(q**lam))
    return 1.0 - t1 - t3


def _transmittance_batch(x0, y0, theta1, theta2, phi, scenario: BeamScenario):
    """Vectorized single-shot transmittance for parameter arrays."""
    a = scenario.aperture
    w0sq = scenario.w0**2
    w1sq = w0sq * np.exp(theta1)
    w2sq = w0sq * np.exp(theta2)
    r0 = np.hypot(x0, y0)
    chi = phi - np.arctan2(y0, x0)
    # W_eff^2(chi) = 4 a^2 / W(zeta); zeta handled in log form so the huge
    # exponentials of narrow beams never overflow
    log_zeta = (
        np.log(4.0 * a * a / np.sqrt(w1sq * w2sq))
        + (a * a / w1sq) * (1.0 + 2.0 * np.cos(chi) ** 2)
        + (a * a / w2sq) * (1.0 + 2.0 * np.sin(chi) ** 2)
    )
    z = lambert_w_exp(log_zeta)  # = 4 a^2 / W_eff^2
    scale, shape = _scale_shape(z)
    eta = _eta0(w1sq, w2sq, a) * np.exp(-((r0 / a / scale) ** shape))
    if not np.all(np.isfinite(eta)):
        raise NumericalFailure("transmittance evaluation produced non-finite values")
    return np.clip(eta, 0.0, 1.0)


def transmittance(sample: EllipticSample, scenario: BeamScenario) -> float:
    """Single-shot aperture transmittance of one beam realization."""
    eta = _transmittance_batch(
        np.array([sample.x0]),
        np.array([sample.y0]),
        np.array([sample.theta1]),
        np.array([sample.theta2]),
        np.array([sample.phi]),
        scenario,
    )
    return float(eta[0])


@dataclass(frozen=True)
class SimulationResult:
    samples: np.ndarray
    metadata: dict


def _chunk_generator(seed: int, chunk_index: int) -> np.random.Generator:
    bg = np.random.Philox(key=seed)
    bg.advance(chunk_index * _CHUNK_STRIDE)
    return np.random.Generator(bg)


def simulate(scenario: BeamScenario, n: int, seed: int, jobs: int = 1,
             table: dict | None = None) -> SimulationResult:
    """Draw n transmittance samples; a pure function of (scenario, n, seed).

    Samples are generated in fixed-size chunks, each from its own
    counter-advanced Philox stream, so the output is bit-identical for any
    worker count.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0 <= int(seed) < 2**64:
        raise DomainError("seed must fit in 64 bits")
    t = table if table is not None else load_coefficient_table()
    mu, cov = turbulence_gaussian_params(
        scenario.rytov_variance, scenario.fresnel_omega, scenario.w0,
        tracking=scenario.tracking, table=t,
    )
    var_bw = cov[0, 0]
    theta_cov = cov[2:, 2:]
    if theta_cov[0, 0] > 0:
        chol = np.linalg.cholesky(theta_cov)
    else:
        chol = np.zeros((2, 2))

    def run_chunk(ci: int) -> np.ndarray:
        lo = ci * _CHUNK
        m = min(_CHUNK, n - lo)
        rng = _chunk_generator(int(seed), ci)
        zn = rng.standard_normal((m, 4))
        x0 = math.sqrt(var_bw) * zn[:, 0]
        y0 = math.sqrt(var_bw) * zn[:, 1]
        th = mu[2] + zn[:, 2:4] @ chol.T
        phi = rng.uniform(0.0, math.pi / 2.0, m)
        return _transmittance_batch(x0, y0, th[:, 0], th[:, 1], phi, scenario)

    n_chunks = (n + _CHUNK - 1) // _CHUNK
    if jobs > 1 and n_chunks > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(ci) for ci in range(n_chunks)]
    samples = np.concatenate(parts)

    metadata = {
        "generator": GENERATOR_NAME,
        "seed": int(seed),
        "n": int(n),
        "chunk_size": _CHUNK,
        "scenario": scenario.to_dict(),
        "coefficient_table_version": t["version"],
    }
    return SimulationResult(samples=samples, metadata=metadata)
