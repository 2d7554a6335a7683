"""Composite untrusted channel: fixed-loss segments around a fading segment.

Only the first two moments of sqrt(eta) enter the security computation; the
state after the channel is the zero-mean Gaussian mixture over subchannels,
whose covariance is the subchannel average.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .gaussian import CovarianceMatrix, require_physical
from .sources import SourceState


@dataclass(frozen=True)
class FadingStats:
    """First two moments of the fluctuating transmittance.

    mean_eta = <eta>, mean_sqrt_eta = <sqrt(eta)>; the fading strength is
    var_sqrt = <eta> - <sqrt(eta)>^2.
    """

    mean_eta: float
    mean_sqrt_eta: float

    def __post_init__(self):
        me, ms = self.mean_eta, self.mean_sqrt_eta
        if not (0.0 <= me <= 1.0) or not (0.0 <= ms <= 1.0):
            raise DomainError("fading moments must lie in [0, 1]")
        # Jensen both ways for eta in [0, 1]: <sqrt(eta)>^2 <= <eta> <= <sqrt(eta)>
        tol = 1e-12
        if me > ms + tol or ms * ms > me + tol:
            raise DomainError(
                f"moments violate Jensen bounds: <eta>={me}, <sqrt(eta)>={ms}"
            )

    @property
    def var_sqrt(self) -> float:
        return max(0.0, self.mean_eta - self.mean_sqrt_eta**2)

    @classmethod
    def fixed(cls, eta: float) -> "FadingStats":
        """Degenerate (non-fluctuating) channel of transmittance eta."""
        return cls(eta, math.sqrt(eta))

    def to_json(self) -> str:
        return json.dumps(
            {
                "mean_eta": self.mean_eta,
                "mean_sqrt_eta": self.mean_sqrt_eta,
                "var_sqrt": self.var_sqrt,
            }
        )


def fading_stats(samples) -> FadingStats:
    """Moments of a transmittance sample set (pairwise summation, reproducible)."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise DomainError("sample set is empty")
    if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise DomainError("transmittance samples must lie in [0, 1]")
    return FadingStats(float(arr.mean()), float(np.sqrt(arr).mean()))


def effective_excess_noise(stats: FadingStats, quadrature_variance: float) -> float:
    """Fading-induced excess noise for a quadrature of variance V_q (SNU).

    Var(sqrt(eta)) * (V_q - 1); negative for sub-shot-noise quadratures.
    """
    if quadrature_variance <= 0.0:
        raise DomainError("quadrature variance must be > 0")
    return stats.var_sqrt * (quadrature_variance - 1.0)


def fading_histogram(samples, bins: int = 200):
    """Equal-width histogram over [0, 1] for diagnostics only (not used in
    any security computation)."""
    arr = np.asarray(samples, dtype=float)
    counts, edges = np.histogram(arr, bins=bins, range=(0.0, 1.0))
    return edges, counts / arr.size


def read_eta_csv(path) -> np.ndarray:
    """Read a transmittance sample set from a CSV with single column `eta`.

    Lines starting with '#' are ignored (metadata comments).
    """
    values = []
    with open(path, newline="") as fh:
        rows = (r for r in fh if not r.startswith("#"))
        reader = csv.reader(rows)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["eta"]:
            raise DomainError(f"expected single-column CSV with header 'eta' in {path}")
        for row in reader:
            if not row:
                continue
            values.append(float(row[0]))
    if not values:
        raise DomainError(f"no samples found in {path}")
    return np.asarray(values, dtype=float)


@dataclass(frozen=True)
class CompositeChannel:
    """Fixed segments (eta1, eps1) and (eta2, eps2) around a fading segment.

    Excess noises are given in SNU as measured at the receiver input and
    compose to eps_plus = eps2 + eps_atm * eta2 + eps1 * eta2 * <eta>.
    """

    fading: FadingStats
    eta1: float = 1.0
    eta2: float = 1.0
    eps1: float = 0.0
    eps2: float = 0.0
    eps_atm: float = 0.0

    def __post_init__(self):
        for name in ("eta1", "eta2"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise DomainError(f"{name} must be in (0, 1], got {v}")
        for name in ("eps1", "eps2", "eps_atm"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"{name} must be >= 0")

    @property
    def eta_comb(self) -> float:
        return self.eta1 * self.eta2

    @property
    def eps_plus(self) -> float:
        return self.eps2 + self.eps_atm * self.eta2 + self.eps1 * self.eta2 * self.fading.mean_eta

    @property
    def mean_transmittance(self) -> float:
        """Overall mean transmittance eta_comb * <eta>."""
        return self.eta_comb * self.fading.mean_eta


def _scaled_output(source: SourceState, channel: CompositeChannel,
                   diag_factor: float, cross_factor: float,
                   extra_block: np.ndarray | None = None) -> CovarianceMatrix:
    g = np.array(source.gamma.matrix)
    n2 = g.shape[0]
    b = slice(n2 - 2, n2)
    block = g[b, b]
    out = g.copy()
    new_block = diag_factor * (block - np.eye(2)) + (1.0 + channel.eps_plus) * np.eye(2)
    if extra_block is not None:
        new_block = new_block + extra_block
    out[b, b] = new_block
    out[: n2 - 2, b] *= cross_factor
    out[b, : n2 - 2] *= cross_factor
    return CovarianceMatrix(out)


def apply_composite(source: SourceState, channel: CompositeChannel) -> CovarianceMatrix:
    """State shared by the trusted parties after the composite channel.

    Signal block <- eta_comb <eta> (gamma_B - 1) + (1 + eps_plus) 1; every
    trusted-to-signal cross block scales by sqrt(eta_comb) <sqrt(eta)>;
    trusted blocks are untouched.  Raises NonPhysicalState if the inputs are
    mutually inconsistent.
    """
    st = channel.fading
    out = _scaled_output(
        source,
        channel,
        diag_factor=channel.eta_comb * st.mean_eta,
        cross_factor=math.sqrt(channel.eta_comb) * st.mean_sqrt_eta,
    )
    return require_physical(out)


def apply_equivalent_fixed(source: SourceState, channel: CompositeChannel) -> CovarianceMatrix:
    """Equivalent fixed-channel representation of the fading mixture.

    Fixed transmittance <sqrt(eta)>^2 eta_comb plus per-quadrature excess
    noise eta_comb * Var(sqrt(eta)) * (V_q - 1) on the signal diagonal; exactly
    entry-wise identical to apply_composite.
    """
    st = channel.fading
    t_eq = channel.eta_comb * st.mean_sqrt_eta**2
    block = np.array(source.gamma.mode_block(source.signal_mode))
    extra = channel.eta_comb * st.var_sqrt * (block - np.eye(2))
    out = _scaled_output(
        source,
        channel,
        diag_factor=t_eq,
        cross_factor=math.sqrt(t_eq),
        extra_block=extra,
    )
    return require_physical(out)
