"""Synthetic CSI channel model.

Generates complex CSI frames containing static paths, dynamic paths with
cubic phase evolution (velocity / acceleration / jerk of the propagation
path length change), and circularly symmetric complex Gaussian noise.
Also provides the static-component removal preprocessing and the
two-channel conjugate multiplication used to cancel synchronization error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError

SPEED_OF_LIGHT = 2.998e8  # m/s


@dataclass(frozen=True)
class PathParams:
    """Kinematics and gain of one dynamic propagation path.

    v, a, r are velocity (m/s), acceleration (m/s^2) and jerk (m/s^3) of
    the path-length change; theta0 is the initial phase in cycles.
    """

    v: float
    a: float
    r: float
    amplitude: float = 1.0
    theta0: float = 0.0

    def __post_init__(self):
        vals = (self.v, self.a, self.r, self.amplitude, self.theta0)
        if not all(np.isfinite(vals)):
            raise ConfigurationError("path parameters must be finite")
        if self.amplitude <= 0:
            raise ConfigurationError("path amplitude must be positive")


@dataclass(frozen=True)
class ChannelConfig:
    """OFDM channel and sampling geometry.

    Subcarrier k sits at carrier - bandwidth/2 + k * bandwidth/(K-1); a
    single-subcarrier config collapses to the carrier frequency.
    """

    carrier_hz: float = 5.805e9
    bandwidth_hz: float = 80e6
    n_subcarriers: int = 256
    sample_interval_s: float = 1e-3
    window_len: int = 256
    c: float = SPEED_OF_LIGHT
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.n_subcarriers < 1:
            raise ConfigurationError("need at least one subcarrier")
        if self.window_len < 8:
            raise ConfigurationError("window_len must be >= 8")
        if self.sample_interval_s <= 0:
            raise ConfigurationError("sample_interval_s must be positive")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")
        freqs = self.subcarrier_freqs()
        if len(freqs) > 1 and not np.all(np.diff(freqs) > 0):
            raise ConfigurationError("subcarrier frequencies must be strictly increasing")

    def subcarrier_freqs(self) -> np.ndarray:
        """Frequency of every subcarrier in Hz."""
        k = np.arange(self.n_subcarriers, dtype=np.float64)
        if self.n_subcarriers == 1:
            return np.array([self.carrier_hz])
        step = self.bandwidth_hz / (self.n_subcarriers - 1)
        return self.carrier_hz - self.bandwidth_hz / 2 + k * step


@dataclass
class CsiFrame:
    """Complex CSI samples over subcarriers x time plus the synthesized static part."""

    samples: np.ndarray            # complex128 [n_subcarriers, window_len]
    config: ChannelConfig
    static_component: np.ndarray   # complex128 [n_subcarriers]

    def __post_init__(self):
        expected = (self.config.n_subcarriers, self.config.window_len)
        if self.samples.shape != expected:
            raise ConfigurationError(
                f"sample matrix shape {self.samples.shape} does not match config {expected}"
            )
        if self.static_component.shape != (self.config.n_subcarriers,):
            raise ConfigurationError("static_component length must equal n_subcarriers")
        if not np.all(np.isfinite(self.samples.view(np.float64))):
            raise ConfigurationError("CSI samples must be finite")

    def copy(self) -> "CsiFrame":
        return CsiFrame(self.samples.copy(), self.config, self.static_component.copy())


def _dynamic_phase_cycles(path: PathParams, freqs: np.ndarray, t: np.ndarray,
                          c: float) -> np.ndarray:
    """Phase in cycles of one dynamic path over [n_subcarriers, window_len]."""
    poly = path.v * t + 0.5 * path.a * t**2 + path.r * t**3 / 6.0
    return path.theta0 + np.outer(freqs / c, poly)


def synthesize_csi(paths: list[PathParams], static_gain, config: ChannelConfig,
                   seed: int) -> CsiFrame:
    """Build a CSI frame from dynamic paths plus a static component plus noise.

    static_gain is a complex scalar or a length-n_subcarriers vector.
    Identical (paths, static_gain, config, seed) give bit-identical output.
    """
    static = np.asarray(static_gain, dtype=np.complex128)
    if static.ndim == 0:
        static = np.full(config.n_subcarriers, complex(static))
    if static.shape != (config.n_subcarriers,):
        raise ConfigurationError(
            f"static_gain length {static.shape} does not match {config.n_subcarriers} subcarriers"
        )
    if not paths and not np.any(static):
        raise ConfigurationError("need at least one dynamic path or a nonzero static gain")

    freqs = config.subcarrier_freqs()
    t = np.arange(config.window_len) * config.sample_interval_s
    samples = np.zeros((config.n_subcarriers, config.window_len), dtype=np.complex128)
    for path in paths:
        phase = _dynamic_phase_cycles(path, freqs, t, config.c)
        samples += path.amplitude * np.exp(2j * np.pi * phase)
    samples += static[:, None]
    if config.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        scale = config.noise_sigma / np.sqrt(2.0)
        noise = rng.standard_normal(samples.shape) + 1j * rng.standard_normal(samples.shape)
        samples += scale * noise
    return CsiFrame(samples, config, static)


def remove_static(frame: CsiFrame) -> CsiFrame:
    """Zero the DC bin of each subcarrier's time series (static-path rejection)."""
    if frame.config.window_len < 2:
        raise ConfigurationError("window too short for static removal")
    spec = sfft.fft(frame.samples, axis=1)
    spec[:, 0] = 0.0
    cleaned = sfft.ifft(spec, axis=1)
    return CsiFrame(cleaned, frame.config, np.zeros_like(frame.static_component))


def conjugate_multiply(surveillance: CsiFrame, reference: CsiFrame) -> CsiFrame:
    """Elementwise surveillance * conj(reference).

    Cancels any time-varying phase drift common to both channels; the
    product frame keeps the surveillance config.
    """
    if surveillance.samples.shape != reference.samples.shape:
        raise ConfigurationError("channel frames must have identical shapes")
    if surveillance.config != reference.config:
        raise ConfigurationError("channel frames must share one config")
    product = surveillance.samples * np.conj(reference.samples)
    static = surveillance.static_component * np.conj(reference.static_component)
    return CsiFrame(product, surveillance.config, static)
