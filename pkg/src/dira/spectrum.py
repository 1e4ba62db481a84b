"""Acceleration-jerk spectrum estimation from a CSI time series.

The chain is: fourth-order symmetric self-correlation over (time, lag),
keystone resampling of the time axis to decouple the lag coupling, then a
2-D FFT whose magnitude concentrates each dynamic path into one peak.
Peak positions calibrate to physical acceleration (f_tau axis) and jerk
(f_eta axis); acceleration reads at the window-center time anchor and is
de-referenced to the window start using the jerk estimate.

Two robustness layers sit on top:

* lag fusion - the same spectrum computed at a shorter correlation lag
  has its axes rescaled so true peaks align while fourth-order cross-term
  ghosts move; an elementwise minimum rejects the ghosts.
* successive cancellation (estimate_targets) - strongest component is
  estimated, its time-domain signal reconstructed (dechirp recovers
  velocity and complex amplitude) and subtracted, so the ghosts it spawns
  with other targets vanish before the next pick.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import map_coordinates, maximum_filter

from .channel import SPEED_OF_LIGHT, CsiFrame
from .errors import ConfigurationError, EstimationError

PHI_WINDOW_FRACTION = 0.089  # correlation lag as a fraction of the window
_TAU_D_FRACTION = 0.41       # constant-delay default as a fraction of the window


@dataclass(frozen=True)
class CorrelationParams:
    """Geometry of the symmetric self-correlation and its keystone/FFT stages."""

    phi_samples: int
    tau_d_samples: int
    sample_interval_s: float
    pad_factor: int = 2
    fusion_lag_fractions: tuple = ()
    fusion_gain_overshoot: float = 1.6
    interp: str = "sinc8"

    def __post_init__(self):
        if self.phi_samples < 1:
            raise ConfigurationError("phi_samples must be >= 1")
        if self.tau_d_samples < 1:
            raise ConfigurationError("tau_d_samples must be >= 1")
        if self.sample_interval_s <= 0:
            raise ConfigurationError("sample_interval_s must be positive")
        if self.pad_factor < 1:
            raise ConfigurationError("pad_factor must be >= 1")
        if self.interp not in ("sinc8", "linear"):
            raise ConfigurationError("interp must be 'sinc8' or 'linear'")
        if any(not (0 < fr < 1) for fr in self.fusion_lag_fractions):
            raise ConfigurationError("fusion lag fractions must lie in (0, 1)")

    @property
    def phi_s(self) -> float:
        return self.phi_samples * self.sample_interval_s

    @property
    def scale_s(self) -> float:
        """Keystone scaling factor s; s * (tau_d in seconds) == 1 by construction."""
        return 1.0 / (self.tau_d_samples * self.sample_interval_s)


def default_phi(window_len: int) -> int:
    return max(1, round(PHI_WINDOW_FRACTION * window_len))


def default_tau_d(window_len: int) -> int:
    """Constant delay ~0.41 Q, parity-adjusted so the time grid centers on an integer."""
    tau_d = max(1, round(_TAU_D_FRACTION * window_len))
    if (window_len - 1 - tau_d) % 2:
        tau_d += 1 if tau_d + 1 < window_len // 2 else -1
    return tau_d


def default_correlation_params(window_len: int, sample_interval_s: float,
                               fusion: bool = True) -> CorrelationParams:
    return CorrelationParams(
        phi_samples=default_phi(window_len),
        tau_d_samples=default_tau_d(window_len),
        sample_interval_s=sample_interval_s,
        fusion_lag_fractions=(0.7,) if fusion else (),
    )


@dataclass
class CorrelationGrid:
    """Complex correlation values over (time, lag) with a validity mask.

    Before the keystone transform the row axis is centred correlation time
    (seconds); afterwards it is the scaled time eta on the same sampling
    grid. Invalid cells are exactly zero.
    """

    values: np.ndarray        # complex64 [n_time, n_tau]
    valid_mask: np.ndarray    # bool, same shape
    params: CorrelationParams
    time_axis_s: np.ndarray   # centred time (or eta) per row, seconds
    tau_axis_s: np.ndarray    # lag per column, seconds
    time_anchor_s: float      # absolute time of the grid centre
    is_keystoned: bool = False

    def __post_init__(self):
        if self.values.shape != self.valid_mask.shape:
            raise ConfigurationError("values and valid_mask shapes differ")
        if np.any(self.values[~self.valid_mask] != 0):
            raise ConfigurationError("masked-out cells must be exactly zero")


def self_correlate(row: np.ndarray, params: CorrelationParams) -> CorrelationGrid:
    """Fourth-order symmetric self-correlation of one CSI time series.

    Cell (m, tau) holds H[u+tau+phi+tau_d] * H[u-tau-phi]
    * conj(H[u+tau-phi+tau_d] * H[u-tau+phi]) with u = centre index + m, so
    all four taps land on integer samples for any tau_d parity.
    """
    row = np.asarray(row)
    if row.ndim != 1:
        raise ConfigurationError("self_correlate expects a 1-D time series")
    q = len(row)
    phi, tau_d = params.phi_samples, params.tau_d_samples
    u_mid = (q - 1 - tau_d) // 2
    tau_max = u_mid - phi
    if tau_max < 0:
        raise EstimationError(
            f"window of {q} samples too short for phi={phi}, tau_d={tau_d}"
        )
    taus = np.arange(tau_max + 1)
    m_lo = phi - u_mid
    m_hi = q - 1 - tau_d - phi - u_mid
    ms = np.arange(m_lo, m_hi + 1)
    vals = np.zeros((len(ms), len(taus)), dtype=np.complex64)
    mask = np.zeros(vals.shape, dtype=bool)
    for j, tau in enumerate(taus):
        u_lo, u_hi = tau + phi, q - 1 - tau_d - tau - phi
        if u_hi < u_lo:
            continue
        u = np.arange(u_lo, u_hi + 1)
        v = (row[u + tau + phi + tau_d] * row[u - tau - phi]
             * np.conj(row[u + tau - phi + tau_d] * row[u - tau + phi]))
        sl = slice(u_lo - u_mid - m_lo, u_hi - u_mid - m_lo + 1)
        vals[sl, j] = v.astype(np.complex64)
        mask[sl, j] = True
    dt = params.sample_interval_s
    return CorrelationGrid(
        values=vals,
        valid_mask=mask,
        params=params,
        time_axis_s=ms * dt,
        tau_axis_s=taus * dt,
        time_anchor_s=(u_mid + tau_d / 2.0) * dt,
    )


_KEYSTONE_CACHE: dict = {}


def _keystone_tables(n_m: int, m0: int, n_tau: int, tau_d: int, interp: str):
    """Gather indices/weights for the keystone resample; cached per geometry."""
    key = (n_m, m0, n_tau, tau_d, interp)
    hit = _KEYSTONE_CACHE.get(key)
    if hit is not None:
        return hit
    taus = np.arange(n_tau)
    m_abs = max(abs(m0), abs(m0 + n_m - 1))
    scale = (2.0 * taus + tau_d) / tau_d          # eta = time * scale
    h = int(np.floor(m_abs * scale.max()))
    etas = np.arange(-h, h + 1)
    src = etas[:, None] / scale[None, :]          # source position in samples
    ok = (src >= m0) & (src <= m0 + n_m - 1)
    if interp == "linear":
        base = np.floor(src).astype(np.int32)
        frac = (src - base).astype(np.float32)
        taps = []
        for k in (0, 1):
            w = np.where(k == 0, 1.0 - frac, frac).astype(np.float32)
            idx = base + k - m0
            inside = (idx >= 0) & (idx < n_m)
            taps.append((np.clip(idx, 0, n_m - 1), np.where(inside, w, 0.0)))
    else:
        half = 4
        base = np.floor(src).astype(np.int32)
        frac = (src - base).astype(np.float32)
        taps = []
        for k in range(-half + 1, half + 1):
            x = frac - k
            w = (np.sinc(x) * (0.5 + 0.5 * np.cos(np.pi * np.clip(x / half, -1, 1))))
            idx = base + k - m0
            inside = (idx >= 0) & (idx < n_m)
            taps.append((np.clip(idx, 0, n_m - 1), np.where(inside, w, 0.0).astype(np.float32)))
    cols = np.broadcast_to(np.arange(n_tau, dtype=np.int32), src.shape)
    tables = (etas, ok, taps, cols)
    _KEYSTONE_CACHE[key] = tables
    return tables


def keystone_transform(grid: CorrelationGrid) -> CorrelationGrid:
    """Resample each lag column so the coupled time axis becomes scaled time eta.

    Output rows sit on the input sampling grid; cells whose source time
    falls outside the column's valid support are masked and exactly zero.
    """
    if grid.is_keystoned:
        raise ConfigurationError("grid is already keystone-transformed")
    params = grid.params
    dt = params.sample_interval_s
    n_m, n_tau = grid.values.shape
    m0 = int(round(grid.time_axis_s[0] / dt))
    etas, ok, taps, cols = _keystone_tables(n_m, m0, n_tau, params.tau_d_samples, params.interp)
    col_vals = np.where(grid.valid_mask, grid.values, 0).astype(np.complex64)
    out = np.zeros((len(etas), n_tau), dtype=np.complex64)
    for idx, w in taps:
        out += col_vals[idx, cols] * w
    out[~ok] = 0
    return CorrelationGrid(
        values=out,
        valid_mask=ok.copy(),
        params=params,
        time_axis_s=etas * dt,
        tau_axis_s=grid.tau_axis_s.copy(),
        time_anchor_s=grid.time_anchor_s,
        is_keystoned=True,
    )


@dataclass
class SpectrumMeta:
    """Calibration constants an AJ spectrum needs to map bins to physics."""

    f_k: float
    phi_s: float
    scale_s: float
    window_len: int
    time_anchor_s: float
    c: float = SPEED_OF_LIGHT
    provenance: str = "collected"
    label: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "f_k": self.f_k, "phi_s": self.phi_s, "scale_s": self.scale_s,
            "window_len": self.window_len, "time_anchor_s": self.time_anchor_s,
            "c": self.c, "provenance": self.provenance, "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectrumMeta":
        return cls(**d)


_PROVENANCE_FLAGS = ("collected", "generated", "enhanced")


@dataclass
class AjSpectrum:
    """Real nonnegative acceleration-jerk energy grid with axis calibration.

    grid[i, j] is the magnitude at eta-frequency eta_axis[i] (jerk axis)
    and tau-frequency tau_axis[j] (acceleration axis), both in Hz.
    """

    grid: np.ndarray
    eta_axis: np.ndarray
    tau_axis: np.ndarray
    meta: SpectrumMeta

    def __post_init__(self):
        if self.grid.ndim != 2:
            raise ConfigurationError("spectrum grid must be 2-D")
        if self.grid.shape != (len(self.eta_axis), len(self.tau_axis)):
            raise ConfigurationError("axis lengths must match the grid shape")
        if np.any(self.grid < 0) or not np.all(np.isfinite(self.grid)):
            raise ConfigurationError("spectrum grid must be finite and nonnegative")
        for ax in (self.eta_axis, self.tau_axis):
            if len(ax) > 1 and not np.all(np.diff(ax) > 0):
                raise ConfigurationError("spectrum axes must be strictly increasing")
        if self.meta.provenance not in _PROVENANCE_FLAGS:
            raise ConfigurationError(f"unknown provenance {self.meta.provenance!r}")

    # --- physical calibration -------------------------------------------------
    def jerk_of_eta(self, f_eta) -> np.ndarray:
        m = self.meta
        return np.asarray(f_eta) * m.scale_s * m.c / (2.0 * m.f_k * m.phi_s)

    def eta_of_jerk(self, r) -> np.ndarray:
        m = self.meta
        return 2.0 * np.asarray(r) * m.f_k * m.phi_s / (m.scale_s * m.c)

    def accel_of_tau(self, f_tau) -> np.ndarray:
        """Acceleration at the window-centre time anchor."""
        m = self.meta
        return np.asarray(f_tau) * m.c / (4.0 * m.f_k * m.phi_s)

    def tau_of_accel(self, a_anchor) -> np.ndarray:
        m = self.meta
        return 4.0 * np.asarray(a_anchor) * m.f_k * m.phi_s / m.c

    def cell_sizes(self) -> tuple:
        """(acceleration, jerk) width of one unpadded resolution cell."""
        pad = 2
        da = float(self.accel_of_tau(pad * (self.tau_axis[1] - self.tau_axis[0])))
        dr = float(self.jerk_of_eta(pad * (self.eta_axis[1] - self.eta_axis[0])))
        return da, dr

    def with_provenance(self, provenance: str, label: Optional[int] = None) -> "AjSpectrum":
        meta = replace(self.meta, provenance=provenance,
                       label=self.meta.label if label is None else label)
        return AjSpectrum(self.grid.copy(), self.eta_axis.copy(), self.tau_axis.copy(), meta)


@dataclass
class PeakEstimate:
    """One detected dynamic path: acceleration/jerk plus spectral energy."""

    a_hat: float
    r_hat: float
    magnitude: float
    bin: tuple

    def __post_init__(self):
        if self.magnitude <= 0:
            raise ConfigurationError("peak magnitude must be positive")


def _fft_magnitude(grid: CorrelationGrid, pad_factor: int):
    vals = grid.values
    n_eta, n_tau = vals.shape
    se = sfft.next_fast_len(pad_factor * n_eta)
    st = sfft.next_fast_len(pad_factor * n_tau)
    mag = np.abs(sfft.fftshift(sfft.fft2(vals, s=(se, st))))
    dt = grid.params.sample_interval_s
    f_eta = sfft.fftshift(sfft.fftfreq(se, d=dt))
    f_tau = sfft.fftshift(sfft.fftfreq(st, d=dt))
    return mag.astype(np.float32), f_eta, f_tau


def _single_lag_map(row: np.ndarray, params: CorrelationParams):
    grid = keystone_transform(self_correlate(row, params))
    mag, f_eta, f_tau = _fft_magnitude(grid, params.pad_factor)
    return mag, f_eta, f_tau, grid.time_anchor_s


def _probe_row(q: int, dt: float, f_k: float) -> np.ndarray:
    """Noiseless single-path row used to calibrate fusion gains."""
    t = np.arange(q) * dt
    a, r, v, th = 0.9, 0.5, 0.3, 0.33
    phase = th + (f_k / SPEED_OF_LIGHT) * (v * t + a * t**2 / 2 + r * t**3 / 6)
    return np.exp(2j * np.pi * phase)


_FUSION_GAIN_CACHE: dict = {}


def _fusion_gain(q: int, params: CorrelationParams, phi2: int, f_k: float) -> float:
    key = (q, params.phi_samples, phi2, params.tau_d_samples,
           round(params.sample_interval_s, 12), round(f_k, 3), params.pad_factor)
    hit = _FUSION_GAIN_CACHE.get(key)
    if hit is None:
        probe = _probe_row(q, params.sample_interval_s, f_k)
        m1 = _single_lag_map(probe, params)[0]
        m2 = _single_lag_map(probe, replace(params, phi_samples=phi2))[0]
        hit = float(m1.max() / m2.max())
        _FUSION_GAIN_CACHE[key] = hit
    return hit


def _fused_map(row: np.ndarray, params: CorrelationParams, f_k: float):
    """Primary magnitude map min-fused with rescaled shorter-lag maps."""
    mag, f_eta, f_tau, anchor_s = _single_lag_map(row, params)
    if not params.fusion_lag_fractions:
        return mag, mag, f_eta, f_tau, anchor_s
    fused = mag.copy()
    n_eta, n_tau = mag.shape
    ci, cj = np.meshgrid(np.arange(n_eta), np.arange(n_tau), indexing="ij")
    for frac in params.fusion_lag_fractions:
        phi2 = max(1, round(frac * params.phi_samples))
        if phi2 == params.phi_samples:
            continue
        p2 = replace(params, phi_samples=phi2)
        m2, fe2, ft2, _ = _single_lag_map(row, p2)
        gain = params.fusion_gain_overshoot * _fusion_gain(len(row), params, phi2, f_k)
        sc = phi2 / params.phi_samples
        i2 = ((f_eta[0] + ci * (f_eta[1] - f_eta[0])) * sc - fe2[0]) / (fe2[1] - fe2[0])
        j2 = ((f_tau[0] + cj * (f_tau[1] - f_tau[0])) * sc - ft2[0]) / (ft2[1] - ft2[0])
        m2i = map_coordinates(m2, [i2, j2], order=1, mode="constant", cval=0.0)
        np.minimum(fused, m2i * gain, out=fused)
    return fused, mag, f_eta, f_tau, anchor_s


def compute_aj_spectrum(frame: CsiFrame, subcarrier: int,
                        params: Optional[CorrelationParams] = None) -> AjSpectrum:
    """AJ spectrum of one subcarrier row of a (static-removed) CSI frame."""
    if not 0 <= subcarrier < frame.config.n_subcarriers:
        raise ConfigurationError(f"subcarrier {subcarrier} out of range")
    cfg = frame.config
    if params is None:
        params = default_correlation_params(cfg.window_len, cfg.sample_interval_s)
    if abs(params.sample_interval_s - cfg.sample_interval_s) > 1e-15:
        raise ConfigurationError("correlation params sampling interval differs from frame")
    f_k = float(cfg.subcarrier_freqs()[subcarrier])
    row = frame.samples[subcarrier]
    fused, _, f_eta, f_tau, anchor_s = _fused_map(row, params, f_k)
    meta = SpectrumMeta(
        f_k=f_k, phi_s=params.phi_s, scale_s=params.scale_s,
        window_len=cfg.window_len, time_anchor_s=anchor_s, c=cfg.c,
    )
    return AjSpectrum(fused, f_eta, f_tau, meta)


def _parabolic_offset(a: float, b: float, c: float) -> float:
    """Sub-bin offset of a peak from log-magnitude parabola through 3 samples."""
    la, lb, lc = (np.log(max(x, 1e-300)) for x in (a, b, c))
    d = la - 2 * lb + lc
    if d == 0:
        return 0.0
    return float(np.clip(0.5 * (la - lc) / d, -1.0, 1.0))


def _refined_peak_freqs(mag: np.ndarray, i: int, j: int,
                        f_eta: np.ndarray, f_tau: np.ndarray) -> tuple:
    di = _parabolic_offset(mag[i - 1, j], mag[i, j], mag[i + 1, j]) \
        if 0 < i < mag.shape[0] - 1 else 0.0
    dj = _parabolic_offset(mag[i, j - 1], mag[i, j], mag[i, j + 1]) \
        if 0 < j < mag.shape[1] - 1 else 0.0
    fe = f_eta[i] + di * (f_eta[1] - f_eta[0])
    ft = f_tau[j] + dj * (f_tau[1] - f_tau[0])
    return fe, ft


def _peak_to_estimate(spec: AjSpectrum, i: int, j: int,
                      refine_grid: Optional[np.ndarray] = None) -> PeakEstimate:
    src = spec.grid if refine_grid is None else refine_grid
    fe, ft = _refined_peak_freqs(src, i, j, spec.eta_axis, spec.tau_axis)
    r_hat = float(spec.jerk_of_eta(fe))
    a_hat = float(spec.accel_of_tau(ft)) - r_hat * spec.meta.time_anchor_s
    return PeakEstimate(a_hat=a_hat, r_hat=r_hat,
                        magnitude=float(spec.grid[i, j]), bin=(int(i), int(j)))


def detect_peaks(spec: AjSpectrum, max_targets: int,
                 rel_threshold: float = 0.5) -> list:
    """8-neighbourhood local maxima above rel_threshold * global max.

    Returns up to max_targets PeakEstimate objects sorted by magnitude
    descending; an empty spectrum yields an empty list.
    """
    if not 0 < rel_threshold < 1:
        raise ConfigurationError("rel_threshold must lie in (0, 1)")
    if max_targets < 0:
        raise ConfigurationError("max_targets must be >= 0")
    mag = spec.grid
    top = float(mag.max(initial=0.0))
    if top <= 0 or max_targets == 0:
        return []
    mx = maximum_filter(mag, size=3, mode="constant")
    ii, jj = np.nonzero((mag == mx) & (mag >= rel_threshold * top))
    order = np.argsort(mag[ii, jj], kind="stable")[::-1][:max_targets]
    return [_peak_to_estimate(spec, int(ii[o]), int(jj[o])) for o in order]


# --- successive-cancellation multi-target estimation --------------------------

def _mask_positions(mag, f_eta, f_tau, spec_like, positions, rad_bins: int):
    for (a_eff, r) in positions:
        fe = float(spec_like.eta_of_jerk(r))
        ft = float(spec_like.tau_of_accel(a_eff))
        i = int(round((fe - f_eta[0]) / (f_eta[1] - f_eta[0])))
        j = int(round((ft - f_tau[0]) / (f_tau[1] - f_tau[0])))
        mag[max(0, i - rad_bins):i + rad_bins + 1,
            max(0, j - rad_bins):j + rad_bins + 1] = 0


def _cascade_candidates(row, params, f_k, exclude, k, rad_bins=5):
    fused, primary, f_eta, f_tau, anchor_s = _fused_map(row, params, f_k)
    meta = SpectrumMeta(f_k=f_k, phi_s=params.phi_s, scale_s=params.scale_s,
                        window_len=len(row), time_anchor_s=anchor_s)
    probe = AjSpectrum(np.zeros((2, 2), dtype=np.float32),
                       f_eta[:2], f_tau[:2], meta)
    _mask_positions(fused, f_eta, f_tau, probe, exclude, rad_bins)
    mx = maximum_filter(fused, size=5, mode="constant")
    ii, jj = np.nonzero((fused == mx) & (fused > 0))
    order = np.argsort(fused[ii, jj], kind="stable")[::-1][:k]
    out = []
    for o in order:
        i, j = int(ii[o]), int(jj[o])
        fe, ft = _refined_peak_freqs(primary, i, j, f_eta, f_tau)
        a_eff = float(probe.accel_of_tau(ft))
        r = float(probe.jerk_of_eta(fe))
        out.append((a_eff, r, float(fused[i, j])))
    return out, anchor_s


def _extract_component(row, t, f_k, a_eff, r, anchor_s):
    """Dechirp at (a_eff, r), locate the velocity tone, rebuild the component."""
    a0 = a_eff - r * anchor_s
    chirp = np.exp(-2j * np.pi * (f_k / SPEED_OF_LIGHT) * (a0 * t**2 / 2 + r * t**3 / 6))
    w = row * chirp
    n_fft = sfft.next_fast_len(8 * len(w))
    spec = sfft.fft(w, n_fft)
    k0 = int(np.argmax(np.abs(spec)))
    mags = [abs(spec[(k0 + d) % n_fft]) for d in (-1, 0, 1)]
    dk = _parabolic_offset(*mags)
    dt = t[1] - t[0]
    f_v = sfft.fftfreq(n_fft, d=dt)[k0] + dk / (n_fft * dt)
    amp = complex((w * np.exp(-2j * np.pi * f_v * t)).mean())
    comp = amp * np.exp(2j * np.pi * f_v * t) * np.conj(chirp)
    return comp, f_v * SPEED_OF_LIGHT / f_k, amp


def estimate_targets(frame: CsiFrame, subcarrier: int,
                     params: Optional[CorrelationParams] = None,
                     max_targets: int = 10,
                     rel_floor: float = 0.12,
                     amp_accept: float = 0.55,
                     candidates: int = 3,
                     max_consecutive_rejects: int = 2,
                     verify_sweep: bool = True) -> list:
    """Multi-target estimation by successive component cancellation.

    Each stage picks candidate spectrum maxima, extracts the one whose
    dechirped time-domain reconstruction carries the largest coherent
    amplitude, and subtracts it; picks with implausibly small amplitude
    are blacklisted (they are cross-term ghosts, which die once their
    parent components are removed). A final sweep re-estimates every
    component against the signal minus the others and drops weak ones.

    Returns PeakEstimate objects; len(result) is the detected target count.
    """
    cfg = frame.config
    if params is None:
        params = default_correlation_params(cfg.window_len, cfg.sample_interval_s)
    f_k = float(cfg.subcarrier_freqs()[subcarrier])
    row = frame.samples[subcarrier].astype(np.complex128)
    t = np.arange(cfg.window_len) * cfg.sample_interval_s

    residual = row.copy()
    comps, metas, excl, amps = [], [], [], []
    first = None
    consec = 0
    anchor_s = None
    for _ in range(max_targets + 8):
        if len(metas) >= max_targets or consec >= max_consecutive_rejects:
            break
        taken_pos = excl + [(m[0], m[1]) for m in metas]
        cands, anchor_s = _cascade_candidates(residual, params, f_k, taken_pos, candidates)
        if not cands:
            break
        if first is None:
            first = cands[0][2]
        elif cands[0][2] < rel_floor * first:
            break
        best = None
        for a_eff, r, mag in cands:
            comp, v, amp = _extract_component(residual, t, f_k, a_eff, r, anchor_s)
            if best is None or abs(amp) > abs(best[4]):
                best = (a_eff, r, mag, comp, amp)
        a_eff, r, mag, comp, amp = best
        residual = residual - comp
        ref = float(np.median(amps)) if amps else abs(amp)
        if amps and abs(amp) < amp_accept * ref:
            excl.append((a_eff, r))
            consec += 1
            continue
        consec = 0
        amps.append(abs(amp))
        comps.append(comp)
        metas.append([a_eff, r, mag, abs(amp)])

    if verify_sweep and comps:
        for qx in range(len(comps)):
            others = (np.sum([c for i, c in enumerate(comps) if i != qx], axis=0)
                      if len(comps) > 1 else 0)
            partial = row - others
            other_pos = [(metas[i][0], metas[i][1]) for i in range(len(comps)) if i != qx]
            cands, anchor_s = _cascade_candidates(partial, params, f_k, other_pos, 1)
            if not cands:
                continue
            a_eff, r, mag = cands[0]
            comp, v, amp = _extract_component(partial, t, f_k, a_eff, r, anchor_s)
            comps[qx] = comp
            metas[qx] = [a_eff, r, mag, abs(amp)]
        med = float(np.median([m[3] for m in metas]))
        metas = [m for m in metas if m[3] >= 0.5 * med]

    if anchor_s is None:
        anchor_s = ((cfg.window_len - 1 - params.tau_d_samples) // 2
                    + params.tau_d_samples / 2.0) * cfg.sample_interval_s
    out = []
    for a_eff, r, mag, amp in metas:
        out.append(PeakEstimate(a_hat=a_eff - r * anchor_s, r_hat=r,
                                magnitude=max(mag, 1e-30), bin=(0, 0)))
    return out
