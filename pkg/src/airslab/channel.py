"""Stochastic link generation for one UE: direct, BS->panel and panel->UE draws.

The generator is a deliberately simple stand-in for a ray-based tool:

* pathloss: urban-macro shapes, LoS 28.0 + 22 log10(d) + 20 log10(f_GHz) dB,
  NLoS 32.4 + 30 log10(d) + 20 log10(f_GHz) dB;
* log-normal shadowing drawn once per large-scale realization
  (4 dB LoS / 6 dB NLoS by default);
* frequency selectivity from a tapped-delay line (8 taps, exponential power
  profile, tap spacing equal to the RMS delay-spread parameter); the per-RB
  response is the tap sum rotated by exp(-j 2 pi f_s tau_n) at RB centre
  offsets f_s;
* BS->panel links are Rician (10 dB K by default) with the line-of-sight
  phase taken from exact element positions, exp(-j 2 pi d / lambda);
* BS->UE and panel->UE links are Rayleigh by default; panel-link taps are
  plane waves: tap 0 travels the geometric path while later taps arrive
  from scatterer directions, so elements share the tap gains and differ
  only by geometric phase progressions and the element pattern, keeping
  the cost O(W) per draw while giving the covariance the cross-element
  structure a beamformer can exploit beyond line-of-sight steering;
* scatterer directions are a deterministic function of the panel and
  endpoint positions (a frozen environment map, independent of the seed):
  per-position statistics must be stable for a channel-knowledge map to
  exist at all;
* on NLoS panel links the obstructed geometric arrival keeps only
  ``nlos_geo_share`` of the diffuse power, so the dominant cluster is a
  scatterer whose direction position-based steering cannot know.

Everything is a pure function of (scene, ue, spec.seed): large-scale and
small-scale randomness use separate child streams so that changing the
small-scale draw count never disturbs the large-scale draws.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .scene import (
    SceneConfig,
    ScenarioError,
    UePos,
    db_to_linear,
    erp_gain,
    panel_element_positions,
    to_panel_frame,
)


@dataclass(frozen=True)
class FadingSpec:
    """Monte Carlo structure and fading parameters for link generation."""

    n_large: int = 10
    n_small: int = 50
    n_taps: int = 8
    rms_delay_spread: float = 100e-9  # seconds; also the tap spacing
    rician_k_los_db: float = 10.0  # BS->panel; +inf collapses to pure LoS
    rician_k_nlos_db: Optional[float] = None  # None = Rayleigh for NLoS links
    nlos_geo_share: float = 0.25  # diffuse power on the obstructed geometric tap
    shadow_sigma_los_db: float = 4.0
    shadow_sigma_nlos_db: float = 6.0
    seed: int = 0

    @property
    def n_realizations(self) -> int:
        return self.n_large * self.n_small

    def validate(self) -> None:
        if self.n_large < 1:
            raise ScenarioError("fading.n_large: must be >= 1")
        if self.n_small < 1:
            raise ScenarioError("fading.n_small: must be >= 1")
        if self.n_taps < 1:
            raise ScenarioError("fading.n_taps: must be >= 1")
        if not (self.rms_delay_spread >= 0.0):
            raise ScenarioError("fading.rms_delay_spread_s: must be >= 0")
        if not (0.0 <= self.nlos_geo_share <= 1.0):
            raise ScenarioError("fading.nlos_geo_share: must lie in [0, 1]")


def fading_from_json(d: dict) -> FadingSpec:
    if not isinstance(d, dict):
        raise ScenarioError("fading: expected a JSON object")
    known = {
        "n_large",
        "n_small",
        "n_taps",
        "rms_delay_spread_s",
        "rician_k_los_db",
        "rician_k_nlos_db",
        "nlos_geo_share",
        "shadow_sigma_los_db",
        "shadow_sigma_nlos_db",
        "seed",
    }
    for k in d:
        if k not in known:
            raise ScenarioError(f"fading.{k}: unknown key")
    spec = FadingSpec(
        n_large=int(d.get("n_large", 10)),
        n_small=int(d.get("n_small", 50)),
        n_taps=int(d.get("n_taps", 8)),
        rms_delay_spread=float(d.get("rms_delay_spread_s", 100e-9)),
        rician_k_los_db=float(d.get("rician_k_los_db", 10.0)),
        rician_k_nlos_db=(
            None
            if d.get("rician_k_nlos_db") is None
            else float(d["rician_k_nlos_db"])
        ),
        nlos_geo_share=float(d.get("nlos_geo_share", 0.25)),
        shadow_sigma_los_db=float(d.get("shadow_sigma_los_db", 4.0)),
        shadow_sigma_nlos_db=float(d.get("shadow_sigma_nlos_db", 6.0)),
        seed=int(d.get("seed", 0)),
    )
    spec.validate()
    return spec


@dataclass
class LinkRealizations:
    """All channel draws needed to evaluate one UE's SNR at every RB.

    Shapes, with R = n_large * n_small realizations, S RBs, I panels:

    * ``direct``: (R, S) complex, BS->UE scalar channel;
    * ``cascade_elem``: I arrays of (R, S, W_i) complex, the element-wise
      product of panel->UE and BS->panel channels (amplification and phase
      coefficients are applied by the consumer);
    * ``airs_ue_norm_sq``: (R, S, I) real, squared norm of the panel->UE
      vector channel;
    * ``incident_elem_sq``: (R, S, I) real, per-element mean incident power
      |BS->panel|^2 (used to size the common amplification factor).
    """

    direct: np.ndarray
    cascade_elem: list[np.ndarray]
    airs_ue_norm_sq: np.ndarray
    incident_elem_sq: np.ndarray
    meta: dict

    @property
    def n_real(self) -> int:
        return self.direct.shape[0]

    @property
    def n_rb(self) -> int:
        return self.direct.shape[1]

    @property
    def n_airs(self) -> int:
        return len(self.cascade_elem)

    def validate(self) -> None:
        if not np.all(np.isfinite(self.direct)):
            raise ValueError("direct: non-finite values")
        if np.any(self.airs_ue_norm_sq < 0.0):
            raise ValueError("airs_ue_norm_sq: negative power")
        r, s = self.direct.shape
        if self.airs_ue_norm_sq.shape != (r, s, self.n_airs):
            raise ValueError("airs_ue_norm_sq: shape mismatch")
        for i, a in enumerate(self.cascade_elem):
            if a.shape[:2] != (r, s):
                raise ValueError(f"cascade_elem[{i}]: shape mismatch")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"cascade_elem[{i}]: non-finite values")


@dataclass(frozen=True)
class LinkPowerMeans:
    """Arithmetic mean link powers over realizations, RBs (and elements)."""

    direct: float
    incident_elem: np.ndarray  # (I,)
    airs_ue_norm: np.ndarray  # (I,)


def pathloss_db(d_m: float, f_hz: float, los: bool) -> float:
    """Distance pathloss in dB; urban-macro LoS/NLoS shapes."""
    if d_m <= 0.0:
        raise ValueError("pathloss requires a positive distance")
    f_ghz = f_hz / 1e9
    if los:
        return 28.0 + 22.0 * math.log10(d_m) + 20.0 * math.log10(f_ghz)
    return 32.4 + 30.0 * math.log10(d_m) + 20.0 * math.log10(f_ghz)


def rb_center_offsets(scene: SceneConfig) -> np.ndarray:
    """Baseband frequency offsets of RB centres, symmetric around the carrier."""
    s = scene.n_rb
    return (np.arange(s) - (s - 1) / 2.0) * (scene.bandwidth / s)


def _k_linear(k_db: Optional[float]) -> float:
    if k_db is None:
        return 0.0
    if math.isinf(k_db) and k_db > 0:
        return math.inf
    return db_to_linear(k_db)


def _los_nlos_weights(k_lin: float) -> tuple[float, float]:
    if math.isinf(k_lin):
        return 1.0, 0.0
    return math.sqrt(k_lin / (k_lin + 1.0)), math.sqrt(1.0 / (k_lin + 1.0))


def _tap_profile(spec: FadingSpec) -> tuple[np.ndarray, np.ndarray]:
    """Tap delays and normalized powers (first tap at zero delay)."""
    n = spec.n_taps
    delays = np.arange(n) * spec.rms_delay_spread
    if n == 1:
        return delays, np.ones(1)
    powers = np.exp(-np.arange(n, dtype=float))
    return delays, powers / powers.sum()


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circular complex Gaussian draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(
        2.0
    )


_SCATTER_SPREAD = 1.0  # radian-scale perturbation of scatterer directions


def _scatter_directions(center: np.ndarray, endpoint: np.ndarray, n_taps: int) -> np.ndarray:
    """Frozen unit departure directions for each tap of one panel link.

    Directions depend only on the two positions (a deterministic
    environment map), clustered around the geometric path.  Tap 0 is
    always overwritten by exact per-element geometry by the caller.
    """
    blob = struct.pack("<6d", *center, *endpoint)
    seed = int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")
    rng = np.random.default_rng(seed)
    geo = (endpoint - center) / np.linalg.norm(endpoint - center)
    v = geo[None, :] + _SCATTER_SPREAD * rng.standard_normal((n_taps, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_links(scene: SceneConfig, ue: UePos, spec: FadingSpec) -> LinkRealizations:
    """Draw all link realizations for one UE.  Deterministic per (scene, ue, seed)."""
    spec.validate()
    scene.validate()
    bs = scene.bs_pos
    lam = scene.wavelength
    d_bu = float(np.linalg.norm(ue.pos - bs))
    if d_bu < 1e-6:
        raise ScenarioError("UE position coincides with the BS")

    n_l, n_s = spec.n_large, spec.n_small
    n_real = n_l * n_s
    s_rb = scene.n_rb
    delays, tap_pow = _tap_profile(spec)
    f_off = rb_center_offsets(scene)
    # (n_taps, S) rotation of each tap at each RB centre
    rot = np.exp(-2j * np.pi * np.outer(delays, f_off))
    tap_amp = np.sqrt(tap_pow)

    root = np.random.SeedSequence(spec.seed)
    ss_large, ss_small = root.spawn(2)
    rng_large = np.random.default_rng(ss_large)
    rng_small = np.random.default_rng(ss_small)

    k_nlos = _k_linear(spec.rician_k_nlos_db)
    k_los = _k_linear(spec.rician_k_los_db)

    def taps_to_rb(g: np.ndarray) -> np.ndarray:
        # (..., n_taps) tap draws -> (..., S) per-RB response
        return g @ rot

    def faded(
        rng: np.random.Generator, shape_extra: tuple, k_lin: float, mean_phase
    ) -> np.ndarray:
        """Small-scale factor with E|.|^2 = 1; shape (n_real, *shape_extra, S)."""
        los_w, nlos_w = _los_nlos_weights(k_lin)
        if nlos_w == 0.0:
            base = np.ones((n_real, *shape_extra, s_rb), dtype=complex)
        else:
            g = _cn(rng, (n_real, *shape_extra, spec.n_taps)) * tap_amp
            base = nlos_w * taps_to_rb(g)
            if los_w > 0.0:
                base = base + los_w  # LoS rides the zero-delay tap
        if mean_phase is not None:
            base = base * mean_phase
        return base

    # --- large-scale draws: shadowing, one per large realization, fixed order ---
    def shadow_gain(sigma_db: float) -> np.ndarray:
        sh = rng_large.standard_normal(n_l) * sigma_db
        return np.repeat(db_to_linear(-sh), n_s)  # (n_real,)

    shadow_direct = shadow_gain(spec.shadow_sigma_nlos_db)
    shadow_bs_airs = [shadow_gain(spec.shadow_sigma_los_db) for _ in scene.airs]
    shadow_airs_ue = [shadow_gain(spec.shadow_sigma_nlos_db) for _ in scene.airs]

    # --- direct BS->UE (NLoS) ---
    pl_bu = pathloss_db(d_bu, scene.carrier_freq, los=False)
    phase_bu = np.exp(-2j * np.pi * d_bu / lam)
    direct = faded(rng_small, (), k_nlos, phase_bu)
    direct *= np.sqrt(db_to_linear(-pl_bu) * shadow_direct)[:, None]

    cascade_elem: list[np.ndarray] = []
    airs_ue_norm_sq = np.zeros((n_real, s_rb, scene.n_airs))
    incident_elem_sq = np.zeros((n_real, s_rb, scene.n_airs))
    large_gains = {
        "direct": db_to_linear(-pl_bu) * shadow_direct[::n_s].copy(),
        "bs_airs": [],
        "airs_ue": [],
    }

    def panel_vector_link(
        elems: np.ndarray,
        center: np.ndarray,
        endpoint: np.ndarray,
        gain: np.ndarray,
        k_lin: float,
    ) -> np.ndarray:
        """(n_real, S, W) channel seen across a panel's elements.

        Tap 0 carries the geometric path with exact per-element distances;
        later taps are plane waves from the frozen scatterer directions of
        this (panel, endpoint) pair, with tap gains shared by all elements.
        On a pure NLoS link (k_lin == 0) the geometric tap keeps only
        ``nlos_geo_share`` of the diffuse power.
        """
        d_w = np.linalg.norm(elems - endpoint[None, :], axis=1)
        offs = elems - center[None, :]
        dirs = _scatter_directions(center, endpoint, spec.n_taps)
        pw = np.exp(-2j * np.pi * (offs @ dirs.T) / lam)  # (W, n_taps)
        pw[:, 0] = np.exp(-2j * np.pi * d_w / lam)
        los_amp, nlos_amp = _los_nlos_weights(k_lin)
        if k_lin == 0.0 and spec.n_taps > 1:
            scat = np.exp(-np.arange(spec.n_taps - 1, dtype=float))
            scat *= (1.0 - spec.nlos_geo_share) / scat.sum()
            amp = np.sqrt(np.concatenate([[spec.nlos_geo_share], scat]))
        else:
            amp = tap_amp
        coef = np.zeros((n_real, spec.n_taps), dtype=complex)
        if nlos_amp > 0.0:
            coef = nlos_amp * _cn(rng_small, (n_real, spec.n_taps)) * amp
        coef[:, 0] += los_amp
        h = np.einsum("rn,ns,wn->rsw", coef, rot, pw, optimize=True)
        return h * np.sqrt(gain)[:, None, None]

    for i, panel in enumerate(scene.airs):
        elems = panel_element_positions(panel, lam)
        g_max = db_to_linear(panel.elem_gain_dbi)

        d_bi = float(np.linalg.norm(panel.center - bs))
        d_iu = float(np.linalg.norm(ue.pos - panel.center))
        if d_bi < 1e-6:
            raise ScenarioError(f"panel {i} coincides with the BS")
        if d_iu < 1e-6:
            raise ScenarioError(f"UE position coincides with panel {i}")

        # far-field element pattern: panel-centre angles for all elements
        erp_in = erp_gain(g_max, panel.erp_exponent, *to_panel_frame(panel, bs))
        erp_out = erp_gain(g_max, panel.erp_exponent, *to_panel_frame(panel, ue.pos))

        # --- BS->panel: Rician with exact geometric phases on tap 0 ---
        pl_bi = pathloss_db(d_bi, scene.carrier_freq, los=True)
        gain_bi = db_to_linear(-pl_bi) * erp_in * shadow_bs_airs[i]
        h_bi = panel_vector_link(elems, panel.center, bs, gain_bi, k_los)
        incident_elem_sq[:, :, i] = np.mean(np.abs(h_bi) ** 2, axis=2)

        # --- panel->UE: Rayleigh by default, same plane-wave construction ---
        pl_iu = pathloss_db(d_iu, scene.carrier_freq, los=False)
        gain_iu = db_to_linear(-pl_iu) * erp_out * shadow_airs_ue[i]
        h_iu = panel_vector_link(elems, panel.center, ue.pos, gain_iu, k_nlos)

        airs_ue_norm_sq[:, :, i] = np.sum(np.abs(h_iu) ** 2, axis=2)
        cascade_elem.append(h_iu * h_bi)
        large_gains["bs_airs"].append(db_to_linear(-pl_bi) * erp_in * shadow_bs_airs[i][::n_s])
        large_gains["airs_ue"].append(db_to_linear(-pl_iu) * erp_out * shadow_airs_ue[i][::n_s])

    lr = LinkRealizations(
        direct=direct,
        cascade_elem=cascade_elem,
        airs_ue_norm_sq=airs_ue_norm_sq,
        incident_elem_sq=incident_elem_sq,
        meta={
            "seed": spec.seed,
            "n_large": n_l,
            "n_small": n_s,
            "n_rb": s_rb,
            "large_gains": large_gains,
        },
    )
    lr.validate()
    return lr


def mean_link_powers(lr: LinkRealizations) -> LinkPowerMeans:
    """Mean powers over realizations and RBs (diagnostics and amplifier sizing)."""
    if lr.n_real < 1:
        raise ValueError("empty realization set")
    return LinkPowerMeans(
        direct=float(np.mean(np.abs(lr.direct) ** 2)),
        incident_elem=np.mean(lr.incident_elem_sq, axis=(0, 1)),
        airs_ue_norm=np.mean(lr.airs_ue_norm_sq, axis=(0, 1)),
    )
