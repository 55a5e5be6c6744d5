"""Panel coefficient selection: common amplification sizing and phase schemes.

Three phase schemes are provided:

* ``mccm_phases`` aligns with the principal eigenvector of the mean
  covariance of the per-element cascade vector (averaged over realizations
  and RBs), projected to unit modulus;
* ``los_phases`` conjugates the round-trip geometric phase so a pure
  line-of-sight cascade adds coherently;
* ``random_phases`` draws i.i.d. uniform phases (the scattering behaviour
  of panels that are not serving anyone).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LinkRealizations, mean_link_powers
from .scene import SceneConfig, UePos, dbm_to_mw, panel_element_positions


@dataclass(frozen=True)
class PhaseConfig:
    """Unit-modulus per-element phases plus the common amplification amplitude."""

    phases: np.ndarray  # (W,) complex, |phases[w]| == 1
    amp: float = 1.0

    def validate(self) -> None:
        if np.any(np.abs(np.abs(self.phases) - 1.0) > 1e-9):
            raise ValueError("phases must be unit modulus")
        if not (self.amp > 0.0):
            raise ValueError("amp must be > 0")


def amplification_factor(
    amp_power_mw: float, incident_per_elem_mw: float, w: int, dyn_noise_band_mw: float
) -> float:
    """Largest common amplitude meeting the panel output-power budget.

    The panel re-radiates W elements' worth of amplified incident signal plus
    amplifier noise: F^2 * W * (P_in + N_band) <= P_A.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    if amp_power_mw < 0 or incident_per_elem_mw < 0 or dyn_noise_band_mw < 0:
        raise ValueError("powers must be >= 0")
    denom = w * (incident_per_elem_mw + dyn_noise_band_mw)
    if denom <= 0.0:
        raise ValueError("no incident power")
    return math.sqrt(amp_power_mw / denom)


def amp_from_links(scene: SceneConfig, lr: LinkRealizations, airs_index: int) -> float:
    """Size the amplification factor from mean full-band incident power."""
    panel = scene.airs[airs_index]
    means = mean_link_powers(lr)
    # per-element incident signal power over the whole band
    incident = dbm_to_mw(scene.bs_power_dbm) * float(means.incident_elem[airs_index])
    noise_band = dbm_to_mw(panel.dyn_noise_psd_dbm_hz) * scene.bandwidth
    return amplification_factor(
        dbm_to_mw(panel.amp_power_dbm), incident, panel.n_elements, noise_band
    )


def mccm_phases(lr: LinkRealizations, airs_index: int) -> np.ndarray:
    """Phases from the principal eigenvector of mean(a a^H) over draws and RBs."""
    a = lr.cascade_elem[airs_index]
    r, s, w = a.shape
    if r < 1:
        raise ValueError("need at least one realization")
    flat = a.reshape(r * s, w)
    cov = flat.conj().T @ flat / (r * s)  # mean of a a^H, transposed pairing below
    # cov[p, q] = mean(conj(a_p) a_q) = conj(R)[p, q] with R = mean(a a^H);
    # principal eigenvectors are conjugates of each other, handled at projection.
    if not np.any(np.abs(cov) > 0.0):
        raise ValueError("dark panel: zero cascade covariance")
    u = _power_iteration(cov.conj())  # principal eigenvector of R
    phases = np.ones(w, dtype=complex)
    mag = np.abs(u)
    nz = mag >= 1e-12
    phases[nz] = np.conj(u[nz]) / mag[nz]
    return phases


def _power_iteration(
    mat: np.ndarray, tol: float = 1e-9, max_iter: int = 500
) -> np.ndarray:
    """Principal eigenvector of a Hermitian PSD matrix; all-ones start vector."""
    w = mat.shape[0]
    v = np.ones(w, dtype=complex) / math.sqrt(w)
    for _ in range(max_iter):
        nxt = mat @ v
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            return v
        nxt /= norm
        # phase-align to compare directions, eigenvector is phase-ambiguous
        align = np.vdot(nxt, v)
        if abs(align) > 0:
            nxt *= align / abs(align)
        if np.linalg.norm(nxt - v) < tol:
            return nxt
        v = nxt
    return v


def los_phases(scene: SceneConfig, airs_index: int, ue: UePos) -> np.ndarray:
    """Conjugate of the round-trip geometric phase: coherent for a pure-LoS cascade.

    Channel draws carry exp(-j 2 pi d / lambda) per hop, so alignment needs
    the opposite sign, exp(+j 2 pi (d_bs,w + d_w,ue) / lambda).
    """
    panel = scene.airs[airs_index]
    elems = panel_element_positions(panel, scene.wavelength)
    d_bs = np.linalg.norm(elems - scene.bs_pos[None, :], axis=1)
    d_ue = np.linalg.norm(elems - ue.pos[None, :], axis=1)
    ph = np.exp(2j * np.pi * (d_bs + d_ue) / scene.wavelength)
    if len(ph) == 1:
        return np.ones(1, dtype=complex)
    return ph


def random_phases(w: int, seed_or_rng) -> np.ndarray:
    """I.i.d. uniform unit-modulus phases; deterministic per seed."""
    if w < 1:
        raise ValueError("w must be >= 1")
    rng = (
        seed_or_rng
        if isinstance(seed_or_rng, np.random.Generator)
        else np.random.default_rng(seed_or_rng)
    )
    ang = rng.uniform(0.0, 2.0 * np.pi, size=w)
    ph = np.exp(1j * ang)
    return ph / np.abs(ph)


def cascade_gain(phases: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Combined cascade sum_w phases[w] * a[..., w] for any leading shape."""
    return a @ phases
