"""Channel-knowledge-map storage and SE predictors.

Three interchangeable predictors answer "expected SE of this UE under this
serving choice":

* ``OraclePredictor`` runs the Monte Carlo ground truth;
* ``TableComposePredictor`` looks up the nearest stored position and
  composes its link-power CDFs by inverse-CDF sampling with independent
  uniform phases (the classic table-CKM approximation: power summaries
  carry no joint phase information);
* ``NeuralPredictor`` chains the two learned networks.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import neural, oracle
from .channel import FadingSpec, sample_links
from .oracle import (
    CAT_CASCADED,
    CAT_DIRECT,
    CAT_NOISE,
    CAT_SCATTERED,
    QUANTILE_LEVELS,
    QuantileCdf,
    quantile_cdf,
)
from .scene import SceneConfig, UePos


@dataclass(frozen=True)
class AirsCdfs:
    """Stored link statistics for one panel at one position."""

    cascaded: QuantileCdf
    scattered: QuantileCdf
    noise: QuantileCdf


@dataclass(frozen=True)
class CkmEntry:
    position: tuple[float, float]
    direct: QuantileCdf
    per_airs: tuple[AirsCdfs, ...]


def scene_fingerprint(scene: SceneConfig) -> str:
    """Hash of the radio constants and panel layout (UE list excluded)."""
    doc = {
        "bs_height": scene.bs_height,
        "carrier_freq": scene.carrier_freq,
        "bandwidth": scene.bandwidth,
        "n_rb": scene.n_rb,
        "bs_power_dbm": scene.bs_power_dbm,
        "noise_psd_dbm_hz": scene.noise_psd_dbm_hz,
        "airs": [
            {
                "pos": list(a.pos),
                "rot": list(a.rot),
                "grid": list(a.grid),
                "elem_gain_dbi": a.elem_gain_dbi,
                "erp_exponent": a.erp_exponent,
                "amp_power_dbm": a.amp_power_dbm,
                "dyn_noise_psd_dbm_hz": a.dyn_noise_psd_dbm_hz,
            }
            for a in scene.airs
        ],
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


GRID_CELL_M = 50.0


@dataclass
class CkmStore:
    """Position-indexed CDF table with a coarse grid bucket index."""

    fingerprint: str
    entries: list[CkmEntry] = field(default_factory=list)
    _index: dict[tuple[int, int], list[int]] = field(default_factory=dict)

    @staticmethod
    def for_scene(scene: SceneConfig) -> "CkmStore":
        return CkmStore(fingerprint=scene_fingerprint(scene))

    def _cell(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor(x / GRID_CELL_M), math.floor(y / GRID_CELL_M))

    def put(self, entry: CkmEntry, fingerprint: Optional[str] = None) -> None:
        if fingerprint is not None and fingerprint != self.fingerprint:
            raise ValueError("fingerprint mismatch: entry from a different scene")
        idx = len(self.entries)
        self.entries.append(entry)
        self._index.setdefault(self._cell(*entry.position), []).append(idx)

    def query(self, x: float, y: float) -> tuple[CkmEntry, float]:
        """Euclidean-nearest entry; ties broken by insertion order."""
        if not self.entries:
            raise ValueError("empty store")
        cx, cy = self._cell(x, y)
        max_ring = max(
            max(abs(gx - cx), abs(gy - cy)) for gx, gy in self._index
        )
        best: tuple[float, int] | None = None
        for ring in range(max_ring + 1):
            for gx in range(cx - ring, cx + ring + 1):
                for gy in range(cy - ring, cy + ring + 1):
                    if max(abs(gx - cx), abs(gy - cy)) != ring:
                        continue
                    for idx in self._index.get((gx, gy), ()):
                        e = self.entries[idx]
                        d = math.hypot(e.position[0] - x, e.position[1] - y)
                        if best is None or (d, idx) < best:
                            best = (d, idx)
            # entries in ring k sit strictly further than (k-1) cells away,
            # so once best < ring*cell no later ring can win or tie
            if best is not None and best[0] < ring * GRID_CELL_M:
                break
        assert best is not None
        return self.entries[best[1]], best[0]

    # -- persistence: one JSON header line, then one entry per line -----------

    def save(self, path: str | Path) -> None:
        with open(path, "w") as f:
            f.write(json.dumps({"fingerprint": self.fingerprint, "format": 1}) + "\n")
            for e in self.entries:
                qd, md = e.direct.to_lists()
                obj = {
                    "pos": list(e.position),
                    "direct": qd,
                    "direct_mask": md,
                    "airs": [
                        {
                            "cascaded": a.cascaded.to_lists()[0],
                            "cascaded_mask": a.cascaded.to_lists()[1],
                            "scattered": a.scattered.to_lists()[0],
                            "scattered_mask": a.scattered.to_lists()[1],
                            "noise": a.noise.to_lists()[0],
                            "noise_mask": a.noise.to_lists()[1],
                        }
                        for a in e.per_airs
                    ],
                }
                f.write(json.dumps(obj) + "\n")

    @staticmethod
    def load(path: str | Path) -> "CkmStore":
        with open(path) as f:
            lines = [ln for ln in f if ln.strip()]
        if not lines:
            raise ValueError("empty store file")
        header = json.loads(lines[0])
        store = CkmStore(fingerprint=header["fingerprint"])
        for ln in lines[1:]:
            obj = json.loads(ln)
            entry = CkmEntry(
                position=(float(obj["pos"][0]), float(obj["pos"][1])),
                direct=QuantileCdf.from_lists(obj["direct"], obj["direct_mask"]),
                per_airs=tuple(
                    AirsCdfs(
                        cascaded=QuantileCdf.from_lists(a["cascaded"], a["cascaded_mask"]),
                        scattered=QuantileCdf.from_lists(a["scattered"], a["scattered_mask"]),
                        noise=QuantileCdf.from_lists(a["noise"], a["noise_mask"]),
                    )
                    for a in obj["airs"]
                ),
            )
            store.put(entry)
        return store


def build_ckm_entry(scene: SceneConfig, ue: UePos, spec: FadingSpec) -> CkmEntry:
    """Measure one position: direct CDF plus per-panel cascaded/scattered/noise CDFs."""
    from . import airs as airsmod

    lr = sample_links(scene, ue, spec)
    amps = [airsmod.amp_from_links(scene, lr, i) for i in range(scene.n_airs)]
    rng = oracle._phase_rng(lr)
    per_airs = []
    for i in range(scene.n_airs):
        per_airs.append(
            AirsCdfs(
                cascaded=quantile_cdf(
                    oracle._link_power_samples(scene, lr, i, True, amps[i], rng)
                ),
                scattered=quantile_cdf(
                    oracle._link_power_samples(scene, lr, i, False, amps[i], rng)
                ),
                noise=quantile_cdf(oracle._noise_power_samples(lr, i, amps[i])),
            )
        )
    return CkmEntry(
        position=(ue.x, ue.y),
        direct=quantile_cdf(oracle._direct_power_samples(lr)),
        per_airs=tuple(per_airs),
    )


def build_ckm_store(
    scene: SceneConfig, positions: Sequence[UePos], spec: FadingSpec
) -> CkmStore:
    store = CkmStore.for_scene(scene)
    for k, ue in enumerate(positions):
        entry = build_ckm_entry(scene, ue, replace(spec, seed=spec.seed + 7919 * k))
        store.put(entry, fingerprint=store.fingerprint)
    return store


# ---------------------------------------------------------------------------
# Monte Carlo composition of quantile CDFs into an SE estimate
# ---------------------------------------------------------------------------


def _inverse_cdf_powers(
    cdf_db: np.ndarray, mask: np.ndarray, u: np.ndarray
) -> np.ndarray:
    """Linear powers drawn by inverse-CDF interpolation over the quantile grid.

    Interpolation is linear between quantile levels with flat extrapolation at
    the ends; masked (no-power) quantiles contribute zero power.
    """
    values = np.where(mask, 10.0 ** (np.asarray(cdf_db, dtype=float) / 10.0), 0.0)
    return np.interp(u, QUANTILE_LEVELS, values)


def compose_se_mc(
    cdfs: Sequence[QuantileCdf],
    cats: Sequence[int],
    n_samples: int,
    seed: int,
    p_rb: float,
    sigma0_sq: float,
    sigma_v_sq,
) -> float:
    """SE from independent per-link draws with uniform phases on signal terms.

    ``sigma_v_sq`` is a scalar (or one value per noise CDF) scaling the
    amplified-noise norms in the denominator.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cats = [int(c) for c in cats]
    if cats.count(CAT_DIRECT) != 1:
        raise ValueError("exactly one direct-link CDF required")
    rng = np.random.default_rng(seed)
    n_noise = cats.count(CAT_NOISE)
    sv = np.broadcast_to(np.asarray(sigma_v_sq, dtype=float).ravel(), (max(n_noise, 1),))

    sig = np.zeros(n_samples, dtype=complex)
    noise = np.zeros(n_samples)
    k_noise = 0
    for cdf, cat in zip(cdfs, cats):
        u = rng.uniform(0.0, 1.0, size=n_samples)
        powers = _inverse_cdf_powers(cdf.q_db, cdf.mask, u)
        if cat in (CAT_DIRECT, CAT_CASCADED, CAT_SCATTERED):
            phases = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=n_samples))
            sig += np.sqrt(powers) * phases
        elif cat == CAT_NOISE:
            noise += powers * sv[k_noise]
            k_noise += 1
        else:
            raise ValueError(f"unknown category {cat}")
    gamma = p_rb * np.abs(sig) ** 2 / (noise + sigma0_sq)
    return float(np.mean(np.log2(1.0 + gamma)))


# ---------------------------------------------------------------------------
# Predictors
# ---------------------------------------------------------------------------


@dataclass
class OraclePredictor:
    """Ground-truth Monte Carlo predictor."""

    spec: FadingSpec
    phase_scheme: str = "mccm"
    kind: str = "oracle"

    def predict(self, scene: SceneConfig, ue: UePos, serving: Optional[int]) -> float:
        return oracle.ergodic_se(scene, ue, serving, self.phase_scheme, self.spec)

    def se_vector(self, scene: SceneConfig, ue: UePos) -> np.ndarray:
        return oracle.se_vector(scene, ue, self.spec, self.phase_scheme)


@dataclass
class TableComposePredictor:
    """Nearest-neighbour table lookup followed by Monte Carlo CDF composition."""

    store: CkmStore
    n_samples: int = 4000
    seed: int = 0
    kind: str = "table-compose"

    def predict(self, scene: SceneConfig, ue: UePos, serving: Optional[int]) -> float:
        if scene_fingerprint(scene) != self.store.fingerprint:
            raise ValueError("fingerprint mismatch: store built for a different scene")
        entry, _ = self.store.query(ue.x, ue.y)
        cdfs: list[QuantileCdf] = [entry.direct]
        cats: list[int] = [CAT_DIRECT]
        for i, a in enumerate(entry.per_airs):
            if i == serving:
                cdfs.append(a.cascaded)
                cats.append(CAT_CASCADED)
            else:
                cdfs.append(a.scattered)
                cats.append(CAT_SCATTERED)
        sv = []
        for i, a in enumerate(entry.per_airs):
            cdfs.append(a.noise)
            cats.append(CAT_NOISE)
            sv.append(scene.sigma_v_sq_mw(i))
        return compose_se_mc(
            cdfs,
            cats,
            self.n_samples,
            self.seed,
            scene.p_rb_mw,
            scene.sigma0_sq_mw,
            np.asarray(sv) if sv else 0.0,
        )

    def se_vector(self, scene: SceneConfig, ue: UePos) -> np.ndarray:
        out = np.empty(scene.n_airs + 1)
        out[0] = self.predict(scene, ue, None)
        for i in range(scene.n_airs):
            out[i + 1] = self.predict(scene, ue, i)
        return out


@dataclass
class NeuralPredictor:
    """Learned pipeline: per-panel link statistics, then SE composition."""

    ws_lps: neural.WeightStore
    ws_se: neural.WeightStore
    mask_threshold: float = 0.5
    kind: str = "neural"

    def _lps(self, scene: SceneConfig, ue: UePos, i: int, role: int):
        out = neural.lps_forward(scene.feature_vector(ue, i, role), self.ws_lps)
        valid = out.mask_prob48 >= self.mask_threshold
        q = np.where(valid, out.quantiles48, oracle.SENTINEL_DB)
        # enforce the monotone-where-valid storage contract before composing
        cdfs = []
        for g in range(3):
            s = slice(16 * g, 16 * (g + 1))
            qg, mg = q[s].copy(), valid[s].copy()
            vals = np.sort(qg[mg])
            qg[mg] = vals
            cdfs.append(QuantileCdf(q_db=qg, mask=mg))
        return cdfs  # [direct, link, noise]

    def predict(self, scene: SceneConfig, ue: UePos, serving: Optional[int]) -> float:
        cdfs: list[QuantileCdf] = []
        cats: list[int] = []
        direct_source = serving if serving is not None else 0
        noise_cdfs: list[QuantileCdf] = []
        for i in range(scene.n_airs):
            role = 1 if i == serving else 0
            d, link, noise_cdf = self._lps(scene, ue, i, role)
            if i == direct_source:
                cdfs.append(d)
                cats.append(CAT_DIRECT)
            cdfs.append(link)
            cats.append(CAT_CASCADED if i == serving else CAT_SCATTERED)
            noise_cdfs.append(noise_cdf)
        cdfs.extend(noise_cdfs)
        cats.extend([CAT_NOISE] * len(noise_cdfs))
        q = np.stack([c.q_db for c in cdfs])
        return neural.se_forward(q, cats, self.ws_se)

    def se_vector(self, scene: SceneConfig, ue: UePos) -> np.ndarray:
        out = np.empty(scene.n_airs + 1)
        out[0] = self.predict(scene, ue, None)
        for i in range(scene.n_airs):
            out[i + 1] = self.predict(scene, ue, i)
        return out


def predict_se(predictor, scene: SceneConfig, ue: UePos, serving: Optional[int]) -> float:
    """Uniform entry point over the three predictor kinds."""
    return predictor.predict(scene, ue, serving)
