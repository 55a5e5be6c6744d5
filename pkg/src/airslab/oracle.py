"""Ground-truth Monte Carlo evaluation: SNR draws, ergodic SE, quantile CDFs,
and JSONL dataset generation for the learned channel-knowledge maps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import airs as airsmod
from .channel import FadingSpec, LinkRealizations, sample_links
from .scene import SceneConfig, ScenarioError, UePos, linear_to_db

QUANTILE_LEVELS = (2.0 * np.arange(1, 17) - 1.0) / 32.0
VALID_FLOOR_DB = -250.0  # samples at/below this are "no power" readings
SENTINEL_DB = -300.0


@dataclass(frozen=True)
class QuantileCdf:
    """16-point quantile summary of a power distribution in dB."""

    q_db: np.ndarray  # (16,)
    mask: np.ndarray  # (16,) bool, False where the quantile is a no-power reading

    def validate(self) -> None:
        if self.q_db.shape != (16,) or self.mask.shape != (16,):
            raise ValueError("quantile CDF must have 16 entries")
        valid = self.q_db[self.mask]
        if valid.size and np.any(np.diff(valid) < 0.0):
            raise ValueError("valid quantiles must be non-decreasing")
        if np.any(self.q_db[~self.mask] != SENTINEL_DB):
            raise ValueError("invalid quantiles must carry the sentinel value")

    def to_lists(self) -> tuple[list[float], list[bool]]:
        return [float(v) for v in self.q_db], [bool(b) for b in self.mask]

    @staticmethod
    def from_lists(q_db: Sequence[float], mask: Sequence[bool]) -> "QuantileCdf":
        cdf = QuantileCdf(np.asarray(q_db, dtype=float), np.asarray(mask, dtype=bool))
        cdf.validate()
        return cdf


@dataclass(frozen=True)
class LpsRecord:
    """One link-power-statistics training record."""

    features: np.ndarray  # (15,)
    cdf_direct: QuantileCdf
    cdf_link: QuantileCdf
    cdf_noise: QuantileCdf

    @property
    def mask48(self) -> np.ndarray:
        return np.concatenate(
            [self.cdf_direct.mask, self.cdf_link.mask, self.cdf_noise.mask]
        )

    @property
    def quantiles48(self) -> np.ndarray:
        return np.concatenate(
            [self.cdf_direct.q_db, self.cdf_link.q_db, self.cdf_noise.q_db]
        )

    def to_json_obj(self) -> dict:
        qd, md = self.cdf_direct.to_lists()
        ql, ml = self.cdf_link.to_lists()
        qn, mn = self.cdf_noise.to_lists()
        return {
            "features": [float(v) for v in self.features],
            "cdf_direct": qd,
            "cdf_link": ql,
            "cdf_noise": qn,
            "mask": md + ml + mn,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "LpsRecord":
        mask = obj["mask"]
        return LpsRecord(
            features=np.asarray(obj["features"], dtype=float),
            cdf_direct=QuantileCdf.from_lists(obj["cdf_direct"], mask[0:16]),
            cdf_link=QuantileCdf.from_lists(obj["cdf_link"], mask[16:32]),
            cdf_noise=QuantileCdf.from_lists(obj["cdf_noise"], mask[32:48]),
        )


CAT_DIRECT, CAT_CASCADED, CAT_SCATTERED, CAT_NOISE = 1, 2, 3, 4


@dataclass(frozen=True)
class SeRecord:
    """One SE training record: 2I+1 categorised CDFs plus the measured SE label."""

    cdfs: tuple[QuantileCdf, ...]
    cats: tuple[int, ...]
    se: float

    def validate(self) -> None:
        if len(self.cdfs) != len(self.cats):
            raise ValueError("cdfs and cats must have equal length")
        if self.cats.count(CAT_DIRECT) != 1:
            raise ValueError("exactly one direct-link CDF required")
        if self.cats.count(CAT_CASCADED) > 1:
            raise ValueError("at most one cascaded-signal CDF allowed")
        n_noise = self.cats.count(CAT_NOISE)
        n_scat = self.cats.count(CAT_SCATTERED)
        if len(self.cdfs) != 1 + self.cats.count(CAT_CASCADED) + n_scat + n_noise:
            raise ValueError("unknown category present")

    def to_json_obj(self) -> dict:
        qs, ms = zip(*(c.to_lists() for c in self.cdfs))
        return {
            "cdfs": list(qs),
            "cats": list(self.cats),
            "mask": list(ms),
            "se": float(self.se),
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "SeRecord":
        cdfs = tuple(
            QuantileCdf.from_lists(q, m) for q, m in zip(obj["cdfs"], obj["mask"])
        )
        rec = SeRecord(cdfs=cdfs, cats=tuple(int(c) for c in obj["cats"]), se=float(obj["se"]))
        rec.validate()
        return rec


def snr_sample(
    direct: complex,
    cascade_serving: complex,
    scattered: Sequence[complex],
    noise_norms: Sequence[float],
    p_rb: float,
    sigma_v2: float,
    sigma_02: float,
) -> float:
    """Instantaneous SNR: amplified-noise terms in the denominator, coherent sum on top."""
    if sigma_02 <= 0.0:
        raise ValueError("receiver noise power must be > 0")
    sig = direct + cascade_serving + sum(scattered)
    denom = float(sum(noise_norms)) * sigma_v2 + sigma_02
    return p_rb * abs(sig) ** 2 / denom


def quantile_cdf(samples_db) -> QuantileCdf:
    """Nearest-rank quantiles at levels (2k-1)/32; no-power readings masked out."""
    x = np.sort(np.asarray(samples_db, dtype=float).ravel())
    n = x.size
    if n < 16:
        raise ValueError("need at least 16 samples for a quantile CDF")
    ranks = np.ceil(QUANTILE_LEVELS * n).astype(int) - 1
    picked = x[ranks]
    mask = picked > VALID_FLOOR_DB
    q = np.where(mask, picked, SENTINEL_DB)
    cdf = QuantileCdf(q_db=q, mask=mask)
    cdf.validate()
    return cdf


# ---------------------------------------------------------------------------
# SNR evaluation over a realization batch
# ---------------------------------------------------------------------------


def _phase_rng(lr: LinkRealizations) -> np.random.Generator:
    """Fresh generator for per-realization scattering phases (stream 2 of the seed)."""
    ss = np.random.SeedSequence(lr.meta["seed"])
    return np.random.default_rng(ss.spawn(3)[2])


def scattered_sum(
    a: np.ndarray, amp: float, rng: np.random.Generator
) -> np.ndarray:
    """Cascade through a non-serving panel: fresh uniform phases per realization."""
    n_real, _, w = a.shape
    ang = rng.uniform(0.0, 2.0 * np.pi, size=(n_real, w))
    psi = np.exp(1j * ang)
    return amp * np.einsum("rw,rsw->rs", psi, a)


def snr_matrix(
    scene: SceneConfig,
    lr: LinkRealizations,
    serving: Optional[int],
    serving_phases: Optional[np.ndarray],
    amps: Sequence[float],
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Per-(realization, RB) SNR under a serving choice and phase configuration."""
    if rng is None:
        rng = _phase_rng(lr)
    sig = lr.direct.copy()
    if serving is not None:
        if serving_phases is None:
            raise ValueError("serving panel requires a phase configuration")
        sig += amps[serving] * (lr.cascade_elem[serving] @ serving_phases)
    noise = np.zeros(lr.direct.shape)
    for i in range(lr.n_airs):
        if i != serving:
            sig += scattered_sum(lr.cascade_elem[i], amps[i], rng)
        noise += (amps[i] ** 2) * lr.airs_ue_norm_sq[:, :, i] * scene.sigma_v_sq_mw(i)
    return scene.p_rb_mw * np.abs(sig) ** 2 / (noise + scene.sigma0_sq_mw)


@dataclass(frozen=True)
class SeEstimate:
    mean: float
    stderr: float  # small-scale Monte Carlo error of the mean
    n_real: int


def resolve_phases(
    scene: SceneConfig,
    lr: LinkRealizations,
    serving: Optional[int],
    phase_scheme,
    ue: UePos,
) -> Optional[np.ndarray]:
    """Phase vector for the serving panel under a named scheme (or pass-through)."""
    if serving is None:
        return None
    if isinstance(phase_scheme, np.ndarray):
        return phase_scheme
    if not np.any(np.abs(lr.cascade_elem[serving]) > 0.0):
        # dark panel (UE outside the pattern): any phases, contribution is zero
        return np.ones(scene.airs[serving].n_elements, dtype=complex)
    if phase_scheme == "mccm":
        return airsmod.mccm_phases(lr, serving)
    if phase_scheme == "los":
        return airsmod.los_phases(scene, serving, ue)
    if phase_scheme == "random":
        w = scene.airs[serving].n_elements
        return airsmod.random_phases(w, lr.meta["seed"] + 0x5EED)
    raise ValueError(f"unknown phase scheme: {phase_scheme!r}")


def ergodic_se_stats(
    scene: SceneConfig,
    ue: UePos,
    serving: Optional[int],
    phase_scheme,
    spec: FadingSpec,
    lr: Optional[LinkRealizations] = None,
) -> SeEstimate:
    """Monte Carlo ergodic SE with a small-scale standard error estimate."""
    if lr is None:
        lr = sample_links(scene, ue, spec)
    amps = [airsmod.amp_from_links(scene, lr, i) for i in range(lr.n_airs)]
    phases = resolve_phases(scene, lr, serving, phase_scheme, ue)
    gamma = snr_matrix(scene, lr, serving, phases, amps)
    per_real = np.mean(np.log2(1.0 + gamma), axis=1)
    mean = float(np.mean(per_real))
    n = per_real.size
    stderr = float(np.std(per_real, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SeEstimate(mean=mean, stderr=stderr, n_real=n)


def ergodic_se(
    scene: SceneConfig,
    ue: UePos,
    serving: Optional[int],
    phase_scheme,
    spec: FadingSpec,
    lr: Optional[LinkRealizations] = None,
) -> float:
    """Mean over realizations and RBs of log2(1 + SNR); deterministic per seed."""
    return ergodic_se_stats(scene, ue, serving, phase_scheme, spec, lr=lr).mean


def se_vector(
    scene: SceneConfig,
    ue: UePos,
    spec: FadingSpec,
    phase_scheme="mccm",
) -> np.ndarray:
    """(I+1,) SE predictions sharing one realization batch: BS-only then each panel."""
    lr = sample_links(scene, ue, spec)
    out = np.empty(scene.n_airs + 1)
    out[0] = ergodic_se(scene, ue, None, phase_scheme, spec, lr=lr)
    for i in range(scene.n_airs):
        out[i + 1] = ergodic_se(scene, ue, i, phase_scheme, spec, lr=lr)
    return out


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnulusSampler:
    """Uniform UE positions over an annulus centred on the BS."""

    r_min: float = 25.0
    r_max: float = 90.0
    height: float = 1.5

    def sample(self, rng: np.random.Generator) -> UePos:
        r = math.sqrt(rng.uniform(self.r_min**2, self.r_max**2))
        ang = rng.uniform(0.0, 2.0 * math.pi)
        return UePos(r * math.cos(ang), r * math.sin(ang), self.height)


def sampler_from_json(d: Optional[dict]) -> AnnulusSampler:
    if d is None:
        return AnnulusSampler()
    return AnnulusSampler(
        r_min=float(d.get("r_min_m", 25.0)),
        r_max=float(d.get("r_max_m", 90.0)),
        height=float(d.get("ue_height_m", 1.5)),
    )


def _link_power_samples(
    scene: SceneConfig,
    lr: LinkRealizations,
    airs_index: int,
    cascaded: bool,
    amp: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """dB samples of the reflected-signal power through one panel."""
    a = lr.cascade_elem[airs_index]
    if not np.any(np.abs(a) > 0.0):
        # dark panel: no-power readings, the quantile mask encodes them
        return np.full(a.shape[0] * a.shape[1], SENTINEL_DB)
    if cascaded:
        phases = airsmod.mccm_phases(lr, airs_index)
        g = amp * (a @ phases)
    else:
        g = scattered_sum(a, amp, rng)
    return linear_to_db(np.abs(g) ** 2, floor_db=SENTINEL_DB).ravel()


def _noise_power_samples(lr: LinkRealizations, airs_index: int, amp: float) -> np.ndarray:
    return linear_to_db(
        (amp**2) * lr.airs_ue_norm_sq[:, :, airs_index], floor_db=SENTINEL_DB
    ).ravel()


def _direct_power_samples(lr: LinkRealizations) -> np.ndarray:
    return linear_to_db(np.abs(lr.direct) ** 2, floor_db=SENTINEL_DB).ravel()


def _per_ue_stream(spec: FadingSpec, n_ue: int):
    """Per-UE child seeds so sharded generation can reproduce the sequential order."""
    return np.random.SeedSequence((spec.seed, 0xDA7A)).spawn(n_ue)


def gen_lps_dataset(
    scene: SceneConfig,
    sampler: AnnulusSampler,
    n_records: int,
    spec: FadingSpec,
    out_path: str | Path,
) -> int:
    """Write link-power-statistics records, one JSON object per line.

    Records cycle over drawn UE positions and, within a UE, over
    (panel, role) pairs with the cascaded role first.
    """
    if n_records < 0:
        raise ValueError("n_records must be >= 0")
    n_i = scene.n_airs
    if n_i == 0:
        raise ScenarioError("airs: dataset generation needs at least one panel")
    per_ue = 2 * n_i
    n_ue = (n_records + per_ue - 1) // per_ue if n_records else 0
    written = 0
    with open(out_path, "w") as f:
        for child in _per_ue_stream(spec, n_ue):
            rng_ue = np.random.default_rng(child)
            ue = sampler.sample(rng_ue)
            sub_seed = int(rng_ue.integers(0, 2**62))
            lr = sample_links(scene, ue, replace(spec, seed=sub_seed))
            amps = [airsmod.amp_from_links(scene, lr, i) for i in range(n_i)]
            cdf_direct = quantile_cdf(_direct_power_samples(lr))
            rng_phases = _phase_rng(lr)
            for i in range(n_i):
                cdf_noise = quantile_cdf(_noise_power_samples(lr, i, amps[i]))
                for role in (1, 0):
                    if written >= n_records:
                        break
                    samples = _link_power_samples(
                        scene, lr, i, cascaded=(role == 1), amp=amps[i], rng=rng_phases
                    )
                    rec = LpsRecord(
                        features=scene.feature_vector(ue, i, role),
                        cdf_direct=cdf_direct,
                        cdf_link=quantile_cdf(samples),
                        cdf_noise=cdf_noise,
                    )
                    f.write(json.dumps(rec.to_json_obj()) + "\n")
                    written += 1
    return written


def build_se_record(
    scene: SceneConfig,
    ue: UePos,
    serving: Optional[int],
    spec: FadingSpec,
    lr: Optional[LinkRealizations] = None,
) -> SeRecord:
    """Categorised CDF bundle plus the Monte Carlo SE label for one UE."""
    if lr is None:
        lr = sample_links(scene, ue, spec)
    n_i = scene.n_airs
    amps = [airsmod.amp_from_links(scene, lr, i) for i in range(n_i)]
    rng_phases = _phase_rng(lr)
    cdfs: list[QuantileCdf] = [quantile_cdf(_direct_power_samples(lr))]
    cats: list[int] = [CAT_DIRECT]
    if serving is not None:
        cdfs.append(
            quantile_cdf(
                _link_power_samples(scene, lr, serving, True, amps[serving], rng_phases)
            )
        )
        cats.append(CAT_CASCADED)
    for i in range(n_i):
        if i == serving:
            continue
        cdfs.append(
            quantile_cdf(
                _link_power_samples(scene, lr, i, False, amps[i], rng_phases)
            )
        )
        cats.append(CAT_SCATTERED)
    for i in range(n_i):
        cdfs.append(quantile_cdf(_noise_power_samples(lr, i, amps[i])))
        cats.append(CAT_NOISE)
    se = ergodic_se(scene, ue, serving, "mccm", spec, lr=lr)
    rec = SeRecord(cdfs=tuple(cdfs), cats=tuple(cats), se=se)
    rec.validate()
    return rec


def gen_se_dataset(
    scene: SceneConfig,
    sampler: AnnulusSampler,
    n_records: int,
    spec: FadingSpec,
    out_path: str | Path,
) -> int:
    """Write SE records (one UE each, random serving panel or none) as JSONL."""
    if n_records < 0:
        raise ValueError("n_records must be >= 0")
    n_i = scene.n_airs
    if n_i == 0:
        raise ScenarioError("airs: dataset generation needs at least one panel")
    written = 0
    with open(out_path, "w") as f:
        for child in _per_ue_stream(spec, n_records):
            rng_ue = np.random.default_rng(child)
            ue = sampler.sample(rng_ue)
            serving_draw = int(rng_ue.integers(0, n_i + 1))  # n_i means "no panel"
            serving = None if serving_draw == n_i else serving_draw
            sub_seed = int(rng_ue.integers(0, 2**62))
            rec = build_se_record(scene, ue, serving, replace(spec, seed=sub_seed))
            f.write(json.dumps(rec.to_json_obj()) + "\n")
            written += 1
    return written


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]
