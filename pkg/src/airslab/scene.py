"""Scenario geometry: panel rotations, element radiation pattern, validated configs.

Conventions used throughout the package:

* The BS sits at the origin at height ``bs_height``; positions are metres.
* An unrotated reflecting panel lies in the Y-O-Z plane with its broadside
  pointing along +X.  Panel rotations are applied as Rz(wz) @ Ry(wy) @ Rx(wx)
  (rotation order is a project convention; configs give degrees, internals
  use radians).
* Local spherical angles: theta is the polar angle from local +Z, phi the
  azimuth from local +X in the local X-Y plane, so broadside maps to
  (theta=pi/2, phi=0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ScenarioError(ValueError):
    """Raised for invalid scenario configs; message names the offending field."""


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x_lin, floor_db: float = -300.0):
    """Power in dB with zero/negative inputs clamped to ``floor_db``."""
    x = np.asarray(x_lin, dtype=float)
    out = np.full(x.shape, floor_db)
    np.log10(x, out=out, where=x > 0.0)
    out = np.where(x > 0.0, 10.0 * out, floor_db)
    out = np.maximum(out, floor_db)
    if np.isscalar(x_lin):
        return float(out)
    return out


def dbm_to_mw(x_dbm: float) -> float:
    return 10.0 ** (x_dbm / 10.0)


@dataclass(frozen=True)
class UePos:
    """Terminal position in metres."""

    x: float
    y: float
    h: float = 1.5

    @property
    def pos(self) -> np.ndarray:
        return np.array([self.x, self.y, self.h], dtype=float)

    def validate(self, path: str = "ue") -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.h)):
            raise ScenarioError(f"{path}.pos: coordinates must be finite")
        if self.h < 0.0:
            raise ScenarioError(f"{path}.pos: height must be >= 0")


@dataclass(frozen=True)
class AirsConfig:
    """One reflecting panel: placement, grid, radiation pattern, amplifier budget."""

    pos: tuple[float, float, float]
    rot: tuple[float, float, float] = (0.0, 0.0, 0.0)  # radians (wx, wy, wz)
    grid: tuple[int, int] = (8, 8)  # (W_Y, W_Z)
    elem_gain_dbi: float = 6.0
    erp_exponent: float = 1.0
    amp_power_dbm: float = 10.0
    dyn_noise_psd_dbm_hz: float = -160.0
    role_flag: int = 0  # 1 = cascaded (serving), 0 = scattered

    @property
    def w_y(self) -> int:
        return self.grid[0]

    @property
    def w_z(self) -> int:
        return self.grid[1]

    @property
    def n_elements(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def center(self) -> np.ndarray:
        return np.array(self.pos, dtype=float)

    def validate(self, path: str = "airs") -> None:
        if not all(math.isfinite(v) for v in self.pos):
            raise ScenarioError(f"{path}.pos: coordinates must be finite")
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise ScenarioError(f"{path}.grid: element counts must be >= 1")
        if self.erp_exponent < 0.0:
            raise ScenarioError(f"{path}.erp_exponent: must be >= 0")
        if self.role_flag not in (0, 1):
            raise ScenarioError(f"{path}.role_flag: must be 0 or 1")


@dataclass(frozen=True)
class SceneConfig:
    """Cell-level radio constants plus panel and terminal placement."""

    bs_height: float = 25.0
    carrier_freq: float = 3.5e9
    bandwidth: float = 20e6
    n_rb: int = 16
    n_slots: int = 2
    frame_time: float = 10e-3
    bs_power_dbm: float = 10.0
    noise_psd_dbm_hz: float = -174.0
    airs: tuple[AirsConfig, ...] = ()
    ues: tuple[UePos, ...] = ()

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def bs_pos(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.bs_height], dtype=float)

    @property
    def rb_bandwidth(self) -> float:
        return self.bandwidth / self.n_rb

    @property
    def p_rb_mw(self) -> float:
        """Per-RB transmit power under equal power split across RBs."""
        return dbm_to_mw(self.bs_power_dbm) / self.n_rb

    @property
    def sigma0_sq_mw(self) -> float:
        """Receiver thermal noise power per RB."""
        return dbm_to_mw(self.noise_psd_dbm_hz) * self.rb_bandwidth

    def sigma_v_sq_mw(self, airs_index: int) -> float:
        """Dynamic (amplifier) noise power per RB for one panel."""
        return dbm_to_mw(self.airs[airs_index].dyn_noise_psd_dbm_hz) * self.rb_bandwidth

    @property
    def n_airs(self) -> int:
        return len(self.airs)

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    def validate(self) -> None:
        if self.n_rb < 1:
            raise ScenarioError("radio.n_rb: must be >= 1")
        if self.n_slots < 1:
            raise ScenarioError("radio.n_slots: must be >= 1")
        if not (self.bandwidth > 0.0):
            raise ScenarioError("radio.bandwidth_hz: must be > 0")
        if not (self.carrier_freq > 0.0):
            raise ScenarioError("radio.carrier_freq_hz: must be > 0")
        if not math.isfinite(self.bs_height):
            raise ScenarioError("radio.bs_height_m: must be finite")
        if not (self.frame_time > 0.0):
            raise ScenarioError("radio.frame_time_s: must be > 0")
        for i, a in enumerate(self.airs):
            a.validate(path=f"airs[{i}]")
        for u, ue in enumerate(self.ues):
            ue.validate(path=f"ues[{u}]")

    def feature_vector(self, ue: UePos, airs_index: int, role_flag: int) -> np.ndarray:
        """15 scalars describing (UE position; BS power; one panel's parameters).

        Panel block: x, y, H, max element gain (dBi), wx, wy, wz (rad),
        W_Y, W_Z, amplifier power (dBm), per-RB dynamic noise power (dBm),
        role flag.
        """
        a = self.airs[airs_index]
        sigma_v_dbm = a.dyn_noise_psd_dbm_hz + 10.0 * math.log10(self.rb_bandwidth)
        return np.array(
            [
                ue.x,
                ue.y,
                self.bs_power_dbm,
                a.pos[0],
                a.pos[1],
                a.pos[2],
                a.elem_gain_dbi,
                a.rot[0],
                a.rot[1],
                a.rot[2],
                float(a.grid[0]),
                float(a.grid[1]),
                a.amp_power_dbm,
                sigma_v_dbm,
                float(role_flag),
            ],
            dtype=float,
        )


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario file: scene plus optional fading and UE-sampler sections."""

    scene: SceneConfig
    fading: Any = None  # channel.FadingSpec when the file has a "fading" key
    sampler: dict | None = None


def rotation_matrix(rot: tuple[float, float, float]) -> np.ndarray:
    """World-from-panel rotation Rz(wz) @ Ry(wy) @ Rx(wx)."""
    wx, wy, wz = rot
    cx, sx = math.cos(wx), math.sin(wx)
    cy, sy = math.cos(wy), math.sin(wy)
    cz, sz = math.cos(wz), math.sin(wz)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def panel_element_positions(airs: AirsConfig, wavelength: float) -> np.ndarray:
    """World coordinates of all W elements, half-wavelength spacing.

    Elements are indexed w = iy * W_Z + iz over the local (y, z) grid,
    centred on the panel origin.
    """
    wy, wz = airs.grid
    d = wavelength / 2.0
    ys = (np.arange(wy) - (wy - 1) / 2.0) * d
    zs = (np.arange(wz) - (wz - 1) / 2.0) * d
    local = np.zeros((wy * wz, 3))
    local[:, 1] = np.repeat(ys, wz)
    local[:, 2] = np.tile(zs, wy)
    r = rotation_matrix(airs.rot)
    return airs.center[None, :] + local @ r.T


def to_panel_frame(airs: AirsConfig, point) -> tuple[float, float]:
    """Angles (theta, phi) of the direction panel centre -> point in the panel frame."""
    v = np.asarray(point, dtype=float) - airs.center
    r = float(np.linalg.norm(v))
    if r < 1e-12:
        raise ScenarioError("degenerate direction: point coincides with panel centre")
    local = rotation_matrix(airs.rot).T @ v
    theta = math.acos(min(1.0, max(-1.0, local[2] / r)))
    phi = math.atan2(local[1], local[0])
    return theta, phi


def erp_gain(g_max: float, q: float, theta: float, phi: float) -> float:
    """Element power pattern g_max * (sin(theta) cos(phi))^q on the front half-space."""
    if not (0.0 <= theta <= math.pi) or not (-math.pi / 2 <= phi <= math.pi / 2):
        return 0.0
    base = math.sin(theta) * math.cos(phi)
    if base <= 0.0:
        return 0.0 if q > 0.0 else g_max
    return g_max * base**q


# ---------------------------------------------------------------------------
# Scenario file parsing.  Files use degrees for angles and dBm/dBi/dB for
# powers; Hz and metres elsewhere.  Schema documented in the README.
# ---------------------------------------------------------------------------


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ScenarioError(f"{path}.{key}: missing required key")
    return d[key]


def _num(d: dict, key: str, path: str, default=None) -> float:
    if key not in d:
        if default is not None:
            return float(default)
        raise ScenarioError(f"{path}.{key}: missing required key")
    v = d[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ScenarioError(f"{path}.{key}: expected a number, got {type(v).__name__}")
    return float(v)


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("$: top level must be a JSON object")
    radio = _require(doc, "radio", "$")
    scene = SceneConfig(
        bs_height=_num(radio, "bs_height_m", "radio", 25.0),
        carrier_freq=_num(radio, "carrier_freq_hz", "radio", 3.5e9),
        bandwidth=_num(radio, "bandwidth_hz", "radio", 20e6),
        n_rb=int(_num(radio, "n_rb", "radio", 16)),
        n_slots=int(_num(radio, "n_slots", "radio", 2)),
        frame_time=_num(radio, "frame_time_s", "radio", 10e-3),
        bs_power_dbm=_num(radio, "bs_power_dbm", "radio", 10.0),
        noise_psd_dbm_hz=_num(radio, "noise_psd_dbm_hz", "radio", -174.0),
        airs=tuple(
            _parse_airs(a, f"airs[{i}]") for i, a in enumerate(doc.get("airs", []))
        ),
        ues=tuple(_parse_ue(u, f"ues[{i}]") for i, u in enumerate(doc.get("ues", []))),
    )
    scene.validate()

    fading = None
    if "fading" in doc:
        from . import channel  # local import avoids a module cycle

        fading = channel.fading_from_json(doc["fading"])
    sampler = doc.get("sampler")
    if sampler is not None and not isinstance(sampler, dict):
        raise ScenarioError("sampler: expected a JSON object")
    return Scenario(scene=scene, fading=fading, sampler=sampler)


def _parse_airs(a: dict, path: str) -> AirsConfig:
    if not isinstance(a, dict):
        raise ScenarioError(f"{path}: expected a JSON object")
    pos = _require(a, "pos_m", path)
    if not (isinstance(pos, list) and len(pos) == 3):
        raise ScenarioError(f"{path}.pos_m: expected [x, y, h]")
    rot_deg = a.get("rot_deg", [0.0, 0.0, 0.0])
    if not (isinstance(rot_deg, list) and len(rot_deg) == 3):
        raise ScenarioError(f"{path}.rot_deg: expected [wx, wy, wz] in degrees")
    grid = a.get("grid", [8, 8])
    if not (isinstance(grid, list) and len(grid) == 2):
        raise ScenarioError(f"{path}.grid: expected [w_y, w_z]")
    cfg = AirsConfig(
        pos=tuple(float(v) for v in pos),
        rot=tuple(math.radians(float(v)) for v in rot_deg),
        grid=(int(grid[0]), int(grid[1])),
        elem_gain_dbi=_num(a, "elem_gain_dbi", path, 6.0),
        erp_exponent=_num(a, "erp_exponent", path, 1.0),
        amp_power_dbm=_num(a, "amp_power_dbm", path, 10.0),
        dyn_noise_psd_dbm_hz=_num(a, "dyn_noise_psd_dbm_hz", path, -160.0),
        role_flag=int(_num(a, "role_flag", path, 0)),
    )
    cfg.validate(path)
    return cfg


def _parse_ue(u: dict, path: str) -> UePos:
    if not isinstance(u, dict):
        raise ScenarioError(f"{path}: expected a JSON object")
    pos = _require(u, "pos_m", path)
    if not (isinstance(pos, list) and len(pos) == 3):
        raise ScenarioError(f"{path}.pos_m: expected [x, y, h]")
    ue = UePos(float(pos[0]), float(pos[1]), float(pos[2]))
    ue.validate(path)
    return ue


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise FileNotFoundError(f"cannot read scenario file {p}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"$: invalid JSON ({e})") from e
    return parse_scenario(doc)
