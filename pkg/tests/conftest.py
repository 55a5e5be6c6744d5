import math

import numpy as np
import pytest

from airslab.channel import FadingSpec
from airslab.scene import AirsConfig, SceneConfig, UePos


@pytest.fixture
def two_panel_scene() -> SceneConfig:
    return SceneConfig(
        n_rb=8,
        n_slots=2,
        airs=(
            AirsConfig(pos=(45.0, 25.0, 10.0), rot=(0.0, 0.0, math.radians(-150.0)), grid=(6, 6)),
            AirsConfig(pos=(-40.0, -30.0, 10.0), rot=(0.0, 0.0, math.radians(37.0)), grid=(6, 6)),
        ),
        ues=(UePos(60.0, -10.0), UePos(-52.0, -48.0), UePos(20.0, 55.0)),
    )


@pytest.fixture
def cheap_spec() -> FadingSpec:
    return FadingSpec(n_large=4, n_small=30, seed=7)


@pytest.fixture
def pure_los_spec() -> FadingSpec:
    # deterministic single-tap channel: exact geometric phases everywhere
    return FadingSpec(
        n_large=1,
        n_small=1,
        n_taps=1,
        rician_k_los_db=math.inf,
        rician_k_nlos_db=math.inf,
        shadow_sigma_los_db=0.0,
        shadow_sigma_nlos_db=0.0,
        seed=1,
    )


def make_random_scene(
    seed: int,
    n_airs: int = 1,
    n_ues: int = 1,
    grid=(8, 8),
    n_slots: int = 1,
    ue_near_panel: bool = False,
):
    """Random desk-scale deployment: panels at mid radius facing the BS.

    With ``ue_near_panel`` UEs are drawn inside the first panel's front
    sector so the cascade is never dark.
    """
    rng = np.random.default_rng(seed)
    panels = []
    panel_polar = []
    for _ in range(n_airs):
        ang = rng.uniform(0.0, 2.0 * np.pi)
        r = rng.uniform(40.0, 70.0)
        panel_polar.append((ang, r))
        panels.append(
            AirsConfig(
                pos=(r * np.cos(ang), r * np.sin(ang), 10.0),
                rot=(0.0, 0.0, ang + np.pi),
                grid=grid,
            )
        )
    ues = []
    for _ in range(n_ues):
        if ue_near_panel:
            # inside the first panel's front half-space (it faces the BS)
            p_ang, p_r = panel_polar[0]
            ang = rng.uniform(p_ang - 0.7, p_ang + 0.7)
            r = math.sqrt(rng.uniform(25.0**2, (0.9 * p_r) ** 2))
        else:
            ang = rng.uniform(0.0, 2.0 * np.pi)
            r = math.sqrt(rng.uniform(30.0**2, 80.0**2))
        ues.append(UePos(r * np.cos(ang), r * np.sin(ang)))
    return SceneConfig(n_rb=8, n_slots=n_slots, airs=tuple(panels), ues=tuple(ues))
