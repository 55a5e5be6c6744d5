"""Desk-scale laboratory for multi-panel active-reflector downlink scheduling."""

from .scene import (
    AirsConfig,
    SceneConfig,
    Scenario,
    ScenarioError,
    UePos,
    erp_gain,
    load_scenario,
    to_panel_frame,
)
from .channel import FadingSpec, LinkRealizations, mean_link_powers, sample_links
from .airs import PhaseConfig, amplification_factor, los_phases, mccm_phases, random_phases
from .oracle import (
    AnnulusSampler,
    LpsRecord,
    QuantileCdf,
    SeRecord,
    ergodic_se,
    gen_lps_dataset,
    gen_se_dataset,
    quantile_cdf,
    snr_sample,
)
from .neural import (
    LpsOutput,
    WeightStore,
    encoder_forward,
    load_weights,
    lps_forward,
    lps_loss,
    ple_encode,
    save_weights,
    se_forward,
    se_loss,
)
from .ckm import (
    CkmStore,
    NeuralPredictor,
    OraclePredictor,
    TableComposePredictor,
    compose_se_mc,
    predict_se,
)
from .sched import (
    Schedule,
    SeMatrix,
    SmIbParams,
    build_se_matrix,
    ckmeans,
    cross_slot_swap,
    exact_enum,
    exact_maxmin_lp,
    gale_shapley,
    ib_balance,
    per_slot_maxmin,
    random_schedule,
    sm_ib,
    stage1_grouping,
    validate_schedule,
)

__version__ = "0.1.0"
