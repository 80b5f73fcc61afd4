"""Uplink distributed massive MIMO with 1-bit ADCs.

Link-level model (Bussgang decomposition, arcsine-law covariances, BMRC and
BMMSE combining), per-UE SINDR evaluation, and joint optimization of UE
transmit powers and per-RRH dithering levels under min-power and
max-min-SINDR objectives.
"""

__version__ = "0.1.0"

from .channels import ChannelState, apply_csi_model, draw_channels
from .config import ScenarioConfig, load_config, parse_config
from .derivatives import (DerivativeBundle, DualState, d_bussgang_d_rho,
                          d_bussgang_d_sigma, d_cr_d_rho, d_cr_d_sigma,
                          derivative_bundle, lagrangian_grad_rho,
                          lagrangian_grad_sigma)
from .dithering import (JointSolution, ThetaInterval, coarse_dither,
                        fine_tune, joint_design, ternary_maximize,
                        ternary_minimize, ternary_search)
from .geometry import SystemGeometry, build_geometry, pathloss_db, pathloss_gain
from .linksim import (SerResult, SymbolBatch, detect_qam16, empirical_cr,
                      empirical_sindr, simulate_symbols)
from .power_control import (DesignProblem, Iterate, OptimizerConfig,
                            OptRunRecord, maxmin_bcd, minpower_bcd,
                            minpower_gradient)
from .quantization import (PowerDitherPoint, QuantizedModel,
                           arcsine_covariance, build_model, bussgang_gain,
                           covariance_y, qd_covariance, quantize)
from .receivers import (ReceiverBank, SindrReport, bmmse, bmrc,
                        evaluate_sindr, sindr, sindr_bmmse, sindr_bmrc,
                        sindr_constraint_margin)
from .units import db_to_linear, dbm_to_watt, linear_to_db, watt_to_dbm
