"""Exact, desk-scale laboratory for QKD error correction and privacy amplification."""

from .adversary import AttackModel, PipelineTrace, build_intercept_resend, verify_chain
from .ecc import LinearCode, get_code, reconcile
from .gf2 import BitMatrix
from .hashing import HashFamily, lhl_key_length
from .pipeline import KeyRateReport, ProtocolConfig, run_protocol, sweep_tradeoff
from .secmetrics import JointDistribution, mutual_info, pguess, stat_distance

__version__ = "0.1.0"
