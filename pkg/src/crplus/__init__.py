"""Analytical CreditRisk+ engine with loss distributions conditional on defaults."""

__version__ = "0.1.0"

from .conditional import (
    ScenarioReport,
    cond_default_intensity,
    joint_cond_intensity,
    joint_default_intensity,
    loss_given_one_default,
    loss_given_two_defaults,
    stressed_pd,
)
from .engine import LossEngine, SectorSystem, assemble, loss_distribution, risk_report, sector_loss, suggest_truncation
from .mc import SimConfig, SimResult, estimate_conditional_one_default, simulate, verify_fundamental_identity
from .pmf import Pmf, TruncationError, compound_negbin, compound_poisson, convolve, expected_shortfall, mean, point_mass, quantile, variance
from .portfolio import Obligor, Portfolio, PortfolioError, Sector, SeverityDist, parse_portfolio, serialize_portfolio, validate
