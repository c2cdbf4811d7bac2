"""SPDC joint spectral amplitude simulation and spectral-phase analysis."""

import json as _json

from . import _core
from ._core import (
    JSA,
    ConfigError,
    FitError,
    InsufficientDataError,
    analytic_purity_estimates,
    chirp_from_gdd,
    chirped_factorable_jsa,
    four_photon_probability,
    fringe_closed_form,
    fit_beta_mle,
    project_fourfold,
    purity,
    reduced_density,
    sample_fourfold_events,
    schmidt_coefficients,
    unheralded_g2,
)


def _text(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else _json.dumps(config)


def default_config():
    return _json.loads(_core.default_config())


def normalize_config(config):
    """Validated config with every default filled in."""
    return _json.loads(_core.normalize_config(_text(config)))


def build_jsa(config=None, chirp_ps_per_nm=None):
    return _core.build_jsa(_text(config), chirp_ps_per_nm)


def fit_beta(events, chirp_ps_per_nm, config=None, threads=0):
    return _core.fit_beta(_text(config), chirp_ps_per_nm, events, threads)


def purity_point(chirp_ps_per_nm, seed, config=None, threads=0):
    return _core.purity_point(_text(config), chirp_ps_per_nm, seed, threads)
