"""Numerical tolerances and resource caps shared by every module."""

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Tolerances:
    stochastic: float = 1e-12
    fixed: float = 1e-10
    mean: float = 1e-10
    normal: float = 1e-10
    # condition terms whose norm is below negligible * ||f||_pi are treated as zero
    negligible: float = 1e-13
    classifier_margin: float = 0.15
    degenerate_variance: float = 1e-12

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ResourceCaps:
    dense_stationary_states: int = 2000
    bridge_states: int = 512
    bridge_horizon: int = 4096

    def as_dict(self):
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()
DEFAULT_CAPS = ResourceCaps()
