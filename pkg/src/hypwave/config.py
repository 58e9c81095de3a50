"""Experiment configuration: TOML schema, validation, canonical hashing.

A config fixes everything a run needs: the h ladder, the noise exponent,
the potential and state shapes, ensemble sizes, seeds and the output
directory.  Identical configs hash identically regardless of TOML key
order, and every artifact a run produces embeds that hash.
"""

import hashlib
import json
import math
from dataclasses import dataclass, fields, replace

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from .lagrangian import LagrangianState
from .potential import build_net
from .profiles import BumpProfile
from .surface import INJECTIVITY_RADIUS

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]


class ConfigError(ValueError):
    """Invalid configuration; carries the offending field name."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    surface: str = "bolza"
    h_list: tuple = (0.05,)
    beta: float = 0.3
    alpha: float = 0.8  # noise size delta = h^alpha; exclusive with delta
    delta: float = None
    horizon_const: float = 0.5
    t_schedule: tuple = "horizon"  # or explicit times
    potential_case: str = "base"
    potential_profile: str = "poly"
    omega_distribution: str = "uniform"
    n_omega: int = 64
    n_x: int = 8
    n_separations: int = 12
    max_separation: float = 6.0
    n_angles: int = 8
    amplitude_radius_factor: float = 0.25
    amplitude_profile: str = "poly"
    boundary_angle: float = 0.0
    gamma: float = 0.3
    bad_horizon: float = 2.5
    seed: int = 7
    out_dir: str = "out"

    def __post_init__(self):
        if self.surface != "bolza":
            raise ConfigError(f"unsupported surface {self.surface!r}", "surface")
        if not 0.0 < self.beta < 0.5:
            raise ConfigError(
                f"beta {self.beta} outside (0, 1/2): not admissible", "beta"
            )
        hs = tuple(float(h) for h in self.h_list)
        if not hs or any(not 0.0 < h < 1.0 for h in hs):
            raise ConfigError(f"h values {hs} must lie in (0, 1)", "h_list")
        object.__setattr__(self, "h_list", hs)
        if (self.alpha is None) == (self.delta is None):
            raise ConfigError("set exactly one of alpha and delta", "alpha")
        if self.alpha is not None and self.alpha < 2.0 * self.beta:
            raise ConfigError(
                f"alpha {self.alpha} below 2 beta = {2 * self.beta}: noise too"
                " large for the net scale",
                "alpha",
            )
        if self.delta is not None and self.delta < 0.0:
            raise ConfigError("delta must be nonnegative", "delta")
        if self.t_schedule != "horizon":
            ts = tuple(float(t) for t in self.t_schedule)
            if any(t < 0.0 for t in ts):
                raise ConfigError("negative time in schedule", "t_schedule")
            object.__setattr__(self, "t_schedule", ts)
        if self.potential_case not in ("base", "symbol"):
            raise ConfigError(
                f"unknown potential case {self.potential_case!r}", "potential_case"
            )
        if self.omega_distribution != "uniform":
            raise ConfigError(
                f"unknown omega distribution {self.omega_distribution!r}"
                " (only the unit-variance uniform is implemented)",
                "omega_distribution",
            )
        for name in ("n_omega", "n_x", "n_separations", "n_angles"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive", name)
        if not 0.0 < self.amplitude_radius_factor < 1.0:
            raise ConfigError(
                "amplitude radius factor outside (0, 1)", "amplitude_radius_factor"
            )
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma outside (0, 1)", "gamma")
        if int(self.seed) < 0:
            raise ConfigError("seed must be a nonnegative integer", "seed")
        # profiles parse eagerly so typos fail at load time
        try:
            BumpProfile.parse(self.potential_profile)
            BumpProfile.parse(self.amplitude_profile)
        except ValueError as exc:
            raise ConfigError(str(exc), "profile") from exc

    # --- derived quantities -------------------------------------------------

    def delta_for(self, h):
        if self.delta is not None:
            return float(self.delta)
        return float(h) ** self.alpha

    def times_for(self, h):
        if self.t_schedule == "horizon":
            return (self.horizon_const * math.log(1.0 / h),)
        return self.t_schedule

    def separations(self):
        import numpy as np

        return np.linspace(0.0, self.max_separation, self.n_separations)

    def state(self):
        return LagrangianState(
            boundary_point=complex(
                math.cos(self.boundary_angle), math.sin(self.boundary_angle)
            ),
            amplitude_radius=self.amplitude_radius_factor * INJECTIVITY_RADIUS,
            amplitude_profile=BumpProfile.parse(self.amplitude_profile),
        )

    def potential(self, h):
        return build_net(
            h,
            self.beta,
            seed=self.seed,
            case=self.potential_case,
            profile=BumpProfile.parse(self.potential_profile),
        )

    def job(self, h, t=None, delta=None):
        from .wkb import PropagationJob

        if t is None:
            t = self.times_for(h)[0]
        try:
            return PropagationJob(
                potential=self.potential(h),
                state=self.state(),
                t=float(t),
                delta=self.delta_for(h) if delta is None else delta,
                horizon_const=self.horizon_const,
            )
        except ValueError as exc:
            raise ConfigError(str(exc), "h_list") from exc

    # --- identity -----------------------------------------------------------

    def canonical_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "out_dir":
                continue  # where results land does not change what they are
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def config_hash(self):
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def override(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_KNOWN = {f.name for f in fields(ExperimentConfig)}


def load_config(path=None, text=None):
    """Config from a TOML file or literal text; None gives the defaults."""
    if path is None and text is None:
        return ExperimentConfig()
    if text is None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    else:
        data = tomllib.loads(text)
    unknown = sorted(set(data) - _KNOWN)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown[0])
    if "delta" in data and "alpha" not in data:
        data["alpha"] = None  # an explicit noise size replaces the exponent
    if "h_list" in data:
        data["h_list"] = tuple(data["h_list"])
    if "t_schedule" in data and data["t_schedule"] != "horizon":
        data["t_schedule"] = tuple(data["t_schedule"])
    return ExperimentConfig(**data)
