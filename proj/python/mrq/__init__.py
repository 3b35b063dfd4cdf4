"""Python access to the MR.Q C++ library."""

from ._core import (
    ConfigError,
    ContractViolation,
    Env,
    NumericError,
    RewardCodec,
    UnsupportedError,
    __version__,
    env_names,
    homomorphism_gaps,
    make_env,
    run_instance,
    symexp,
    symlog,
    train,
)

__all__ = [
    "ConfigError",
    "ContractViolation",
    "Env",
    "NumericError",
    "RewardCodec",
    "UnsupportedError",
    "env_names",
    "homomorphism_gaps",
    "make_env",
    "run_instance",
    "symexp",
    "symlog",
    "train",
]
