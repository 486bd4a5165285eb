"""Release-date optimization for one resource per planning run."""

from .build import CfReleasePlanner, ReleaseConfig, build_instance
from .model import (
    CertificateCheck, InstanceError, ModelOrder, ReleaseModelInstance, ReleasePlan,
    SolveCertificate, build_linear_model, dump_instance, load_instance, plan_objective,
    verify_certificate,
)
from .oracle import OracleTooLarge, brute_force_oracle
from .solver import SolverError, solve

__all__ = [
    "CertificateCheck", "CfReleasePlanner", "InstanceError", "ModelOrder", "OracleTooLarge",
    "ReleaseConfig", "ReleaseModelInstance", "ReleasePlan", "SolveCertificate", "SolverError",
    "brute_force_oracle", "build_instance", "build_linear_model", "dump_instance",
    "load_instance", "plan_objective", "solve", "verify_certificate",
]
