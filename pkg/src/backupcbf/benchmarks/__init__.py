"""Ready-made benchmark problems with audited backup pairs."""

from .double_integrator import DoubleIntegratorBundle, di_bundle
from .quadrotor import QuadrotorBundle, quad_bundle
from .validation import BackupPairError, BackupValidationReport, validate_backup_pair

__all__ = [
    "BackupPairError",
    "BackupValidationReport",
    "DoubleIntegratorBundle",
    "QuadrotorBundle",
    "di_bundle",
    "quad_bundle",
    "validate_backup_pair",
]
