"""Core domain types for the simulated environment."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class AssetClass(Enum):
    SCADA_CONTROLLER = "ScadaController"
    PLC = "Plc"
    HMI = "Hmi"
    SERVER = "Server"
    WORKSTATION = "Workstation"
    FIREWALL = "Firewall"
    DATABASE = "Database"


class Exposure(Enum):
    INTERNET_FACING = "InternetFacing"
    INTERNAL_ONLY = "InternalOnly"
    AIR_GAPPED = "AirGapped"


class AssetState(Enum):
    HEALTHY = "Healthy"
    DEGRADED = "Degraded"
    COMPROMISED = "Compromised"
    ISOLATED = "Isolated"
    DOWN = "Down"


class ProtocolSecurity(Enum):
    LEGACY = "Legacy"
    SECURE = "Secure"


class AttackKind(Enum):
    RANSOMWARE = "Ransomware"
    DDOS = "Ddos"
    APT = "Apt"
    CREDENTIAL_ATTACK = "CredentialAttack"
    INSIDER_MISUSE = "InsiderMisuse"
    LATERAL_MOVEMENT = "LateralMovement"


class RemediationActionKind(Enum):
    AUTO_PATCH = "AutoPatch"
    VIRTUAL_PATCH = "VirtualPatch"
    ISOLATE_SEGMENT = "IsolateSegment"
    RESTORE_BACKUP = "RestoreBackup"
    BLOCK_TRAFFIC = "BlockTraffic"
    ENFORCE_MFA_RESET_CREDS = "EnforceMfaResetCreds"
    RATE_LIMIT = "RateLimit"
    FIX_MISCONFIG = "FixMisconfig"
    DISABLE_UNUSED_PORTS = "DisableUnusedPorts"
    UPGRADE_PROTOCOL = "UpgradeProtocol"
    ADJUST_PRIVILEGES = "AdjustPrivileges"
    ENABLE_LOGGING_ALERTING = "EnableLoggingAlerting"
    RESTART_SERVICE = "RestartService"
    FIRMWARE_UPGRADE = "FirmwareUpgrade"


# Containment no-op accepted by apply_action alongside the 14 plan actions.
ALERT_ONLY = "AlertOnly"

FEATURES = (
    "traffic_out_bytes",
    "traffic_in_bytes",
    "distinct_peers",
    "failed_auth_count",
    "process_anomaly_flag",
    "file_entropy_delta",
)

# Features zeroed while an asset is isolated (no cross-asset traffic).
CROSS_ASSET_FEATURES = ("traffic_out_bytes", "traffic_in_bytes", "distinct_peers")


@dataclass
class Service:
    name: str
    port: int
    protocol_security: ProtocolSecurity
    disabled: bool = False


@dataclass
class Asset:
    id: str
    asset_class: AssetClass
    criticality: float
    business_critical: bool
    firmware_version: str
    exposure: Exposure
    services: list[Service] = field(default_factory=list)
    state: AssetState = AssetState.HEALTHY
    tags: list[str] = field(default_factory=list)
    has_backup: bool = True
    config_flags: list[str] = field(default_factory=list)
    degraded_until: int = 0


@dataclass
class AttackInstance:
    kind: AttackKind
    entry_asset_id: str
    start_tick: int
    exploited_entry_id: str
    stage: int = 0
    active: bool = True
    # Assets the attack currently touches; grows at spread-capable stages.
    affected: list[str] = field(default_factory=list)
    reached_terminal: bool = False

    def __post_init__(self):
        if not self.affected:
            self.affected = [self.entry_asset_id]


@dataclass
class TelemetryRecord:
    asset_id: str
    features: dict[str, float]
    firmware_version: str
    services: list[Service]
    config_flags: list[str]
    state: str = "Healthy"


@dataclass
class TelemetryBatch:
    tick: int
    records: list[TelemetryRecord]

    def record_for(self, asset_id: str) -> TelemetryRecord | None:
        for r in self.records:
            if r.asset_id == asset_id:
                return r
        return None


@dataclass
class ActionOutcome:
    success: bool
    disruption_minutes: float
    compliance_violation: bool
    side_effects: list[str]
    resulting_state: AssetState
    cleared_vuln: bool = False


class SimError(Exception):
    pass


class UnknownAsset(SimError):
    def __init__(self, asset_id: str):
        super().__init__(f"unknown asset {asset_id!r}")
        self.asset_id = asset_id


class UnknownCatalogEntry(SimError):
    def __init__(self, entry_id: str):
        super().__init__(f"unknown catalog entry {entry_id!r}")
        self.entry_id = entry_id


class ActionInapplicable(SimError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class CycleInDependencies(SimError):
    def __init__(self, cycle: list[str]):
        super().__init__(f"dependency cycle: {' -> '.join(cycle)}")
        self.cycle = cycle


class InvariantViolation(SimError):
    def __init__(self, subject: str, rule: str):
        super().__init__(f"{subject}: {rule}")
        self.subject = subject
        self.rule = rule
