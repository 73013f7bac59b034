"""
Pydantic schemas - scene configs, the ContactSet document and run reports

Every model forbids unknown keys so a typo in a scene file fails validation
with the offending key named instead of being silently ignored.
"""

from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Vector3 = Tuple[float, float, float]


# ContactSet document

class ContactPointDocument(StrictModel):
    p: Vector3
    n: Vector3
    depth: float
    scale: float = 1.0


class ContactSetDocument(StrictModel):
    stiffness: float
    damping: float = 0.0
    points: List[ContactPointDocument] = Field(default_factory=list)


# Pipeline settings

class ReductionConfig(StrictModel):
    """k-means reduction settings; c=None derives 1/L^2 from the scene bounding box"""
    k: int = Field(10, ge=1)
    c: Optional[float] = Field(None, ge=0.0)
    max_iters: int = Field(50, ge=1)
    tol: float = Field(1e-8, gt=0.0)


class StiffnessBound(StrictModel):
    """Either an absolute K_max [N/m] or a factor f with K_max = f * K"""
    k_max: Optional[float] = Field(None, gt=0.0)
    factor: Optional[float] = Field(None, gt=0.0)

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.k_max is None) == (self.factor is None):
            raise ValueError("stiffness_bound needs exactly one of 'k_max' or 'factor'")
        return self

    def resolve(self, stiffness: float) -> float:
        return self.k_max if self.k_max is not None else self.factor * stiffness


class SimSettings(StrictModel):
    dt: float = Field(1e-4, gt=0.0)
    duration: float = Field(3.0, gt=0.0)
    gravity: Vector3 = (0.0, 0.0, -9.81)
    mu_s: float = Field(0.35, ge=0.0)
    mu_k: float = Field(0.3, ge=0.0)
    stick_velocity: float = Field(1e-3, gt=0.0)
    energy_guard: Optional[float] = Field(1.0, gt=0.0)
    record_every: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if self.mu_k > self.mu_s:
            raise ValueError("friction requires mu_s >= mu_k")
        if self.duration < self.dt:
            raise ValueError("duration must be >= dt")
        return self


class MaterialSettings(StrictModel):
    stiffness: float = Field(1e5, gt=0.0)
    damping: Union[float, Literal["critical"]] = "critical"

    @model_validator(mode="after")
    def _check(self):
        if self.damping != "critical" and self.damping < 0.0:
            raise ValueError("damping must be >= 0 or 'critical'")
        return self


class InnerLoopSettings(StrictModel):
    K: float = Field(1e4, gt=0.0)
    D: float = Field(200.0, ge=0.0)
    M: float = Field(1.0, gt=0.0)


class ControllerSettings(StrictModel):
    kp_f: float = Field(0.0, ge=0.0)
    ki_f: float = Field(0.04, ge=0.0)
    f_limit: float = Field(10.0, gt=0.0)
    inner: InnerLoopSettings = InnerLoopSettings()
    force_axes: Tuple[bool, bool, bool, bool, bool, bool] = (False, False, True, False, False, False)


class OutputSettings(StrictModel):
    out_dir: str = "runs"
    trajectory_csv: bool = True


# Geometry

class HalfspaceSettings(StrictModel):
    n: Vector3
    d: float
    internal: bool = False


class PieceSettings(StrictModel):
    id: int
    halfspaces: List[HalfspaceSettings]


class InclineStripsSettings(StrictModel):
    count: int = Field(512, ge=1)
    angle_deg: float = Field(30.0, gt=0.0, lt=90.0)
    strip_length: float = Field(0.01, gt=0.0)
    length: float = Field(4.0, gt=0.0)
    width: float = Field(1.0, gt=0.0)
    thickness: float = Field(0.05, gt=0.0)
    ground: bool = True


class BoxShapeSettings(StrictModel):
    kind: Literal["box"] = "box"
    half_extents: Vector3 = (0.05, 0.05, 0.05)


class CylinderShapeSettings(StrictModel):
    kind: Literal["cylinder"] = "cylinder"
    radius: float = Field(0.01, gt=0.0)
    half_height: float = Field(0.02, gt=0.0)
    rim_samples: int = Field(8, ge=8)


ShapeSettings = Annotated[Union[BoxShapeSettings, CylinderShapeSettings], Field(discriminator="kind")]


class BodySettings(StrictModel):
    shape: ShapeSettings = BoxShapeSettings()
    mass: float = Field(1.0, gt=0.0)
    position: Vector3 = (0.0, 0.0, 0.0)
    orientation: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    linear_velocity: Vector3 = (0.0, 0.0, 0.0)
    angular_velocity: Vector3 = (0.0, 0.0, 0.0)


# Scenes

class InclineSceneSettings(StrictModel):
    kind: Literal["incline"] = "incline"
    strips: InclineStripsSettings = InclineStripsSettings()
    box_half_size: float = Field(0.05, gt=0.0)
    box_mass: float = Field(1.0, gt=0.0)
    start_offset: float = Field(0.005, ge=0.0)


class ForcePhase(StrictModel):
    force: float = Field(gt=0.0)
    duration: float = Field(gt=0.0)


class FlatForceSceneSettings(StrictModel):
    kind: Literal["flat_force"] = "flat_force"
    contact_count: Literal[4, 6] = 4
    tilt_deg: float = 1.0
    peg_radius: float = Field(0.01, gt=0.0)
    peg_half_height: float = Field(0.02, gt=0.0)
    rim_samples: int = Field(8, ge=8)
    initial_gap: float = Field(5e-4, ge=0.0)
    dt: float = Field(1e-4, gt=0.0)
    phases: List[ForcePhase] = Field(default_factory=lambda: [
        ForcePhase(force=5.0, duration=2.5), ForcePhase(force=30.0, duration=2.5)])


class DoublePinSceneSettings(StrictModel):
    kind: Literal["double_pin_count"] = "double_pin_count"
    pin_radius: float = Field(0.005, gt=0.0)
    pin_half_height: float = Field(0.01, gt=0.0)
    rim_samples: int = Field(8, ge=8)
    bore_half_width_x: float = Field(0.006, gt=0.0)
    bore_half_width_y: float = Field(0.0045, gt=0.0)
    bore_spacing: float = Field(0.03, gt=0.0)


class MotionSegment(StrictModel):
    """One leg of a motion script: reach `offset` and `tilt_deg` linearly over `duration`"""
    name: str
    duration: float = Field(gt=0.0)
    offset: Vector3
    tilt_deg: float = 0.0


class PegInsertionSceneSettings(StrictModel):
    kind: Literal["peg_insertion"] = "peg_insertion"
    peg_radius: float = Field(0.005, gt=0.0)
    peg_half_height: float = Field(0.01, gt=0.0)
    peg_mass: float = Field(0.05, gt=0.0)
    rim_samples: int = Field(32, ge=8)
    clearance: float = Field(1e-4, ge=0.0)
    hole_segments: int = Field(16, ge=4)
    plate_radius: float = Field(0.03, gt=0.0)
    plate_thickness: float = Field(0.01, gt=0.0)
    start_offset: Vector3 = (0.002, 0.0, 0.002)
    start_tilt_deg: float = 0.0
    wrench_limit: Tuple[float, float, float, float, float, float] = (40.0, 40.0, 60.0, 2.0, 2.0, 2.0)
    script: List[MotionSegment] = Field(default_factory=lambda: [
        MotionSegment(name="approach", duration=0.02, offset=(0.002, 0.0, -2e-4)),
        MotionSegment(name="centre", duration=0.02, offset=(3e-4, 0.0, -2e-4)),
        MotionSegment(name="insert", duration=0.06, offset=(3e-4, 0.0, -0.008)),
    ])

    @model_validator(mode="after")
    def _check(self):
        if self.plate_radius <= self.peg_radius + self.clearance:
            raise ValueError("plate_radius must exceed the bore radius peg_radius + clearance")
        if not self.script:
            raise ValueError("script needs at least one segment")
        if self.script[-1].offset[2] >= self.start_offset[2]:
            raise ValueError("script must end below start_offset; insertion runs along -z")
        return self


class CustomSceneSettings(StrictModel):
    kind: Literal["custom"] = "custom"
    body: BodySettings = BodySettings()
    pieces: List[PieceSettings] = Field(default_factory=list)
    incline_strips: Optional[InclineStripsSettings] = None


SceneSettings = Annotated[
    Union[InclineSceneSettings, FlatForceSceneSettings, DoublePinSceneSettings, PegInsertionSceneSettings,
          CustomSceneSettings],
    Field(discriminator="kind"),
]


class SceneConfig(StrictModel):
    name: str = "scene"
    scene: SceneSettings
    sim: SimSettings = SimSettings()
    material: MaterialSettings = MaterialSettings()
    reduction: Union[ReductionConfig, Literal["disabled"]] = ReductionConfig()
    stiffness_bound: Union[StiffnessBound, Literal["disabled"]] = StiffnessBound(factor=2.0)
    controller: ControllerSettings = ControllerSettings()
    output: OutputSettings = OutputSettings()

    @property
    def reduction_or_none(self) -> Optional[ReductionConfig]:
        return None if self.reduction == "disabled" else self.reduction

    @property
    def bound_or_none(self) -> Optional[StiffnessBound]:
        return None if self.stiffness_bound == "disabled" else self.stiffness_bound


# Reports

class ExperimentReport(StrictModel):
    name: str
    scaling: bool
    rms_dev_m: Optional[float] = None
    total_descent_m: Optional[float] = None
    reached_ground: bool = False
    final_speed_ratio: Optional[float] = None
    settled: Optional[bool] = None
    diverged: bool = False
    diverged_step: Optional[int] = None
    divergence_reason: Optional[str] = None
    max_raw_contacts: int = 0
    max_net_stiffness: Optional[Vector3] = None
    runtime_s: float = 0.0
    trajectory_csv: Optional[str] = None
    seed: Optional[int] = None
    config: Optional[Dict[str, Any]] = None


class ForcePhaseReport(StrictModel):
    force: float
    settled: bool
    settle_time_s: Optional[float]
    unstable: bool
    final_envelope_n: float
    envelope_ratio: float


class ForceReport(StrictModel):
    name: str
    scaling: bool
    contact_count: int
    net_stiffness: float
    spectral_radius: float
    phases: List[ForcePhaseReport]
    settled: bool
    unstable: bool
    diverged: bool = False
    runtime_s: float = 0.0
    trajectory_csv: Optional[str] = None
    seed: Optional[int] = None
    config: Optional[Dict[str, Any]] = None


class InsertionSegmentReport(StrictModel):
    name: str
    start_s: float
    end_s: float
    mean_raw_contacts: float
    mean_applied_contacts: float
    max_force_n: float


class InsertionReport(StrictModel):
    name: str
    scaling: bool
    steps: int
    mean_raw_contacts: float
    mean_applied_contacts: float
    max_raw_contacts: int
    max_net_stiffness: Optional[Vector3] = None
    mean_phase_us: Dict[str, float]
    segments: List[InsertionSegmentReport]
    final_reward: float
    force_limit_steps: int
    runtime_s: float = 0.0
    trajectory_csv: Optional[str] = None
    seed: Optional[int] = None
    config: Optional[Dict[str, Any]] = None
