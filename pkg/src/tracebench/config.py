"""Configuration dataclasses shared across the pipeline."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class ObjectPreset:
    """Per-object physical and texture parameters.

    2-D objects (towel, cloth, napkin) are represented by their traced hem
    plus a constant lateral pull modelling the dangling fabric.
    """

    name: str
    friction_coeff: float
    compliance: float
    dangling_pull: float  # lateral displacement per step (solver units, m)
    turn_sigma: float  # heading wander of the spawn random walk (rad/step)
    diameter: float  # object cross-section diameter (m)
    texture_stripes: float  # stripe frequency of the procedural tactile texture


PRESETS: dict[str, ObjectPreset] = {
    "shoelace": ObjectPreset("shoelace", 0.80, 0.00, 0.0, 0.14, 0.0040, 9.0),
    "cable": ObjectPreset("cable", 0.60, 0.00, 0.0, 0.10, 0.0045, 13.0),
    "rope": ObjectPreset("rope", 0.70, 0.00, 0.0, 0.12, 0.0050, 7.0),
    "towel": ObjectPreset("towel", 0.80, 0.01, 0.0010, 0.12, 0.0050, 4.0),
    "cloth": ObjectPreset("cloth", 0.70, 0.01, 0.0008, 0.14, 0.0042, 5.0),
    "napkin": ObjectPreset("napkin", 0.60, 0.01, 0.0007, 0.16, 0.0040, 6.0),
}

TWO_D_PRESETS = frozenset(p.name for p in PRESETS.values() if p.dangling_pull > 0)


@dataclass(frozen=True)
class SimConfig:
    """Simulator configuration. Defaults give a 0.5 m object in a 0.6 m workspace."""

    dt: float = 1.0 / 30.0
    solver_iterations: int = 25
    L: float = 0.5
    n_particles: int = 40
    object_preset: str = "rope"
    # workspace bounds (x_min, y_min, x_max, y_max)
    workspace: tuple[float, float, float, float] = (0.0, 0.0, 0.6, 0.6)
    pin: tuple[float, float] = (0.06, 0.30)
    # gripper
    aperture_max: float = 0.03
    grasp_aperture: float = 0.006
    sensor_window: tuple[float, float] = (0.040, 0.040)  # (along finger, width)
    collision_radius: float = 0.015  # must leave margin below the spawn-to-pin distance
    pin_tension_strain: float = 0.05  # residual strain counted as over-tension at the pin
    max_speed: float = 0.4  # EE velocity limit (m/s)
    max_yaw_rate: float = 4.0  # rad/s
    aperture_rate: float = 0.1  # m/s
    # arm
    link_lengths: tuple[float, float, float] = (0.4, 0.4, 0.25)
    arm_base: tuple[float, float] = (-0.30, 0.30)
    # rope/gripper coupling
    drag_gain: float = 0.5  # lateral re-centering pull fraction per step
    slip_limit: float = 0.010  # max lateral drag per step at friction 1.0 (m)
    long_drag: float = 0.15  # longitudinal drag fraction per friction unit
    tension_gain: float = 0.10  # straightening pull on the traced portion

    def preset(self) -> ObjectPreset:
        try:
            return PRESETS[self.object_preset]
        except KeyError:
            raise ValueError(f"unknown object preset {self.object_preset!r}") from None

    @property
    def rest_length(self) -> float:
        return self.L / (self.n_particles - 1)

    def validate(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_particles < 3:
            raise ValueError("particle count must be >= 3")
        if self.sensor_window[0] <= 0 or self.sensor_window[1] <= 0:
            raise ValueError("sensor window dimensions must be positive")
        self.preset()


@dataclass(frozen=True)
class FrameSpec:
    """Tactile frame geometry."""

    H: int = 32
    W: int = 32
    p2m: float = 800.0  # pixels per meter; 32 px at 800 px/m spans the 0.04 m window

    def validate(self) -> None:
        if self.H % 2 or self.W % 2:
            raise ValueError("tactile frame dimensions must be even")
        if self.p2m <= 0:
            raise ValueError("p2m must be positive")


@dataclass(frozen=True)
class ExtractionParams:
    """Parameters of the classical contact-extraction pipeline."""

    binarize_threshold: int = 60
    gaussian_sigma: float = 1.0
    min_area: float = 6.0
    ellipse_min_points: int = 5

    def validate(self) -> None:
        if not (0 < self.binarize_threshold < 255):
            raise ValueError("binarize_threshold must be in (0, 255)")
        if self.gaussian_sigma <= 0:
            raise ValueError("gaussian_sigma must be positive")


@dataclass(frozen=True)
class ExpertGains:
    """Scripted expert controller gains."""

    lookahead: float = 0.05  # arc-length lookahead (m)
    centering_gain: float = 8.0  # 1/s
    speed: float = 0.10  # m/s, <= SimConfig.max_speed
    stop_fraction: float = 0.95
    jitter_sigma: float = 0.002  # action position jitter (m); demos teach recovery from offsets

    def validate(self) -> None:
        if min(self.lookahead, self.centering_gain, self.speed) <= 0:
            raise ValueError("expert gains must be positive")
        if not (0.9 < self.stop_fraction <= 1.0):
            raise ValueError("stop_fraction must be in (0.9, 1]")


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters."""

    lr: float = 1e-4
    batch_size: int = 8
    epochs: int = 2000
    batches_per_epoch: int = 100
    seed: int = 0
    augment: bool = True
    chunk: int = 20  # paper-scale value 60 available here
    latent_dim: int = 8
    hidden_dim: int = 128
    vis_dim: int = 32
    tac_dim: int = 16
    kin_dim: int = 16
    enc_hidden: int = 64
    lambda_reg: float = 100.0
    lambda_task: float = 100.0
    val_fraction: float = 0.1
    # ablations (mirrors the paper's table rows)
    ablate_center: bool = False  # weights forced to 1
    ablate_task: bool = False  # lambda_task forced to 0
    ablate_vision: bool = False  # visual feature zeroed
    ablate_tactile: bool = False  # tactile feature zeroed


@dataclass(frozen=True)
class EvalConfig:
    trials: int = 10
    seed: int = 0
    budget_factor: float = 4.0  # step budget = factor * nominal expert completion steps


@dataclass(frozen=True)
class ServiceConfig:
    port: int = 8765
    realtime: bool = True  # False: tick as fast as possible (tests)
    broadcast_decimation: int = 2  # 30 Hz sim -> 15 Hz stream
    lockstep: bool = False  # tick only on received commands (scripted-client replay)


@dataclass
class RunConfig:
    """Aggregate configuration for the CLI; one section per module."""

    sim: SimConfig = dataclasses.field(default_factory=SimConfig)
    frame: FrameSpec = dataclasses.field(default_factory=FrameSpec)
    extraction: ExtractionParams = dataclasses.field(default_factory=ExtractionParams)
    expert: ExpertGains = dataclasses.field(default_factory=ExpertGains)
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    eval: EvalConfig = dataclasses.field(default_factory=EvalConfig)
    service: ServiceConfig = dataclasses.field(default_factory=ServiceConfig)
