import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, ValidationInfo, field_validator, model_validator

from surfrig.core.errors import ConfigError, IoError
from surfrig.models.render import Camera
from surfrig.render.camera import validate_camera

Vector3 = Tuple[float, float, float]

PARAMETER_GROUPS = ("color", "sh_rest", "opacity", "blend", "specular", "position", "rotation", "scale")
ParameterGroup = Literal["color", "sh_rest", "opacity", "blend", "specular", "position", "rotation", "scale"]


def _resolve_path(value, info: ValidationInfo):
    """Resolve a relative path against the config file's directory and require it to exist."""
    if value is None:
        return None
    path = Path(value)
    base = (info.context or {}).get("base_dir")
    if base is not None and not path.is_absolute():
        path = Path(base) / path
    if (info.context or {}).get("check_paths", True) and not path.exists():
        raise IoError(f"{info.field_name}: {path} does not exist", {"path": str(path)})
    return path


class CameraConfig(BaseModel):
    position: Vector3 = Field((0.0, 0.0, 3.0), description="Camera center")
    look_at: Vector3 = Field((0.0, 0.0, 0.0), description="Point the camera looks at")
    up: Vector3 = Field((0.0, 1.0, 0.0), description="Up hint, must not be parallel to the view direction")
    fov_y: float = Field(40.0, gt=0.0, lt=180.0, description="Vertical field of view in degrees")
    width: int = Field(64, ge=1, le=4096)
    height: int = Field(64, ge=1, le=4096)
    near: float = Field(0.01, ge=0.0)
    far: float = Field(100.0, gt=0.0)

    @model_validator(mode="after")
    def check_camera(self):
        validate_camera(self.to_camera())
        return self

    def to_camera(self) -> Camera:
        return Camera(
            position=self.position,
            look_at=self.look_at,
            up=self.up,
            fov_y=self.fov_y,
            width=self.width,
            height=self.height,
            near=self.near,
            far=self.far,
        )


class EnergyConfig(BaseModel):
    lambda_depth: float = Field(100.0, ge=0.0, description="Depth-distortion weight")
    lambda_normal: float = Field(0.05, ge=0.0, description="Normal-consistency weight")
    lambda_eye: float = Field(0.1, ge=0.0, description="Eye opacity weight")
    beta: float = Field(0.8, ge=0.0, le=1.0, description="L1 share of the photometric loss")
    eps_pos: float = Field(1.0, ge=0.0, description="Offset threshold in parent edge lengths")
    eps_scale: float = Field(0.6, ge=0.0, description="Scale threshold in parent edge lengths")
    weight_position: float = Field(0.01, ge=0.0)
    weight_scaling: float = Field(0.01, ge=0.0)
    freeze_eye: bool = Field(True, description="Keep eye surfels' rotation and offset fixed during fits")

    model_config = {
        "json_schema_extra": {
            "example": {
                "lambda_depth": 100.0,
                "lambda_normal": 0.05,
                "lambda_eye": 0.1,
                "beta": 0.8,
                "freeze_eye": True,
            }
        }
    }


class FitTarget(BaseModel):
    target: Path = Field(..., description="Target RGB image (PNG)")
    deformed_mesh: Optional[Path] = Field(None, description="Pose of this view; canonical when omitted")
    camera: Optional[CameraConfig] = Field(None, description="Overrides the run camera")

    resolve_paths = field_validator("target", "deformed_mesh", mode="after")(_resolve_path)


class FitConfig(BaseModel):
    iterations: int = Field(100, ge=0, le=100_000)
    groups: List[ParameterGroup] = Field(default_factory=lambda: ["color", "opacity", "blend"])
    step_sizes: Dict[str, float] = Field(default_factory=dict, description="Per-group base step overrides")
    fd_step: float = Field(1e-4, gt=0.0, le=0.1, description="Central finite-difference step")
    max_backtracks: int = Field(12, ge=0, le=60)
    targets: List[FitTarget] = Field(default_factory=list)

    @field_validator("step_sizes")
    @classmethod
    def check_steps(cls, value: Dict[str, float]) -> Dict[str, float]:
        for name, step in value.items():
            if name not in PARAMETER_GROUPS:
                raise ValueError(f"unknown parameter group {name!r}")
            if not step > 0.0:
                raise ValueError(f"step size for {name} must be positive")
        return value


class AppearanceConfig(BaseModel):
    sh_degree: int = Field(3, ge=0, le=3)
    lobe_grid: Tuple[int, int] = Field((4, 4), description="ASG lobes along polar angle and azimuth")
    pe_freqs: int = Field(4, ge=0, le=10)
    specular: bool = Field(False, description="Attach an ASG specular head")
    specular_eye_only: bool = Field(False, description="Add specular color on eye surfels only")
    base_color: float = Field(0.5, ge=0.0, le=1.0)
    alpha: float = Field(1.0, ge=0.0, le=1.0)

    @field_validator("lobe_grid")
    @classmethod
    def check_grid(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        if value[0] < 1 or value[1] < 1:
            raise ValueError("lobe grid dimensions must be >= 1")
        return value


class RunConfig(BaseModel):
    canonical_mesh: Optional[Path] = None
    deformed_mesh: Optional[Path] = None
    surfel_set: Optional[Path] = None
    output_dir: Path = Path("out")
    camera: CameraConfig = Field(default_factory=CameraConfig)
    energy: EnergyConfig = Field(default_factory=EnergyConfig)
    fit: FitConfig = Field(default_factory=FitConfig)
    appearance: AppearanceConfig = Field(default_factory=AppearanceConfig)
    adjacency: Literal["edge", "vertex"] = "edge"
    surfels_per_triangle: int = Field(1, ge=1, le=256)
    eye_faces: List[int] = Field(default_factory=list)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    background: Vector3 = (0.0, 0.0, 0.0)

    resolve_paths = field_validator("canonical_mesh", "deformed_mesh", "surfel_set", mode="after")(_resolve_path)

    @field_validator("background")
    @classmethod
    def check_background(cls, value: Vector3) -> Vector3:
        if any(not 0.0 <= c <= 1.0 for c in value):
            raise ValueError("background components must be in [0, 1]")
        return value

    @field_validator("eye_faces")
    @classmethod
    def check_eye_faces(cls, value: List[int]) -> List[int]:
        if any(f < 0 for f in value):
            raise ValueError("eye face indices must be non-negative")
        return sorted(set(value))

    model_config = {
        "json_schema_extra": {
            "example": {
                "canonical_mesh": "head.obj",
                "deformed_mesh": "head_smile.obj",
                "camera": {"position": [0.0, 0.0, 3.0], "width": 64, "height": 64},
                "surfels_per_triangle": 4,
                "seed": 7,
            }
        }
    }


def load_run_config(path, check_paths: bool = True) -> RunConfig:
    """
    Read a JSON run config; relative paths resolve against its directory.

    Raises:
        IoError: the file or a referenced path cannot be read.
        ConfigError: the document does not validate.
        InvalidCamera: the camera block is unusable.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}", {"path": str(path)}) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}", {"path": str(path)}) from exc
    try:
        return RunConfig.model_validate(
            raw, context={"base_dir": path.parent, "check_paths": check_paths}
        )
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(
            f"invalid config {path}: {'.'.join(str(p) for p in first['loc'])}: {first['msg']}",
            {"path": str(path), "errors": exc.error_count()},
        ) from exc
