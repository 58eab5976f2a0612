# Schemas for attack configuration
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class AttackKind(str, Enum):
    FGSM = "fgsm"
    FGV = "fgv"
    DEEPFOOL = "deepfool"
    SSF_ITER = "ssf-iter"
    VA1 = "va1"
    VA2 = "va2"
    INIT_ONLY = "init-only"


# Fields each kind needs; everything else must stay unset
REQUIRED_FIELDS: dict[AttackKind, tuple[str, ...]] = {
    AttackKind.FGSM: ("epsilon",),
    AttackKind.FGV: ("epsilon",),
    AttackKind.DEEPFOOL: ("max_iter",),
    AttackKind.SSF_ITER: ("step", "size"),
    AttackKind.VA1: ("alpha",),
    AttackKind.VA2: ("u",),
    AttackKind.INIT_ONLY: (),
}
OPTIONAL_FIELDS = ("epsilon", "step", "size", "max_iter", "alpha", "u")
# Kinds that start from a Gaussian initialization
SIGMA_KINDS = {AttackKind.FGSM, AttackKind.FGV, AttackKind.DEEPFOOL, AttackKind.SSF_ITER, AttackKind.INIT_ONLY}


class AttackConfig(BaseModel):
    """One attack setting: the kind plus exactly the hyper-parameters it uses."""

    model_config = ConfigDict(frozen=True, use_enum_values=False)

    kind: AttackKind
    epsilon: Optional[float] = Field(None, gt=0)
    step: Optional[int] = Field(None, ge=0)
    size: Optional[float] = Field(None, gt=0)
    sigma: float = Field(1e-4, ge=0)
    max_iter: Optional[int] = Field(None, ge=1)
    alpha: Optional[float] = Field(None, gt=0, le=1)
    u: Optional[float] = Field(None, gt=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_fields(self) -> "AttackConfig":
        required = REQUIRED_FIELDS[self.kind]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.kind.value} requires {', '.join(missing)}")
        extra = [name for name in OPTIONAL_FIELDS if name not in required and getattr(self, name) is not None]
        if extra:
            raise ValueError(f"{self.kind.value} does not take {', '.join(extra)}")
        return self

    @classmethod
    def fgsm(cls, epsilon: float, sigma: float = 1e-4, seed: int = 0) -> "AttackConfig":
        return cls(kind=AttackKind.FGSM, epsilon=epsilon, sigma=sigma, seed=seed)

    @classmethod
    def fgv(cls, epsilon: float, sigma: float = 1e-4, seed: int = 0) -> "AttackConfig":
        return cls(kind=AttackKind.FGV, epsilon=epsilon, sigma=sigma, seed=seed)

    @classmethod
    def deepfool(cls, max_iter: int = 100, sigma: float = 1e-4, seed: int = 0) -> "AttackConfig":
        return cls(kind=AttackKind.DEEPFOOL, max_iter=max_iter, sigma=sigma, seed=seed)

    @classmethod
    def ssf_iter(cls, step: int, size: float, sigma: float = 1e-4, seed: int = 0) -> "AttackConfig":
        return cls(kind=AttackKind.SSF_ITER, step=step, size=size, sigma=sigma, seed=seed)

    @classmethod
    def va1(cls, alpha: float, seed: int = 0) -> "AttackConfig":
        return cls(kind=AttackKind.VA1, alpha=alpha, seed=seed)

    @classmethod
    def va2(cls, u: float, seed: int = 0) -> "AttackConfig":
        return cls(kind=AttackKind.VA2, u=u, seed=seed)

    @classmethod
    def init_only(cls, sigma: float = 1e-4, seed: int = 0) -> "AttackConfig":
        return cls(kind=AttackKind.INIT_ONLY, sigma=sigma, seed=seed)

    def params(self) -> dict[str, float]:
        """The hyper-parameters this kind uses, in a fixed order."""
        out: dict[str, float] = {name: getattr(self, name) for name in REQUIRED_FIELDS[self.kind]}
        if self.kind in SIGMA_KINDS:
            out["sigma"] = self.sigma
        return out

    def label(self) -> str:
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params().items())
        return f"{self.kind.value}({inner})"
