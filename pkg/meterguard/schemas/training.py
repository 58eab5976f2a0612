# Schemas for classifier training and distillation
from pydantic import BaseModel, ConfigDict, Field


class TrainConfig(BaseModel):
    """Mini-batch RMSProp settings. Desk-scale defaults; the learning rate is hand-tuned."""

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(1e-3, gt=0)
    epochs: int = Field(30, ge=0)
    batch_size: int = Field(128, ge=1)
    rho: float = Field(0.9, gt=0, lt=1)
    epsilon: float = Field(1e-7, gt=0)
    seed: int = 0
    temperature: float = Field(1.0, gt=0)


class DistillConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    temperature: float = Field(100.0, ge=1)
    train: TrainConfig = TrainConfig()
