"""Training hyperparameters and the trained level-set surrogate."""
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .network import Activation, DenseNet
from .scenario import ScalingTransform, ScenarioConfig


class TrainingConfig(BaseModel):
    """Hyperparameters of one PINN training run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    iterations: int = Field(default=4800, description="Adam steps")
    learning_rate: float = Field(default=5e-3, gt=0.0, description="Step size at the first iteration")
    final_learning_rate: Optional[float] = Field(
        default=1e-4, gt=0.0, description="Step size at the last iteration; None keeps it constant"
    )
    interior_batch: int = Field(default=4096, gt=0, description="Collocation points per step")
    boundary_batch: int = Field(default=1024, gt=0, description="Initial-face points per step")
    pde_weight: float = Field(default=1.0, gt=0.0)
    bc_weight: float = Field(default=10.0, gt=0.0)
    eps_n: float = Field(default=1e-8, ge=0.0, description="Gradient-norm regularizer")
    seed: int = Field(default=0, ge=0)
    sampling: Literal["stratified", "grid"] = "stratified"
    spacings: Tuple[float, float, float] = Field(
        default=(0.17, 0.02, 0.02), description="Grid sampling spacings [dt, dx, dy], scaled units"
    )
    layer_sizes: Tuple[int, ...] = (3, 16, 1)
    activation: Activation = "tanh"
    ansatz: Literal["offset", "plain"] = Field(
        default="offset", description="offset: u = psi0 + net; plain: u = net"
    )
    log_every: int = Field(default=200, gt=0)

    @field_validator("iterations")
    @classmethod
    def validate_iterations(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("iterations must be positive")
        return v

    @field_validator("spacings")
    @classmethod
    def validate_spacings(cls, v: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(not s > 0.0 for s in v):
            raise ValueError("grid spacings must be positive")
        return v

    @field_validator("layer_sizes")
    @classmethod
    def validate_layer_sizes(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(v) < 2 or v[0] != 3 or v[-1] != 1 or any(n < 1 for n in v):
            raise ValueError("level-set network must map 3 inputs to 1 output")
        return v

    @property
    def offset(self) -> bool:
        return self.ansatz == "offset"

    def learning_rate_at(self, iteration: int) -> float:
        """Exponential decay from ``learning_rate`` to ``final_learning_rate`` over the run."""
        if self.final_learning_rate is None or self.iterations == 1:
            return self.learning_rate
        fraction = min(max(iteration, 0), self.iterations - 1) / (self.iterations - 1)
        return float(self.learning_rate * (self.final_learning_rate / self.learning_rate) ** fraction)


@dataclass(frozen=True, eq=False)
class LevelSetSolution:
    """Trained surrogate plus everything needed to query it in physical units."""

    net: DenseNet
    scaling: ScalingTransform
    scenario: ScenarioConfig
    loss_history: np.ndarray
    config: TrainingConfig = field(default_factory=TrainingConfig)

    @property
    def final_loss(self) -> float:
        return float(self.loss_history[-1]) if len(self.loss_history) else float("nan")

    def history_rows(self) -> List[Tuple[int, float]]:
        return [(i, float(v)) for i, v in enumerate(self.loss_history)]
