from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Tuple

import numpy as np

# T x K matrix of per-frame, per-keyword sigmoid outputs
Posteriors = np.ndarray


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 40
    hidden_dim: int = 64
    num_blocks: int = 4
    kernel_size: int = 8
    dilations: Tuple[int, ...] = (1, 2, 4, 8)
    num_keywords: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        if self.num_keywords < 1:
            raise ValueError("num_keywords must be >= 1")
        if self.kernel_size < 1:
            raise ValueError("kernel_size must be >= 1")
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ValueError("input_dim and hidden_dim must be >= 1")
        if len(self.dilations) != self.num_blocks:
            raise ValueError(f"expected {self.num_blocks} dilations, got {len(self.dilations)}")
        if any(d < 1 for d in self.dilations):
            raise ValueError("dilations must be >= 1")

    @property
    def receptive_field(self) -> int:
        return 1 + sum((self.kernel_size - 1) * d for d in self.dilations)

    def shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        """Canonical tensor order; checkpoints and optimizers rely on it."""
        h = self.hidden_dim
        out: List[Tuple[str, Tuple[int, ...]]] = [
            ("preproc.weight", (self.input_dim, h)),
            ("preproc.bias", (h,)),
        ]
        for i in range(self.num_blocks):
            out.append((f"blocks.{i}.depthwise", (h, self.kernel_size)))
            out.append((f"blocks.{i}.pointwise", (h, h)))
            out.append((f"blocks.{i}.pointwise_bias", (h,)))
        out.append(("heads.weight", (h, self.num_keywords)))
        out.append(("heads.bias", (self.num_keywords,)))
        return out

    def to_json(self) -> dict:
        data = asdict(self)
        data["dilations"] = list(self.dilations)
        return data

    @classmethod
    def from_json(cls, data: dict) -> "ModelConfig":
        return cls(**data)


@dataclass
class ModelParams:
    """Named float64 tensors in canonical order. Gradients use the same type."""
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self.tensors[name] = value

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.tensors.items()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams({k: np.zeros_like(v) for k, v in self.tensors.items()})

    def add_(self, other: "ModelParams", scale: float = 1.0) -> "ModelParams":
        for k, v in other.tensors.items():
            self.tensors[k] += scale * v
        return self

    def scale_(self, factor: float) -> "ModelParams":
        for v in self.tensors.values():
            v *= factor
        return self

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(v))) for v in self.tensors.values())

    def check_shapes(self, config: ModelConfig) -> None:
        expected = config.shapes()
        if [k for k, _ in expected] != list(self.tensors):
            raise ValueError("parameter names do not match the model config")
        for name, shape in expected:
            if self.tensors[name].shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {self.tensors[name].shape}")

    def equals(self, other: "ModelParams") -> bool:
        if list(self.tensors) != list(other.tensors):
            return False
        return all(np.array_equal(v, other.tensors[k]) for k, v in self.tensors.items())
