"""
Type definitions and data structures for curvem
"""

from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from curvem.errors import ConfigError


class CurveKind(Enum):
    """Supported boundary curves"""
    CIRCLE = "circle"
    SEGMENT = "segment"


class Variant(Enum):
    """Edge space variants"""
    STRAIGHT = "s"
    CO = "co"
    CV = "cv"

    @classmethod
    def parse(cls, label: str) -> 'Variant':
        label = label.strip().lower()
        if label == 'straight':
            return cls.STRAIGHT
        try:
            return cls(label)
        except ValueError:
            raise ConfigError(f"Unknown space variant '{label}'")


class QuadratureMode(Enum):
    """Quadrature order presets"""
    MINIMAL = "minimal"
    HIGHER = "higher"
    REFERENCE = "reference"


class RuleKind(Enum):
    """1D Gauss families"""
    LEGENDRE = "legendre"
    LOBATTO = "lobatto"


class Domain(Enum):
    """Benchmark domains"""
    DISK = "disk"
    ANNULUS = "quarter-annulus"
    PLATE = "quarter-plate-with-hole"


class MeshFamily(Enum):
    """Benchmark mesh families"""
    QUAD = "quad"
    RHEX = "rhex"
    VORO = "voro"


class LoadHistory(Enum):
    """How loads evolve over the steps of an analysis"""
    RAMP = "ramp"
    CONSTANT = "constant"


@dataclass
class QuadratureRule:
    """Points and weights with a declared exactness order"""
    points: np.ndarray
    weights: np.ndarray
    order: int
    domain_ref: str = "reference-interval"
    flagged: bool = False

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def measure(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values: np.ndarray) -> Any:
        """Weighted sum over the leading axis of values"""
        return np.tensordot(self.weights, values, axes=(0, 0))


@dataclass(frozen=True)
class SpaceConfig:
    """Polynomial order, edge variant and quadrature orders"""
    k: int
    variant: Variant = Variant.CV
    quadrature: QuadratureMode = QuadratureMode.MINIMAL
    n_vol: int = -1
    n_edge: int = -1

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"Polynomial order must be >= 1, got {self.k}")
        presets = {
            QuadratureMode.MINIMAL: (2 * self.k - 2, self.k + 1),
            QuadratureMode.HIGHER: (2 * self.k, self.k + 2),
            QuadratureMode.REFERENCE: (2 * self.k + 4, self.k + 12),
        }
        n_vol, n_edge = presets[self.quadrature]
        # frozen dataclass: derived orders set through object.__setattr__
        if self.n_vol < 0:
            object.__setattr__(self, 'n_vol', n_vol)
        if self.n_edge < 0:
            object.__setattr__(self, 'n_edge', n_edge)
        if self.n_edge < self.k + 1:
            raise ConfigError(f"Edge rule needs at least k+1={self.k + 1} points")


@dataclass
class MeshRequest:
    """Parameters of a generated benchmark mesh"""
    domain: Domain
    family: MeshFamily
    elements: int
    seed: int = 0
    lloyd_iterations: int = 20
    distortion: float = 0.0
    radius: float = 1.0
    inner_radius: float = 2.0
    outer_radius: float = 4.0
    width: float = 100.0
    height: float = 180.0
    hole_radius: float = 50.0
    divisions: Optional[List[int]] = None

    def __post_init__(self):
        if self.elements < 1:
            raise ConfigError("Target element count must be positive")
        if self.domain is Domain.ANNULUS and not 0 < self.inner_radius < self.outer_radius:
            raise ConfigError("Annulus needs 0 < inner_radius < outer_radius")
        if self.domain is Domain.PLATE and not 0 < self.hole_radius < min(self.width, self.height):
            raise ConfigError("Plate needs 0 < hole_radius < min(width, height)")
        if self.domain is Domain.DISK and self.radius <= 0:
            raise ConfigError("Disk radius must be positive")

    @property
    def label(self) -> str:
        return f"{self.family.value}{self.elements}"

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['domain'] = self.domain.value
        data['family'] = self.family.value
        return data


@dataclass
class ErrorReport:
    """Errors of one solve of a convergence study"""
    mesh: str
    n_elements: int
    h: float
    e_u: float
    e_eps: float
    dofs: int
    runtime: float = 0.0
    e_u_absolute: bool = False
    e_eps_absolute: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ConvergenceTable:
    """Error reports over a refinement family plus least-squares slopes"""
    reports: List[ErrorReport] = field(default_factory=list)
    slope_u: float = float('nan')
    slope_eps: float = float('nan')

    def to_frame(self) -> pd.DataFrame:
        """Rows in the errors.csv layout"""
        frame = pd.DataFrame([{
            'mesh': r.mesh,
            'N': r.n_elements,
            'h': r.h,
            'dofs': r.dofs,
            'e_u': r.e_u,
            'e_eps': r.e_eps,
        } for r in self.reports], columns=['mesh', 'N', 'h', 'dofs', 'e_u', 'e_eps'])
        frame['slope_u'] = self.slope_u
        frame['slope_eps'] = self.slope_eps
        return frame
