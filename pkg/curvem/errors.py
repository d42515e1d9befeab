"""
Custom exception classes for curvem
"""

from typing import List, Optional


class CurvemError(Exception):
    """Base exception for curvem"""
    pass


class ParseError(CurvemError):
    """Mesh or config text parsing error"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshError(CurvemError):
    """Mesh invariant violation or generation failure"""

    def __init__(self, message: str, element: Optional[int] = None,
                 edge: Optional[int] = None):
        self.element = element
        self.edge = edge
        if element is not None:
            message = f"element {element}: {message}"
        elif edge is not None:
            message = f"edge {edge}: {message}"
        super().__init__(message)


class GeometryError(CurvemError):
    """Invalid curve or parameter out of range"""
    pass


class QuadratureError(CurvemError):
    """Quadrature rule construction error"""
    pass


class SpaceError(CurvemError):
    """Singular projector system"""
    pass


class MaterialError(CurvemError):
    """Invalid material parameters or material point failure"""
    pass


class SolverError(CurvemError):
    """Assembly, boundary condition or linear solve error"""
    pass


class ConvergenceError(SolverError):
    """Newton iteration did not converge"""

    def __init__(self, message: str, step: int, residuals: List[float]):
        self.step = step
        self.residuals = list(residuals)
        last = residuals[-1] if residuals else float('nan')
        super().__init__(f"step {step}: {message} (last residual {last:.3e})")


class ConfigError(CurvemError):
    """Invalid configuration value"""
    pass
