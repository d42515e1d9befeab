"""
Plane-strain constitutive models for curvem

Strains and stresses travel in Voigt order (xx, yy, xy) with engineering
shear on the strain side: e = (eps_xx, eps_yy, 2 eps_xy). Tangents are the
3x3 matrices d(sigma)/d(e). The viscoelastic and plasticity models keep
their 3D state in Mandel notation (xx, yy, zz, sqrt(2) xy).

All models are evaluated on a batch of material points at once; history
variables are dicts of arrays whose leading axis is the point index.
"""

import copy
import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from curvem.errors import MaterialError

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
MANDEL_ONE = np.array([1.0, 1.0, 1.0, 0.0])
I_DEV = np.eye(4) - np.outer(MANDEL_ONE, MANDEL_ONE) / 3.0
# Mandel (xx, yy, zz, sqrt2 xy) <-> Voigt (xx, yy, xy) with engineering shear
_PLANE = [0, 1, 3]
_SHEAR_SCALE = np.diag([1.0, 1.0, 1.0 / SQRT2])

History = Dict[str, np.ndarray]

MATERIAL_MODELS = ('linear_elastic', 'hencky_von_mises', 'maxwell', 'j2')


def lame_parameters(E: float, nu: float) -> Tuple[float, float]:
    """Plane-strain Lame constants (lambda, mu)"""
    if not E > 0:
        raise MaterialError(f"Young's modulus must be positive, got {E}")
    if not -1.0 < nu < 0.5:
        raise MaterialError(f"Poisson ratio must lie in (-1, 0.5), got {nu}")
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    return lam, mu


def bulk_shear(E: float, nu: float) -> Tuple[float, float]:
    lam, mu = lame_parameters(E, nu)
    return lam + 2.0 * mu / 3.0, mu


def isotropic_tangent(lam, mu) -> np.ndarray:
    """Voigt tangent of sigma = lam tr(e) I + 2 mu e"""
    return np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])


def voigt_to_mandel(strain: np.ndarray) -> np.ndarray:
    """Plane strain (eps_zz = 0) Voigt strains to 3D Mandel vectors"""
    strain = np.atleast_2d(strain)
    out = np.zeros((len(strain), 4))
    out[:, 0] = strain[:, 0]
    out[:, 1] = strain[:, 1]
    out[:, 3] = strain[:, 2] / SQRT2
    return out


def mandel_stress_to_voigt(stress: np.ndarray) -> np.ndarray:
    return np.column_stack((stress[:, 0], stress[:, 1], stress[:, 3] / SQRT2))


def mandel_tangent_to_voigt(C: np.ndarray) -> np.ndarray:
    return _SHEAR_SCALE @ C[..., _PLANE, :][..., :, _PLANE] @ _SHEAR_SCALE


def tangent_norm(D: np.ndarray) -> float:
    """Frobenius norm of a Voigt tangent"""
    return float(np.linalg.norm(np.asarray(D), 'fro'))


class ConstitutiveModel(ABC):
    """Black-box stress update with consistent tangent"""

    name = "abstract"

    def initial_history(self, n: int) -> History:
        return {'stress': np.zeros((n, 3)), 'tangent': np.tile(self.initial_tangent(), (n, 1, 1))}

    @abstractmethod
    def initial_tangent(self) -> np.ndarray:
        pass

    @abstractmethod
    def update(self, strain: np.ndarray, history: History,
               dt: float) -> Tuple[np.ndarray, np.ndarray, History]:
        """Stress (n, 3), tangent (n, 3, 3) and updated history at strain (n, 3)"""
        pass

    def _checked(self, stress: np.ndarray, tangent: np.ndarray):
        bad = ~np.all(np.isfinite(stress), axis=1)
        if np.any(bad):
            raise MaterialError(f"{self.name}: non-finite stress at point {int(np.argmax(bad))}")
        if not np.all(np.isfinite(tangent)):
            raise MaterialError(f"{self.name}: non-finite tangent")


class LinearElastic(ConstitutiveModel):
    """sigma = lambda tr(eps) I + 2 mu eps"""

    name = "linear_elastic"

    def __init__(self, E: float, nu: float):
        self.E, self.nu = E, nu
        self.lam, self.mu = lame_parameters(E, nu)
        self.D = isotropic_tangent(self.lam, self.mu)

    def initial_tangent(self) -> np.ndarray:
        return self.D.copy()

    def update(self, strain, history, dt):
        strain = np.atleast_2d(strain)
        stress = strain @ self.D.T
        tangent = np.broadcast_to(self.D, (len(strain), 3, 3)).copy()
        new = dict(history, stress=stress, tangent=tangent)
        return stress, tangent, new


class HenckyVonMises(ConstitutiveModel):
    """Nonlinear elastic law with deviatoric-strain dependent Lame functions

    mu_hat(rho) = 3/4 (1 + (1 + rho^2)^(-1/2)), rho = |dev eps| (2D),
    sigma = lambda(rho) tr(eps) I + 2 mu(rho) eps with
    mu(rho) = scale * mu_hat and lambda(rho) = scale * 3/4 (1 - 2 mu_hat).

    mu_hat is a shear modulus, hence the factor 2 on eps. At rest
    lambda = -mu and the plane-strain tangent has eigenvalues (2 mu, 0, mu).
    """

    name = "hencky_von_mises"

    def __init__(self, scale: float = 1e4):
        if not scale > 0:
            raise MaterialError("Hencky modulus scale must be positive")
        self.scale = scale

    def lame_functions(self, rho):
        rho = np.asarray(rho, dtype=float)
        mu_hat = 0.75 * (1.0 + 1.0 / np.sqrt(1.0 + rho ** 2))
        return self.scale * 0.75 * (1.0 - 2.0 * mu_hat), self.scale * mu_hat

    def initial_tangent(self) -> np.ndarray:
        lam, mu = self.lame_functions(0.0)
        return isotropic_tangent(float(lam), float(mu))

    def update(self, strain, history, dt):
        strain = np.atleast_2d(strain)
        exx, eyy, exy = strain[:, 0], strain[:, 1], 0.5 * strain[:, 2]
        tr = exx + eyy
        dev = np.column_stack((exx - 0.5 * tr, eyy - 0.5 * tr, exy))
        rho = np.sqrt(dev[:, 0] ** 2 + dev[:, 1] ** 2 + 2 * dev[:, 2] ** 2)
        lam, mu = self.lame_functions(rho)

        stress = np.column_stack((lam * tr + 2 * mu * exx, lam * tr + 2 * mu * eyy, 2 * mu * exy))

        # d(mu)/d(rho) / rho and d(lambda)/d(rho) / rho stay finite at rho = 0
        dmu = -self.scale * 0.75 / (1.0 + rho ** 2) ** 1.5
        dlam = -1.5 * dmu
        one = np.array([1.0, 1.0, 0.0])
        tensor = np.column_stack((exx, eyy, exy))
        left = (dlam * tr)[:, None] * one[None, :] + 2.0 * dmu[:, None] * tensor
        tangent = (lam[:, None, None] * np.outer(one, one)[None]
                   + mu[:, None, None] * np.diag([2.0, 2.0, 1.0])[None]
                   + left[:, :, None] * dev[:, None, :])
        self._checked(stress, tangent)
        return stress, tangent, dict(history, stress=stress, tangent=tangent)


class MaxwellViscoelastic(ConstitutiveModel):
    """Generalized Maxwell model in Prony form with elastic volumetric response

    G(t) = G (mu0 + sum_m mu_m exp(-t / lambda_m)); internal deviatoric
    stresses follow a midpoint exponential recursion.
    """

    name = "maxwell"

    def __init__(self, E: float, nu: float, mu0: float, mu: Sequence[float],
                 lam: Sequence[float]):
        self.K, self.G = bulk_shear(E, nu)
        self.mu0 = float(mu0)
        self.mu = np.asarray(mu, dtype=float).reshape(-1)
        self.lam = np.asarray(lam, dtype=float).reshape(-1)
        if len(self.mu) != len(self.lam):
            raise MaterialError("Prony weights and relaxation times differ in length")
        if self.mu0 < 0 or np.any(self.mu < 0):
            raise MaterialError("Prony weights must be non-negative")
        if abs(self.mu0 + self.mu.sum() - 1.0) > 1e-10:
            raise MaterialError(f"Prony weights must sum to 1, got {self.mu0 + self.mu.sum()}")
        if np.any(self.lam <= 0):
            raise MaterialError("relaxation times must be positive")

    def relaxation_modulus(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.G * (self.mu0 + np.sum(self.mu * np.exp(-np.multiply.outer(t, 1.0 / self.lam)),
                                           axis=-1))

    def _tangent_mandel(self, dt: float) -> np.ndarray:
        g_eff = self.G * (self.mu0 + np.sum(self.mu * np.exp(-dt / (2.0 * self.lam))))
        return self.K * np.outer(MANDEL_ONE, MANDEL_ONE) + 2.0 * g_eff * I_DEV

    def initial_tangent(self) -> np.ndarray:
        return mandel_tangent_to_voigt(self._tangent_mandel(0.0))

    def initial_history(self, n: int) -> History:
        history = super().initial_history(n)
        history['q'] = np.zeros((n, len(self.mu), 4))
        history['e_prev'] = np.zeros((n, 4))
        return history

    def update(self, strain, history, dt):
        if dt < 0:
            raise MaterialError(f"negative time step {dt}")
        eps = voigt_to_mandel(strain)
        tr = eps[:, :3].sum(axis=1)
        e = eps - tr[:, None] * MANDEL_ONE[None, :] / 3.0
        decay = np.exp(-dt / self.lam)
        half = np.exp(-dt / (2.0 * self.lam))
        de = e - history['e_prev']
        q = (decay[None, :, None] * history['q']
             + (self.mu * half)[None, :, None] * 2.0 * self.G * de[:, None, :])
        s = 2.0 * self.G * self.mu0 * e + q.sum(axis=1)
        stress3 = self.K * tr[:, None] * MANDEL_ONE[None, :] + s
        stress = mandel_stress_to_voigt(stress3)
        tangent = np.broadcast_to(mandel_tangent_to_voigt(self._tangent_mandel(dt)),
                                  (len(eps), 3, 3)).copy()
        self._checked(stress, tangent)
        new = dict(history, q=q, e_prev=e, stress=stress, tangent=tangent)
        return stress, tangent, new


class J2Plasticity(ConstitutiveModel):
    """Von Mises perfect plasticity, backward Euler with radial return"""

    name = "j2"

    def __init__(self, E: float, nu: float, sigma_y: float):
        if not sigma_y > 0:
            raise MaterialError(f"yield stress must be positive, got {sigma_y}")
        self.K, self.G = bulk_shear(E, nu)
        self.sigma_y = float(sigma_y)
        self.radius = np.sqrt(2.0 / 3.0) * self.sigma_y

    def initial_tangent(self) -> np.ndarray:
        C = self.K * np.outer(MANDEL_ONE, MANDEL_ONE) + 2.0 * self.G * I_DEV
        return mandel_tangent_to_voigt(C)

    def initial_history(self, n: int) -> History:
        history = super().initial_history(n)
        history['eps_p'] = np.zeros((n, 4))
        history['alpha'] = np.zeros(n)
        return history

    def update(self, strain, history, dt):
        eps = voigt_to_mandel(strain)
        tr = eps[:, :3].sum(axis=1)
        e = eps - tr[:, None] * MANDEL_ONE[None, :] / 3.0
        s_trial = 2.0 * self.G * (e - history['eps_p'])
        norm = np.linalg.norm(s_trial, axis=1)
        plastic = norm > self.radius

        n = np.zeros_like(s_trial)
        n[plastic] = s_trial[plastic] / norm[plastic, None]
        gamma = np.where(plastic, (norm - self.radius) / (2.0 * self.G), 0.0)
        s = s_trial - 2.0 * self.G * gamma[:, None] * n
        eps_p = history['eps_p'] + gamma[:, None] * n
        alpha = history['alpha'] + np.sqrt(2.0 / 3.0) * gamma

        theta = np.where(plastic, self.radius / np.where(plastic, norm, 1.0), 1.0)
        C = (self.K * np.outer(MANDEL_ONE, MANDEL_ONE)[None]
             + 2.0 * self.G * theta[:, None, None] * (I_DEV[None] - n[:, :, None] * n[:, None, :]))
        stress = mandel_stress_to_voigt(self.K * tr[:, None] * MANDEL_ONE[None, :] + s)
        tangent = mandel_tangent_to_voigt(C)
        self._checked(stress, tangent)
        new = dict(history, eps_p=eps_p, alpha=alpha, stress=stress, tangent=tangent)
        return stress, tangent, new


def create_material(name: str, params: Dict[str, Any]) -> ConstitutiveModel:
    """Build a constitutive model from its name and a parameter dict"""
    try:
        if name == 'linear_elastic':
            return LinearElastic(float(params['E']), float(params['nu']))
        if name == 'hencky_von_mises':
            return HenckyVonMises(float(params.get('scale', 1e4)))
        if name == 'maxwell':
            return MaxwellViscoelastic(float(params['E']), float(params['nu']),
                                       float(params.get('mu0', 1.0)), params.get('mu', []),
                                       params.get('lambda', []))
        if name == 'j2':
            return J2Plasticity(float(params['E']), float(params['nu']),
                                float(params['sigma_y']))
    except KeyError as e:
        raise MaterialError(f"{name}: missing parameter {e.args[0]}")
    raise MaterialError(f"unknown material model '{name}' "
                        f"(choose from {', '.join(MATERIAL_MODELS)})")


class MaterialState:
    """Committed and trial history of the quadrature points of one element"""

    def __init__(self, model: ConstitutiveModel, n_points: int):
        self.model = model
        self.n_points = n_points
        self.committed: History = model.initial_history(n_points)
        self.trial: History = copy.deepcopy(self.committed)

    def evaluate(self, strain: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        """Update the trial state from the committed one at the given strains"""
        stress, tangent, self.trial = self.model.update(strain, self.committed, dt)
        return stress, tangent

    def evaluate_frozen(self, strain: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        """Stress and tangent without touching the trial state"""
        stress, tangent, _ = self.model.update(strain, self.committed, dt)
        return stress, tangent

    def commit(self):
        self.committed = copy.deepcopy(self.trial)

    def rollback(self):
        self.trial = copy.deepcopy(self.committed)

    @property
    def stress(self) -> np.ndarray:
        return self.committed['stress']

    @property
    def tangent(self) -> np.ndarray:
        return self.committed['tangent']
