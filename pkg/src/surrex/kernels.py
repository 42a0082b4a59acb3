"""Correlation functions over mixed inputs and covariance assembly.

Continuous features use a squared-exponential kernel on the [0,1]-scaled
coordinates. Categorical features use one of three level-correlation
models:

* ``gd`` -- Gower mismatch under an exponential kernel: exp(-theta) for
  differing levels, one parameter per feature.
* ``cr`` -- continuous relaxation: squared-exponential over the one-hot
  expansion with one parameter per level, giving exp(-(theta_i + theta_j))
  for differing levels i, j.
* ``hh`` -- homoscedastic hypersphere: the full correlation matrix
  R = Lambda Lambda^T with Lambda the lower-triangular hypersphere
  parameterization of L(L-1)/2 angles in (0, pi).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError
from .space import FeatureSpace

GOWER = "gd"
CONTINUOUS_RELAXATION = "cr"
HYPERSPHERE = "hh"
CATEGORICAL_KERNELS = (GOWER, CONTINUOUS_RELAXATION, HYPERSPHERE)

CONTINUOUS_KERNEL = "squared_exponential"

DEFAULT_NUGGET = 1e-10
MAX_NUGGET = 1e-6


def hh_angle_count(n_levels: int) -> int:
    return n_levels * (n_levels - 1) // 2


def cat_param_count(kind: str, n_levels: int) -> int:
    if kind == GOWER:
        return 1
    if kind == CONTINUOUS_RELAXATION:
        return n_levels
    if kind == HYPERSPHERE:
        return hh_angle_count(n_levels)
    raise ValidationError(f"unknown categorical kernel {kind!r}")


@dataclass
class KernelConfig:
    """Kernel choice plus hyperparameters for one feature space.

    ``theta_cont`` holds one positive scale per continuous dimension (in
    declaration order); ``theta_cat`` maps each categorical feature name to
    its parameter block. ``nugget`` is the absolute diagonal jitter added by
    :func:`build_covariance`; ``sigma2`` the process variance.
    """

    theta_cont: np.ndarray
    theta_cat: dict[str, np.ndarray] = field(default_factory=dict)
    categorical_kernel: str = HYPERSPHERE
    continuous_kernel: str = CONTINUOUS_KERNEL
    sigma2: float = 1.0
    nugget: float = DEFAULT_NUGGET

    def __post_init__(self):
        self.theta_cont = np.asarray(self.theta_cont, dtype=float)
        self.theta_cat = {k: np.asarray(v, dtype=float) for k, v in self.theta_cat.items()}
        problems = []
        if np.any(self.theta_cont <= 0):
            problems.append("theta_cont entries must be positive")
        if self.categorical_kernel not in CATEGORICAL_KERNELS:
            problems.append(f"unknown categorical kernel {self.categorical_kernel!r}")
        elif self.categorical_kernel == HYPERSPHERE:
            for name, angles in self.theta_cat.items():
                if np.any(angles <= 0) or np.any(angles >= np.pi):
                    problems.append(f"{name}: hypersphere angles must lie in (0, pi)")
        else:
            for name, theta in self.theta_cat.items():
                if np.any(theta <= 0):
                    problems.append(f"{name}: categorical theta must be positive")
        if not self.nugget > 0:
            problems.append("nugget must be positive")
        if not self.sigma2 > 0:
            problems.append("sigma2 must be positive")
        if problems:
            raise ValidationError("invalid kernel config", problems)

    @staticmethod
    def default(space: FeatureSpace, categorical_kernel: str = HYPERSPHERE,
                nugget: float = DEFAULT_NUGGET) -> "KernelConfig":
        """Neutral starting configuration: unit scales, uncorrelated levels."""
        theta_cat = {}
        for i in space.categorical_indices:
            spec = space.specs[i]
            count = cat_param_count(categorical_kernel, spec.n_levels)
            if categorical_kernel == HYPERSPHERE:
                theta_cat[spec.name] = np.full(count, np.pi / 2)
            else:
                theta_cat[spec.name] = np.ones(count)
        return KernelConfig(
            theta_cont=np.ones(len(space.continuous_indices)),
            theta_cat=theta_cat,
            categorical_kernel=categorical_kernel,
            nugget=nugget,
        )

    def validate_for(self, space: FeatureSpace) -> None:
        problems = []
        if len(self.theta_cont) != len(space.continuous_indices):
            problems.append(
                f"theta_cont has {len(self.theta_cont)} entries, "
                f"space has {len(space.continuous_indices)} continuous features"
            )
        for i in space.categorical_indices:
            spec = space.specs[i]
            block = self.theta_cat.get(spec.name)
            want = cat_param_count(self.categorical_kernel, spec.n_levels)
            if block is None:
                problems.append(f"missing categorical parameters for {spec.name!r}")
            elif len(block) != want:
                problems.append(
                    f"{spec.name}: expected {want} parameters for "
                    f"{self.categorical_kernel}, found {len(block)}"
                )
        if problems:
            raise ValidationError("kernel config does not match feature space", problems)


@dataclass(frozen=True)
class LevelCorrelationMatrix:
    """Learned L x L correlation among one categorical feature's levels."""

    feature: str
    levels: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.shape != (len(self.levels), len(self.levels)):
            raise ValidationError("level correlation matrix shape mismatch")
        object.__setattr__(self, "matrix", mat)


def corr_continuous(u, v, theta) -> float:
    """exp(-sum theta_d (u_d - v_d)^2); equals 1 at zero distance."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if u.shape != v.shape:
        raise ValidationError("corr_continuous: u and v must have equal length")
    if np.any(theta <= 0):
        raise ValidationError("corr_continuous: theta must be positive")
    return float(np.exp(-np.sum(theta * (u - v) ** 2)))


def hypersphere_lambda(angles, n_levels: int) -> np.ndarray:
    """Lower-triangular Lambda with unit-norm rows built from L(L-1)/2 angles.

    Row i uses angles[i(i-1)/2 : i(i+1)/2]; Lambda[i, j] is
    cos(a_j) * prod_{k<j} sin(a_k), with the diagonal taking the full sine
    product, so R = Lambda Lambda^T has unit diagonal for any angle setting.
    """
    angles = np.asarray(angles, dtype=float)
    if len(angles) != hh_angle_count(n_levels):
        raise ValidationError(
            f"hypersphere needs {hh_angle_count(n_levels)} angles for {n_levels} levels, "
            f"got {len(angles)}"
        )
    lam = np.zeros((n_levels, n_levels))
    lam[0, 0] = 1.0
    pos = 0
    for i in range(1, n_levels):
        row = angles[pos:pos + i]
        pos += i
        sin_prod = 1.0
        for j in range(i):
            lam[i, j] = np.cos(row[j]) * sin_prod
            sin_prod *= np.sin(row[j])
        lam[i, i] = sin_prod
    return lam


def level_correlation_matrix(kind: str, params, n_levels: int) -> np.ndarray:
    """Full L x L correlation matrix for one categorical feature."""
    params = np.asarray(params, dtype=float)
    if kind == GOWER:
        if len(params) != 1:
            raise ValidationError("gd kernel takes exactly one parameter per feature")
        off = np.exp(-params[0])
        mat = np.full((n_levels, n_levels), off)
    elif kind == CONTINUOUS_RELAXATION:
        if len(params) != n_levels:
            raise ValidationError(f"cr kernel takes one parameter per level ({n_levels})")
        # one-hot SE: levels i != j differ in exactly coordinates i and j
        mat = np.exp(-(params[:, None] + params[None, :]))
    elif kind == HYPERSPHERE:
        lam = hypersphere_lambda(params, n_levels)
        mat = lam @ lam.T
    else:
        raise ValidationError(f"unknown categorical kernel {kind!r}")
    np.fill_diagonal(mat, 1.0)
    return mat


def corr_categorical(level_i: int, level_j: int, kind: str, params) -> float:
    """Correlation between two level indices under the chosen kernel."""
    params = np.asarray(params, dtype=float)
    if level_i == level_j:
        return 1.0
    if kind == GOWER:
        return float(np.exp(-params[0]))
    if kind == CONTINUOUS_RELAXATION:
        return float(np.exp(-(params[level_i] + params[level_j])))
    if kind == HYPERSPHERE:
        n_levels = int(round((1 + np.sqrt(1 + 8 * len(params))) / 2))
        mat = level_correlation_matrix(kind, params, n_levels)
        if not (0 <= level_i < n_levels and 0 <= level_j < n_levels):
            raise ValidationError("level index out of range for hypersphere parameters")
        return float(mat[level_i, level_j])
    raise ValidationError(f"unknown categorical kernel {kind!r}")


def extract_level_correlation(space: FeatureSpace, config: KernelConfig,
                              feature: str) -> LevelCorrelationMatrix:
    """Level-correlation matrix of one categorical feature at the config's parameters."""
    spec = space.spec(feature)
    if not spec.is_categorical:
        raise ValidationError(f"feature {feature!r} is not categorical")
    params = config.theta_cat.get(feature)
    if params is None:
        raise ValidationError(f"config has no categorical parameters for {feature!r}")
    mat = level_correlation_matrix(config.categorical_kernel, params, spec.n_levels)
    return LevelCorrelationMatrix(feature, spec.levels, mat)


def _split_encoded(space: FeatureSpace, X: np.ndarray):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cont = X[:, list(space.continuous_indices)]
    cat = X[:, list(space.categorical_indices)].astype(int)
    return cont, cat


def correlation_matrix(space: FeatureSpace, X: np.ndarray, config: KernelConfig) -> np.ndarray:
    """n x n product correlation over encoded points (no variance, no nugget)."""
    config.validate_for(space)
    cont, cat = _split_encoded(space, X)
    n = cont.shape[0]
    acc = np.zeros((n, n))
    for d in range(cont.shape[1]):
        diff = cont[:, d:d + 1] - cont[None, :, d]
        acc += config.theta_cont[d] * diff**2
    corr = np.exp(-acc)
    for k, fi in enumerate(space.categorical_indices):
        spec = space.specs[fi]
        mat = level_correlation_matrix(
            config.categorical_kernel, config.theta_cat[spec.name], spec.n_levels
        )
        corr *= mat[np.ix_(cat[:, k], cat[:, k])]
    return corr


def cross_correlation(space: FeatureSpace, Xq: np.ndarray, Xt: np.ndarray,
                      config: KernelConfig) -> np.ndarray:
    """q x n correlation between query and training points (no variance, no nugget)."""
    cont_q, cat_q = _split_encoded(space, Xq)
    cont_t, cat_t = _split_encoded(space, Xt)
    acc = np.zeros((cont_q.shape[0], cont_t.shape[0]))
    for d in range(cont_q.shape[1]):
        diff = cont_q[:, d:d + 1] - cont_t[None, :, d]
        acc += config.theta_cont[d] * diff**2
    corr = np.exp(-acc)
    for k, fi in enumerate(space.categorical_indices):
        spec = space.specs[fi]
        mat = level_correlation_matrix(
            config.categorical_kernel, config.theta_cat[spec.name], spec.n_levels
        )
        corr *= mat[np.ix_(cat_q[:, k], cat_t[:, k])]
    return corr


def build_covariance(space: FeatureSpace, X: np.ndarray, config: KernelConfig) -> np.ndarray:
    """K = sigma2 * correlation + nugget * I over encoded points."""
    K = config.sigma2 * correlation_matrix(space, X, config)
    K[np.diag_indices_from(K)] += config.nugget
    return K


def chol_covariance(space: FeatureSpace, X: np.ndarray,
                    config: KernelConfig) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of the covariance, escalating the nugget on failure.

    The nugget is multiplied by 10 until factorization succeeds, capped at
    MAX_NUGGET (absolute, on the standardized scale); a hard error follows
    if the cap is reached without success.
    """
    base = config.sigma2 * correlation_matrix(space, X, config)
    nugget = config.nugget
    while True:
        K = base.copy()
        K[np.diag_indices_from(K)] += nugget
        try:
            return np.linalg.cholesky(K), nugget
        except np.linalg.LinAlgError:
            if nugget >= MAX_NUGGET:
                raise NumericalError(
                    f"covariance of {X.shape[0]} points is not positive definite "
                    f"even with nugget {nugget:g}"
                ) from None
            nugget = min(nugget * 10.0, MAX_NUGGET)


def solve_lower(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return scipy.linalg.solve_triangular(L, b, lower=True)


def solve_cholesky(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve K x = b given the lower Cholesky factor of K."""
    return scipy.linalg.cho_solve((L, True), b)
