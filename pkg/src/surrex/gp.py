"""Gaussian-process surrogate: fitting, prediction, confidence intervals.

Responses are standardized internally; the constant trend and the process
variance are profiled out of the marginal likelihood in closed form, so the
optimizer searches only over kernel hyperparameters (log10 length-scales,
categorical parameters). Multi-start bounded L-BFGS-B with analytic
gradients of the concentrated negative log likelihood; the winner is the
(NLL, start index) lexicographic minimum, so fits are deterministic per seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.stats

from . import kernels
from .errors import NumericalError, ValidationError
from .kernels import KernelConfig
from .rng import RNG_ALGORITHM, STREAM_FIT, make_rng
from .space import Dataset, FeatureSpace, Point

MODEL_FORMAT = "surrex-gp"
MODEL_VERSION = 1

LOG10_THETA_MIN = -2.0
LOG10_THETA_MAX = 2.0
ANGLE_MARGIN = 1e-6
VARIANCE_FLOOR = 1e-12  # guards the profiled variance in degenerate designs

_PREDICT_CHUNK = 4096


@dataclass(frozen=True)
class Standardizer:
    """Affine response transform fitted on training data (population std)."""

    mean: float
    std: float

    @staticmethod
    def from_responses(y: np.ndarray) -> "Standardizer":
        std = float(np.std(y))
        return Standardizer(float(np.mean(y)), std if std > 1e-15 else 1.0)

    def apply(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.std

    def invert_mean(self, y_std):
        return self.mean + self.std * np.asarray(y_std, dtype=float)

    def invert_variance(self, var_std):
        return self.std**2 * np.asarray(var_std, dtype=float)


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float


@dataclass
class GpModel:
    """Fitted surrogate; immutable in practice, safe to share across threads.

    ``trend_mu`` and ``alpha`` live on the standardized response scale;
    ``chol`` is the lower Cholesky factor of the covariance built from
    ``config`` (which carries the profiled ``sigma2`` and absolute nugget).
    """

    space: FeatureSpace
    config: KernelConfig
    trend_mu: float
    standardizer: Standardizer
    train: Dataset
    chol: np.ndarray
    alpha: np.ndarray

    @property
    def sigma2(self) -> float:
        return self.config.sigma2

    def predict_encoded(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Means and variances (raw units) for already-encoded query rows."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        means = np.empty(X.shape[0])
        variances = np.empty(X.shape[0])
        Xt = self.train.encoded
        for start in range(0, X.shape[0], _PREDICT_CHUNK):
            block = X[start:start + _PREDICT_CHUNK]
            corr = kernels.cross_correlation(self.space, block, Xt, self.config)
            k = self.config.sigma2 * corr
            mu_std = self.trend_mu + k @ self.alpha
            v = kernels.solve_lower(self.chol, k.T)
            var_std = self.config.sigma2 - np.sum(v * v, axis=0)
            np.maximum(var_std, 0.0, out=var_std)
            means[start:start + _PREDICT_CHUNK] = self.standardizer.invert_mean(mu_std)
            variances[start:start + _PREDICT_CHUNK] = self.standardizer.invert_variance(var_std)
        return means, variances

    def predict_many(self, points: Sequence[Point]) -> tuple[np.ndarray, np.ndarray]:
        return self.predict_encoded(self.space.encode_many(points))

    def predict(self, point: Point) -> Prediction:
        means, variances = self.predict_encoded(self.space.encode(point)[None, :])
        return Prediction(float(means[0]), float(variances[0]))

    def confidence_interval(self, point: Point, alpha: float) -> tuple[float, float]:
        """Gaussian interval mean +/- z_{alpha/2} * sigma at level 1 - alpha."""
        if not 0.0 < alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
        pred = self.predict(point)
        half = scipy.stats.norm.ppf(1.0 - alpha / 2.0) * math.sqrt(pred.variance)
        return pred.mean - half, pred.mean + half

    def level_correlation(self, feature: str) -> kernels.LevelCorrelationMatrix:
        return kernels.extract_level_correlation(self.space, self.config, feature)

    # -- persistence --------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "rng": RNG_ALGORITHM,
            "space": self.space.to_json_obj(),
            "kernel": {
                "continuous_kernel": self.config.continuous_kernel,
                "categorical_kernel": self.config.categorical_kernel,
                "theta_cont": [float(t) for t in self.config.theta_cont],
                "theta_cat": {k: [float(v) for v in arr]
                              for k, arr in sorted(self.config.theta_cat.items())},
                "sigma2": float(self.config.sigma2),
                "nugget": float(self.config.nugget),
            },
            "trend_mu": float(self.trend_mu),
            "standardizer": {"mean": self.standardizer.mean, "std": self.standardizer.std},
            "training_csv": self.train.csv_text(),
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_obj(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path) -> "GpModel":
        with open(path, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"model file {path}: invalid JSON ({exc})") from exc
        found = (obj.get("format"), obj.get("version"))
        if found != (MODEL_FORMAT, MODEL_VERSION):
            raise ValidationError(
                f"model format mismatch: expected {MODEL_FORMAT} v{MODEL_VERSION}, "
                f"found {found[0]} v{found[1]}"
            )
        space = FeatureSpace.from_json_obj(obj["space"])
        data = Dataset.from_csv_text(space, obj["training_csv"], source=str(path))
        kc = obj["kernel"]
        config = KernelConfig(
            theta_cont=np.array(kc["theta_cont"]),
            theta_cat={k: np.array(v) for k, v in kc["theta_cat"].items()},
            categorical_kernel=kc["categorical_kernel"],
            continuous_kernel=kc["continuous_kernel"],
            sigma2=kc["sigma2"],
            nugget=kc["nugget"],
        )
        standardizer = Standardizer(obj["standardizer"]["mean"], obj["standardizer"]["std"])
        return _assemble(data, config, float(obj["trend_mu"]), standardizer)

    @staticmethod
    def from_config(data: Dataset, config: KernelConfig) -> "GpModel":
        """Model with fixed hyperparameters; only the constant trend is profiled."""
        standardizer = Standardizer.from_responses(data.responses)
        y = standardizer.apply(data.responses)
        L, nugget = kernels.chol_covariance(data.space, data.encoded, config)
        if nugget != config.nugget:
            config = _with_nugget(config, nugget)
        ones = np.ones(len(data))
        Kinv_y = kernels.solve_cholesky(L, y)
        Kinv_1 = kernels.solve_cholesky(L, ones)
        mu = float(ones @ Kinv_y) / float(ones @ Kinv_1)
        return _assemble(data, config, mu, standardizer, chol=L)


def _with_nugget(config: KernelConfig, nugget: float) -> KernelConfig:
    return KernelConfig(
        theta_cont=config.theta_cont,
        theta_cat=config.theta_cat,
        categorical_kernel=config.categorical_kernel,
        continuous_kernel=config.continuous_kernel,
        sigma2=config.sigma2,
        nugget=nugget,
    )


def _assemble(data: Dataset, config: KernelConfig, trend_mu: float,
              standardizer: Standardizer, chol: np.ndarray | None = None) -> GpModel:
    if chol is None:
        K = kernels.build_covariance(data.space, data.encoded, config)
        try:
            chol = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            raise NumericalError("stored covariance is not positive definite") from None
    y = standardizer.apply(data.responses)
    alpha = kernels.solve_cholesky(chol, y - trend_mu)
    return GpModel(data.space, config, trend_mu, standardizer, data, chol, alpha)


def rmse(model: GpModel, data: Dataset, standardized: bool = False) -> float:
    means, _ = model.predict_many(data.points)
    err = math.sqrt(float(np.mean((means - data.responses) ** 2)))
    return err / model.standardizer.std if standardized else err


# -- likelihood -------------------------------------------------------------


class _Workspace:
    """Per-dataset precomputation shared by all likelihood evaluations."""

    def __init__(self, data: Dataset, template: KernelConfig):
        self.space = data.space
        self.template = template
        self.n = len(data)
        self.standardizer = Standardizer.from_responses(data.responses)
        self.y = self.standardizer.apply(data.responses)
        X = data.encoded
        cont_idx = list(self.space.continuous_indices)
        cont = X[:, cont_idx]
        diffs = cont[:, None, :] - cont[None, :, :]
        self.sqdist = np.ascontiguousarray(np.moveaxis(diffs**2, 2, 0))  # (m_c, n, n)
        self.cat_codes = []
        self.cat_specs = []
        for k, fi in enumerate(self.space.categorical_indices):
            self.cat_codes.append(X[:, fi].astype(int))
            self.cat_specs.append(self.space.specs[fi])

    def factors(self, theta_cont, cat_params):
        """Continuous factor and one n x n factor per categorical feature."""
        if len(theta_cont):
            cont = np.exp(-np.tensordot(theta_cont, self.sqdist, axes=1))
        else:
            cont = np.ones((self.n, self.n))
        cats = []
        for spec, codes, params in zip(self.cat_specs, self.cat_codes, cat_params):
            mat = kernels.level_correlation_matrix(
                self.template.categorical_kernel, params, spec.n_levels
            )
            cats.append(mat[np.ix_(codes, codes)])
        return cont, cats


def _profile(R: np.ndarray, y: np.ndarray):
    """Cholesky of R plus profiled trend, variance and concentrated NLL."""
    L = np.linalg.cholesky(R)
    n = len(y)
    ones = np.ones(n)
    Rinv_y = kernels.solve_cholesky(L, y)
    Rinv_1 = kernels.solve_cholesky(L, ones)
    mu = float(ones @ Rinv_y) / float(ones @ Rinv_1)
    resid = y - mu
    Rinv_e = Rinv_y - mu * Rinv_1
    sigma2 = max(float(resid @ Rinv_e) / n, VARIANCE_FLOOR)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    nll = 0.5 * (n * math.log(2.0 * math.pi) + n * math.log(sigma2) + logdet + n)
    return L, mu, sigma2, Rinv_e, nll, logdet


def neg_log_likelihood(data: Dataset, config: KernelConfig) -> float:
    """Concentrated negative log marginal likelihood of standardized responses.

    The trend and process variance are profiled analytically; the config's
    nugget is the diagonal jitter of the correlation matrix. The profiled
    variance is floored at VARIANCE_FLOOR so degenerate designs (e.g. a
    single observation) stay finite. Factorization failure propagates.
    """
    config.validate_for(data.space)
    standardizer = Standardizer.from_responses(data.responses)
    y = standardizer.apply(data.responses)
    R = kernels.correlation_matrix(data.space, data.encoded, config)
    R[np.diag_indices_from(R)] += config.nugget
    try:
        _, _, sigma2, _, nll, _ = _profile(R, y)
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"correlation matrix of {len(data)} points failed to factorize "
            f"at nugget {config.nugget:g}"
        ) from None
    return nll


# -- fitting ----------------------------------------------------------------


class _ParamPack:
    """Maps between the optimizer vector and kernel hyperparameters.

    Layout: log10 theta per continuous dimension, then one block per
    categorical feature (log10 theta for gd/cr, raw angles for hh).
    """

    def __init__(self, space: FeatureSpace, template: KernelConfig):
        self.space = space
        self.template = template
        self.n_cont = len(space.continuous_indices)
        self.blocks = []  # (name, start, stop, is_angle)
        pos = self.n_cont
        for fi in space.categorical_indices:
            spec = space.specs[fi]
            count = kernels.cat_param_count(template.categorical_kernel, spec.n_levels)
            is_angle = template.categorical_kernel == kernels.HYPERSPHERE
            self.blocks.append((spec.name, pos, pos + count, is_angle))
            pos += count
        self.size = pos

    def bounds(self) -> list[tuple[float, float]]:
        out = [(LOG10_THETA_MIN, LOG10_THETA_MAX)] * self.n_cont
        for _, start, stop, is_angle in self.blocks:
            if is_angle:
                out.extend([(ANGLE_MARGIN, math.pi - ANGLE_MARGIN)] * (stop - start))
            else:
                out.extend([(LOG10_THETA_MIN, LOG10_THETA_MAX)] * (stop - start))
        return out

    def default_start(self) -> np.ndarray:
        x = np.zeros(self.size)
        for _, start, stop, is_angle in self.blocks:
            if is_angle:
                x[start:stop] = math.pi / 2
        return x

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        x = rng.uniform(LOG10_THETA_MIN, LOG10_THETA_MAX, size=self.size)
        for _, start, stop, is_angle in self.blocks:
            if is_angle:
                x[start:stop] = rng.uniform(0.1, math.pi - 0.1, size=stop - start)
        return x

    def unpack(self, x: np.ndarray):
        theta_cont = 10.0 ** x[: self.n_cont]
        cat_params = []
        for _, start, stop, is_angle in self.blocks:
            block = x[start:stop]
            cat_params.append(block.copy() if is_angle else 10.0**block)
        return theta_cont, cat_params

    def to_config(self, x: np.ndarray, sigma2: float, nugget: float) -> KernelConfig:
        theta_cont, cat_params = self.unpack(x)
        theta_cat = {name: params for (name, _, _, _), params in zip(self.blocks, cat_params)}
        return KernelConfig(
            theta_cont=theta_cont,
            theta_cat=theta_cat,
            categorical_kernel=self.template.categorical_kernel,
            continuous_kernel=self.template.continuous_kernel,
            sigma2=sigma2,
            nugget=nugget,
        )


def _nugget_ladder(base: float):
    nugget = base
    while True:
        yield nugget
        if nugget >= kernels.MAX_NUGGET:
            return
        nugget = min(nugget * 10.0, kernels.MAX_NUGGET)


def _nll_and_grad(x: np.ndarray, ws: _Workspace, pack: _ParamPack, base_nugget: float):
    theta_cont, cat_params = pack.unpack(x)
    cont_factor, cat_factors = ws.factors(theta_cont, cat_params)
    C = cont_factor.copy()
    for f in cat_factors:
        C *= f
    profiled = None
    for nugget in _nugget_ladder(base_nugget):
        R = C.copy()
        R[np.diag_indices_from(R)] += nugget
        try:
            profiled = _profile(R, ws.y)
            break
        except np.linalg.LinAlgError:
            continue
    if profiled is None:
        return np.inf, np.zeros(pack.size), None
    L, mu, sigma2, Rinv_e, nll, _ = profiled

    n = ws.n
    Rinv = kernels.solve_cholesky(L, np.eye(n))
    # d(nll)/d(param) = 0.5 * sum(Wic * dR) with W = Rinv - r r^T / sigma2
    W = Rinv - np.outer(Rinv_e, Rinv_e) / sigma2
    WC = W * C
    grad = np.zeros(pack.size)
    ln10 = math.log(10.0)
    for d in range(pack.n_cont):
        # dR/dtheta_d = -sqdist_d * C; chain through theta = 10^x
        grad[d] = -0.5 * float(np.sum(WC * ws.sqdist[d])) * theta_cont[d] * ln10

    for block_i, (name, start, stop, is_angle) in enumerate(pack.blocks):
        codes = ws.cat_codes[block_i]
        spec = ws.cat_specs[block_i]
        n_levels = spec.n_levels
        params = cat_params[block_i]
        # aggregate W * (C without this factor) by level pair
        other = W * cont_factor
        for g, factor in enumerate(cat_factors):
            if g != block_i:
                other = other * factor
        onehot = np.zeros((n, n_levels))
        onehot[np.arange(n), codes] = 1.0
        G = onehot.T @ other @ onehot  # (L, L) level-pair aggregation
        kind = pack.template.categorical_kernel
        if kind == kernels.GOWER:
            off = math.exp(-params[0])
            dF = np.full((n_levels, n_levels), -off)
            np.fill_diagonal(dF, 0.0)
            grad[start] = 0.5 * float(np.sum(G * dF)) * params[0] * ln10
        elif kind == kernels.CONTINUOUS_RELAXATION:
            F = np.exp(-(params[:, None] + params[None, :]))
            np.fill_diagonal(F, 1.0)
            mask = 1.0 - np.eye(n_levels)
            for k in range(n_levels):
                dF = np.zeros((n_levels, n_levels))
                dF[k, :] = -F[k, :]
                dF[:, k] += -F[:, k]
                dF *= mask
                grad[start + k] = 0.5 * float(np.sum(G * dF)) * params[k] * ln10
        else:  # hypersphere
            lam = kernels.hypersphere_lambda(params, n_levels)
            pos = 0
            for i in range(1, n_levels):
                row_angles = params[pos:pos + i]
                for j in range(i):
                    dlam_i = _hypersphere_row_gradient(lam, row_angles, i, j)
                    w = lam @ dlam_i
                    # dR has row/column i equal to w (and the [i,i] entry 2*w[i] = 0)
                    grad[start + pos + j] = 0.5 * float(
                        G[i, :] @ w + G[:, i] @ w
                    )
                pos += i
    return nll, grad, (mu, sigma2, L, nll)


def _hypersphere_row_gradient(lam: np.ndarray, row_angles: np.ndarray, i: int, j: int) -> np.ndarray:
    """Derivative of Lambda's row i with respect to its j-th angle."""
    d = np.zeros(lam.shape[0])
    sin_prod = 1.0
    for k in range(j):
        sin_prod *= math.sin(row_angles[k])
    d[j] = -math.sin(row_angles[j]) * sin_prod
    ratio = math.cos(row_angles[j]) / math.sin(row_angles[j])
    for jp in range(j + 1, i):
        d[jp] = lam[i, jp] * ratio
    d[i] = lam[i, i] * ratio
    return d


def fit(data: Dataset, template: KernelConfig | None = None, *, n_starts: int = 10,
        max_iter: int = 200, seed: int = 0) -> GpModel:
    """Fit hyperparameters by multi-start maximum marginal likelihood.

    ``template`` fixes the kernel choices and the base nugget (interpreted as
    the relative jitter on the correlation scale during fitting); pass
    ``KernelConfig.default(space, "gd"|"cr"|"hh")`` to select the categorical
    kernel. Deterministic per (data, template, budget, seed).
    """
    if len(data) < 2:
        raise ValidationError("fit requires at least 2 observations")
    if template is None:
        template = KernelConfig.default(data.space)
    template.validate_for(data.space)
    ws = _Workspace(data, template)
    pack = _ParamPack(data.space, template)
    rng = make_rng(seed, STREAM_FIT)
    starts = [pack.default_start()]
    starts += [pack.random_start(rng) for _ in range(max(0, n_starts - 1))]
    bounds = pack.bounds()

    def objective(x):
        nll, grad, _ = _nll_and_grad(x, ws, pack, template.nugget)
        return nll, grad

    best = None  # (nll, start_index, x)
    for idx, x0 in enumerate(starts):
        res = scipy.optimize.minimize(
            objective, x0, method="L-BFGS-B", jac=True, bounds=bounds,
            options={"maxiter": max_iter},
        )
        result_x = res.x
        nll, _, extras = _nll_and_grad(result_x, ws, pack, template.nugget)
        if extras is None:
            continue
        if best is None or nll < best[0]:
            best = (nll, idx, result_x)
    if best is None:
        raise NumericalError(
            f"all {len(starts)} starts failed to factorize the covariance of the "
            f"{len(data)}-point design (nugget cap {kernels.MAX_NUGGET:g})"
        )

    _, _, x_best = best
    theta_cont, cat_params = pack.unpack(x_best)
    cont_factor, cat_factors = ws.factors(theta_cont, cat_params)
    C = cont_factor
    for f in cat_factors:
        C = C * f
    last_error = None
    for nugget_rel in _nugget_ladder(template.nugget):
        R = C.copy()
        R[np.diag_indices_from(R)] += nugget_rel
        try:
            L, mu, sigma2, _, _, _ = _profile(R, ws.y)
        except np.linalg.LinAlgError as exc:
            last_error = exc
            continue
        config = pack.to_config(x_best, sigma2=sigma2, nugget=nugget_rel * sigma2)
        # K = sigma2 * R, so the factor of K is sqrt(sigma2) * chol(R)
        chol = math.sqrt(sigma2) * L
        return _assemble(data, config, mu, ws.standardizer, chol=chol)
    raise NumericalError("optimum covariance failed to factorize") from last_error
