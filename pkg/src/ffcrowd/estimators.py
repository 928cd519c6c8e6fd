"""scikit-learn style front ends for the personality mapping and the jump-distance model."""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from . import personality as P
from .engine import AgentState, SimState
from .pathplan import Path
from .scenario import WEIBULL_SCALE, WEIBULL_SHAPE

OCEAN_FEATURES = ("o", "c", "e", "a", "n")
BEHAVIOR_FEATURES = ("psi", "omega", "beta", "zeta", "Psi")
JUMP_FEATURES = ("speed", "neighbors", "remaining")


class OceanBehaviorTransformer(TransformerMixin, BaseEstimator):
    """Map rows of OCEAN traits (o, c, e, a, n) in [0, 1] to behaviors.

    Output columns: walking speed psi, leadership omega, impatience beta, and
    the group features a group made of that single profile would get,
    cohesion zeta and desired speed Psi.
    """

    def __init__(self, leadership_weight: float = P.LEADERSHIP_WEIGHT,
                 extraversion_weight: float = P.EXTRAVERSION_WEIGHT, ac_weight: float = P.AC_WEIGHT):
        self.leadership_weight = leadership_weight
        self.extraversion_weight = extraversion_weight
        self.ac_weight = ac_weight

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        self._check_traits(X)
        return self

    def _check_traits(self, X):
        if X.shape[1] != 5:
            raise ValueError(f"expected 5 OCEAN columns, got {X.shape[1]}")
        if np.any((X < 0.0) | (X > 1.0)):
            raise ValueError("OCEAN traits must lie in [0, 1]")

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        self._check_traits(X)
        o, c, e, a, n = X.T
        psi = e + 1.0
        omega = self.leadership_weight * e + (1.0 - self.leadership_weight) * (1.0 - n)
        f_e = np.where(e >= 0.5, 2.0 * e - 1.0, 0.0)
        beta = self.extraversion_weight * f_e + self.ac_weight * (1.0 - a) + self.ac_weight * (1.0 - c)
        zeta = (1.0 - beta) * P.MAX_COHESION
        speed = P.MAX_DESIRED_SPEED * (psi - 1.0)
        return np.column_stack([psi, omega, beta, zeta, speed])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(BEHAVIOR_FEATURES, dtype=object)


class FastForwardRegressor(RegressorMixin, BaseEstimator):
    """Predict the distance an agent travels along its path over a frame jump.

    Rows are ``(speed, neighbors, remaining)``: current speed in m/s, count
    of other agents within the interaction radius, and remaining path length.
    The prediction is the dead-reckoned distance ``speed * horizon * dt``
    scaled by the Weibull survival ``exp(-(neighbors / scale) ** shape)``
    and capped at the remaining length. With ``calibrate=True``, ``fit``
    estimates shape and scale by least squares against observed distances;
    otherwise it keeps the constructor values.
    """

    def __init__(self, horizon_frames: int = 400, frame_dt: float = 0.02, weibull_shape: float = WEIBULL_SHAPE,
                 weibull_scale: float = WEIBULL_SCALE, calibrate: bool = False):
        self.horizon_frames = horizon_frames
        self.frame_dt = frame_dt
        self.weibull_shape = weibull_shape
        self.weibull_scale = weibull_scale
        self.calibrate = calibrate

    def _check_params(self):
        if self.horizon_frames < 0:
            raise ValueError("horizon_frames must be >= 0")
        if self.frame_dt <= 0 or self.weibull_shape <= 0 or self.weibull_scale <= 0:
            raise ValueError("frame_dt, weibull_shape and weibull_scale must be positive")

    @staticmethod
    def _check_rows(X):
        if X.shape[1] != 3:
            raise ValueError(f"expected 3 columns {JUMP_FEATURES}, got {X.shape[1]}")
        if np.any(X < 0):
            raise ValueError("speed, neighbor count and remaining length must be non-negative")

    def _model(self, X, shape, scale):
        reach = X[:, 0] * self.horizon_frames * self.frame_dt
        ip = np.exp(-((X[:, 1] / scale) ** shape))
        return np.minimum(ip * reach, X[:, 2])

    def fit(self, X, y):
        self._check_params()
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        self._check_rows(X)
        shape, scale = float(self.weibull_shape), float(self.weibull_scale)
        if self.calibrate and np.any(X[:, 1] > 0):
            # fit in log space to keep both parameters positive
            res = least_squares(lambda p: self._model(X, math.exp(p[0]), math.exp(p[1])) - y,
                                x0=[math.log(shape), math.log(scale)], bounds=([-3, -5], [3, 10]))
            shape, scale = math.exp(res.x[0]), math.exp(res.x[1])
        self.shape_, self.scale_ = shape, scale
        return self

    def predict(self, X):
        check_is_fitted(self, ("shape_", "scale_"))
        X = validate_data(self, X, dtype=np.float64, reset=False)
        self._check_rows(X)
        return self._model(X, self.shape_, self.scale_)

    def ip(self, neighbors) -> np.ndarray:
        check_is_fitted(self, ("shape_", "scale_"))
        return np.exp(-((np.asarray(neighbors, dtype=float) / self.scale_) ** self.shape_))


def jump_features(state: SimState, radius: float | None = None) -> tuple[np.ndarray, list[int]]:
    """Feature rows for every active agent of ``state``, and their ids."""
    radius = state.scenario.ffa.ip_radius if radius is None else radius
    present = [a for a in state.agents if a.state is not AgentState.ARRIVED]
    pos = np.array([a.position for a in present]) if present else np.zeros((0, 2))
    rows, ids = [], []
    for a in state.active_agents():
        d = np.hypot(*(pos - a.position).T) if len(pos) else np.zeros(0)
        count = int(np.sum(d <= radius)) - 1
        length = a.path.rebase(a.position).length if a.path is not None else 0.0
        rows.append((a.speed or a.max_speed, count, length))
        ids.append(a.id)
    return np.asarray(rows, dtype=float).reshape(-1, 3), ids


def travelled_along(paths: dict[int, Path], positions: dict[int, np.ndarray]) -> np.ndarray:
    """Arc length of each later position projected onto the agent's path, in key order."""
    return np.array([paths[i].project(positions[i])[0] for i in paths])
