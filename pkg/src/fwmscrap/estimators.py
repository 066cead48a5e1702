"""Thin scikit-learn style wrappers around the functional core.

There is no data fitting here: ``fit`` validates the hyper-parameters and
precomputes the derived quantities, ``predict`` / ``transform`` evaluate the
model on a column of coordinates.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import branch_state
from .experiments import figure_atomic
from .propagation import PropagationCoefficients, solve
from .scrap import HALF_SCRAP, adiabatic_trajectory, adiabaticity_margin
from .smallsignal import dkprime_total, kappa_coherent, small_signal_profile


def _column(X, name):
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single {name} column, got {X.shape[1]}")
        X = X[:, 0]
    return X


class AdiabaticPreparation(TransformerMixin, BaseEstimator):
    """Maps retarded times to (pop1, pop2, rho12) of the adiabatic state."""

    def __init__(self, pulses=HALF_SCRAP):
        self.pulses = pulses

    def fit(self, X=None, y=None):
        self.margin_ = adiabaticity_margin(self.pulses)
        return self

    def transform(self, X):
        check_is_fitted(self, "margin_")
        tau = _column(X, "tau")
        order = np.argsort(tau)
        traj = adiabatic_trajectory(self.pulses, tau[order])
        out = np.empty((tau.size, 3))
        out[order] = np.column_stack([traj.pop1, traj.pop2, traj.rho12])
        return out


class UndepletedCoherenceModel(BaseEstimator):
    """Generated flux for fixed populations; rows of X are (z, c1sq, eta20)."""

    def __init__(self, params=None, delta3=None, dk=None):
        self.params = params
        self.delta3 = delta3
        self.dk = dk

    def fit(self, X=None, y=None):
        self.params_ = figure_atomic() if self.params is None else self.params
        self.kappa0_ = self.params_.kappa0
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=float)
        if X.shape[1] != 3:
            raise ValueError("X must have columns (z, c1sq, eta20)")
        out = np.empty(X.shape[0])
        for i, (z, c1sq, eta20) in enumerate(X):
            rho = np.sqrt(c1sq * (1.0 - c1sq))
            kappa = kappa_coherent(self.params_, rho, self.delta3)
            dkp = dkprime_total(self.params_, c1sq, 1.0 - c1sq, self.delta3, self.dk)
            out[i] = small_signal_profile(abs(kappa), dkp, eta20, z)[1]
        return out


class DepletedPumpPropagator(BaseEstimator):
    """x(z) = J / eta10 for one slice from its reduced coefficients."""

    def __init__(self, b1=0.0, b2=0.0, ratio=0.01, alpha=0.0, rate=1.0,
                 convention="as-printed", root_method="exact"):
        self.b1 = b1
        self.b2 = b2
        self.ratio = ratio
        self.alpha = alpha
        self.rate = rate
        self.convention = convention
        self.root_method = root_method

    def fit(self, X=None, y=None):
        self.coefficients_ = PropagationCoefficients(
            self.b1, self.b2, self.ratio, self.alpha, self.rate, self.convention, self.root_method)
        self.regime_ = self.coefficients_.regime
        self.kappa_prime_ = self.coefficients_.kappa_prime
        return self

    def predict(self, X):
        check_is_fitted(self, "coefficients_")
        return solve(self.coefficients_, _column(X, "z"))


def dressed_populations(delta2, om1, branch="upper"):
    """Vectorised helper: (c1^2, c2^2) for arrays of detuning and coupling."""
    up = branch == "upper"
    pairs = [branch_state(d, o, up) for d, o in zip(np.ravel(delta2), np.ravel(om1))]
    return np.array([[s.c1 ** 2, s.c2 ** 2] for s in pairs])
