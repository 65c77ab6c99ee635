"""Scikit-learn style wrappers around the checks and the planner."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_jet_array, check_times
from .certify import run_check
from .jets import Guard, ParameterFunction
from .planner import PolyPath, eval_flat_jet, fit_flat_path, recover_inputs, synthesize_trajectory
from .report import SATISFIED
from .specfile import CheckOptions, SpecFile
from .system import ImplicitSystem


class FlatnessCertifier(BaseEstimator):
    """Run every flatness and controllability check on a system and candidate phi.

    ``fit`` accepts either a loaded :class:`~flatcert.specfile.SpecFile` or an
    :class:`ImplicitSystem` together with a :class:`ParameterFunction`.

    Attributes
    ----------
    report_ : CheckReport
    verdict_ : str
    satisfied_ : bool
    """

    def __init__(
        self,
        samples=100,
        seed=0,
        scale=1.0,
        tol=1e-8,
        tol_rank=1e-8,
        tol_inclusion=1e-8,
        tol_identity=1e-10,
        eq_points=10,
        probe_targets=50,
        probe_restarts=5,
    ):
        self.samples = samples
        self.seed = seed
        self.scale = scale
        self.tol = tol
        self.tol_rank = tol_rank
        self.tol_inclusion = tol_inclusion
        self.tol_identity = tol_identity
        self.eq_points = eq_points
        self.probe_targets = probe_targets
        self.probe_restarts = probe_restarts

    def _options(self) -> CheckOptions:
        return CheckOptions(**{k: v for k, v in self.get_params().items()})

    def fit(self, system, phi: ParameterFunction | None = None, guard: str | Guard | None = None):
        if isinstance(system, SpecFile):
            spec = system
        else:
            if not isinstance(system, ImplicitSystem) or phi is None:
                raise TypeError("fit(spec) or fit(system, phi[, guard])")
            if isinstance(guard, str):
                guard = Guard(guard, phi.m, phi.r)
            spec = SpecFile(system, phi, guard=guard)
        self.report_ = run_check(spec, self._options())
        self.verdict_ = self.report_.verdict
        self.satisfied_ = self.verdict_ == SATISFIED
        return self

    def score(self, system=None, phi=None):
        """Fraction of mandatory blocks that passed in the fitted report."""
        check_is_fitted(self, "report_")
        mandatory = [b for b in self.report_.blocks if b.mandatory]
        return sum(b.passed for b in mandatory) / len(mandatory)


class FlatPathPlanner(TransformerMixin, BaseEstimator):
    """Polynomial flat-output path between two boundary jets.

    ``fit(start_jet, end_jet)`` solves the interpolation problem;
    ``transform(t)`` returns the jets at times ``t`` as an array of shape
    ``(len(t), r + 2, m)``.
    """

    def __init__(self, horizon=1.0, degree=None, grid=1000):
        self.horizon = horizon
        self.degree = degree
        self.grid = grid

    def fit(self, start_jet, end_jet=None):
        if end_jet is None:
            raise TypeError("fit needs both start_jet and end_jet")
        start = check_jet_array(start_jet, "start_jet")
        end = check_jet_array(end_jet, "end_jet", *start.shape)
        self.path_ = fit_flat_path(start, end, self.horizon, self.degree)
        self.coef_ = self.path_.coef
        self.r_ = self.path_.r
        self.n_channels_ = self.path_.m
        return self

    def transform(self, t):
        check_is_fitted(self, "path_")
        times = check_times(t, self.path_.T)
        return np.stack([eval_flat_jet(self.path_, ti).levels for ti in times])

    def synthesize(self, system: ImplicitSystem, phi: ParameterFunction, guard: Guard | None = None):
        """Trajectory with states, state derivatives, residuals and recovered inputs."""
        check_is_fitted(self, "path_")
        traj = synthesize_trajectory(system, phi, self.path_, self.grid, guard)
        return recover_inputs(system, traj)

    @property
    def path(self) -> PolyPath:
        check_is_fitted(self, "path_")
        return self.path_
