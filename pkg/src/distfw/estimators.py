"""Scikit-learn compatible front end for the distributed FW solvers."""

from __future__ import annotations

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import sampling, solvers
from .constraint import L1Ball
from .graph import build_topology, metropolis_weights
from .problem import FiniteSumProblem, LocalDataset, Sample, partition


def _rows_to_samples(x, y) -> list[Sample]:
    xc = sparse.csr_matrix(x)
    xc.sum_duplicates()
    xc.sort_indices()
    out = []
    for i in range(xc.shape[0]):
        s, e = xc.indptr[i], xc.indptr[i + 1]
        out.append(Sample(indices=xc.indices[s:e].astype(np.int64),
                          values=xc.data[s:e].astype(float), label=float(y[i])))
    return out


class FrankWolfeClassifier(BaseEstimator, ClassifierMixin):
    """Binary linear classifier trained inside an l1 ball by a simulated
    multi-agent Frank-Wolfe run.

    The training set is shuffled and split across ``n_agents`` simulated
    agents connected by ``topology``; the chosen solver then minimizes the
    convex logistic loss (or the non-convex sigmoid loss) subject to
    ``||coef_||_1 <= radius``.  ``coef_`` is the network-average iterate
    after ``n_iterations`` rounds; ``run_log_`` keeps the per-iteration
    metrics of the run.

    Parameters mirror the CLI configuration keys.
    """

    def __init__(self, solver: str = "dstofw", objective: str = "convex",
                 n_agents: int = 4, topology: str = "ring", radius: float = 20.0,
                 n_iterations: int = 200, alpha: float = 0.5, q: int | None = None,
                 equalize: bool = True, partition_seed: int = 0,
                 sampling_seed: int = 0, log_every: int = 0):
        self.solver = solver
        self.objective = objective
        self.n_agents = n_agents
        self.topology = topology
        self.radius = radius
        self.n_iterations = n_iterations
        self.alpha = alpha
        self.q = q
        self.equalize = equalize
        self.partition_seed = partition_seed
        self.sampling_seed = sampling_seed
        self.log_every = log_every

    def fit(self, X, y):
        X, y = check_X_y(X, y, accept_sparse="csr")
        classes = np.unique(y)
        if classes.shape[0] != 2:
            raise ValueError(f"expected a binary target, found classes {classes}")
        self.classes_ = classes
        signed = np.where(y == classes[1], 1.0, -1.0)
        samples = _rows_to_samples(X, signed)
        dim = X.shape[1]

        if self.solver == "cenfw":
            locals_ = (LocalDataset(samples, dim),)
        else:
            locals_ = tuple(partition(samples, self.n_agents, seed=self.partition_seed,
                                      equalize=self.equalize, dim=dim))
        problem = FiniteSumProblem(locals=locals_, objective=self.objective, dim=dim)
        constraint = L1Ball(self.radius, dim)
        n_local = min(loc.n for loc in problem.locals)
        q_eff = self.q if self.q is not None else sampling.epoch_length(n_local, self.objective)
        sched = solvers.make_step_schedule(self.solver, self.objective, alpha=self.alpha,
                                           q=q_eff, total_iters=self.n_iterations)
        schedule = sampling.SamplingSchedule(q_eff, sched.gamma, n_local)
        # log_every=0 logs only the first and final iterates
        cadence = self.log_every if self.log_every >= 1 else max(1, self.n_iterations)

        if self.solver == "dstofw":
            log = solvers.run_dstofw(problem, constraint,
                                     metropolis_weights(build_topology(self.topology, self.n_agents)),
                                     sched, schedule, self.n_iterations,
                                     sampling_seed=self.sampling_seed, log_every=cadence)
        elif self.solver == "denfw":
            log = solvers.run_denfw(problem, constraint,
                                    metropolis_weights(build_topology(self.topology, self.n_agents)),
                                    sched, self.n_iterations, log_every=cadence)
        elif self.solver == "cenfw":
            log = solvers.run_cenfw(problem, constraint, sched, schedule,
                                    self.n_iterations, sampling_seed=self.sampling_seed,
                                    log_every=cadence)
        else:
            raise ValueError(f"solver must be dstofw, denfw or cenfw, got {self.solver!r}")

        self.coef_ = log.final_x
        self.run_log_ = log
        self.n_features_in_ = dim
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, accept_sparse="csr")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return np.asarray(X @ self.coef_).ravel()

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[(scores >= 0.0).astype(int)]
