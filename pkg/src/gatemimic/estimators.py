"""Thin scikit-learn adapters around the library's processing stages.

The native API is plain functions over netlists; these wrappers only
add the estimator protocol (constructor params mirrored as attributes,
fit returning self, fitted results under trailing-underscore names) so
the stages compose with sklearn pipelines and parameter search.  No
numeric behavior lives here.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from gatemimic.matching import CostConfig, deploy_covert, match_graphs
from gatemimic.nand_array import TrainConfig, synthesize
from gatemimic.partition import PartitionConfig, extract_pieces, partition_pipeline


class NetlistPartitioner(BaseEstimator):
    """Estimator facade over the three-phase netlist partitioner."""

    def __init__(self, k=2, cut_weight=1.0, io_weight=0.5, min_block=1,
                 max_block=None, seed=0, max_greedy_moves=200, kl_passes=10):
        self.k = k
        self.cut_weight = cut_weight
        self.io_weight = io_weight
        self.min_block = min_block
        self.max_block = max_block
        self.seed = seed
        self.max_greedy_moves = max_greedy_moves
        self.kl_passes = kl_passes

    def _config(self) -> PartitionConfig:
        return PartitionConfig(**self.get_params())

    def fit(self, X, y=None):
        """X is a Netlist; stores the partition and id->block labels."""
        self.partition_ = partition_pipeline(X, self._config())
        self.labels_ = {
            nd.id: int(b) for nd, b in zip(X.nodes, self.partition_.assignment)
        }
        return self

    def transform(self, X):
        """Split X into standalone pieces using the fitted assignment."""
        pieces, self.boundary_ = extract_pieces(X, self.partition_)
        return pieces

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)


class GraphMatchCamouflager(BaseEstimator):
    """Estimator facade over layer matching plus covert-cell deployment."""

    def __init__(self, hide_cost=0.0, mismatch_cost=10.0, connection_weight=3.0,
                 dummy_cost=100.0):
        self.hide_cost = hide_cost
        self.mismatch_cost = mismatch_cost
        self.connection_weight = connection_weight
        self.dummy_cost = dummy_cost

    def fit(self, X, y=None):
        """X is an (appearance, functional) netlist pair."""
        appearance, functional = X
        self.mapping_ = match_graphs(appearance, functional, CostConfig(**self.get_params()))
        self.camo_ = deploy_covert(appearance, functional, self.mapping_)
        return self

    def transform(self, X):
        return self.camo_

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)


class NandArrayCamouflager(BaseEstimator):
    """Estimator facade over differentiable NAND-array synthesis."""

    def __init__(self, epochs=600, learning_rate=0.01, lambda_reg=0.15,
                 lambda_cryptic=10.0, hardness_gamma=2.0, tau_start=1.0,
                 tau_end=0.1, batch_size=None, mode="soft", seed=0,
                 warm_start=True, restarts=6, shape=None):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.lambda_reg = lambda_reg
        self.lambda_cryptic = lambda_cryptic
        self.hardness_gamma = hardness_gamma
        self.tau_start = tau_start
        self.tau_end = tau_end
        self.batch_size = batch_size
        self.mode = mode
        self.seed = seed
        self.warm_start = warm_start
        self.restarts = restarts
        self.shape = shape

    def fit(self, X, y=None):
        """X is an (appearance, functional) netlist pair."""
        appearance, functional = X
        params = self.get_params()
        shape = params.pop("shape")
        out = synthesize(appearance, functional, shape=shape, cfg=TrainConfig(**params))
        self.camo_ = out.camo
        self.report_ = out.report
        self.result_ = out.result
        self.net_ = out.net
        return self

    def transform(self, X):
        return self.camo_

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)

    def score(self, X, y=None) -> float:
        """Worst-regime hard accuracy of the fitted array, in [0, 1]."""
        return min(self.result_.acc_p0, self.result_.acc_p1)
