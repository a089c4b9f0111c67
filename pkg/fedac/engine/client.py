"""Client-side LocalUpdate."""

import logging
from typing import Optional

import numpy as np

from fedac.engine.state import ClientState
from fedac.models.config import RunConfig
from fedac.nn.mlp import Batch, MlpSpec, ParamVector, loss_and_grad, regularized_step

logger = logging.getLogger(__name__)


def local_update(
    client: ClientState,
    center: ParamVector,
    global_embedding: np.ndarray,
    config: RunConfig,
    spec: MlpSpec,
    rng: np.random.Generator,
    mu: Optional[float] = None,
    lam: Optional[float] = None,
) -> ClientState:
    """Run local_epochs regularized SGD steps, one random batch per epoch.

    The anchors (center, global_embedding) stay fixed for the whole call.
    mu/lam default to the mode's effective strengths.
    """
    if client.train is None or len(client.train) == 0:
        logger.warning("Client %d has no training data, skipping local update", client.client_id)
        return client

    mu = config.effective_mu if mu is None else mu
    lam = config.effective_lambda if lam is None else lam
    train = client.train
    n = len(train)
    batch_size = min(config.batch_size, n)

    params = client.params
    for _ in range(config.local_epochs):
        positions = rng.choice(n, size=batch_size, replace=False)
        batch = Batch(train.features[positions], train.labels[positions])
        _, grad = loss_and_grad(spec, params, batch)
        params = regularized_step(params, grad, center, global_embedding, config.eta, mu, lam)

    return client.with_params(params)
