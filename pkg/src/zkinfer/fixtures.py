"""Small models used by the tests, the demo files and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .bench import make_depth_model
from .model import ModelGraph, ModelNode, TensorSpec


def single_gemm_model(k: int = 4, n: int = 3, seed: int = 1) -> ModelGraph:
    rng = np.random.default_rng(seed)
    inits = {"w": rng.uniform(-1, 1, (k, n)), "b": rng.uniform(-0.5, 0.5, n)}
    nodes = [ModelNode("Gemm", ("x", "w", "b"), "y")]
    return ModelGraph(nodes, inits, TensorSpec("x", (1, k)), "y")


def single_conv_model(side: int = 4, cout: int = 2, seed: int = 2) -> ModelGraph:
    rng = np.random.default_rng(seed)
    inits = {"w": rng.uniform(-0.5, 0.5, (cout, 1, 3, 3)), "b": rng.uniform(-0.5, 0.5, cout)}
    nodes = [ModelNode("Conv2D", ("x", "w", "b"), "y", {"stride": 1, "padding": 1})]
    return ModelGraph(nodes, inits, TensorSpec("x", (1, 1, side, side)), "y")


def single_relu_model(n: int = 1) -> ModelGraph:
    return ModelGraph([ModelNode("ReLU", ("x",), "y")], {}, TensorSpec("x", (1, n)), "y")


def gemm_relu_model(k: int = 6, n: int = 4, seed: int = 3) -> ModelGraph:
    """Gemm -> ReLU -> Gemm: the first pair is a fusion candidate."""
    rng = np.random.default_rng(seed)
    inits = {
        "w0": rng.uniform(-1, 1, (k, n)), "b0": rng.uniform(-0.5, 0.5, n),
        "w1": rng.uniform(-1, 1, (n, 2)), "b1": rng.uniform(-0.5, 0.5, 2),
    }
    nodes = [
        ModelNode("Gemm", ("x", "w0", "b0"), "h"),
        ModelNode("ReLU", ("h",), "hr"),
        ModelNode("Gemm", ("hr", "w1", "b1"), "y"),
    ]
    return ModelGraph(nodes, inits, TensorSpec("x", (1, k)), "y")


def lenet_model(h: int = 16, channels: int = 4, seed: int = 0) -> ModelGraph:
    """conv/relu/maxpool twice, reshape, gemm: eight nodes."""
    return make_depth_model(2, h, channels=channels, seed=seed, head_relu=False)


def depth3_model(seed: int = 0) -> ModelGraph:
    return make_depth_model(3, 16, seed=seed)


FIXTURES = {
    "gemm": single_gemm_model,
    "conv": single_conv_model,
    "relu": single_relu_model,
    "gemm_relu": gemm_relu_model,
    "lenet": lenet_model,
    "depth3": depth3_model,
}


def random_input(graph: ModelGraph, seed: int = 0, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(low, high, graph.graph_input.shape)
