"""GENConv / DeeperGCN vertex regression over yearly mobility graphs.

Architecture: linear vertex and edge encoders, a stack of pre-activation
residual blocks (LayerNorm -> ReLU -> dropout -> GENConv -> add), and a linear
head producing the 15 scene dimensions for the following year.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ModelError
from .graph import MobilityGraph, Scenario, apply_scenario
from .ingest import N_DIMENSIONS
from .scenes import SceneTable


@dataclass
class TrainConfig:
    epochs: int = 10000
    lr: float = 1e-3
    dropout: float = 0.1
    hidden: int = 64
    seed: int = 0
    n_blocks: int = 5
    msg_eps: float = 1e-7

    def __post_init__(self):
        if self.epochs < 0:
            raise ModelError("epochs must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelError("dropout must be in [0, 1)")


@dataclass
class FeatureNormalizer:
    """Z-scores census columns with training-year statistics; log1p on edge features."""

    n_scene: int = N_DIMENSIONS
    census_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    census_std: np.ndarray = field(default_factory=lambda: np.ones(0))

    @classmethod
    def fit(cls, graphs: Sequence[MobilityGraph]) -> "FeatureNormalizer":
        census = np.vstack([g.vertex_features[:, N_DIMENSIONS:] for g in graphs])
        if census.shape[1] == 0:
            return cls()
        std = census.std(axis=0)
        return cls(N_DIMENSIONS, census.mean(axis=0), np.where(std > 0, std, 1.0))

    def vertex(self, vf: np.ndarray) -> np.ndarray:
        x = vf.copy()
        if x.shape[1] > self.n_scene:
            x[:, self.n_scene:] = (x[:, self.n_scene:] - self.census_mean) / self.census_std
        return x

    @staticmethod
    def edge(ef: np.ndarray) -> np.ndarray:
        return np.log1p(ef)


@dataclass
class GraphInputs:
    x: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    edge_attr: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        return ad.csr_by_destination(self.dst, self.n)


def prepare_inputs(graph: MobilityGraph, normalizer: FeatureNormalizer) -> GraphInputs:
    """Normalized features; each undirected edge becomes two directed messages sharing features."""
    e = graph.edges
    src = np.concatenate([e[:, 0], e[:, 1]]).astype(np.int64)
    dst = np.concatenate([e[:, 1], e[:, 0]]).astype(np.int64)
    ef = normalizer.edge(graph.edge_features)
    return GraphInputs(normalizer.vertex(graph.vertex_features), src, dst, np.vstack([ef, ef]))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class GnnModel:
    def __init__(self, in_v: int, in_e: int, hidden: int = 64, n_blocks: int = 5, out_dim: int = N_DIMENSIONS,
                 dropout: float = 0.1, msg_eps: float = 1e-7, seed: int = 0):
        self.in_v, self.in_e, self.hidden, self.n_blocks = in_v, in_e, hidden, n_blocks
        self.out_dim, self.dropout, self.msg_eps = out_dim, dropout, msg_eps
        self.normalizer = FeatureNormalizer()
        rng = np.random.default_rng(seed)
        h = hidden
        p: dict[str, Tensor] = {}
        p["vertex_encoder.W"] = ad.parameter(_glorot(rng, in_v, h))
        p["vertex_encoder.b"] = ad.parameter(np.zeros((1, h)))
        p["edge_encoder.W"] = ad.parameter(_glorot(rng, in_e, h))
        p["edge_encoder.b"] = ad.parameter(np.zeros((1, h)))
        for i in range(n_blocks):
            p[f"block{i}.norm.gamma"] = ad.parameter(np.ones((1, h)))
            p[f"block{i}.norm.beta"] = ad.parameter(np.zeros((1, h)))
            p[f"block{i}.conv.t"] = ad.parameter(np.ones((1, 1)))
            p[f"block{i}.conv.mlp.W1"] = ad.parameter(_glorot(rng, h, 2 * h))
            p[f"block{i}.conv.mlp.b1"] = ad.parameter(np.zeros((1, 2 * h)))
            p[f"block{i}.conv.mlp.W2"] = ad.parameter(_glorot(rng, 2 * h, h))
            p[f"block{i}.conv.mlp.b2"] = ad.parameter(np.zeros((1, h)))
        p["head.W"] = ad.parameter(_glorot(rng, h, out_dim))
        p["head.b"] = ad.parameter(np.zeros((1, out_dim)))
        for name, t in p.items():
            t.name = name
        self.params = p
        self._blocks = [self.block_params(i) for i in range(n_blocks)]

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def block_params(self, i: int) -> dict[str, Tensor]:
        prefix = f"block{i}."
        return {k[len(prefix):]: v for k, v in self.params.items() if k.startswith(prefix)}

    def forward(self, inputs: GraphInputs, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        if inputs.x.shape[1] != self.in_v:
            raise ModelError(f"vertex features have width {inputs.x.shape[1]}, model expects {self.in_v}")
        if inputs.edge_attr.shape[1] != self.in_e:
            raise ModelError(f"edge features have width {inputs.edge_attr.shape[1]}, model expects {self.in_e}")
        p = self.params
        h = ad.linear(Tensor(inputs.x), p["vertex_encoder.W"], p["vertex_encoder.b"])
        e = ad.linear(Tensor(inputs.edge_attr), p["edge_encoder.W"], p["edge_encoder.b"])
        for i in range(self.n_blocks):
            bp = self._blocks[i]
            y = ad.relu(ad.layernorm(h, bp["norm.gamma"], bp["norm.beta"]))
            y = ad.dropout(y, self.dropout, rng, train)
            y = genconv_forward(y, e, inputs.src, inputs.dst, bp, self.msg_eps, inputs.csr)
            h = ad.add(h, y)
        return ad.linear(h, p["head.W"], p["head.b"])

    # checkpoints -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "in_v": self.in_v, "in_e": self.in_e, "hidden": self.hidden, "n_blocks": self.n_blocks,
            "out_dim": self.out_dim, "dropout": self.dropout, "msg_eps": self.msg_eps,
            "normalizer": {"census_mean": self.normalizer.census_mean.tolist(),
                           "census_std": self.normalizer.census_std.tolist()},
            "params": [{"name": k, "shape": list(t.shape), "values": t.data.ravel().tolist()}
                       for k, t in self.params.items()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GnnModel":
        m = cls(d["in_v"], d["in_e"], d["hidden"], d["n_blocks"], d["out_dim"], d["dropout"], d["msg_eps"])
        m.normalizer = FeatureNormalizer(N_DIMENSIONS, np.asarray(d["normalizer"]["census_mean"], dtype=float),
                                         np.asarray(d["normalizer"]["census_std"], dtype=float))
        for rec in d["params"]:
            m.params[rec["name"]].data = np.asarray(rec["values"], dtype=float).reshape(rec["shape"])
        return m

    def copy(self) -> "GnnModel":
        return GnnModel.from_dict(self.to_dict())


def genconv_forward(h: Tensor, edge_enc: Tensor, src: np.ndarray, dst: np.ndarray,
                    params: Mapping[str, Tensor], msg_eps: float = 1e-7,
                    csr: tuple[np.ndarray, np.ndarray] | None = None) -> Tensor:
    """GENConv: softmax-aggregated ReLU(h_u + h_e) + eps messages, then MLP(h_v + agg_v)."""
    agg = ad.message_aggregate(h, edge_enc, src, dst, params["conv.t"], msg_eps, csr)
    z = ad.add(h, agg)
    z = ad.relu(ad.linear(z, params["conv.mlp.W1"], params["conv.mlp.b1"]))
    return ad.linear(z, params["conv.mlp.W2"], params["conv.mlp.b2"])


@dataclass
class TrainResult:
    model: GnnModel
    trace: list[tuple[int, int, float]]  # (epoch, input year, mse)

    def write_trace(self, path: str | Path, extra: dict[str, str] | None = None) -> None:
        extra = extra or {}
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "pair", "mse", *extra])
            for epoch, year, loss in self.trace:
                w.writerow([epoch, f"{year}->{year + 1}", repr(loss), *extra.values()])


def training_pairs(years: Sequence[int]) -> list[tuple[int, int]]:
    ys = sorted(set(years))
    return [(a, b) for a, b in zip(ys, ys[1:]) if b == a + 1]


def model_for(graph: MobilityGraph, config: TrainConfig) -> GnnModel:
    return GnnModel(graph.vertex_features.shape[1], graph.edge_features.shape[1], config.hidden,
                    config.n_blocks, N_DIMENSIONS, config.dropout, config.msg_eps, config.seed)


def supervised_step(model: GnnModel, opt: ad.Adam, inputs: GraphInputs, target: np.ndarray,
                    rng: np.random.Generator) -> float:
    opt.zero_grad()
    with ad.Tape() as tape:
        loss = ad.mse(model.forward(inputs, train=True, rng=rng), target)
    ad.backward(tape, loss, opt.params)
    opt.step()
    return float(loss.data[0, 0])


Protocol = Callable[[GnnModel, ad.Adam, list[tuple[int, GraphInputs, np.ndarray]], np.random.Generator, int], list[float]]


def direct_supervision(model, opt, pairs, rng, epoch) -> list[float]:
    """One epoch: an Adam step on each (graph y -> scenes y+1) pair in chronological order."""
    return [supervised_step(model, opt, inputs, target, rng) for _, inputs, target in pairs]


def train(
    graphs: Mapping[int, MobilityGraph],
    scene_table: SceneTable,
    scenario: Scenario,
    config: TrainConfig,
    train_years: Sequence[int] | None = None,
    protocol: Protocol = direct_supervision,
) -> TrainResult:
    """Fit a model on consecutive-year pairs drawn from ``train_years``.

    ``protocol`` runs one epoch and returns per-pair losses; the default does
    direct supervision, alternatives can plug in validation-driven schemes.
    """
    years = sorted(train_years if train_years is not None else graphs)
    if len(years) < 2:
        raise ModelError("training needs at least two years")
    pairs = training_pairs(years)
    if not pairs:
        raise ModelError(f"no consecutive year pairs in {years}")
    masked = {}
    for y, _ in pairs:
        if y not in graphs:
            raise ModelError(f"missing graph for {y}")
        masked[y] = apply_scenario(graphs[y], scenario)
    for _, t in pairs:
        if t not in scene_table.vectors:
            raise ModelError(f"missing target scenes for {t}")

    first = masked[pairs[0][0]]
    model = model_for(first, config)
    model.normalizer = FeatureNormalizer.fit([masked[y] for y in sorted(set(years) & masked.keys())])
    data = [(y, prepare_inputs(masked[y], model.normalizer), scene_table.matrix(t, masked[y].vertices))
            for y, t in pairs]
    opt = ad.Adam(model.parameters(), lr=config.lr)
    rng = np.random.default_rng([config.seed, 1])
    trace = []
    for epoch in range(config.epochs):
        losses = protocol(model, opt, data, rng, epoch)
        trace.extend((epoch, y, loss) for (y, _, _), loss in zip(data, losses))
    return TrainResult(model, trace)


def predict(model: GnnModel, graph: MobilityGraph, scenario: Scenario | None = None) -> np.ndarray:
    """Evaluation-mode forward pass; rows follow ``graph.vertices``.

    Feed the graph of the year before the one being forecast.
    """
    g = apply_scenario(graph, scenario) if scenario is not None else graph
    return model.forward(prepare_inputs(g, model.normalizer), train=False).data.copy()


def save_checkpoint(model: GnnModel, path: str | Path, config: TrainConfig | None = None, **meta) -> None:
    d = model.to_dict()
    if config is not None:
        d["config"] = asdict(config)
    d.update(meta)
    Path(path).write_text(json.dumps(d) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> GnnModel:
    return GnnModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
