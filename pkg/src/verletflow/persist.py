"""Configuration and checkpoint persistence.

Config files are JSON.  Checkpoints are a line-oriented text format:
``verletflow-v1`` on the first line, ``key=value`` header lines, a blank
line, then one parameter per line printed with 17 significant digits so
64-bit floats round-trip bit-exactly.  Parameter order is the flow's
canonical order: q-side nets k ascending, then p-side, each net
layer-major with weights (row-major) before biases.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .densities import Gmm, UnnormalizedDensity, default_trimodal, standard_normal
from .flow import VerletFlow
from .training import TrainConfig

CHECKPOINT_MAGIC = "verletflow-v1"


class ConfigError(ValueError):
    pass


@dataclass
class EvalConfig:
    steps: int = 100
    method: str = "taylor-verlet"
    samples: int = 100_000
    seed: int = 0
    hutchinson_probes: int = 1


@dataclass
class Config:
    d_q: int = 2
    d_p: int = 2
    order: int = 1
    hidden_sizes: tuple = (64, 64, 64)
    k1_form: str = "diagonal"
    target: dict = field(default_factory=lambda: {"type": "trimodal"})
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self):
        return {
            "dims": {"d_q": self.d_q, "d_p": self.d_p},
            "order": self.order,
            "hidden_sizes": list(self.hidden_sizes),
            "k1_form": self.k1_form,
            "target": self.target,
            "train": {
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "learning_rate": self.train.learning_rate,
                "steps": self.train.steps,
                "seed": self.train.seed,
            },
            "eval": {
                "steps": self.eval.steps,
                "method": self.eval.method,
                "samples": self.eval.samples,
                "seed": self.eval.seed,
                "hutchinson_probes": self.eval.hutchinson_probes,
            },
        }

    def serialize(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data):
        try:
            cfg = cls()
            dims = data.get("dims", {})
            cfg.d_q = int(dims.get("d_q", cfg.d_q))
            cfg.d_p = int(dims.get("d_p", cfg.d_p))
            cfg.order = int(data.get("order", cfg.order))
            cfg.hidden_sizes = tuple(data.get("hidden_sizes", cfg.hidden_sizes))
            cfg.k1_form = data.get("k1_form", cfg.k1_form)
            cfg.target = data.get("target", cfg.target)
            tr = data.get("train", {})
            cfg.train = TrainConfig(
                epochs=int(tr.get("epochs", 200)),
                batch_size=int(tr.get("batch_size", 256)),
                learning_rate=float(tr.get("learning_rate", 1e-3)),
                steps=int(tr.get("steps", 20)),
                seed=int(tr.get("seed", 0)),
                hidden_sizes=tuple(data.get("hidden_sizes", (64, 64, 64))),
            )
            ev = data.get("eval", {})
            cfg.eval = EvalConfig(
                steps=int(ev.get("steps", 100)),
                method=ev.get("method", "taylor-verlet"),
                samples=int(ev.get("samples", 100_000)),
                seed=int(ev.get("seed", 0)),
                hutchinson_probes=int(ev.get("hutchinson_probes", 1)),
            )
            if cfg.k1_form not in ("diagonal", "dense"):
                raise ConfigError(f"bad k1_form {cfg.k1_form!r}")
            if cfg.d_q < 1 or cfg.d_p < 1 or cfg.order < 0:
                raise ConfigError("dims must be >= 1 and order >= 0")
            cfg.build_target()  # validate the target spec early
            return cfg
        except (TypeError, KeyError, ValueError) as err:
            raise ConfigError(str(err)) from err

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        return cls.from_dict(data)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.serialize())

    def build_target(self):
        """The unnormalized target density described by the target spec."""
        spec = self.target
        kind = spec.get("type", "trimodal")
        logz = float(spec.get("logZ_true", np.log(2.0)))
        if kind == "trimodal":
            base = default_trimodal(variance=float(spec.get("variance", 0.3)))
        elif kind == "normal":
            base = standard_normal(self.d_q)
        elif kind == "gmm":
            base = Gmm(
                weights=np.asarray(spec["weights"], dtype=np.float64),
                means=np.asarray(spec["means"], dtype=np.float64),
                variances=np.asarray(spec["variances"], dtype=np.float64),
            )
        else:
            raise ConfigError(f"unknown target type {kind!r}")
        if base.dim != self.d_q:
            raise ConfigError(f"target dim {base.dim} != d_q {self.d_q}")
        return UnnormalizedDensity(base, logZ_true=logz)

    def build_flow(self, seed=None):
        return VerletFlow.create(
            self.d_q, self.d_p, self.order, hidden=self.hidden_sizes,
            seed=self.train.seed if seed is None else seed,
            k1_form=self.k1_form,
        )


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, flow: VerletFlow):
    lines = [
        CHECKPOINT_MAGIC,
        f"order={flow.order}",
        f"d_q={flow.d_q}",
        f"d_p={flow.d_p}",
        "hidden=" + ",".join(str(h) for h in flow.hidden_sizes),
        f"k1_form={flow.k1_form}",
        "",
    ]
    lines.extend(format(v, ".17g") for v in flow.get_params())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_MAGIC} checkpoint")
    header = {}
    i = 1
    while i < len(lines) and lines[i]:
        key, _, value = lines[i].partition("=")
        header[key] = value
        i += 1
    try:
        flow = VerletFlow.create(
            int(header["d_q"]),
            int(header["d_p"]),
            int(header["order"]),
            hidden=[int(h) for h in header["hidden"].split(",")],
            seed=0,
            k1_form=header.get("k1_form", "diagonal"),
        )
        params = np.array([float(v) for v in lines[i + 1 :] if v], dtype=np.float64)
        flow.set_params(params)
    except (KeyError, ValueError) as err:
        raise CheckpointError(f"{path}: bad checkpoint ({err})") from err
    return flow
