"""Checkpoint serialization: a versioned JSON document with decimal floats.

Floats are written with 17 significant digits, which is enough for the
parsed value to equal the original bit for bit, so save -> load -> save
reproduces the file exactly. Weight shapes are validated against the
stored config on load.
"""

from __future__ import annotations

import json

import numpy as np

from .data import ColumnSpec, ScalingStats, Schema
from .model import (
    CHECKPOINT_FORMAT_VERSION,
    Checkpoint,
    LossBreakdown,
    TrainConfig,
    decoder_width,
)
from .nn import DenseLayer, Mlp
from .serialize import json_text


def _mlp_doc(net: Mlp) -> dict:
    return {
        "activations": list(net.activations),
        "layers": [
            {"weight": layer.weight.tolist(), "bias": layer.bias.tolist()}
            for layer in net.layers
        ],
    }


def checkpoint_to_text(cp: Checkpoint) -> str:
    doc = {
        "format_version": int(cp.format_version),
        "schema": {
            "columns": [
                {
                    "name": c.name,
                    "kind": c.kind,
                    "levels": None if c.levels is None else list(c.levels),
                }
                for c in cp.schema.columns
            ]
        },
        "scaling": {
            "columns": list(cp.scaling.names),
            "mean": cp.scaling.mean.tolist(),
            "stddev": cp.scaling.stddev.tolist(),
        },
        "config": {
            "seed": int(cp.config.seed),
            "epochs": int(cp.config.epochs),
            "batch_size": int(cp.config.batch_size),
            "learning_rate": float(cp.config.learning_rate),
            "beta": float(cp.config.beta),
            "latent_dim": int(cp.config.latent_dim),
            "knot_count": int(cp.config.knot_count),
            "hidden_width": int(cp.config.hidden_width),
        },
        "encoder": _mlp_doc(cp.encoder),
        "decoder": _mlp_doc(cp.decoder),
        "quantiles": {
            "low": cp.quantile_lo.tolist(),
            "high": cp.quantile_hi.tolist(),
        },
        "loss_trace": [
            {"crps": t.crps, "discrete": t.discrete, "kl": t.kl, "total": t.total}
            for t in cp.loss_trace
        ],
    }
    return json_text(doc)


def _require(doc, key, path):
    if not isinstance(doc, dict) or key not in doc:
        raise ValueError(f"corrupt checkpoint: missing {path}.{key}")
    return doc[key]


def _mlp_from_doc(doc, path) -> Mlp:
    activations = [str(a) for a in _require(doc, "activations", path)]
    layers = []
    for entry in _require(doc, "layers", path):
        weight = np.array(entry["weight"], dtype=np.float64)
        bias = np.array(entry["bias"], dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ValueError(f"corrupt checkpoint: bad layer shapes under {path}")
        layers.append(DenseLayer(weight=weight, bias=bias))
    return Mlp(layers=layers, activations=activations)


def checkpoint_from_text(text: str) -> Checkpoint:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"corrupt checkpoint: not valid JSON ({err})") from None
    version = _require(doc, "format_version", "checkpoint")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(
            f"unsupported checkpoint format version {version!r} "
            f"(this build reads version {CHECKPOINT_FORMAT_VERSION})"
        )
    schema_doc = _require(doc, "schema", "checkpoint")
    columns = []
    for entry in _require(schema_doc, "columns", "schema"):
        levels = entry.get("levels")
        columns.append(
            ColumnSpec(
                name=str(entry["name"]),
                kind=str(entry["kind"]),
                levels=None if levels is None else tuple(str(v) for v in levels),
            )
        )
    schema = Schema(columns=tuple(columns))

    scaling_doc = _require(doc, "scaling", "checkpoint")
    scaling = ScalingStats(
        names=tuple(str(v) for v in scaling_doc["columns"]),
        mean=np.array(scaling_doc["mean"], dtype=np.float64),
        stddev=np.array(scaling_doc["stddev"], dtype=np.float64),
    )

    cfg = _require(doc, "config", "checkpoint")
    config = TrainConfig(
        seed=int(cfg["seed"]),
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]),
        learning_rate=float(cfg["learning_rate"]),
        beta=float(cfg["beta"]),
        latent_dim=int(cfg["latent_dim"]),
        knot_count=int(cfg["knot_count"]),
        hidden_width=int(cfg["hidden_width"]),
    )

    encoder = _mlp_from_doc(_require(doc, "encoder", "checkpoint"), "encoder")
    decoder = _mlp_from_doc(_require(doc, "decoder", "checkpoint"), "decoder")
    _check_shapes(schema, config, encoder, decoder)

    quantiles = _require(doc, "quantiles", "checkpoint")
    trace = [
        LossBreakdown(
            crps=float(t["crps"]), discrete=float(t["discrete"]),
            kl=float(t["kl"]), total=float(t["total"]),
        )
        for t in doc.get("loss_trace", [])
    ]
    return Checkpoint(
        format_version=int(version),
        schema=schema,
        scaling=scaling,
        config=config,
        encoder=encoder,
        decoder=decoder,
        quantile_lo=np.array(quantiles["low"], dtype=np.float64),
        quantile_hi=np.array(quantiles["high"], dtype=np.float64),
        loss_trace=trace,
    )


def _check_shapes(schema: Schema, config: TrainConfig, encoder: Mlp, decoder: Mlp) -> None:
    if encoder.n_in != schema.encoded_width or encoder.n_out != 2 * config.latent_dim:
        raise ValueError("corrupt checkpoint: encoder shape does not match schema/config")
    if decoder.n_in != config.latent_dim or decoder.n_out != decoder_width(schema, config.knot_count):
        raise ValueError("corrupt checkpoint: decoder shape does not match schema/config")


def save_checkpoint(cp: Checkpoint, path) -> None:
    text = checkpoint_to_text(cp)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "r", encoding="utf-8") as fh:
        return checkpoint_from_text(fh.read())
