from dataclasses import dataclass
from typing import Optional

import json
import logging
import zipfile
import numpy as np

import Gradient_Reversal_Adaptation.Models.Types as Types
import Gradient_Reversal_Adaptation.Models.Layers as Layers
import Gradient_Reversal_Adaptation.Models.Network as Network
import Gradient_Reversal_Adaptation.Models.Optimizers as Optimizers
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions

logger = logging.getLogger(__name__)

FORMAT_VERSION: int = 1
FIXED_TIMESTAMP: tuple = (1980, 1, 1, 0, 0, 0)
"""Timestamp of every archive entry, so that equal checkpoints are equal byte by byte."""


@dataclass
class Checkpoint:
    """
    Everything needed to continue with the next stage: network, optimizer moments, state of the data order generator
    and the number of finished epochs.
    """

    net: Network.NetworkParams
    optimizer: Optional[Optimizers.AdamState] = None
    rng_state: Optional[dict] = None
    epoch: int = 0
    stage: str = "train"


def _layer_meta(layers: list[Layers.DenseLayer]) -> list[dict]:
    return [
        {
            "input_dim": layer.spec.input_dim,
            "output_dim": layer.spec.output_dim,
            "activation": layer.spec.activation.value,
        }
        for layer in layers
    ]


def save_checkpoint(path: str, checkpoint: Checkpoint) -> None:
    """
    Writes the checkpoint as numpy archive (.npz): one array per parameter and moment, plus a JSON entry "meta".

    Parameters
    ----------
    path: str
        Target file.
    checkpoint: Checkpoint
        State to store.
    """
    net = checkpoint.net
    arrays: dict[str, np.ndarray] = {}
    for index, layer in enumerate(net.main_layers):
        arrays[f"main.{index}.weights"] = layer.weights
        arrays[f"main.{index}.bias"] = layer.bias
    for index, layer in enumerate(net.domain_layers or []):
        arrays[f"domain.{index}.weights"] = layer.weights
        arrays[f"domain.{index}.bias"] = layer.bias
    optimizer_meta = None
    if checkpoint.optimizer is not None:
        optimizer_meta, moments = checkpoint.optimizer.state_dict()
        arrays.update({f"adam.{key}": value for key, value in moments.items()})
    meta = {
        "format_version": FORMAT_VERSION,
        "stage": checkpoint.stage,
        "epoch": checkpoint.epoch,
        "feature_layer_index": net.feature_layer_index,
        "slope": net.slope,
        "main_layers": _layer_meta(net.main_layers),
        "domain_layers": None
        if net.domain_layers is None
        else _layer_meta(net.domain_layers),
        "optimizer": optimizer_meta,
        "rng_state": checkpoint.rng_state,
    }
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as archive:
        for name in sorted(arrays):
            info = zipfile.ZipInfo(f"{name}.npy", date_time=FIXED_TIMESTAMP)
            with archive.open(info, "w", force_zip64=True) as entry:
                np.lib.format.write_array(
                    entry, np.ascontiguousarray(arrays[name]), allow_pickle=False
                )
    logger.info("Saved %s checkpoint (epoch %d) to %s", checkpoint.stage, checkpoint.epoch, path)


def _load_layers(meta: list[dict], prefix: str, archive) -> list[Layers.DenseLayer]:
    layers = []
    for index, entry in enumerate(meta):
        spec = Types.LayerSpec(
            entry["input_dim"], entry["output_dim"], Types.Activation(entry["activation"])
        )
        try:
            weights = np.array(archive[f"{prefix}.{index}.weights"], dtype=np.float64)
            bias = np.array(archive[f"{prefix}.{index}.bias"], dtype=np.float64)
        except KeyError as error:
            raise Exceptions.FormatError(f"Checkpoint misses {error}") from error
        try:
            layers.append(Layers.DenseLayer(spec, weights, bias))
        except Exceptions.DimensionError as error:
            raise Exceptions.IntegrityError(f"{prefix} layer {index}: {error}") from error
    return layers


def load_checkpoint(path: str) -> Checkpoint:
    """
    Reads a checkpoint written by save_checkpoint.

    Raises
    ------
    Gradient_Reversal_Adaptation.Models.Exceptions.FormatError
        If the file is no checkpoint or has an unknown version.
    Gradient_Reversal_Adaptation.Models.Exceptions.IntegrityError
        If a parameter does not match its layer specification.
    """
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError, zipfile.BadZipFile) as error:
        raise Exceptions.FormatError(f"{path} is no checkpoint archive: {error}") from error
    with archive:
        if "meta" not in archive.files:
            raise Exceptions.FormatError(f"{path} has no meta entry")
        meta = json.loads(str(archive["meta"]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise Exceptions.FormatError(
                f"Unsupported checkpoint version {meta.get('format_version')}"
            )
        main_layers = _load_layers(meta["main_layers"], "main", archive)
        domain_layers = (
            None
            if meta["domain_layers"] is None
            else _load_layers(meta["domain_layers"], "domain", archive)
        )
        optimizer = None
        if meta["optimizer"] is not None:
            moments = {
                name[len("adam.") :]: archive[name]
                for name in archive.files
                if name.startswith("adam.")
            }
            optimizer = Optimizers.AdamState.from_state_dict(meta["optimizer"], moments)
    net = Network.NetworkParams(
        main_layers,
        domain_layers,
        feature_layer_index=meta["feature_layer_index"],
        slope=meta["slope"],
    )
    return Checkpoint(
        net=net,
        optimizer=optimizer,
        rng_state=meta["rng_state"],
        epoch=int(meta["epoch"]),
        stage=meta["stage"],
    )
