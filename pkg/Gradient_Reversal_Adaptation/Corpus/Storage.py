from typing import Final, Optional

import json
import logging
import os
import shutil
import struct
import numpy as np

import Gradient_Reversal_Adaptation.Models.Types as Types
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions
import Gradient_Reversal_Adaptation.Corpus.Dataset as Dataset

logger = logging.getLogger(__name__)

FORMAT_VERSION: Final[int] = 1
FEATURE_MAGIC: Final[bytes] = b"GRAF"
LABEL_MAGIC: Final[bytes] = b"GRAL"
FEATURE_HEADER: Final[struct.Struct] = struct.Struct("<4sBII")
"""Magic, version, dimensions, frames; followed by frames x dims little endian doubles."""
LABEL_HEADER: Final[struct.Struct] = struct.Struct("<4sBI")
"""Magic, version, count; followed by count little endian 32 bit integers."""
DATASET_FILE: Final[str] = "dataset.json"
MANIFEST_FILE: Final[str] = "manifest.jsonl"


def write_feature_file(path: str, features: np.ndarray) -> None:
    with open(path, "wb") as file:
        file.write(FEATURE_HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION, features.shape[1], features.shape[0]))
        file.write(np.ascontiguousarray(features, dtype="<f8").tobytes())


def write_label_file(path: str, labels: np.ndarray) -> None:
    with open(path, "wb") as file:
        file.write(LABEL_HEADER.pack(LABEL_MAGIC, FORMAT_VERSION, labels.size))
        file.write(np.ascontiguousarray(labels, dtype="<i4").tobytes())


def _read_header(content: bytes, header: struct.Struct, magic: bytes, path: str) -> tuple:
    if len(content) < header.size:
        raise Exceptions.FormatError(f"{path}: truncated header", offset=len(content))
    values = header.unpack_from(content)
    if values[0] != magic:
        raise Exceptions.FormatError(f"{path}: expected magic {magic!r}, found {values[0]!r}", offset=0)
    if values[1] != FORMAT_VERSION:
        raise Exceptions.FormatError(f"{path}: unsupported version {values[1]}", offset=4)
    return values[2:]


def _read_payload(content: bytes, offset: int, count: int, dtype: str, path: str) -> np.ndarray:
    expected = offset + count * np.dtype(dtype).itemsize
    if len(content) < expected:
        raise Exceptions.FormatError(
            f"{path}: payload truncated ({len(content)} of {expected} bytes)", offset=len(content)
        )
    if len(content) > expected:
        raise Exceptions.FormatError(f"{path}: trailing bytes after the payload", offset=expected)
    return np.frombuffer(content, dtype=dtype, count=count, offset=offset)


def read_feature_file(path: str) -> np.ndarray:
    """
    Reads a feature file.

    Raises
    ------
    Gradient_Reversal_Adaptation.Models.Exceptions.FormatError
        If the file is malformed; the offset of the first invalid byte is attached.
    """
    with open(path, "rb") as file:
        content = file.read()
    dims, frames = _read_header(content, FEATURE_HEADER, FEATURE_MAGIC, path)
    payload = _read_payload(content, FEATURE_HEADER.size, dims * frames, "<f8", path)
    return payload.astype(np.float64).reshape(frames, dims)


def read_label_file(path: str) -> np.ndarray:
    with open(path, "rb") as file:
        content = file.read()
    (count,) = _read_header(content, LABEL_HEADER, LABEL_MAGIC, path)
    return _read_payload(content, LABEL_HEADER.size, count, "<i4", path).astype(np.int64)


def save_dataset(data: Dataset.FrameDataset, path: str) -> None:
    """
    Writes a dataset as directory: dataset.json, manifest.jsonl (one line per utterance), features/*.feat and
    labels/*.lab (only for labeled data; reference labels go to reference/*.lab).

    Parameters
    ----------
    data: Gradient_Reversal_Adaptation.Corpus.Dataset.FrameDataset
        Dataset to store.
    path: str
        Target directory (created if missing).
        Shards of a dataset stored there before are removed.

    Raises
    ------
    Gradient_Reversal_Adaptation.Models.Exceptions.DataError
        If an utterance has no frames.
    """
    empty = np.flatnonzero(data.utterance_frames() == 0)
    if empty.size:
        raise Exceptions.DataError(
            f"Utterance {data.utterance_ids[int(empty[0])]} has no frames"
        )
    for sub_directory in ["features", "labels", "reference"]:
        shutil.rmtree(os.path.join(path, sub_directory), ignore_errors=True)
        os.makedirs(os.path.join(path, sub_directory))
    header = {
        "format_version": FORMAT_VERSION,
        "domain": data.domain.value,
        "language": data.language,
        "frame_shift_ms": data.frame_shift_ms,
        "n_classes": data.n_classes,
        "dims": data.dims,
        "labeled": data.is_labeled,
    }
    with open(os.path.join(path, DATASET_FILE), "w") as file:
        json.dump(header, file, sort_keys=True, indent=2)
    with open(os.path.join(path, MANIFEST_FILE), "w") as manifest:
        for index, (start, end) in enumerate(data.utterance_bounds()):
            domains = np.unique(data.row_domains[start:end])
            if domains.size > 1:
                raise Exceptions.IntegrityError(
                    f"Utterance {data.utterance_ids[index]} mixes rows of both domains"
                )
            entry = {
                "utterance_id": data.utterance_ids[index],
                "domain": Types.Domain.from_index(int(domains[0])).value,
                "language": data.language,
                "channel": data.channels[index],
                "frames": end - start,
                "features": f"features/{index:06d}.feat",
                "labels": None,
                "reference": None,
            }
            write_feature_file(os.path.join(path, entry["features"]), data.features[start:end])
            for key, labels in [("labels", data.labels), ("reference", data.reference_labels)]:
                if labels is not None:
                    entry[key] = f"{key}/{index:06d}.lab"
                    write_label_file(os.path.join(path, entry[key]), labels[start:end])
            manifest.write(json.dumps(entry, sort_keys=True) + "\n")
    logger.debug("Saved %r to %s", data, path)


def _read_json(path: str):
    try:
        with open(path) as file:
            return json.load(file)
    except json.JSONDecodeError as error:
        raise Exceptions.FormatError(f"{path}: {error.msg}", offset=error.pos) from error


def _load_labels(path: str, entries: list[dict], key: str, frames: list[int]) -> Optional[np.ndarray]:
    present = [entry[key] is not None for entry in entries]
    if not any(present):
        return None
    if not all(present):
        raise Exceptions.IntegrityError(f"{key} are missing for some utterances")
    parts = []
    for entry, n in zip(entries, frames):
        labels = read_label_file(os.path.join(path, entry[key]))
        if labels.size != n:
            raise Exceptions.IntegrityError(
                f"{entry['utterance_id']}: {labels.size} {key} for {n} feature frames"
            )
        parts.append(labels)
    return np.concatenate(parts)


def load_dataset(path: str) -> Dataset.FrameDataset:
    """
    Reads a dataset written by save_dataset. Nothing is returned unless every file is valid.

    Raises
    ------
    Gradient_Reversal_Adaptation.Models.Exceptions.FormatError
        If a file is malformed.
    Gradient_Reversal_Adaptation.Models.Exceptions.IntegrityError
        If labels and features do not match.
    """
    header = _read_json(os.path.join(path, DATASET_FILE))
    if header.get("format_version") != FORMAT_VERSION:
        raise Exceptions.FormatError(f"{path}: unsupported dataset version {header.get('format_version')}")
    entries = []
    with open(os.path.join(path, MANIFEST_FILE)) as manifest:
        offset = 0
        for line in manifest:
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError as error:
                raise Exceptions.FormatError(f"{path}/{MANIFEST_FILE}: {error.msg}", offset=offset + error.pos) from error
            offset += len(line.encode())
    features = [read_feature_file(os.path.join(path, entry["features"])) for entry in entries]
    for entry, matrix in zip(entries, features):
        if matrix.shape != (entry["frames"], header["dims"]):
            raise Exceptions.IntegrityError(
                f"{entry['utterance_id']}: features of shape {matrix.shape}, manifest expects "
                f"({entry['frames']}, {header['dims']})"
            )
    frames = [entry["frames"] for entry in entries]
    labels = _load_labels(path, entries, "labels", frames)
    if not entries and header["labeled"]:
        labels = np.zeros(0, dtype=np.int64)
    if (labels is not None) != header["labeled"]:
        raise Exceptions.IntegrityError(f"{path}: label presence contradicts {DATASET_FILE}")
    return Dataset.FrameDataset(
        features=np.concatenate(features) if features else np.zeros((0, header["dims"])),
        labels=labels,
        domain=Types.Domain(header["domain"]),
        language=header["language"],
        frame_shift_ms=header["frame_shift_ms"],
        n_classes=header["n_classes"],
        utterance_index=np.repeat(np.arange(len(entries)), frames),
        utterance_ids=[entry["utterance_id"] for entry in entries],
        row_domains=np.repeat([Types.Domain(entry["domain"]).index for entry in entries], frames).astype(np.int64),
        reference_labels=_load_labels(path, entries, "reference", frames),
        channels=[entry["channel"] for entry in entries],
    )
