"""On-disk formats: matrix files with a v,n header, connection-graph JSON,
ground-truth bundles, fit results, and the results CSV."""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

from .datagen import GroundTruth, SignalMatrix
from .graphs import ConnectionGraph, ConnectionLaplacian, NodeBases, build_connection_laplacian
from .metrics import RESULTS_CSV_COLUMNS
from .solver import FitResult, Hyperparams, OStepControls


def _format_row(values) -> str:
    return ",".join(repr(float(x)) for x in values)


def write_matrix(path: str | Path, matrix: np.ndarray, v: int, n: int, fmt: str = "dense") -> None:
    """Write a matrix with the one-line ``v,n`` block-bookkeeping header.

    ``dense`` stores comma-separated rows; ``coordinate`` stores 1-based
    ``i,j,value`` triplets of the nonzero entries.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    rows, cols = matrix.shape
    lines = [f"{v},{n}"]
    if fmt == "dense":
        lines.append(f"{rows},{cols}")
        lines.extend(_format_row(row) for row in matrix)
    elif fmt == "coordinate":
        nz = np.argwhere(matrix != 0.0)
        lines.append(f"{rows},{cols},{len(nz)}")
        lines.extend(f"{i + 1},{j + 1},{repr(float(matrix[i, j]))}" for i, j in nz)
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path: str | Path) -> tuple[np.ndarray, int, int]:
    """Read either matrix format back; returns (matrix, v, n)."""
    lines = Path(path).read_text().strip().splitlines()
    if len(lines) < 2:
        raise ValueError(f"{path}: truncated matrix file")
    try:
        v, n = (int(x) for x in lines[0].split(","))
        shape_fields = [int(x) for x in lines[1].split(",")]
    except ValueError as err:
        raise ValueError(f"{path}: bad matrix header: {err}") from err
    if len(shape_fields) == 2:
        rows, cols = shape_fields
        data = np.array([[float(x) for x in line.split(",")] for line in lines[2:]])
        if data.shape != (rows, cols):
            raise ValueError(f"{path}: body shape {data.shape} does not match header ({rows}, {cols})")
    elif len(shape_fields) == 3:
        rows, cols, nnz = shape_fields
        data = np.zeros((rows, cols))
        body = lines[2:]
        if len(body) != nnz:
            raise ValueError(f"{path}: {len(body)} entries but header promises {nnz}")
        for line in body:
            i, j, value = line.split(",")
            data[int(i) - 1, int(j) - 1] = float(value)
    else:
        raise ValueError(f"{path}: malformed shape line {lines[1]!r}")
    return data, v, n


def connection_graph_to_dict(cg: ConnectionGraph) -> dict:
    return {
        "v": cg.v,
        "n": cg.n,
        "edges": [
            {"i": i, "j": j, "w": w, "O": [float(x) for x in o.ravel()]}
            for (i, j, w), o in zip(cg.edges, cg.maps)
        ],
    }


def connection_graph_from_dict(payload: dict) -> ConnectionGraph:
    n = payload["n"]
    edges = tuple((e["i"], e["j"], e["w"]) for e in payload["edges"])
    maps = tuple(np.array(e["O"], dtype=float).reshape(n, n) for e in payload["edges"])
    return ConnectionGraph(v=payload["v"], n=n, edges=edges, maps=maps)


def save_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def save_ground_truth(directory: str | Path, gt: GroundTruth) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_json(
        directory / "ground_truth.json",
        {
            "cg": connection_graph_to_dict(gt.cg),
            "bases": [[float(x) for x in blk.ravel()] for blk in gt.bases.blocks],
            "provenance": gt.provenance,
            "seed": gt.seed,
        },
    )
    write_matrix(directory / "laplacian.txt", gt.laplacian.matrix, gt.v, gt.n)


def load_ground_truth(directory: str | Path) -> GroundTruth:
    directory = Path(directory)
    payload = load_json(directory / "ground_truth.json")
    cg = connection_graph_from_dict(payload["cg"])
    blocks = np.array([np.array(b).reshape(cg.n, cg.n) for b in payload["bases"]])
    matrix, v, n = read_matrix(directory / "laplacian.txt")
    return GroundTruth(
        cg=cg,
        laplacian=ConnectionLaplacian(matrix, v, n),
        bases=NodeBases(blocks),
        provenance=payload["provenance"],
        seed=payload["seed"],
    )


def save_signals(path: str | Path, signals: SignalMatrix) -> None:
    write_matrix(path, signals.X, signals.v, signals.n)


def load_signals(path: str | Path, seed: int = 0) -> SignalMatrix:
    x, v, n = read_matrix(path)
    return SignalMatrix(X=x, v=v, n=n, M=x.shape[1], seed=seed)


def hyperparams_to_dict(hp: Hyperparams) -> dict:
    payload = dataclasses.asdict(hp)
    return payload


def hyperparams_from_dict(payload: dict) -> Hyperparams:
    data = dict(payload)
    o_step = data.pop("o_step", None)
    hp = Hyperparams(**data) if o_step is None else Hyperparams(**data, o_step=OStepControls(**o_step))
    return hp


def save_fit_result(directory: str | Path, result: FitResult, training_samples: int | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = result.state
    save_json(
        directory / "fit.json",
        {
            "mode": result.mode,
            "v": state.v,
            "n": state.n,
            "training_samples": training_samples,
            "converged": result.converged,
            "stalled": result.stalled,
            "disconnected": result.disconnected,
            "iterations": state.iteration,
            "objective_trace": result.objective_trace,
            "hyperparams": hyperparams_to_dict(result.hyperparams),
        },
    )
    write_matrix(directory / "laplacian.txt", result.laplacian.matrix, state.v, state.n)
    write_matrix(directory / "bases.txt", state.bases.as_block_diagonal(), state.v, state.n)
    write_matrix(directory / "weights.txt", state.w.reshape(-1, 1), state.v, state.n)


def load_fit_summary(directory: str | Path) -> dict:
    """Fit metadata plus the learned weights and Laplacian (for evaluation)."""
    directory = Path(directory)
    meta = load_json(directory / "fit.json")
    lap, v, n = read_matrix(directory / "laplacian.txt")
    weights, _, _ = read_matrix(directory / "weights.txt")
    meta["laplacian"] = ConnectionLaplacian(lap, v, n)
    meta["weights"] = weights.ravel()
    return meta


def append_results_row(path: str | Path, row: dict) -> None:
    """Append one experiment row, creating the header on first write."""
    unknown = set(row) - set(RESULTS_CSV_COLUMNS)
    if unknown:
        raise ValueError(f"unknown results columns: {sorted(unknown)}")
    path = Path(path)
    fresh = not path.exists()
    with path.open("a", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=RESULTS_CSV_COLUMNS)
        if fresh:
            writer.writeheader()
        writer.writerow(row)


def read_results_rows(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as handle:
        return list(csv.DictReader(handle))
