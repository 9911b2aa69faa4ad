"""JSON model files and CSV trajectories.

Complex numbers are stored as [re, im] pairs, matrices as row-major nested
lists of those pairs.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

import numpy as np

from .algebra import WedderburnData
from .condexp import CondExpFactors
from .errors import ParseError
from .linops import QuantumModel
from .observability import LinearFilter
from .reduction import KrausTerm, ReducedModel
from .sde import NoiseRecord, Trajectory


def encode_matrix(X: np.ndarray) -> list:
    X = np.asarray(X, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in X]


def encode_vector(x: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(x, dtype=complex)]


def decode_matrix(obj: Any, n: int | None = None) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed matrix: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ParseError(f"matrix must be a square array of [re, im] pairs, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ParseError(f"matrix is {arr.shape[0]}x{arr.shape[0]}, expected {n}x{n}")
    return arr[..., 0] + 1j * arr[..., 1]


def decode_vector(obj: Any) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ParseError("vector must be a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def model_to_dict(model: QuantumModel) -> dict:
    return {
        "n": model.n,
        "H": encode_matrix(model.H),
        "L": [encode_matrix(X) for X in model.L],
        "D": [encode_matrix(X) for X in model.D],
        "C": [encode_matrix(X) for X in model.C],
        "O": [encode_matrix(X) for X in model.O],
    }


def model_from_dict(d: dict) -> QuantumModel:
    if not isinstance(d, dict) or "n" not in d or "H" not in d:
        raise ParseError("model file needs at least 'n' and 'H'")
    try:
        n = int(d["n"])
    except (TypeError, ValueError) as exc:
        raise ParseError("'n' must be an integer") from exc
    ops = {k: tuple(decode_matrix(X, n) for X in d.get(k, [])) for k in ("L", "D", "C", "O")}
    try:
        return QuantumModel(decode_matrix(d["H"], n), **ops)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def load_model(path: str | Path) -> QuantumModel:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    return model_from_dict(d)


def save_json(obj: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def _terms(groups: tuple[tuple[KrausTerm, ...], ...]) -> list[dict]:
    return [{"channel": j, "l": t.l, "e": t.e, "op": encode_matrix(t.op)}
            for j, grp in enumerate(groups) for t in grp]


def reduced_to_dict(red: ReducedModel, extra: dict | None = None) -> dict:
    W = red.factors.wedderburn
    out = {
        "m": red.m,
        "n": W.n,
        "blocks": [list(b) for b in W.blocks],
        "U": encode_matrix(W.U),
        "H": encode_matrix(red.H),
        "L": _terms(red.L),
        "D": [{"channel": j, "op": encode_matrix(X)} for j, X in enumerate(red.D)],
        "D_extra": _terms(red.D_extra),
        "C": _terms(red.C),
        "O": [encode_matrix(X) for X in red.O],
        "channels": {"L": len(red.L), "D": len(red.D), "C": len(red.C)},
    }
    if extra:
        out.update(extra)
    return out


def reduced_from_dict(d: dict) -> ReducedModel:
    try:
        W = WedderburnData(decode_matrix(d["U"]), tuple(tuple(int(v) for v in b) for b in d["blocks"]))
        F = CondExpFactors(W)
        m = int(d["m"])
        counts = d["channels"]

        def groups(key: str, count: int) -> tuple[tuple[KrausTerm, ...], ...]:
            out: list[list[KrausTerm]] = [[] for _ in range(count)]
            for t in d[key]:
                out[int(t["channel"])].append(KrausTerm(int(t["l"]), int(t["e"]), decode_matrix(t["op"], m)))
            return tuple(tuple(g) for g in out)

        D = [None] * int(counts["D"])
        for item in d["D"]:
            D[int(item["channel"])] = decode_matrix(item["op"], m)
        return ReducedModel(F, decode_matrix(d["H"], m), groups("L", int(counts["L"])), tuple(D),
                            groups("D_extra", int(counts["D"])), groups("C", int(counts["C"])),
                            tuple(decode_matrix(X, m) for X in d["O"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"malformed reduced-model file: {exc!r}") from exc


def linear_filter_to_dict(lin: LinearFilter) -> dict:
    return {
        "kappa": lin.kappa,
        "Q": encode_matrix(lin.Q),
        "G": [encode_matrix(G) for G in lin.G],
        "K": [encode_matrix(K) for K in lin.K],
        "zeta": [encode_vector(z) for z in lin.zeta],
        "e": encode_vector(lin.e_vec),
        "basis": [encode_matrix(E) for E in lin.space.basis],
    }


def write_trajectory_csv(path: str | Path, traj: Trajectory, rec: NoiseRecord | None = None) -> None:
    """Columns t, theta_1..theta_r, trace and, with a record, the cumulative
    outputs y_1..y_p and counts n_1..n_q."""
    r = traj.theta.shape[0]
    header = ["t"] + [f"theta_{j + 1}" for j in range(r)] + ["trace"]
    cols = [traj.times, *traj.theta, traj.norm_trace]
    if rec is not None:
        header += [f"y_{j + 1}" for j in range(rec.p)] + [f"n_{j + 1}" for j in range(rec.q)]
        Y = np.concatenate([np.zeros((rec.p, 1)), np.cumsum(rec.dY, axis=1)], axis=1)
        N = np.concatenate([np.zeros((rec.q, 1), dtype=int), np.cumsum(rec.dN, axis=1)], axis=1)
        cols += [*Y, *N]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([format(float(v), ".17g") for v in row])


def read_trajectory_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return {h: body[:, i] for i, h in enumerate(header)}
