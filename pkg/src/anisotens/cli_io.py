"""File formats, orientation ingestion, moment estimation and the end-to-end pipeline."""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.stats import chi2

from . import so3
from .bases import monomial_traceless
from .classifier import NAMED_TENSORS, SymmetryReport, detect_symmetry
from .maxent import MaxEntSolution, MomentTarget, check_targets
from .tensors import SymTensor, multinomials, multisets, rotate_batch, traceless_project

INGEST_QUAT_TOL = 1e-6
INGEST_MATRIX_TOL = 1e-6


class InputError(ValueError):
    """Malformed or invalid input file."""


# deterministic JSON ---------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot write non-finite value {x!r} as JSON")
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "inf" not in s and "nan" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int | None = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad = "" if indent is None else "\n"

    def enc(o, level):
        ind = "" if indent is None else " " * (indent * (level + 1))
        end = "" if indent is None else " " * (indent * level)
        sep = ", " if indent is None else ","
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _fmt_float(float(o))
        if isinstance(o, Fraction):
            return json.dumps(str(o))
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, np.ndarray):
            o = o.tolist()
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{ind}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{" + pad + (sep + pad).join(items) + pad + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float, np.integer, np.floating)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            items = [ind + enc(v, level + 1) for v in o]
            return "[" + pad + (sep + pad).join(items) + pad + end + "]"
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return enc(obj, 0)


# tensors -------------------------------------------------------------------------


def symtensor_to_json(U: SymTensor) -> dict:
    comps = {}
    for k, v in zip(multisets(U.order), U.comps):
        comps[f"{k[0]},{k[1]},{k[2]}"] = float(v)
    return {"order": U.order, "comps": comps}


def symtensor_from_json(obj) -> SymTensor:
    if not isinstance(obj, dict) or "order" not in obj or "comps" not in obj:
        raise InputError('a tensor must look like {"order": n, "comps": {"k1,k2,k3": value}}')
    n = obj["order"]
    if not isinstance(n, int) or n < 0:
        raise InputError(f"tensor order must be a non-negative integer, got {n!r}")
    entries = {}
    for key, v in obj["comps"].items():
        try:
            k = tuple(int(x) for x in key.split(","))
        except ValueError:
            raise InputError(f"bad multiset key {key!r}") from None
        if len(k) != 3 or sum(k) != n or min(k) < 0:
            raise InputError(f"multiset key {key!r} does not match order {n}")
        if not isinstance(v, (int, float)):
            raise InputError(f"component {key!r} must be a number")
        entries[k] = float(v)
    return SymTensor.from_dict(n, entries, exact=False)


def rotation_to_json(p, encoding: str = "matrix"):
    if encoding == "matrix":
        return [float(x) for x in np.asarray(p).ravel()]
    if encoding == "quat":
        return [float(x) for x in so3.quaternion_from_rotation(p)]
    if encoding == "euler":
        a = so3.euler_from_rotation(p)
        return {"alpha": a.alpha, "beta": a.beta, "gamma": a.gamma}
    raise ValueError(f"unknown rotation encoding {encoding!r}")


def rotation_from_json(obj, encoding: str | None = None) -> np.ndarray:
    """Rotation from a 9-array, a quaternion ``[a, b, c, d]`` or ``{"alpha", "beta", "gamma"}``.

    ``encoding`` (``"matrix"``, ``"quat"`` or ``"euler"``) insists on one form;
    with ``None`` the form is inferred from the record shape.
    """
    if encoding not in (None, "matrix", "quat", "euler"):
        raise ValueError(f"unknown rotation encoding {encoding!r}")
    if isinstance(obj, dict):
        if {"alpha", "beta", "gamma"} <= obj.keys():
            if encoding not in (None, "euler"):
                raise InputError(f"expected a {encoding} record, got Euler angles")
            return so3.rotation_from_euler(float(obj["alpha"]), float(obj["beta"]), float(obj["gamma"]))
        for key in ("matrix", "quat", "euler", "rotation"):
            if key in obj:
                return rotation_from_json(obj[key], encoding)
        raise InputError(f"unrecognised rotation record with keys {sorted(obj)}")
    if not isinstance(obj, list) or not all(isinstance(v, (int, float)) for v in obj):
        raise InputError("a rotation must be a list of numbers or an Euler-angle object")
    expected = {"matrix": 9, "quat": 4, "euler": 3}
    if encoding is not None and len(obj) != expected[encoding]:
        raise InputError(f"a {encoding} record needs {expected[encoding]} entries, got {len(obj)}")
    if len(obj) == 9:
        return so3.check_rotation(np.array(obj, dtype=float).reshape(3, 3), INGEST_MATRIX_TOL)
    if len(obj) == 4:
        q = np.array(obj, dtype=float)
        norm = np.linalg.norm(q)
        if abs(norm - 1.0) > INGEST_QUAT_TOL:
            raise so3.RotationError(f"quaternion is not unit (norm = {norm!r})")
        return so3.rotation_from_quaternion(q / norm)
    if len(obj) == 3 and encoding == "euler":
        return so3.rotation_from_euler(*map(float, obj))
    raise InputError(f"a rotation list needs 9 (matrix) or 4 (quaternion) entries, got {len(obj)}")


@dataclass
class OrientationSample:
    rotations: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.weights)


def _is_record(obj) -> bool:
    return isinstance(obj, dict) or isinstance(obj, list) and all(isinstance(v, (int, float)) for v in obj)


def _records(lines):
    """Yield ``(where, record)`` from JSON lines, or from one JSON list spread over the input."""
    lines = iter(lines)
    head = []
    for ln in lines:
        head.append(ln)
        if ln.strip():
            break
    first = head[-1] if head else ""
    try:
        line_mode = _is_record(json.loads(first))
    except json.JSONDecodeError:
        line_mode = False
    if line_mode:
        for lineno, ln in enumerate(itertools.chain(head, lines), 1):
            if ln.strip():
                try:
                    yield f"line {lineno}", json.loads(ln)
                except json.JSONDecodeError as exc:
                    raise InputError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        return
    text = "".join(head) + "".join(lines)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, list):
        raise InputError("expected a list of orientation records")
    for i, rec in enumerate(data):
        yield f"record {i}", rec


def _parse(records, encoding) -> OrientationSample:
    rots, weights = [], []
    for where, rec in records:
        w = 1.0
        if isinstance(rec, dict) and "rotation" in rec:
            w = rec.get("weight", 1.0)
            if not isinstance(w, (int, float)) or not w >= 0:
                raise InputError(f"{where}: weight must be a non-negative number")
        try:
            rots.append(rotation_from_json(rec, encoding))
        except (InputError, ValueError) as exc:
            raise InputError(f"{where}: {exc}") from None
        weights.append(float(w))
    if not rots:
        raise InputError("no orientation records found")
    w = np.array(weights)
    if w.sum() <= 0:
        raise InputError("weights sum to zero")
    return OrientationSample(np.array(rots), w / w.sum())


def ingest(source, encoding: str | None = None) -> OrientationSample:
    """Read orientations from a file path, or from JSON text.

    One record per line (JSON lines, read as a stream) or a single JSON list.
    Each record is a rotation in one of the accepted encodings, optionally
    wrapped as ``{"rotation": ..., "weight": w}``.  Errors name the line or
    record index.
    """
    if isinstance(source, Path) or isinstance(source, str) and "\n" not in source and Path(source).is_file():
        with open(source) as fh:
            return _parse(_records(fh), encoding)
    return _parse(_records(str(source).splitlines(keepends=True)), encoding)


# moment estimation ------------------------------------------------------------------


def base_tensor(name: str) -> SymTensor:
    if name not in NAMED_TENSORS:
        raise InputError(f"unknown tensor {name!r}; choose from {sorted(NAMED_TENSORS)}")
    return NAMED_TENSORS[name].base


@dataclass
class MomentEstimate:
    means: dict
    stderr: dict
    n_eff: float

    @property
    def noise_scale(self) -> float:
        """Expected squared norm of the estimation error, summed over tensors."""
        return float(sum((multinomials(U.order) * self.stderr[k] ** 2).sum() for k, U in self.means.items()))

    @property
    def dof(self) -> int:
        return sum(2 * U.order + 1 for U in self.means.values())


CHUNK = 16384


def _pairwise_sum(parts: list) -> np.ndarray:
    while len(parts) > 1:
        parts = [parts[i] + parts[i + 1] if i + 1 < len(parts) else parts[i] for i in range(0, len(parts), 2)]
    return parts[0]


def _chunked(fn, n: int, threads: int) -> np.ndarray:
    """Sum ``fn(slice)`` over fixed-size chunks; the result does not depend on ``threads``."""
    slices = [slice(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)]
    if threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(fn, slices))
    else:
        parts = [fn(sl) for sl in slices]
    return _pairwise_sum(parts)


def estimate_moments(sample: OrientationSample, selection, threads: int = 1) -> MomentEstimate:
    """Weighted sample means of the rotated base tensors with per-component standard errors.

    ``selection`` holds tensor names (``"Q2"``...) or explicit base tensors.
    Means are traceless-projected after averaging.
    """
    if len(sample) == 0:
        raise InputError("empty orientation sample")
    w = np.asarray(sample.weights, dtype=float)
    w = w / w.sum()
    n_eff = 1.0 / float(np.sum(w**2))
    R = sample.rotations
    means, ses = {}, {}
    for name in selection:
        U = (base_tensor(name) if isinstance(name, str) else name).to_float()

        def first(sl, U=U):
            return w[sl] @ rotate_batch(R[sl], U)

        mu = _chunked(first, len(w), threads)

        def second(sl, U=U, mu=mu):
            return w[sl] @ (rotate_batch(R[sl], U) - mu) ** 2

        var = _chunked(second, len(w), threads) * n_eff / max(n_eff - 1.0, 1.0)
        key = name if isinstance(name, str) else f"U{len(means)}"
        means[key] = traceless_project(SymTensor(U.order, mu))
        ses[key] = np.sqrt(var / n_eff)
    return MomentEstimate(means, ses, n_eff)


def noise_threshold(estimate: MomentEstimate, confidence: float = 1 - 1e-6) -> float:
    """Absolute distance threshold for noisy moments.

    The squared estimation error is roughly chi-square with one degree of
    freedom per independent component; the threshold is its ``confidence``
    quantile scaled by the mean error per component.
    """
    dof = estimate.dof
    return float(chi2.ppf(confidence, dof) / dof * estimate.noise_scale)


def run_pipeline(
    sample: OrientationSample,
    selection,
    confidence: float = 1 - 1e-6,
    with_graph: bool = False,
    molecular_group: str | None = None,
    threads: int = 1,
):
    """Estimate moments from orientations and classify them with a noise-scaled threshold."""
    est = estimate_moments(sample, selection, threads)
    thr = noise_threshold(est, confidence)
    report = detect_symmetry(est.means, threshold=thr, with_graph=with_graph, molecular_group=molecular_group)
    return report, est


# targets and solutions -------------------------------------------------------------------


def targets_from_json(data) -> list:
    """Parse ``[{"order": n, "tensor": {...}}]``.

    Each entry may name its base tensor with ``"name"`` (``Q1``, ``Q2``, ``M2``,
    ``T3``, ``Q4``) or give it explicitly under ``"base"``; otherwise the
    axial tensor ``(e1^n)_0`` is used.
    """
    if not isinstance(data, list) or not data:
        raise InputError("targets must be a non-empty list")
    out = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or "tensor" not in entry:
            raise InputError(f"target {i}: expected an object with a 'tensor' field")
        W = symtensor_from_json(entry["tensor"])
        n = entry.get("order", W.order)
        if n != W.order:
            raise InputError(f"target {i}: order {n} does not match tensor order {W.order}")
        name = entry.get("name", "")
        if "base" in entry:
            U = symtensor_from_json(entry["base"])
        elif name:
            U = base_tensor(name)
        else:
            U = monomial_traceless(n, 0, 0)
        out.append(MomentTarget(U.to_float(), W, name or f"U{i}"))
    try:
        return check_targets(out)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def targets_to_json(targets) -> list:
    return [
        {"order": t.order, "name": t.name, "base": symtensor_to_json(t.base.to_float()),
         "tensor": symtensor_to_json(t.target.to_float())}
        for t in targets
    ]


def solution_to_json(sol: MaxEntSolution) -> dict:
    return {
        "b": [list(map(float, blk)) for blk in sol.multipliers()],
        "logZ": sol.logZ,
        "residuals": sol.residuals,
        "gradient_norm": sol.gradient_norm,
        "grid_spec": sol.grid.spec,
        "targets": targets_to_json(sol.targets),
    }


def solution_from_json(data) -> MaxEntSolution:
    try:
        targets = targets_from_json(data["targets"])
        b = np.concatenate([np.asarray(blk, dtype=float) for blk in data["b"]])
        grid = so3.haar_grid(int(data["grid_spec"]["max_order"]))
        return MaxEntSolution(
            targets=targets,
            b=b,
            logZ=float(data["logZ"]),
            grid=grid,
            gradient_norm=float(data.get("gradient_norm", float("nan"))),
            residuals=list(data.get("residuals", [])),
            iterations=0,
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed solution file: {exc}") from None


def report_to_json(report: SymmetryReport) -> dict:
    return report.to_json()
