"""Self-describing structured text files for coefficients and training data.

Format: a header line ``invop 1 <KIND>``, then one field per record as
``<name> <type> <dims...>`` followed by the numeric payload in row-major
order, one leading-index row per line, terminated by ``end``.  All floats
are written with 17 significant digits, so write-then-read reproduces the
decimal representation exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigInvalid
from .fem import ProblemKind, ProblemTag
from .grid import GridFunction, SpaceKind
from .neural import (
    ActivationKind,
    BranchCoeffs,
    NeuralOperatorCoeffs,
    StructuredSurrogateCoeffs,
    TrunkCoeffs,
)
from .training import LinearSurrogate, PerturbationSpec, TrainingSet

MAGIC = "invop 1"


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _write_field(lines: list, name: str, value):
    if isinstance(value, str):
        lines.append(f"{name} str {value}")
    elif isinstance(value, (int, np.integer)):
        lines.append(f"{name} int {int(value)}")
    elif isinstance(value, float):
        lines.append(f"{name} real {_fmt(value)}")
    else:
        a = np.asarray(value, dtype=float)
        dims = " ".join(str(d) for d in a.shape)
        lines.append(f"{name} array{a.ndim} {dims}")
        rows = a.reshape(-1, a.shape[-1]) if a.ndim > 1 else a.reshape(1, -1)
        for row in rows:
            lines.append(" ".join(_fmt(v) for v in row))


def _write(path, kind: str, fields):
    lines = [f"{MAGIC} {kind}"]
    for name, value in fields:
        _write_field(lines, name, value)
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def _read(path, expect_kind: str) -> dict:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(MAGIC):
        raise ConfigInvalid(f"{path}: not a recognized coefficient file")
    kind = lines[0][len(MAGIC):].strip()
    if kind != expect_kind:
        raise ConfigInvalid(f"{path}: contains {kind!r}, expected {expect_kind!r}")
    fields = {}
    i = 1
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if line == "end":
            return fields
        if not line:
            continue
        parts = line.split()
        name, typ = parts[0], parts[1]
        if typ == "str":
            fields[name] = line.split(None, 2)[2]
        elif typ == "int":
            fields[name] = int(parts[2])
        elif typ == "real":
            fields[name] = float(parts[2])
        elif typ.startswith("array"):
            shape = tuple(int(d) for d in parts[2:])
            n_rows = 1 if len(shape) == 1 else int(np.prod(shape[:-1]))
            data = []
            for _ in range(n_rows):
                data.extend(float(v) for v in lines[i].split())
                i += 1
            fields[name] = np.array(data).reshape(shape)
        else:
            raise ConfigInvalid(f"{path}: unknown field type {typ!r}")
    raise ConfigInvalid(f"{path}: missing end marker")


# ---------------------------------------------------------------------------
# grid functions


def _put_grid(fields: list, prefix: str, g: GridFunction):
    fields.append((f"{prefix}.n_cells", g.n_cells))
    fields.append((f"{prefix}.values", g.values))


def _get_grid(fields: dict, prefix: str) -> GridFunction:
    return GridFunction(fields[f"{prefix}.n_cells"], fields[f"{prefix}.values"])


# ---------------------------------------------------------------------------
# operator coefficients


def save_neural_operator(path, c: NeuralOperatorCoeffs):
    _write(path, "NeuralOperatorCoeffs", [
        ("activation", c.activation.value),
        ("alpha", c.alpha),
        ("w", np.asarray(c.w)),
        ("w_vec", c.w_vec),
        ("theta", np.asarray(c.theta)),
        ("s_points", c.s_points),
        ("zeta", c.zeta),
    ])


def load_neural_operator(path) -> NeuralOperatorCoeffs:
    f = _read(path, "NeuralOperatorCoeffs")
    return NeuralOperatorCoeffs(
        alpha=f["alpha"], w=f["w"], w_vec=f["w_vec"], theta=f["theta"],
        s_points=f["s_points"], zeta=f["zeta"],
        activation=ActivationKind(f["activation"]),
    )


def save_structured(path, s: StructuredSurrogateCoeffs):
    fields = [("activation", s.activation.value), ("n_terms", s.n_terms)]
    for i, (b, t, pts) in enumerate(zip(s.branches, s.trunks, s.s_points)):
        fields += [
            (f"term{i}.branch.c", b.c),
            (f"term{i}.branch.w", b.w),
            (f"term{i}.branch.theta", b.theta),
            (f"term{i}.trunk.c", t.c),
            (f"term{i}.trunk.w", t.w),
            (f"term{i}.trunk.zeta", t.zeta),
            (f"term{i}.s_points", pts),
        ]
    _write(path, "StructuredSurrogateCoeffs", fields)


def load_structured(path) -> StructuredSurrogateCoeffs:
    f = _read(path, "StructuredSurrogateCoeffs")
    branches, trunks, pts = [], [], []
    for i in range(f["n_terms"]):
        branches.append(BranchCoeffs(
            f[f"term{i}.branch.c"], f[f"term{i}.branch.w"], f[f"term{i}.branch.theta"]
        ))
        trunks.append(TrunkCoeffs(
            f[f"term{i}.trunk.c"], f[f"term{i}.trunk.w"], f[f"term{i}.trunk.zeta"]
        ))
        pts.append(f[f"term{i}.s_points"])
    return StructuredSurrogateCoeffs(
        tuple(branches), tuple(trunks), tuple(pts),
        ActivationKind(f["activation"]),
    )


# ---------------------------------------------------------------------------
# training sets and linear surrogates


def save_training_set(path, ts: TrainingSet):
    fields = [
        ("problem", ts.problem.tag.value),
        ("nu", ts.problem.nu),
        ("space", ts.space.value),
        ("seed", ts.seed),
        ("n_pairs", len(ts.pairs)),
    ]
    if ts.perturbation is not None:
        fields += [
            ("perturbation.mode", ts.perturbation.mode),
            ("perturbation.amplitude", ts.perturbation.amplitude),
            ("perturbation.count", ts.perturbation.count),
            ("perturbation.seed", ts.perturbation.seed),
        ]
    if ts.load is not None:
        _put_grid(fields, "load", ts.load)
    for i, (x, y) in enumerate(ts.pairs):
        _put_grid(fields, f"pair{i}.x", x)
        _put_grid(fields, f"pair{i}.y", y)
    _write(path, "TrainingSet", fields)


def load_training_set(path) -> TrainingSet:
    f = _read(path, "TrainingSet")
    pairs = tuple(
        (_get_grid(f, f"pair{i}.x"), _get_grid(f, f"pair{i}.y"))
        for i in range(f["n_pairs"])
    )
    pert = None
    if "perturbation.mode" in f:
        pert = PerturbationSpec(
            f["perturbation.mode"], f["perturbation.amplitude"],
            f["perturbation.count"], f["perturbation.seed"],
        )
    load = _get_grid(f, "load") if "load.n_cells" in f else None
    return TrainingSet(
        pairs, ProblemKind(ProblemTag(f["problem"]), f["nu"]),
        SpaceKind(f["space"]), f["seed"], pert, load,
    )


def save_linear_surrogate(path, ls: LinearSurrogate):
    fields = [
        ("space", ls.space.value),
        ("n_terms", ls.n_terms),
        ("transform", ls.transform),
    ]
    for i, (b, y) in enumerate(zip(ls.basis, ls.induced)):
        _put_grid(fields, f"basis{i}", b)
        _put_grid(fields, f"induced{i}", y)
    if ls.center is not None:
        _put_grid(fields, "center.x", ls.center[0])
        _put_grid(fields, "center.y", ls.center[1])
    _write(path, "LinearSurrogate", fields)


def load_linear_surrogate(path) -> LinearSurrogate:
    f = _read(path, "LinearSurrogate")
    n = f["n_terms"]
    basis = tuple(_get_grid(f, f"basis{i}") for i in range(n))
    induced = tuple(_get_grid(f, f"induced{i}") for i in range(n))
    center = None
    if "center.x.n_cells" in f:
        center = (_get_grid(f, "center.x"), _get_grid(f, "center.y"))
    return LinearSurrogate(basis, induced, f["transform"], SpaceKind(f["space"]), center)
