"""Model files: canonical JSON serialization of hybrid systems.

A model file carries the quantum dimension, classical labels, one
Hamiltonian per sector, a sparse list of coupling operators (diagonal
entries forbidden) and the initial pure state. Complex numbers are
``[re, im]`` pairs; classical sectors are 1-based. ``save_model`` always
emits the canonical form (sorted keys, two-space indent), so
write(load(f)) is byte-identical for canonical inputs and exact in value
for any input.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import HybridModel, PureHybridState, validate_model

__all__ = [
    "SCHEMA_VERSION",
    "load_model",
    "loads_model",
    "save_model",
    "bundled_model_path",
    "list_bundled_models",
]

SCHEMA_VERSION = "1"


def _pair(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _matrix_out(mat: np.ndarray) -> list:
    return [[_pair(z) for z in row] for row in np.asarray(mat)]


def _matrix_in(data, *, n: int | None, name: str) -> np.ndarray:
    try:
        rows = list(data)
        out = np.empty((len(rows), len(rows[0])), dtype=np.complex128)
        for i, row in enumerate(rows):
            for j, pair in enumerate(row):
                re, im = pair
                out[i, j] = complex(float(re), float(im))
    except (TypeError, ValueError, IndexError) as exc:
        raise ValidationError(f"{name}: malformed matrix ({exc})") from None
    if out.shape[0] != out.shape[1]:
        raise ValidationError(f"{name}: matrix must be square, got {out.shape}")
    if n is not None and out.shape[0] != n:
        raise ValidationError(f"{name}: dimension {out.shape[0]} != quantum_dim {n}")
    return out


def loads_model(text: str, *, source: str = "<string>") -> tuple[HybridModel, PureHybridState]:
    """Parse and validate a model document from a JSON string."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{source}: top level must be an object")

    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"{source}: schema_version {version!r} not supported (expected {SCHEMA_VERSION!r})"
        )

    def need(key):
        if key not in doc:
            raise ValidationError(f"{source}: missing field {key!r}")
        return doc[key]

    n = need("quantum_dim")
    if not isinstance(n, int) or n < 1:
        raise ValidationError(f"{source}: quantum_dim must be a positive integer")
    labels = need("classical_labels")
    if not isinstance(labels, list) or not labels:
        raise ValidationError(f"{source}: classical_labels must be a nonempty list")
    m = len(labels)

    ham_data = need("hamiltonians")
    if not isinstance(ham_data, list) or len(ham_data) != m:
        raise ValidationError(f"{source}: expected {m} hamiltonians, got {len(ham_data)}")
    hams = [
        _matrix_in(mat, n=n, name=f"hamiltonians[{i + 1}]") for i, mat in enumerate(ham_data)
    ]

    grid = [[None] * m for _ in range(m)]
    for entry in doc.get("couplings", []):
        try:
            a, b = int(entry["alpha"]), int(entry["beta"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"{source}: coupling entries need integer alpha/beta") from None
        if not (1 <= a <= m and 1 <= b <= m):
            raise ValidationError(f"{source}: coupling ({a},{b}) outside 1..{m}")
        if a == b:
            raise ValidationError(
                f"{source}: couplings[{a}][{b}]: diagonal coupling must vanish"
            )
        if grid[a - 1][b - 1] is not None:
            raise ValidationError(f"{source}: duplicate coupling entry ({a},{b})")
        grid[a - 1][b - 1] = _matrix_in(
            entry.get("matrix"), n=n, name=f"couplings[{a}][{b}]"
        )
    for a in range(m):
        for b in range(m):
            if grid[a][b] is None:
                grid[a][b] = np.zeros((n, n), dtype=np.complex128)

    try:
        model = validate_model(hams, grid, labels=labels)
    except ValidationError as exc:
        raise ValidationError(f"{source}: {exc}") from None

    init = need("initial_state")
    if not isinstance(init, dict):
        raise ValidationError(f"{source}: initial_state must be an object")
    amps_data = init.get("amplitudes")
    if not isinstance(amps_data, list) or len(amps_data) != n:
        raise ValidationError(f"{source}: initial_state.amplitudes must have {n} entries")
    try:
        amps = np.array([complex(float(p[0]), float(p[1])) for p in amps_data])
    except (TypeError, ValueError, IndexError):
        raise ValidationError(f"{source}: initial_state.amplitudes must be [re, im] pairs") from None
    label = init.get("classical_label")
    alpha = model.classical.index_of(label)
    nrm = float(np.linalg.norm(amps))
    if abs(nrm - 1.0) > 1e-10:
        raise ValidationError(
            f"{source}: initial_state.amplitudes not normalized, |norm - 1| = {abs(nrm - 1.0):.2e}"
        )
    state = PureHybridState(psi=amps, alpha=alpha, t=0.0)
    return model, state


def load_model(path) -> tuple[HybridModel, PureHybridState]:
    """Load and validate a model file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read model file {p}: {exc}") from None
    return loads_model(text, source=str(p))


def save_model(
    model: HybridModel,
    initial: PureHybridState,
    path=None,
    *,
    name: str | None = None,
    time_unit: str | None = None,
) -> str:
    """Serialize to canonical JSON; writes to ``path`` when given."""
    couplings = []
    for a in range(1, model.m + 1):
        for b in range(1, model.m + 1):
            if a == b:
                continue
            mat = model.coupling(a, b)
            if np.any(mat != 0):
                couplings.append({"alpha": a, "beta": b, "matrix": _matrix_out(mat)})
    doc = {
        "schema_version": SCHEMA_VERSION,
        "quantum_dim": model.n,
        "classical_labels": list(model.classical.labels),
        "hamiltonians": [_matrix_out(model.hamiltonians[a]) for a in range(model.m)],
        "couplings": couplings,
        "initial_state": {
            "amplitudes": [_pair(z) for z in initial.psi],
            "classical_label": model.classical.labels[initial.alpha - 1],
        },
    }
    if name is not None:
        doc["name"] = name
    if time_unit is not None:
        doc["time_unit"] = time_unit
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def list_bundled_models() -> list[str]:
    """Names of the demo models shipped with the package."""
    pkg = resources.files("hybridjump") / "models"
    return sorted(p.name[: -len(".json")] for p in pkg.iterdir() if p.name.endswith(".json"))


def bundled_model_path(name: str) -> Path:
    """Filesystem path of a bundled demo model."""
    candidate = resources.files("hybridjump") / "models" / f"{name}.json"
    path = Path(str(candidate))
    if not path.exists():
        raise ValidationError(
            f"no bundled model {name!r}; available: {list_bundled_models()}"
        )
    return path
