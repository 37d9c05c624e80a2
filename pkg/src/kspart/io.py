"""Run configuration, initial data and plot-ready serialization.

Numbers are written with ``repr`` so every float survives a CSV or JSON
round trip bit for bit. Configuration files are JSON; the schema is

.. code-block:: json

    {
      "n": 49,
      "chi": 1.64,
      "initial": {"kind": "clustered", "k": 31, "eps": 1e-3, "margin": 4.0, "seed": 1},
      "integrator": {"t_max": 10.0, "tol": 1e-9, "method": "auto"},
      "outputs": {"trajectory": true, "diagnostics": true, "rescaled": true, "report": true},
      "out_dir": "out"
    }

``initial.kind`` is one of ``explicit`` (with ``positions``), ``clustered``
(``k``, ``eps``, optional ``margin`` and ``seed``), ``symmetric`` (optional
``spread``) or ``random`` (``seed``, optional ``spread``). Every key of
``integrator`` is a field of `IntegratorConfig`.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import IntegratorConfig, Trajectory
from .model import check_ordered

OUTPUT_FLAGS = ("trajectory", "diagnostics", "rescaled", "report")
INITIAL_KINDS = ("explicit", "clustered", "symmetric", "random")


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    n: int
    chi: float
    initial: dict = field(default_factory=lambda: {"kind": "symmetric"})
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    outputs: dict = field(default_factory=lambda: {k: True for k in OUTPUT_FLAGS})
    out_dir: str = "out"

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n!r}")
        if not (isinstance(self.chi, (int, float)) and math.isfinite(self.chi) and self.chi > 0):
            raise ConfigError(f"chi must be a positive finite number, got {self.chi!r}")
        self.chi = float(self.chi)
        kind = self.initial.get("kind")
        if kind not in INITIAL_KINDS:
            raise ConfigError(f"initial.kind must be one of {INITIAL_KINDS}, got {kind!r}")
        unknown = set(self.outputs) - set(OUTPUT_FLAGS)
        if unknown:
            raise ConfigError(f"unknown output flags {sorted(unknown)}")
        self.outputs = {k: bool(self.outputs.get(k, True)) for k in OUTPUT_FLAGS}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        missing = {"n", "chi"} - set(d)
        if missing:
            raise ConfigError(f"missing keys {sorted(missing)}")
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}")
        integ = d.pop("integrator", {}) or {}
        names = {f.name for f in dataclasses.fields(IntegratorConfig)}
        bad = set(integ) - names
        if bad:
            raise ConfigError(f"unknown integrator keys {sorted(bad)}")
        try:
            d["integrator"] = IntegratorConfig(**integ)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad integrator settings: {exc}") from exc
        if isinstance(d.get("initial"), str):
            d["initial"] = parse_initial(d["initial"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {"n": self.n, "chi": self.chi, "initial": dict(self.initial),
                "integrator": dataclasses.asdict(self.integrator),
                "outputs": dict(self.outputs), "out_dir": self.out_dir}


def load_config(path) -> RunConfig:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    return RunConfig.from_dict(d)


def _number(text: str):
    try:
        v = int(text)
    except ValueError:
        try:
            v = float(text)
        except ValueError as exc:
            raise ConfigError(f"not a number: {text!r}") from exc
    return v


def parse_initial(text: str) -> dict:
    """Parse the command-line form of the initial data.

    ``symmetric``, ``symmetric:spread=2``, ``random:seed=3,spread=1``,
    ``clustered:k=31,eps=1e-3,margin=4`` or ``explicit:-1,0,0.5`` (a bare
    comma-separated list also counts as explicit).
    """
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind not in INITIAL_KINDS:
        try:
            return {"kind": "explicit", "positions": [float(v) for v in text.split(",")]}
        except ValueError:
            raise ConfigError(f"unknown initial data {text!r}") from None
    if kind == "explicit":
        try:
            return {"kind": "explicit", "positions": [float(v) for v in rest.split(",")]}
        except ValueError:
            raise ConfigError(f"bad explicit positions {rest!r}") from None
    out = {"kind": kind}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"expected key=value, got {item!r}")
        out[key.strip()] = _number(val.strip())
    return out


def build_initial(cfg: RunConfig) -> np.ndarray:
    """Initial positions for `cfg`, strictly increasing.

    ``symmetric`` spaces the particles equally on ``[-spread/2, spread/2]``
    (default spread 1). ``random`` draws them uniformly on the same interval
    from a generator seeded by ``seed``. ``clustered`` places ``k``
    particles at variance about ``eps`` and the rest far out.
    """
    from .blowup import clustered_initial

    init = cfg.initial
    kind = init["kind"]
    n = cfg.n
    if kind == "explicit":
        x = np.asarray(init.get("positions", []), float)
        if x.size != n:
            raise ConfigError(f"explicit data has {x.size} positions, n={n}")
    elif kind == "symmetric":
        spread = float(init.get("spread", 1.0))
        if not spread > 0:
            raise ConfigError("spread must be positive")
        x = np.linspace(-spread / 2, spread / 2, n)
    elif kind == "random":
        if "seed" not in init:
            raise ConfigError("random initial data needs a seed")
        spread = float(init.get("spread", 1.0))
        rng = np.random.default_rng(int(init["seed"]))
        x = np.sort(rng.uniform(-spread / 2, spread / 2, n))
    else:
        for key in ("k", "eps"):
            if key not in init:
                raise ConfigError(f"clustered initial data needs {key}")
        k, eps = int(init["k"]), float(init["eps"])
        if not 1 <= k <= n or not eps > 0:
            raise ConfigError(f"bad clustered parameters k={k}, eps={eps}")
        seed = init.get("seed")
        rng = None if seed is None else np.random.default_rng(int(seed))
        try:
            x = clustered_initial(n, cfg.chi, k, eps, float(init.get("margin", 4.0)), rng)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        check_ordered(x)
    except ValueError as exc:
        raise ConfigError(f"inadmissible initial data: {exc}") from exc
    return x


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def write_csv(path, header: list[str], rows) -> Path:
    """Write rows with shortest round-trip floats; NaN and None become empty."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a file written by `write_csv`; empty cells come back as NaN."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(c) if c else np.nan for c in row] for row in r]
    data = np.array(rows, float).reshape(len(rows), len(header))
    return header, data


def write_trajectory_csv(path, traj: Trajectory) -> Path:
    header = ["t"] + [f"x_{i}" for i in range(1, traj.n + 1)]
    return write_csv(path, header, (np.concatenate([[t], x])
                                    for t, x in zip(traj.times, traj.positions)))


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(times, positions)`` from a trajectory file."""
    header, data = read_csv(path)
    if not header or header[0] != "t":
        raise ValueError(f"{path} is not a trajectory file")
    return data[:, 0], data[:, 1:]


DIAGNOSTICS_HEADER = ["t", "energy", "pi2_total", "pi2_inner", "h2", "h4",
                      "hls_min_window", "membership_flag"]


def write_diagnostics_csv(path, rows) -> Path:
    return write_csv(path, DIAGNOSTICS_HEADER, rows)


def rescaled_header(n: int) -> list[str]:
    return ["tau"] + [f"y_{i}" for i in range(1, n + 1)] + ["e_resc", "e_resc_k", "grad_norm_k"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> Path:
    """JSON with shortest round-trip floats; non-finite numbers become null."""
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())
