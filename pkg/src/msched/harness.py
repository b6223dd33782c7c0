"""Experiment configuration, convergence runs and parameter sweeps.

Config files are whitespace- or newline-separated ``key=value`` tokens;
``#`` starts a comment. List-valued keys take comma-separated values, and
the one list-valued key among users/antennas/snr_db is the sweep axis.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, fields, replace
import io
import json
import math
from pathlib import Path
from typing import Callable

import numpy as np

from . import qrl
from .baselines import exhaustive_best, greedy_pf, random_policy
from .chanmod import generate_channel, make_config, select_beams
from .ratemod import PFState, RateReport, candidate_rates, gain_matrix, pf_update

AXES = ("epochs", "users", "antennas", "snr")
METHODS = ("qrl", "exhaustive", "greedy", "random")
DEFAULT_GRIDS = {
    "users": (2, 4, 6, 8, 10),
    "antennas": (8, 16, 32, 64),
    "snr": (0.0, 5.0, 10.0, 15.0, 20.0, 25.0),
}
# stream ids are bound to method names, never to list position
_METHOD_STREAM = {"qrl": 11, "exhaustive": 12, "greedy": 13, "random": 14}
_AXIS_KEY = {"users": "users", "antennas": "antennas", "snr": "snr_db"}


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the line and key."""


@dataclass(frozen=True)
class ExperimentSpec:
    axis: str = "epochs"
    values: tuple = ()
    users: int = 6
    antennas: int = 16
    snr_db: float = 20.0
    rician_k: float = 3.0
    corr: float = 0.5
    methods: tuple[str, ...] = METHODS
    realizations: int = 50
    epochs: int = 500
    batch_size: int = 8
    learning_rate: float = 0.2
    grover_iters: int | str = "auto"
    qrl_attempts: int = 3
    threshold: float | str = "adaptive"
    q_start: float = 0.5
    q_end: float = 0.95
    validation_slots: int = 32
    forgetting: float = 0.1
    guard: float = 1e-6
    init_rate: float = 1.0
    seed: int = 0
    out: str = "results.csv"

    def point(self, value) -> tuple[int, int, float]:
        """(T, A, snr_db) at one axis value."""
        T, A, snr = self.users, self.antennas, self.snr_db
        if self.axis == "users":
            T = int(value)
        elif self.axis == "antennas":
            A = int(value)
        elif self.axis == "snr":
            snr = float(value)
        return T, A, snr

    def train_config(self, seed: int | None = None) -> qrl.TrainConfig:
        seed = self.seed if seed is None else seed
        channel = make_config(self.antennas, self.users, self.snr_db, self.rician_k, self.corr,
                              seed=seed)
        return qrl.TrainConfig(
            channel=channel, learning_rate=self.learning_rate, batch_size=self.batch_size,
            epochs=self.epochs, grover_iters=self.grover_iters, threshold=self.threshold,
            q_start=self.q_start, q_end=self.q_end, validation_slots=self.validation_slots,
            forgetting=self.forgetting, guard=self.guard, init_rate=self.init_rate, seed=seed)


@dataclass(frozen=True)
class ResultRow:
    method: str
    T: int
    A: int
    snr_db: float
    epoch: int
    mean_sum_rate: float
    std_sum_rate: float
    pf_value: float
    seed: int


COLUMNS = tuple(f.name for f in fields(ResultRow))


# ---------------------------------------------------------------- parsing

def _as_auto_int(text: str):
    return "auto" if text == "auto" else int(text)


def _as_adaptive_float(text: str):
    return "adaptive" if text == "adaptive" else float(text)


def _list_of(cast: Callable) -> Callable:
    return lambda text: tuple(cast(v) for v in text.split(",") if v != "")


def _methods(text: str) -> tuple[str, ...]:
    names = tuple(v for v in text.split(",") if v)
    bad = [n for n in names if n not in METHODS]
    if bad or not names:
        raise ValueError(f"unknown method(s) {bad or text!r}; choose from {', '.join(METHODS)}")
    if len(set(names)) != len(names):
        raise ValueError("duplicate method")
    return names


def _axis(text: str) -> str:
    if text not in AXES:
        raise ValueError(f"axis must be one of {', '.join(AXES)}")
    return text


_PARSERS: dict[str, Callable] = {
    "axis": _axis,
    "users": _list_of(int),
    "antennas": _list_of(int),
    "snr_db": _list_of(float),
    "rician_k": float,
    "corr": float,
    "methods": _methods,
    "realizations": int,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "grover_iters": _as_auto_int,
    "qrl_attempts": int,
    "threshold": _as_adaptive_float,
    "q_start": float,
    "q_end": float,
    "validation_slots": int,
    "forgetting": float,
    "guard": float,
    "init_rate": float,
    "seed": int,
    "out": str,
}


def _tokens(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        for token in line.split("#", 1)[0].split():
            yield lineno, token


def parse_config(text: str) -> ExperimentSpec:
    """Parse and validate a config; missing keys take defaults."""
    raw: dict[str, tuple[int, object]] = {}
    for lineno, token in _tokens(text):
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value, got {token!r}")
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: key {key!r} given twice (first on line {raw[key][0]})")
        try:
            raw[key] = (lineno, _PARSERS[key](value))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: key {key!r}: bad value {value!r} ({exc})") from None

    where = {k: f"line {ln}: key {k!r}" for k, (ln, _) in raw.items()}
    values = {k: v for k, (_, v) in raw.items()}

    listed = [k for k in ("users", "antennas", "snr_db") if k in values and len(values[k]) > 1]
    axis = values.pop("axis", None)
    if axis is None:
        if len(listed) > 1:
            raise ConfigError(f"{where[listed[1]]}: only one of users/antennas/snr_db may list several values")
        axis = {"users": "users", "antennas": "antennas", "snr_db": "snr"}[listed[0]] if listed else "epochs"
    axis_key = _AXIS_KEY.get(axis)
    for k in listed:
        if k != axis_key:
            raise ConfigError(f"{where[k]}: several values given but the sweep axis is {axis!r}")

    kw: dict[str, object] = {"axis": axis}
    for k in ("users", "antennas", "snr_db"):
        if k in values:
            seq = values.pop(k)
            if not seq:
                raise ConfigError(f"{where[k]}: empty value list")
            if k == axis_key:
                kw["values"] = seq
            else:
                kw[k] = seq[0]
    if axis != "epochs" and "values" not in kw:
        kw["values"] = DEFAULT_GRIDS[axis]
    kw.update(values)
    spec = ExperimentSpec(**kw)
    _validate(spec, where)
    return spec


def _validate(spec: ExperimentSpec, where: dict[str, str]) -> None:
    def fail(key: str, msg: str):
        raise ConfigError(f"{where.get(key, f'key {key!r}')}: {msg}")

    vals = list(spec.values)
    if any(b <= a for a, b in zip(vals, vals[1:])):
        fail(_AXIS_KEY.get(spec.axis, "axis"), f"axis values must be strictly increasing, got {vals}")
    points = [spec.point(v) for v in vals] or [spec.point(None)]
    for T, A, snr in points:
        if T < 1:
            fail("users", f"user count must be positive, got {T}")
        if A < 1:
            fail("antennas", f"antenna count must be positive, got {A}")
        if T > A:
            key = "users" if "users" in where else "antennas"
            fail(key, f"users={T} exceeds antennas={A} (need T <= A)")
        if not math.isfinite(snr):
            fail("snr_db", "SNR must be finite")
        if "qrl" in spec.methods and T > qrl.qsim.MAX_QUBITS:
            fail("users", f"qrl needs T <= {qrl.qsim.MAX_QUBITS}, got {T}")
        if "exhaustive" in spec.methods and T > 20:
            fail("users", f"exhaustive search needs T <= 20, got {T}")
    if spec.realizations < 1:
        fail("realizations", "must be >= 1")
    if spec.qrl_attempts < 1:
        fail("qrl_attempts", "must be >= 1")
    if spec.rician_k < 0:
        fail("rician_k", "must be nonnegative")
    if not 0 <= spec.corr < 1:
        fail("corr", "must lie in [0, 1)")
    if not 0 < spec.forgetting < 1:
        fail("forgetting", "must lie in (0, 1)")
    if spec.guard <= 0:
        fail("guard", "must be positive")
    if spec.init_rate < 0:
        fail("init_rate", "must be nonnegative")
    if spec.seed < 0 or spec.seed >= 1 << 64:
        fail("seed", "must be an unsigned 64-bit integer")
    try:
        spec.train_config()
    except ValueError as exc:
        raise ConfigError(f"training parameters: {exc}") from None


# ---------------------------------------------------------------- running

def realization_seed(seed: int, realization: int) -> int:
    """Channel seed of one realization; shared by every method and axis value."""
    return int(np.random.SeedSequence([seed, realization]).generate_state(1, np.uint64)[0])


def _schedule_fn(method: str, spec: ExperimentSpec, rng: np.random.Generator):
    if method == "qrl":
        return lambda ch, bm, pf: qrl.grover_schedule(ch, bm, pf, rng, iterations=spec.grover_iters,
                                                       attempts=spec.qrl_attempts)[0]
    if method == "exhaustive":
        return lambda ch, bm, pf: exhaustive_best(ch, bm, pf)[0]
    if method == "greedy":
        return greedy_pf
    if method == "random":
        return lambda ch, bm, pf: random_policy(ch.config.num_users, rng)
    raise ValueError(f"unknown method {method!r}")


def _sweep_task(args) -> list[tuple]:
    """One (axis value, realization): every method over the same channel slots."""
    spec, value, realization = args
    T, A, snr = spec.point(value)
    ch_seed = realization_seed(spec.seed, realization)
    cfg = make_config(A, T, snr, spec.rician_k, spec.corr, seed=ch_seed)
    slots = []
    for v in range(spec.validation_slots):
        ch = generate_channel(cfg, v)
        bm = select_beams(ch)
        slots.append((ch, bm, gain_matrix(ch, bm)))
    out = []
    for method in sorted(spec.methods):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, realization, _METHOD_STREAM[method]]))
        choose = _schedule_fn(method, spec, rng)
        pf = PFState.initial(T, spec.init_rate, forgetting=spec.forgetting, guard=spec.guard)
        sums, pfs = [], []
        for ch, bm, gain in slots:
            theta = np.asarray(choose(ch, bm, pf), dtype=float)
            rates = candidate_rates(gain, cfg.noise_var, theta)[0]
            sums.append(float(rates.sum()))
            pfs.append(float(rates @ pf.weights))
            pf = pf_update(pf, RateReport(rates, sums[-1]), theta)
        out.append((method, value, realization, sums, pfs))
    return out


def _map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> list[ResultRow]:
    if spec.axis == "epochs":
        raise ConfigError("sweep needs axis users, antennas or snr")
    tasks = [(spec, value, r) for value in spec.values for r in range(spec.realizations)]
    collected: dict[tuple, list] = {}
    for chunk in _map(_sweep_task, tasks, workers):
        for method, value, realization, sums, pfs in chunk:
            collected.setdefault((method, value), []).append((realization, sums, pfs))
    order = {v: i for i, v in enumerate(spec.values)}
    keyed = []
    for (method, value), parts in collected.items():
        parts.sort(key=lambda p: p[0])
        sums = np.concatenate([p[1] for p in parts])
        pfs = np.concatenate([p[2] for p in parts])
        T, A, snr = spec.point(value)
        row = ResultRow(method=method, T=T, A=A, snr_db=float(snr), epoch=-1,
                        mean_sum_rate=float(sums.mean()), std_sum_rate=float(sums.std()),
                        pf_value=float(pfs.mean()), seed=spec.seed)
        keyed.append(((method, order[value]), row))
    return [row for _, row in sorted(keyed, key=lambda kr: kr[0])]


def run_convergence(spec: ExperimentSpec) -> list[ResultRow]:
    if spec.axis != "epochs":
        raise ConfigError("converge needs axis=epochs (single-valued users/antennas/snr_db)")
    config = spec.train_config()
    _, trace = qrl.train(config)
    return [ResultRow(method="qrl", T=spec.users, A=spec.antennas, snr_db=float(spec.snr_db),
                      epoch=rec.epoch, mean_sum_rate=rec.validation_sum_rate,
                      std_sum_rate=rec.validation_sum_rate_std, pf_value=rec.validation_reward,
                      seed=spec.seed)
            for rec in trace.records]


# ---------------------------------------------------------------- output

def _cell(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, c)) for c in COLUMNS])
    return buf.getvalue()


def rows_to_json(rows: list[ResultRow], command: str) -> str:
    payload = {"command": command, "columns": list(COLUMNS), "rows": [asdict(r) for r in rows]}
    return json.dumps(payload, indent=1) + "\n"


def write_results(rows: list[ResultRow], path: str | Path, command: str) -> tuple[Path, Path]:
    """Write the CSV and its JSON mirror (same stem, .json suffix)."""
    path = Path(path)
    mirror = path.with_suffix(".json")
    for target, text in ((path, rows_to_csv(rows)), (mirror, rows_to_json(rows, command))):
        try:
            target.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {target}: {exc.strerror or exc}") from exc
    return path, mirror


def with_overrides(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(spec, **kw) if kw else spec
