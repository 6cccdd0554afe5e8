"""Grid search with chronological cross-validation, scored by RMSE."""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from tickforge import gbtree
from tickforge.errors import TickforgeError, ValidationError
from tickforge.eval_report import rmse
from tickforge.features import fit_scaler, transform
from tickforge.gbtree import Hyperparams
from tickforge.rng import XorShift64Star, derive_seed

log = logging.getLogger(__name__)

# Enumeration order follows the parameter table: N, eta, D_max, W_min, S, C, gamma, alpha, lambda.
GRID_KEYS = (
    "n_trees",
    "learning_rate",
    "max_depth",
    "min_child_weight",
    "subsample",
    "colsample",
    "gamma",
    "reg_alpha",
    "reg_lambda",
)
LEADERBOARD_COLUMNS = ("rank", "N", "eta", "D_max", "W_min", "S", "C", "gamma", "alpha", "lambda",
                       "mean_cv_rmse")
_SHORT = dict(zip(GRID_KEYS, LEADERBOARD_COLUMNS[1:-1]))


@dataclass(frozen=True)
class ParamGrid:
    values: dict[str, tuple]

    def __post_init__(self):
        unknown = set(self.values) - set(GRID_KEYS)
        if unknown:
            raise ValidationError(f"unknown grid key(s): {', '.join(sorted(unknown))}")
        for k, v in self.values.items():
            if len(v) == 0:
                raise ValidationError(f"grid entry {k!r} has no candidate values")
        self.candidates()  # Hyperparams rejects out-of-bounds values

    def candidates(self, seed: int = 42) -> list[Hyperparams]:
        keys = [k for k in GRID_KEYS if k in self.values]
        out = []
        for combo in itertools.product(*(self.values[k] for k in keys)):
            out.append(Hyperparams.from_dict(dict(zip(keys, combo)), seed=seed))
        return out

    def __len__(self) -> int:
        return math.prod(len(v) for v in self.values.values())

    @classmethod
    def from_json(cls, text: str | bytes) -> ParamGrid:
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"grid file is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ValidationError("grid file must hold an object of name -> list of values")
        d = {_LONG.get(k, k): v for k, v in d.items()}
        return cls({k: tuple(v if isinstance(v, list) else [v]) for k, v in d.items()})


_LONG = {v: k for k, v in _SHORT.items()}


def reference_grid() -> ParamGrid:
    return ParamGrid({
        "n_trees": (300, 400),
        "learning_rate": (0.01, 0.1, 0.2),
        "max_depth": (3, 4),
        "min_child_weight": (1.0, 3.0),
        "subsample": (0.8, 1.0),
        "colsample": (0.8, 1.0),
        "gamma": (0.0, 0.1),
        "reg_alpha": (0.5, 1.0),
        "reg_lambda": (0.5, 1.0),
    })


@dataclass(frozen=True)
class Fold:
    train: np.ndarray
    val: np.ndarray


@dataclass(frozen=True)
class CvPlan:
    k: int
    folds: tuple[Fold, ...]
    style: str = "expanding"


def make_cv_plan(m_train: int, k: int = 3) -> CvPlan:
    """Expanding-window folds over ``k + 1`` contiguous blocks.

    Blocks have ``m_train // (k + 1)`` rows, the last one also takes the
    remainder. Tiny plans are allowed; a fold whose training block is too
    small to fit shows up as a failed candidate in :func:`grid_search`. Fold ``i`` trains on blocks ``0..i-1`` and validates on block ``i``.
    """
    if int(k) != k or k < 2:
        raise ValidationError(f"cv k must be an integer >= 2, got {k!r}")
    if m_train < k + 1:
        raise ValidationError(f"{m_train} training rows too few for {k} expanding folds "
                              f"(need {k + 1})")
    size = m_train // (k + 1)
    bounds = [size * i for i in range(k + 1)] + [m_train]
    folds = tuple(Fold(np.arange(0, bounds[i]), np.arange(bounds[i], bounds[i + 1]))
                  for i in range(1, k + 1))
    return CvPlan(k, folds)


def make_shuffled_plan(m_train: int, k: int, seed: int = 42) -> CvPlan:
    """Classic shuffled k-fold. Leaks future rows into training; for comparison only."""
    if int(k) != k or k < 2:
        raise ValidationError(f"cv k must be an integer >= 2, got {k!r}")
    if m_train < 2 * k:
        raise ValidationError(f"{m_train} training rows too few for {k} shuffled folds")
    rng = XorShift64Star(seed)
    perm = list(range(m_train))
    for i in range(m_train - 1, 0, -1):
        j = rng.randbelow(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    parts = np.array_split(np.asarray(perm), k)
    folds = []
    for i in range(k):
        val = np.sort(parts[i])
        train = np.sort(np.concatenate([parts[j] for j in range(k) if j != i]))
        folds.append(Fold(train, val))
    return CvPlan(k, tuple(folds), style="shuffled")


@dataclass(frozen=True)
class TuneResult:
    best_params: Hyperparams
    best_rmse: float
    leaderboard: tuple[tuple[Hyperparams, float], ...]
    failures: tuple[tuple[int, str], ...] = field(default=())


def cv_score(X, y, hp: Hyperparams, plan: CvPlan) -> float:
    """Mean validation RMSE, re-fitting the scaler on each fold's training rows."""
    scores = []
    for fold in plan.folds:
        scaler = fit_scaler(X[fold.train])
        model = gbtree.fit(transform(X[fold.train], scaler), y[fold.train], hp)
        pred = gbtree.predict(model, transform(X[fold.val], scaler))
        scores.append(rmse(y[fold.val], pred))
    return float(np.mean(scores))


def _evaluate(args):
    i, X, y, hp, plan = args
    try:
        return i, cv_score(X, y, hp, plan), None
    except (TickforgeError, ValueError, FloatingPointError) as exc:
        return i, None, f"{type(exc).__name__}: {exc}"


def candidate_params(grid: ParamGrid, seed: int = 42) -> list[Hyperparams]:
    """Grid candidates in canonical order, each with its own derived seed."""
    return [replace(hp, seed=derive_seed(seed, i)) for i, hp in enumerate(grid.candidates(seed))]


def grid_search(X_train, y_train, grid: ParamGrid, plan: CvPlan, seed: int = 42,
                jobs: int = 1) -> TuneResult:
    """Score every candidate and rank by mean CV RMSE (ties keep grid order).

    Failing candidates are logged and left off the leaderboard. ``jobs``
    only changes how many worker processes run; results are merged by
    candidate index.
    """
    X = np.asarray(X_train, dtype=float)
    y = np.asarray(y_train, dtype=float)
    if len(X) != len(y):
        raise ValidationError(f"{len(X)} rows but {len(y)} targets")
    last = max(int(f.val.max()) for f in plan.folds)
    if last >= len(X):
        raise ValidationError(f"cv plan indexes row {last} but only {len(X)} rows given")
    cands = candidate_params(grid, seed)
    tasks = [(i, X, y, hp, plan) for i, hp in enumerate(cands)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate, tasks, chunksize=1))
    else:
        results = [_evaluate(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    scored, failures = [], []
    for i, score, err in results:
        if err is None:
            scored.append((i, score))
        else:
            log.warning("candidate %d failed: %s", i, err)
            failures.append((i, err))
    if not scored:
        raise ValidationError("every grid candidate failed; see failures")
    scored.sort(key=lambda r: (r[1], r[0]))
    board = tuple((cands[i], s) for i, s in scored)
    return TuneResult(board[0][0], board[0][1], board, tuple(failures))


def leaderboard_csv(result: TuneResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEADERBOARD_COLUMNS)
    for rank, (hp, score) in enumerate(result.leaderboard, start=1):
        w.writerow([rank, *(repr(getattr(hp, k)) for k in GRID_KEYS), repr(score)])
    return buf.getvalue()
