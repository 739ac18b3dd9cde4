"""Performance-driven scheduling of preference weight vectors.

Workflow: observe (weight vector, score) pairs, fit a degree-p polynomial
surface f over the simplex by ridge-regularized least squares, evaluate f on
a candidate set (Dirichlet draws or a deterministic grid), and turn the
predicted scores into a sampling distribution with an inverse-temperature
softmax, p_j proportional to exp(tau * f(candidate_j)). High tau exploits
the surface's optimum; low tau explores almost uniformly.

The polynomial feature map enumerates all monomials of total degree <= p in
graded order (constant, linears, then quadratics lambda_1^2,
lambda_1*lambda_2, ...), giving C(d+p, p) features in total.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, EmptyCandidatesError, ParseError
from .numerics import softmax
from .simplex import SimplexVector, grid as simplex_grid, sample_dirichlet, validate
from .simplex import DirichletParams

MODEL_FORMAT = "ldpo-perf-model"

# Observation scores above this are assumed to be percentages and divided
# by 100; fractions are the normative scale.
PERCENT_THRESHOLD = 1.5


@dataclass(frozen=True)
class PolyFeatureMap:
    """Monomial basis of total degree <= p over d variables, graded order."""

    d: int
    p: int
    monomials: tuple[tuple[int, ...], ...]

    @classmethod
    def build(cls, d: int, p: int) -> "PolyFeatureMap":
        if d < 1 or p < 1:
            raise ValueError(f"need d >= 1 and p >= 1, got d={d}, p={p}")
        monomials: list[tuple[int, ...]] = [(0,) * d]
        for degree in range(1, p + 1):
            for combo in itertools.combinations_with_replacement(range(d), degree):
                exponents = [0] * d
                for var in combo:
                    exponents[var] += 1
                monomials.append(tuple(exponents))
        assert len(monomials) == math.comb(d + p, p)
        return cls(d=d, p=p, monomials=tuple(monomials))

    @property
    def n_features(self) -> int:
        return len(self.monomials)


def poly_features(fmap: PolyFeatureMap, lam: SimplexVector) -> np.ndarray:
    """Evaluate every monomial at lam; the first entry is always 1."""
    if lam.m != fmap.d:
        raise DimensionMismatchError(f"lambda has {lam.m} entries, feature map expects {fmap.d}")
    w = lam.weights
    return np.array([np.prod(w ** np.array(e)) for e in fmap.monomials])


@dataclass
class PerfModel:
    """Fitted performance surface f(lam) = w . phi(lam)."""

    feature_map: PolyFeatureMap
    w: np.ndarray


@dataclass
class Observation:
    """One training point: a weight vector and its scalar performance."""

    lam: SimplexVector
    y: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.y):
            raise ValueError(f"observation score must be finite, got {self.y!r}")


def fit(observations: list[Observation], fmap: PolyFeatureMap, ridge: float = 1e-8) -> PerfModel:
    """Least-squares fit of the polynomial surface to the observations.

    Minimizes sum_i (w . phi(lam_i) - y_i)^2 + ridge * ||w||^2. With
    ridge > 0 the solution is the unique ridge minimizer (near-minimum-norm
    when the system is underdetermined); ridge = 0 falls back to the exact
    minimum-norm least-squares solution.
    """
    if not observations:
        raise ValueError("need at least one observation")
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    for obs in observations:
        if obs.lam.m != fmap.d:
            raise DimensionMismatchError(f"observation has {obs.lam.m} dims, feature map expects {fmap.d}")
    X = np.vstack([poly_features(fmap, obs.lam) for obs in observations])
    y = np.array([obs.y for obs in observations])
    if ridge == 0.0:
        w, *_ = np.linalg.lstsq(X, y, rcond=None)
    else:
        n = fmap.n_features
        w = np.linalg.solve(X.T @ X + ridge * np.eye(n), X.T @ y)
    return PerfModel(feature_map=fmap, w=w)


def predict(model: PerfModel, lam: SimplexVector) -> float:
    """f(lam) = w . phi(lam)."""
    return float(model.w @ poly_features(model.feature_map, lam))


def build_candidates(
    method: str,
    d: int,
    *,
    resolution: int | None = None,
    alpha: np.ndarray | float | None = None,
    k: int | None = None,
    rng: np.random.Generator | None = None,
) -> list[SimplexVector]:
    """Discrete candidate set over the simplex.

    method="grid": all points at spacing 1/resolution (deterministic).
    method="dirichlet": k independent Dirichlet(alpha) draws from `rng`;
    alpha may be a scalar (symmetric concentration, default 1.0) or a
    length-d vector. Reproducible for a fixed seed.
    """
    if method == "grid":
        if resolution is None:
            raise ValueError("grid method needs a resolution")
        return simplex_grid(d, resolution)
    if method == "dirichlet":
        if k is None or k < 1:
            raise ValueError(f"dirichlet method needs k >= 1, got {k}")
        if rng is None:
            raise ValueError("dirichlet method needs a random generator")
        if alpha is None:
            alpha = 1.0
        alpha_arr = np.full(d, float(alpha)) if np.isscalar(alpha) else np.asarray(alpha, dtype=float)
        params = DirichletParams(alpha_arr)
        if params.m != d:
            raise DimensionMismatchError(f"alpha has {params.m} entries, expected {d}")
        return [sample_dirichlet(params, rng) for _ in range(k)]
    raise ValueError(f"unknown candidate method {method!r}")


@dataclass
class SchedulerDist:
    """Candidates, their predicted scores, and softmax sampling probabilities."""

    candidates: list[SimplexVector]
    scores: np.ndarray
    probs: np.ndarray
    tau: float

    @property
    def k(self) -> int:
        return len(self.candidates)


def scores_to_probs(scores: np.ndarray, tau: float) -> np.ndarray:
    """Softmax of tau-scaled scores; shift-invariant and overflow-safe."""
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise EmptyCandidatesError("need at least one candidate score")
    return softmax(tau * scores)


def make_distribution(model: PerfModel, candidates: list[SimplexVector], tau: float) -> SchedulerDist:
    """Score the candidates under the model and softmax them at inverse temperature tau."""
    if not candidates:
        raise EmptyCandidatesError("need at least one candidate")
    scores = np.array([predict(model, lam) for lam in candidates])
    return SchedulerDist(candidates=list(candidates), scores=scores, probs=scores_to_probs(scores, tau), tau=tau)


def sample(dist: SchedulerDist, rng: np.random.Generator) -> SimplexVector:
    """Draw one candidate according to the scheduling probabilities."""
    j = int(rng.choice(dist.k, p=dist.probs))
    return dist.candidates[j]


# --- file formats -----------------------------------------------------------

def load_observations(path: str | Path) -> list[Observation]:
    """Read an observations CSV with header lambda_1,...,lambda_d,score.

    Scores above 1.5 are interpreted as percentages and divided by 100.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty observations file") from None
        if len(header) < 2 or header[-1].strip() != "score":
            raise ParseError(f"{path}: expected header lambda_1,...,lambda_d,score")
        d = len(header) - 1
        observations = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != d + 1:
                raise ParseError(f"{path}:{lineno}: expected {d + 1} columns, got {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric cell") from exc
            y = values[-1]
            if y > PERCENT_THRESHOLD:
                y /= 100.0
            observations.append(Observation(lam=validate(values[:d]), y=y))
    if not observations:
        raise ParseError(f"{path}: no observation rows")
    return observations


def save_observations(observations: list[Observation], path: str | Path) -> None:
    if not observations:
        raise ValueError("nothing to save")
    d = observations[0].lam.m
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"lambda_{i + 1}" for i in range(d)] + ["score"])
        for obs in observations:
            writer.writerow([repr(float(v)) for v in obs.lam.tolist()] + [repr(float(obs.y))])


def save_model(model: PerfModel, path: str | Path) -> None:
    """Textual model dump; floats use shortest round-trip repr, so reloading is exact."""
    payload = {
        "format": MODEL_FORMAT,
        "version": 1,
        "d": model.feature_map.d,
        "p": model.feature_map.p,
        "monomials": [list(e) for e in model.feature_map.monomials],
        "weights": [float(v) for v in model.w],
    }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load_model(path: str | Path) -> PerfModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc.msg})") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ParseError(f"{path}: not an ldpo performance-model file")
    fmap = PolyFeatureMap(
        d=int(payload["d"]),
        p=int(payload["p"]),
        monomials=tuple(tuple(int(x) for x in e) for e in payload["monomials"]),
    )
    w = np.array(payload["weights"], dtype=float)
    if w.shape != (fmap.n_features,):
        raise ParseError(f"{path}: weight count {w.size} != feature count {fmap.n_features}")
    return PerfModel(feature_map=fmap, w=w)
