"""Data generators for the null and alternative designs and a Monte Carlo size/power runner.

Innovations are drawn time-major, as a (T, p) block whose row t is z_t,
so that designs sharing a stream share their innovations: VMA(1) with
a = 0 and VAR(1) with a = 0 reproduce the null path exactly.  Extra
draws (z_0 for VMA, burn-in for VAR) come after the first T rows.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .classical import PortmanteauInput, hosking, li_mcleod
from .core import SpectralConstants, TEST_NAMES, TimeSeriesMatrix, test_gq1, test_gq1_star, test_gq_known_sigma
from .errors import DomainError, HDWNoiseError, NonstationaryError
from .nu4 import SplitConfig, estimate_nu4
from .rng import stream

VAR_BURN_IN = 200
# RNG namespaces; nu4 calibration and splits use 0 and 1
_NS_MATRIX = 2
_NS_REPLICATE = 3

INNOVATIONS = {"GaussianI": 3.0, "GammaII": 4.5, "Rademacher": 1.0, "ComplexGaussian": 2.0}
COVARIANCES = ("IdentityIII", "RandomUniformIV")
ALTERNATIVES = ("Null", "VAR1", "VMA1_V", "VMA1_VI")


def nearest_int(x: float) -> int:
    """Closest integer with halves rounded up."""
    return int(math.floor(x + 0.5))


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric square root, negative eigenvalues clipped at zero."""
    w, V = np.linalg.eigh((M + M.T) / 2)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


@lru_cache(maxsize=64)
def _uniform_sqrt(p: int, seed: int, cols: int, tag: int) -> np.ndarray:
    rng = stream(seed, _NS_MATRIX, tag, p, cols)
    E = rng.uniform(-1.0, 1.0, size=(p, cols))
    out = psd_sqrt(4.0 / p * E @ E.T)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModelSpec:
    innovation: str = "GaussianI"
    covariance: str = "IdentityIII"
    alternative: str = "Null"
    a: float = 0.0
    r: float = 0.0
    cov_seed: int = 0
    alt_seed: int = 0

    def __post_init__(self):
        if self.innovation not in INNOVATIONS:
            raise DomainError(f"unknown innovation {self.innovation!r}")
        if self.covariance not in COVARIANCES:
            raise DomainError(f"unknown covariance {self.covariance!r}")
        if self.alternative not in ALTERNATIVES:
            raise DomainError(f"unknown alternative {self.alternative!r}")
        if self.alternative == "VAR1" and not abs(self.a) < 1:
            raise NonstationaryError(f"VAR(1) needs |a| < 1, got a={self.a}")
        if self.alternative == "VMA1_VI" and not self.r >= 0:
            raise DomainError("r must be nonnegative")

    @property
    def nu4(self) -> float:
        return INNOVATIONS[self.innovation]

    @property
    def is_complex(self) -> bool:
        return self.innovation == "ComplexGaussian"

    def sigma_sqrt(self, p: int) -> np.ndarray | None:
        """Sigma_0^{1/2}, or None for the identity."""
        if self.covariance == "IdentityIII":
            return None
        return _uniform_sqrt(p, self.cov_seed, p, 0)

    def sigma0(self, p: int) -> np.ndarray:
        R = self.sigma_sqrt(p)
        return np.eye(p) if R is None else R @ R

    def marginal_cov(self, p: int) -> np.ndarray:
        """Population Cov(x_t); equals Sigma_0 under the null."""
        S = self.sigma0(p)
        if self.alternative == "VAR1":
            return S / (1.0 - self.a**2)
        if self.alternative in ("VMA1_V", "VMA1_VI"):
            A1 = self.a1(p)
            return S + A1 @ A1.T
        return S

    def a1(self, p: int) -> np.ndarray:
        if self.alternative == "VMA1_V":
            return self.a * np.eye(p)
        if self.alternative == "VMA1_VI":
            d = max(1, nearest_int(p * self.r))
            return _uniform_sqrt(p, self.alt_seed, d, 1)
        raise DomainError("a1 is defined for VMA(1) alternatives only")

    def label(self) -> str:
        parts = [self.innovation, self.covariance, self.alternative]
        if self.alternative in ("VAR1", "VMA1_V"):
            parts.append(f"a={self.a:g}")
        elif self.alternative == "VMA1_VI":
            parts.append(f"r={self.r:g}")
        return "/".join(parts)


def _innovations(innovation: str, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
    if innovation == "GaussianI":
        return rng.standard_normal((n, p))
    if innovation == "GammaII":
        return rng.gamma(4.0, 0.5, size=(n, p)) - 2.0
    if innovation == "Rademacher":
        return rng.integers(0, 2, size=(n, p)).astype(float) * 2.0 - 1.0
    if innovation == "ComplexGaussian":
        z = rng.standard_normal((n, p, 2))
        return (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)
    raise DomainError(f"unknown innovation {innovation!r}")


def generate(model: ModelSpec, p: int, T: int, rng: np.random.Generator) -> TimeSeriesMatrix:
    """One p x T path from the model."""
    if p < 1 or T < 2:
        raise DomainError(f"need p >= 1 and T >= 2, got p={p}, T={T}")
    alt = model.alternative
    extra = {"Null": 0, "VAR1": VAR_BURN_IN, "VMA1_V": 1, "VMA1_VI": 1}[alt]
    Z = _innovations(model.innovation, rng, T + extra, p)
    R = model.sigma_sqrt(p)

    def scale(Y):
        return Y if R is None else Y @ R.T

    if alt == "Null":
        Y = scale(Z)
    elif alt == "VAR1":
        y = np.zeros(p, dtype=Z.dtype)
        for t in range(T, T + VAR_BURN_IN):
            y = model.a * y + Z[t]
        Y = np.empty_like(Z[:T])
        for t in range(T):
            y = model.a * y + Z[t]
            Y[t] = y
        Y = scale(Y)
    else:
        # x_t = Sigma^{1/2} z_t + A1 z_{t-1}; z_0 is the last row
        A1 = model.a1(p)
        lagged = np.vstack([Z[T:T + 1], Z[:T - 1]])
        Y = scale(Z[:T]) + lagged @ A1.T
    return TimeSeriesMatrix(np.ascontiguousarray(Y.T))


@dataclass(frozen=True)
class Cell:
    p: int
    T: int
    q: int
    model: ModelSpec = ModelSpec()


@dataclass
class SimulationPlan:
    grid: list[Cell]
    replicates: int = 2000
    alpha: float = 0.05
    tests: tuple = ("Gq", "Gq1")
    seed: int = 0
    threads: int | None = None
    nu4_source: str = "estimate"
    nu4_config: SplitConfig = field(default_factory=SplitConfig)

    def __post_init__(self):
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        bad = [t for t in self.tests if t not in TEST_NAMES]
        if bad:
            raise DomainError(f"unknown tests {bad}")
        if self.nu4_source not in ("estimate", "true"):
            raise DomainError("nu4_source must be 'estimate' or 'true'")

    def resolved_threads(self) -> int:
        if self.threads:
            return max(1, int(self.threads))
        env = os.environ.get("HDWNOISE_THREADS")
        return max(1, int(env)) if env else (os.cpu_count() or 1)


ROW_FIELDS = ("cell", "p", "T", "q", "model", "a", "r", "test", "status", "rejection_rate", "mc_se",
              "replicates", "errors", "wall_time", "note")


@dataclass
class SimulationTable:
    rows: list[dict]
    config: dict = field(default_factory=dict)

    def lookup(self, p: int, T: int, q: int, test: str, model: str | None = None) -> dict:
        for r in self.rows:
            if (r["p"], r["T"], r["q"], r["test"]) == (p, T, q, test) and (model is None or r["model"] == model):
                return r
        raise KeyError((p, T, q, test, model))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=ROW_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(r)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "rows": self.rows}, indent=2)

    def curve_csv(self, x: str = "a") -> str:
        """Wide table with one line per model parameter and one power column per test."""
        if x not in ("a", "r"):
            raise DomainError("curve axis must be 'a' or 'r'")
        tests = list(dict.fromkeys(r["test"] for r in self.rows))
        lines: dict[tuple, dict] = {}
        for r in self.rows:
            key = (r["p"], r["T"], r["q"], r[x])
            lines.setdefault(key, {"p": r["p"], "T": r["T"], "q": r["q"], x: r[x]})
            lines[key][r["test"]] = r["rejection_rate"]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["p", "T", "q", x, *tests], lineterminator="\n")
        w.writeheader()
        for row in lines.values():
            w.writerow(row)
        return buf.getvalue()


def _feasibility(cell: Cell, test: str, plan: SimulationPlan) -> str | None:
    p, T, q, m = cell.p, cell.T, cell.q, cell.model
    if not 1 <= q < T:
        return "q must lie in [1, T)"
    if m.is_complex and test != "Gq":
        return f"{test} is real-only"
    if test in ("Hosking", "LiMcLeod") and p >= T:
        return "C0 is singular when p >= T"
    if test == "Gq1Star" and plan.nu4_source == "estimate" and 2 * p >= T:
        return "nu4 estimation needs p < T/2"
    return None


def _replicate(cell: Cell, tests: list[str], plan: SimulationPlan, constants, key) -> list[int]:
    """Per-test outcome: 1 reject, 0 accept, -1 error."""
    x = generate(cell.model, cell.p, cell.T, stream(plan.seed, _NS_REPLICATE, *key))
    out = []
    nu4 = None
    for test in tests:
        try:
            if test == "Gq":
                rep = test_gq_known_sigma(x, cell.q, plan.alpha, constants)
            elif test == "Gq1":
                rep = test_gq1(x, cell.q, plan.alpha)
            elif test == "Gq1Star":
                if nu4 is None:
                    nu4 = (cell.model.nu4 if plan.nu4_source == "true"
                           else estimate_nu4(x, plan.nu4_config).nu4_hat)
                rep = test_gq1_star(x, cell.q, plan.alpha, nu4)
            elif test == "Hosking":
                rep = hosking(PortmanteauInput(x, cell.q), plan.alpha)
            else:
                rep = li_mcleod(PortmanteauInput(x, cell.q), plan.alpha)
            out.append(int(rep.reject))
        except HDWNoiseError:
            out.append(-1)
    return out


def run(plan: SimulationPlan) -> SimulationTable:
    """Rejection rates for every cell and test; deterministic in the seed at any thread count."""
    threads = plan.resolved_threads()
    rows = []
    for ci, cell in enumerate(plan.grid):
        skipped = {t: _feasibility(cell, t, plan) for t in plan.tests}
        active = [t for t in plan.tests if skipped[t] is None]
        tallies = np.zeros((len(active), 3), dtype=np.int64)  # reject, accept, error
        t0 = time.perf_counter()
        if active:
            constants = SpectralConstants.from_sigma(cell.model.marginal_cov(cell.p), cell.T, cell.model.nu4)

            def task(r, ci=ci, cell=cell, constants=constants):
                return _replicate(cell, active, plan, constants, (ci, r))

            if threads > 1:
                with ThreadPoolExecutor(threads) as ex:
                    results = list(ex.map(task, range(plan.replicates)))
            else:
                results = [task(r) for r in range(plan.replicates)]
            for res in results:
                for j, o in enumerate(res):
                    tallies[j, {1: 0, 0: 1, -1: 2}[o]] += 1
        wall = time.perf_counter() - t0
        base = {"cell": ci, "p": cell.p, "T": cell.T, "q": cell.q, "model": cell.model.label(),
                "a": cell.model.a, "r": cell.model.r}
        for test in plan.tests:
            if skipped[test] is not None:
                rows.append({**base, "test": test, "status": "skipped", "rejection_rate": None,
                             "mc_se": None, "replicates": 0, "errors": 0, "wall_time": 0.0,
                             "note": skipped[test]})
                continue
            rej, acc, err = (int(v) for v in tallies[active.index(test)])
            n = rej + acc
            rate = rej / n if n else None
            se = math.sqrt(rate * (1 - rate) / n) if n else None
            rows.append({**base, "test": test, "status": "ok" if n else "failed",
                         "rejection_rate": rate, "mc_se": se, "replicates": n, "errors": err,
                         "wall_time": wall, "note": ""})
    return SimulationTable(rows, plan_to_dict(plan))


def plan_to_dict(plan: SimulationPlan) -> dict:
    d = {
        "grid": [{"p": c.p, "T": c.T, "q": c.q, "model": asdict(c.model)} for c in plan.grid],
        "replicates": plan.replicates, "alpha": plan.alpha, "tests": list(plan.tests),
        "seed": plan.seed, "threads": plan.threads, "nu4_source": plan.nu4_source,
        "nu4_config": asdict(plan.nu4_config),
    }
    d["nu4_config"]["test_functions"] = [list(t) for t in plan.nu4_config.test_functions]
    return d


def plan_from_dict(d: dict) -> SimulationPlan:
    """Build a plan from a config mapping.

    ``grid`` entries carry p, T, q and an optional ``model`` mapping with
    the ModelSpec fields; list-valued p, T, q, a or r expand into a
    Cartesian product.
    """
    known = {"grid", "replicates", "alpha", "tests", "seed", "threads", "nu4_source", "nu4_config"}
    extra = set(d) - known
    if extra:
        raise DomainError(f"unknown plan keys {sorted(extra)}")
    cells = []
    for g in d.get("grid", []):
        model = dict(g.get("model", {}))
        axes = {k: g[k] if isinstance(g[k], list) else [g[k]] for k in ("p", "T", "q") if k in g}
        if set(axes) != {"p", "T", "q"}:
            raise DomainError("each grid entry needs p, T and q")
        for k in ("a", "r"):
            if isinstance(model.get(k), list):
                axes[k] = model.pop(k)
        names = list(axes)
        for combo in np.array(np.meshgrid(*[np.arange(len(axes[n])) for n in names], indexing="ij")).reshape(len(names), -1).T:
            vals = {n: axes[n][i] for n, i in zip(names, combo)}
            try:
                m = ModelSpec(**{**model, **{k: float(vals[k]) for k in ("a", "r") if k in vals}})
            except TypeError as e:
                raise DomainError(f"bad model entry: {e}") from None
            cells.append(Cell(int(vals["p"]), int(vals["T"]), int(vals["q"]), m))
    if not cells:
        raise DomainError("plan grid is empty")
    try:
        nu4_cfg = SplitConfig(**d.get("nu4_config", {}))
    except TypeError as e:
        raise DomainError(f"bad nu4_config: {e}") from None
    return SimulationPlan(
        grid=cells,
        replicates=int(d.get("replicates", 2000)),
        alpha=float(d.get("alpha", 0.05)),
        tests=tuple(d.get("tests", ("Gq", "Gq1"))),
        seed=int(d.get("seed", 0)),
        threads=d.get("threads"),
        nu4_source=d.get("nu4_source", "estimate"),
        nu4_config=nu4_cfg,
    )
