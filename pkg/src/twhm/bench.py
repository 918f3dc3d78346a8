"""Parameter settings, error metrics and the simulation-study drivers.

Each driver returns plain row dictionaries (one per replication) so the CLI
can dump them to CSV; ``summarise`` collapses them into mean/sd rows.
Replications draw their seeds from ``SeedSequence([seed, rep])`` and may run
in worker processes (``TWHM_THREADS``); results are reassembled in
replication order.
"""
from __future__ import annotations

import math
import os
import re
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import expit
from scipy.stats import kstwobign

from .estimation import EstimationError, SolverOptions, fit, fit_mle, fit_mme, fit_static_beta_model
from .forecast import PredictionConfig, predict_degrees, predict_links, prediction_accuracy, select_omega
from .model import ParamVector, SnapshotSeries, expected_density, pair_index
from .objective import expected_hessian, hessian, smallest_eigenvalue, eigen_sign, sufficient_stats
from .simulate import SimConfig, simulate

KS_LEVEL = 0.05


# ------------------------------------------------------------------ settings


@dataclass(frozen=True)
class ParamSetting:
    """One block of parameters: ``const`` {a}, ``twoblock`` {a, b}, ``linear`` L(a, b) or ``uniform`` U(a, b).

    ``linear`` follows ``a + (a - b)(i - 1)/(p - 1)``; with ``corrected`` it is
    ``a + (b - a)(i - 1)/(p - 1)``, which spans ``[a, b]``.
    """

    kind: str
    a: float
    b: float = 0.0
    frac: float = 0.10
    corrected: bool = False

    def __post_init__(self):
        if self.kind not in ("const", "twoblock", "linear", "uniform"):
            raise ValueError(f"unknown setting kind {self.kind!r}")
        if self.kind == "uniform" and not self.a <= self.b:
            raise ValueError("uniform setting needs a <= b")
        if not 0.0 <= self.frac <= 1.0:
            raise ValueError("frac must lie in [0, 1]")

    def values(self, p: int, rng: np.random.Generator | None = None) -> np.ndarray:
        if self.kind == "const":
            return np.full(p, float(self.a))
        if self.kind == "twoblock":
            out = np.full(p, float(self.b))
            out[: int(math.floor(self.frac * p))] = self.a
            return out
        if self.kind == "linear":
            k = np.arange(p) / (p - 1)
            slope = (self.b - self.a) if self.corrected else (self.a - self.b)
            return self.a + slope * k
        if rng is None:
            raise ValueError("uniform setting needs a random generator")
        return rng.uniform(self.a, self.b, size=p)

    def label(self) -> str:
        if self.kind == "const":
            return f"{{{self.a:g}}}"
        if self.kind == "twoblock":
            return f"{{{self.a:g},{self.b:g}}}"
        if self.kind == "linear":
            return f"L({self.a:g},{self.b:g}){'c' if self.corrected else ''}"
        return f"U({self.a:g},{self.b:g})"

    def spec(self) -> str:
        """Inverse of :func:`parse_setting`."""
        if self.kind == "const":
            return f"const:{self.a!r}"
        tail = ",corrected" if self.kind == "linear" and self.corrected else ""
        return f"{self.kind}:{self.a!r},{self.b!r}{tail}"


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def parse_setting(spec: str) -> ParamSetting:
    """Parse ``const:<a>`` (or ``const<a>``), ``twoblock:<a>,<b>``,
    ``linear:<a>,<b>[,corrected]`` or ``uniform:<a>,<b>``."""
    spec = spec.strip()
    m = re.fullmatch(rf"const:?({_NUM})", spec)
    if m:
        return ParamSetting("const", float(m.group(1)))
    m = re.fullmatch(rf"(twoblock|linear|uniform):({_NUM}),({_NUM})(,corrected)?", spec)
    if not m or (m.group(4) and m.group(1) != "linear"):
        raise ValueError(f"bad setting spec {spec!r}")
    return ParamSetting(m.group(1), float(m.group(2)), float(m.group(3)), corrected=bool(m.group(4)))


def parse_setting_pair(spec: str) -> tuple[ParamSetting, ParamSetting]:
    """``<beta0 spec>[/<beta1 spec>]``; the dynamic block defaults to ``const:0``."""
    parts = spec.split("/")
    if len(parts) > 2:
        raise ValueError(f"bad setting spec {spec!r}")
    s0 = parse_setting(parts[0])
    s1 = parse_setting(parts[1]) if len(parts) == 2 else ParamSetting("const", 0.0)
    return s0, s1


def generate_setting(setting0: ParamSetting, setting1: ParamSetting, p: int, seed: int = 0) -> ParamVector:
    rng0 = np.random.default_rng([seed, 0])
    rng1 = np.random.default_rng([seed, 1])
    return ParamVector(setting0.values(p, rng0), setting1.values(p, rng1))


def linear_variant_by_density(p: int = 200) -> bool:
    """Pick the Linear formula whose L(-4, 0) density is closest to the sparse target 0.05.

    Returns True for the ``[a, b]``-spanning variant.
    """
    target = 0.05
    dens = {}
    for corrected in (False, True):
        th = generate_setting(ParamSetting("linear", -4, 0, corrected=corrected), ParamSetting("const", 0), p)
        dens[corrected] = expected_density(th)
    return abs(dens[True] - target) < abs(dens[False] - target)


# ------------------------------------------------------------------ metrics


def error_metrics(theta_hat: ParamVector, theta_true: ParamVector) -> dict[str, float]:
    """Estimation errors; ``l2`` is ``||.||_2 / sqrt(p)`` over the full 2p-vector."""
    p = theta_true.p
    e = theta_hat.flat() - theta_true.flat()
    e0, e1 = e[:p], e[p:]
    return {
        "l2": float(np.linalg.norm(e) / math.sqrt(p)),
        "l2_2p": float(np.linalg.norm(e) / math.sqrt(2 * p)),
        "linf": float(np.abs(e).max()),
        "b0_l2": float(np.linalg.norm(e0) / math.sqrt(p)),
        "b0_linf": float(np.abs(e0).max()),
        "b1_l2": float(np.linalg.norm(e1) / math.sqrt(p)),
        "b1_linf": float(np.abs(e1).max()),
    }


ERROR_KEYS = ("l2", "l2_2p", "linf", "b0_l2", "b0_linf", "b1_l2", "b1_linf")


@dataclass
class ErrorReport:
    """Per-replication errors of one estimator plus their aggregates."""

    method: str
    per_rep: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_rows(cls, method: str, rows: Sequence[dict[str, float]]) -> "ErrorReport":
        return cls(method, {k: np.array([r[k] for r in rows]) for k in ERROR_KEYS})

    @property
    def reps(self) -> int:
        return len(self.per_rep["l2"])

    def mean(self, key: str) -> float:
        return float(self.per_rep[key].mean())

    def sd(self, key: str) -> float:
        v = self.per_rep[key]
        return float(v.std(ddof=1)) if v.size > 1 else 0.0

    @property
    def l2_per_sqrtp(self) -> float:
        return self.mean("l2")

    @property
    def linf(self) -> float:
        return self.mean("linf")


# --------------------------------------------------------------- replication


def rep_seeds(seed: int, rep: int, k: int = 2) -> list[int]:
    return [int(s) for s in np.random.SeedSequence([seed, rep]).generate_state(k, np.uint64)]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("TWHM_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def map_reps(fn: Callable[[int], dict], reps: Iterable[int]) -> list[dict]:
    reps = list(reps)
    workers = min(_workers(), len(reps))
    if workers <= 1:
        return [fn(r) for r in reps]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, reps))


class BenchmarkError(RuntimeError):
    pass


@dataclass(frozen=True)
class _ErrorRep:
    setting0: ParamSetting
    setting1: ParamSetting
    n: int
    p: int
    seed: int
    lam: float | None
    opts: SolverOptions

    def __call__(self, rep: int) -> dict:
        s_theta, s_sim = rep_seeds(self.seed, rep)
        theta = generate_setting(self.setting0, self.setting1, self.p, s_theta)
        series = simulate(SimConfig(theta, self.n, s_sim))
        stats = sufficient_stats(series)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                mme, mle = fit(stats, self.lam, self.opts)
        except EstimationError as exc:
            raise BenchmarkError(f"replication {rep}: {exc}") from exc
        row = {"rep": rep, "converged": mle.converged, "iterations": mle.iterations}
        row.update({f"mme_{k}": v for k, v in error_metrics(mme, theta).items()})
        row.update({f"mle_{k}": v for k, v in error_metrics(mle.theta_hat, theta).items()})
        return row


def error_benchmark_rows(setting0, setting1, n, p, reps, seed=0, lam=None, opts=None) -> list[dict]:
    if reps < 1:
        raise ValueError("reps must be >= 1")
    job = _ErrorRep(setting0, setting1, n, p, seed, lam, opts or SolverOptions())
    return map_reps(job, range(reps))


def run_error_benchmark(
    setting0: ParamSetting,
    setting1: ParamSetting,
    n: int,
    p: int,
    reps: int,
    seed: int = 0,
    lam: float | None = None,
    opts: SolverOptions | None = None,
) -> tuple[ErrorReport, ErrorReport, list[dict]]:
    """Draw, simulate and fit ``reps`` times; returns the MME and MLE reports and raw rows."""
    rows = error_benchmark_rows(setting0, setting1, n, p, reps, seed, lam, opts)
    mme = ErrorReport.from_rows("MME", [{k: r[f"mme_{k}"] for k in ERROR_KEYS} for r in rows])
    mle = ErrorReport.from_rows("MLE", [{k: r[f"mle_{k}"] for k in ERROR_KEYS} for r in rows])
    return mme, mle, rows


# ------------------------------------------------------------- convexity table


TABLE1_VALUES = (0.2, 0.5, 1.0)

# (point, hessian) -> {(beta0*, beta1*): sign}
TABLE1_PAPER = {
    ("truth", "sample"): {(a, b): "+" for a in TABLE1_VALUES for b in TABLE1_VALUES},
    ("truth", "expected"): {(a, b): "+" for a in TABLE1_VALUES for b in TABLE1_VALUES},
    ("zero", "sample"): {
        (0.2, 0.2): "+", (0.5, 0.2): "+", (1.0, 0.2): "-",
        (0.2, 0.5): "-", (0.5, 0.5): "-", (1.0, 0.5): "-",
        (0.2, 1.0): "-", (0.5, 1.0): "-", (1.0, 1.0): "-",
    },
    ("zero", "expected"): {
        (0.2, 0.2): "+", (0.5, 0.2): "+", (1.0, 0.2): "-",
        (0.2, 0.5): "+", (0.5, 0.5): "+", (1.0, 0.5): "-",
        (0.2, 1.0): "-", (0.5, 1.0): "-", (1.0, 1.0): "-",
    },
}


def convexity_cell(b0: float, b1: float, p: int, n: int, reps: int, seed: int = 0, points=("truth", "zero")) -> list[dict]:
    """Smallest Hessian eigenvalues for one ``(beta0*, beta1*)`` constant cell.

    Sample Hessians get one row per replication; the expected Hessian is
    deterministic and is reported once with ``rep = -1``.
    """
    truth = ParamVector(np.full(p, b0), np.full(p, b1))
    evals = {"truth": truth, "zero": ParamVector.zeros(p)}
    rows = []
    for point in points:
        lam = smallest_eigenvalue(expected_hessian(evals[point], truth, n))
        rows.append(dict(beta0=b0, beta1=b1, point=point, hessian="expected", rep=-1, lambda_min=lam, sign=eigen_sign(lam)))
    for rep in range(reps):
        (s_sim,) = rep_seeds(seed, rep, 1)
        stats = sufficient_stats(simulate(SimConfig(truth, n, s_sim)))
        for point in points:
            lam = smallest_eigenvalue(hessian(evals[point], stats))
            rows.append(dict(beta0=b0, beta1=b1, point=point, hessian="sample", rep=rep, lambda_min=lam, sign=eigen_sign(lam)))
    return rows


def table1_rows(p: int = 1000, n: int = 2, reps: int = 20, seed: int = 0) -> list[dict]:
    rows = []
    for b1 in TABLE1_VALUES:
        for b0 in TABLE1_VALUES:
            rows.extend(convexity_cell(b0, b1, p, n, reps, seed))
    return rows


def table1_summary(rows: list[dict]) -> list[dict]:
    out = []
    keys = sorted({(r["point"], r["hessian"], r["beta0"], r["beta1"]) for r in rows})
    for point, kind, b0, b1 in keys:
        signs = [r["sign"] for r in rows if (r["point"], r["hessian"], r["beta0"], r["beta1"]) == (point, kind, b0, b1)]
        m = len(signs)
        out.append(dict(
            point=point, hessian=kind, beta0=b0, beta1=b1, count=m,
            frac_pos=signs.count("+") / m, frac_neg=signs.count("-") / m, frac_indeterminate=signs.count("0") / m,
            paper_sign=TABLE1_PAPER[(point, kind)][(b0, b1)],
        ))
    return out


# ------------------------------------------------------------- error tables


_C0 = ParamSetting("const", 0.0)

# rows: (n, p, beta0, beta1, paper (MME l2, MME linf, MLE l2, MLE linf))
TABLE2_ROWS = [
    (20, 200, ParamSetting("const", 0), _C0, (0.074, 0.219, 0.071, 0.212)),
    (50, 200, ParamSetting("const", 0), _C0, (0.046, 0.138, 0.045, 0.136)),
    (20, 500, ParamSetting("const", 0), _C0, (0.046, 0.150, 0.045, 0.146)),
    (50, 500, ParamSetting("const", 0), _C0, (0.029, 0.093, 0.028, 0.092)),
    (20, 200, ParamSetting("twoblock", 0.5, -0.5), _C0, (0.092, 0.222, 0.091, 0.217)),
    (50, 200, ParamSetting("twoblock", 0.5, -0.5), _C0, (0.058, 0.140, 0.058, 0.139)),
    (20, 500, ParamSetting("twoblock", 0.5, -0.5), _C0, (0.058, 0.154, 0.057, 0.148)),
    (50, 500, ParamSetting("twoblock", 0.5, -0.5), _C0, (0.036, 0.095, 0.036, 0.093)),
    (20, 200, ParamSetting("twoblock", 1, -1), _C0, (0.120, 0.305, 0.117, 0.284)),
    (50, 200, ParamSetting("twoblock", 1, -1), _C0, (0.074, 0.186, 0.074, 0.177)),
    (20, 500, ParamSetting("twoblock", 1, -1), _C0, (0.075, 0.200, 0.073, 0.190)),
    (50, 500, ParamSetting("twoblock", 1, -1), _C0, (0.038, 0.125, 0.036, 0.119)),
    (20, 200, ParamSetting("twoblock", 1.5, -1.5), _C0, (0.164, 0.436, 0.156, 0.397)),
    (50, 200, ParamSetting("twoblock", 1.5, -1.5), _C0, (0.102, 0.255, 0.097, 0.236)),
    (20, 500, ParamSetting("twoblock", 1.5, -1.5), _C0, (0.103, 0.287, 0.097, 0.262)),
    (50, 500, ParamSetting("twoblock", 1.5, -1.5), _C0, (0.065, 0.178, 0.061, 0.164)),
]


def _table3_rows(corrected: bool):
    L = lambda a, b: ParamSetting("linear", a, b, corrected=corrected)  # noqa: E731
    U = lambda a, b: ParamSetting("uniform", a, b)  # noqa: E731
    blocks = [
        (L(-4, 0), U(-1, 1), [(0.419, 1.833, 0.392, 1.8), (0.253, 0.913, 0.227, 0.82), (0.246, 1.119, 0.218, 0.9), (0.170, 0.626, 0.148, 0.621)]),
        (L(-4, 0), _C0, [(0.275, 1.452, 0.280, 1.516), (0.161, 0.771, 0.162, 0.774), (0.160, 0.892, 0.162, 0.904), (0.098, 0.506, 0.099, 0.507)]),
        (ParamSetting("const", -1.47), U(-1, 1), [(0.187, 0.588, 0.161, 0.514), (0.116, 0.351, 0.099, 0.305), (0.114, 0.387, 0.099, 0.339), (0.073, 0.246, 0.062, 0.208)]),
        # two MME l2 entries printed as 0.93 in the source table; kept verbatim
        (ParamSetting("const", -1.47), _C0, [(0.150, 0.482, 0.151, 0.484), (0.93, 0.289, 0.093, 0.29), (0.93, 0.309, 0.093, 0.311), (0.058, 0.195, 0.058, 0.195)]),
        (L(-2, 2), U(-0.1, 0.1), [(0.132, 0.415, 0.012, 0.318), (0.080, 0.238, 0.069, 0.194), (0.080, 0.272, 0.068, 0.217), (0.050, 0.168, 0.043, 0.135)]),
        (L(-1, 1), U(-1, 1), [(0.107, 0.324, 0.095, 0.264), (0.067, 0.194, 0.060, 0.163), (0.071, 0.267, 0.061, 0.205), (0.044, 0.156, 0.039, 0.130)]),
        (L(-2, 2), U(-1, 1), [(0.137, 0.478, 0.112, 0.329), (0.084, 0.274, 0.070, 0.205), (0.087, 0.352, 0.071, 0.250), (0.054, 0.211, 0.044, 0.150)]),
    ]
    grid = [(20, 200), (50, 200), (20, 500), (50, 500)]
    rows = []
    for s0, s1, paper in blocks:
        for (n, p), ref in zip(grid, paper):
            rows.append((n, p, s0, s1, ref))
    return rows


def table3_rows_def():
    return _table3_rows(linear_variant_by_density())


# (n, p, beta0, beta1, paper means for MME/MLE x l2/linf x beta0/beta1)
def table5_rows_def():
    corrected = linear_variant_by_density()
    L = lambda a, b: ParamSetting("linear", a, b, corrected=corrected)  # noqa: E731
    U02 = ParamSetting("uniform", 0, 2)
    paper = {
        "L(-1,1)": {
            "mme_b0_l2": (0.163, 0.096, 0.099, 0.057), "mme_b1_l2": (0.177, 0.084, 0.104, 0.050),
            "mme_b0_linf": (0.570, 0.367, 0.395, 0.241), "mme_b1_linf": (0.658, 0.421, 0.438, 0.214),
            "mle_b0_l2": (0.211, 0.091, 0.121, 0.054), "mle_b1_l2": (0.166, 0.072, 0.096, 0.043),
            "mle_b0_linf": (0.809, 0.354, 0.532, 0.232), "mle_b1_linf": (0.617, 0.265, 0.399, 0.172),
        },
        "L(-2,0)": {
            "mme_b0_l2": (0.133, 0.080, 0.081, 0.047), "mme_b1_l2": (0.093, 0.053, 0.056, 0.032),
            "mme_b0_linf": (0.568, 0.365, 0.394, 0.241), "mme_b1_linf": (0.387, 0.236, 0.258, 0.162),
            "mle_b0_l2": (0.176, 0.076, 0.100, 0.044), "mle_b1_l2": (0.116, 0.051, 0.068, 0.031),
            "mle_b0_linf": (0.809, 0.351, 0.531, 0.232), "mle_b1_linf": (0.513, 0.227, 0.348, 0.158),
        },
    }
    grid = [(20, 200), (100, 200), (20, 500), (100, 500)]
    rows = []
    for key, s0 in (("L(-1,1)", L(-1, 1)), ("L(-2,0)", L(-2, 0))):
        for k, (n, p) in enumerate(grid):
            rows.append((n, p, s0, U02, {m: v[k] for m, v in paper[key].items()}))
    return rows


FIG2_N = (2, 5, 10, 20)
FIG2_P = tuple(int(math.floor(200 * 1.2**k)) for k in range(7))


def fig2_rows(reps: int, seed: int = 0, ns=FIG2_N, ps=FIG2_P, opts=None) -> list[dict]:
    """Long-format ``(n, p, method, norm, mean, sd)`` for U(-1, 1) parameters."""
    U = ParamSetting("uniform", -1, 1)
    out = []
    for n in ns:
        for p in ps:
            mme, mle, _ = run_error_benchmark(U, U, n, p, reps, seed=seed + 7919 * n + p, opts=opts)
            for rep in (mme, mle):
                for norm in ("l2", "linf"):
                    out.append(dict(n=n, p=p, method=rep.method, norm=norm, mean=rep.mean(norm), sd=rep.sd(norm), reps=reps))
    return out


# ------------------------------------------------------------ KS evaluation


def ks_statistic(x: np.ndarray, y: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov distance ``sup |F_x - F_y|``."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / x.size
    fy = np.searchsorted(y, grid, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def ks_pvalue(stat: float, m: int, n: int) -> float:
    """Asymptotic Kolmogorov p-value with the Stephens effective-size correction."""
    en = math.sqrt(m * n / (m + n))
    return float(min(1.0, max(0.0, kstwobign.sf((en + 0.12 + 0.11 / en) * stat))))


def ks_test(x, y) -> tuple[float, float]:
    d = ks_statistic(x, y)
    return d, ks_pvalue(d, len(x), len(y))


def ks_degree_evaluation(series: SnapshotSeries, theta_hat: ParamVector, beta_static_hat: np.ndarray, level: float = KS_LEVEL) -> dict[str, np.ndarray]:
    """Per-frame KS comparison of forecast and observed degree vectors, ``t = 1..n``.

    The dynamic forecast conditions on frame ``t - 1``; the static beta-model
    forecast is the same for every frame.
    """
    p = series.p
    iu, ju = pair_index(p)
    probs = expit(beta_static_hat[iu] + beta_static_hat[ju])
    static_deg = np.bincount(iu, probs, p) + np.bincount(ju, probs, p)
    observed = series.degrees()
    out = {k: np.empty(series.n) for k in ("ks_twhm", "p_twhm", "ks_static", "p_static")}
    for t in range(1, series.n + 1):
        fc = predict_degrees(theta_hat, series.edges[t - 1])
        out["ks_twhm"][t - 1], out["p_twhm"][t - 1] = ks_test(fc, observed[t])
        out["ks_static"][t - 1], out["p_static"][t - 1] = ks_test(static_deg, observed[t])
    out["t"] = np.arange(1, series.n + 1)
    out["reject_twhm"] = out["p_twhm"] < level
    out["reject_static"] = out["p_static"] < level
    return out


def self_rejection_rate(values: np.ndarray, trials: int, seed: int = 0, level: float = KS_LEVEL) -> float:
    """Rejection rate of the KS test comparing ``values`` with bootstrap resamples of itself."""
    rng = np.random.default_rng(seed)
    values = np.asarray(values, dtype=float)
    rejects = 0
    for _ in range(trials):
        _, pv = ks_test(values, rng.choice(values, size=values.size, replace=True))
        rejects += pv < level
    return rejects / trials


@dataclass(frozen=True)
class _KSRep:
    p: int
    n: int
    beta1: float
    seed: int

    def __call__(self, rep: int) -> dict:
        s_theta, s_sim = rep_seeds(self.seed, rep)
        theta = generate_setting(ParamSetting("uniform", -1, 1), ParamSetting("const", self.beta1), self.p, s_theta)
        series = simulate(SimConfig(theta, self.n, s_sim))
        stats = sufficient_stats(series)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, mle = fit(stats)
            static = fit_static_beta_model(series)
        ev = ks_degree_evaluation(series, mle.theta_hat, static)
        return dict(
            rep=rep,
            ks_twhm=float(ev["ks_twhm"].mean()), ks_static=float(ev["ks_static"].mean()),
            p_twhm=float(ev["p_twhm"].mean()), p_static=float(ev["p_static"].mean()),
            reject_twhm=float(ev["reject_twhm"].mean()), reject_static=float(ev["reject_static"].mean()),
            self_reject=self_rejection_rate(series.degrees(series.n), 100, seed=s_sim % (2**32)),
        )


def ks_rows(reps: int, seed: int = 0, p: int = 100, n: int = 10, beta1: float = 1.0) -> list[dict]:
    """Degree-recovery study on a sticky synthetic process (beta1 constant, beta0 ~ U(-1, 1))."""
    return map_reps(_KSRep(p, n, beta1, seed), range(reps))


# ---------------------------------------------------------------- prediction


@dataclass(frozen=True)
class _PredRep:
    p: int
    n_train: int
    seed: int
    grid: tuple[float, ...]

    def __call__(self, rep: int) -> dict:
        s_theta, s_sim = rep_seeds(self.seed, rep)
        theta = generate_setting(ParamSetting("uniform", -1, 1), ParamSetting("uniform", 0, 2), self.p, s_theta)
        series = simulate(SimConfig(theta, self.n_train, s_sim))
        window = series.window(0, self.n_train)  # n_train snapshots
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, mle = fit(sufficient_stats(window))
        est = mle.theta_hat
        prev, target = series.edges[-2], series.edges[-1]
        omega = select_omega(window, est, self.grid)
        fixed = predict_links(est, prev, PredictionConfig("fixed", 0.5))
        adaptive = predict_links(est, prev, PredictionConfig("adaptive", omega=omega))
        return dict(
            rep=rep, omega=omega,
            acc_fixed=prediction_accuracy(fixed, target),
            acc_adaptive=prediction_accuracy(adaptive, target),
            acc_naive=prediction_accuracy(prev, target),
        )


def prediction_rows(reps: int, seed: int = 0, p: int = 100, n_train: int = 8, grid=None) -> list[dict]:
    """Fit on ``n_train`` snapshots, predict the next one with the fixed, adaptive and naive rules."""
    from .forecast import DEFAULT_OMEGA_GRID

    return map_reps(_PredRep(p, n_train, seed, tuple(grid or DEFAULT_OMEGA_GRID)), range(reps))


# ---------------------------------------------------------------- clustering


def kmeans_on_params(theta_hat: ParamVector, k: int, seed: int = 0, n_init: int = 20) -> np.ndarray:
    """k-means (k-means++ starts, best of ``n_init``) on the points ``(beta0_i, beta1_i)``."""
    from sklearn.cluster import KMeans

    if not 1 <= k <= theta_hat.p:
        raise ValueError("need 1 <= k <= p")
    X = np.column_stack([theta_hat.beta0, theta_hat.beta1])
    km = KMeans(n_clusters=k, init="k-means++", n_init=n_init, random_state=seed % (2**32))
    with warnings.catch_warnings():
        # duplicate points when k approaches p
        warnings.simplefilter("ignore")
        return km.fit_predict(X)


def clustering_accuracy(labels: np.ndarray, truth: np.ndarray) -> float:
    """Best agreement fraction over relabelings (Hungarian assignment)."""
    labels = np.asarray(labels)
    truth = np.asarray(truth)
    if labels.shape != truth.shape:
        raise ValueError("label vectors differ in length")
    lab_ids, lab_inv = np.unique(labels, return_inverse=True)
    tru_ids, tru_inv = np.unique(truth, return_inverse=True)
    conf = np.zeros((lab_ids.size, tru_ids.size), dtype=np.int64)
    np.add.at(conf, (lab_inv, tru_inv), 1)
    r, c = linear_sum_assignment(conf, maximize=True)
    return float(conf[r, c].sum() / labels.size)


def block_setting(p: int, k: int, levels: Sequence[float]) -> tuple[ParamVector, np.ndarray]:
    """``k`` equal communities; community ``c`` has both parameters equal to ``levels[c]``."""
    truth = np.repeat(np.arange(k), int(math.ceil(p / k)))[:p]
    vals = np.asarray(levels, dtype=float)[truth]
    return ParamVector(vals, vals.copy()), truth


CLUSTER_GRID = (
    ("setting1", (-0.2, 0.0, 0.2), [(2, 300, 0.686), (10, 300, 0.951), (50, 300, 0.995)]),
    ("setting2", (-0.4, 0.0, 0.4), [(2, 300, 0.922), (10, 300, 0.956), (50, 300, 1.000)]),
)


@dataclass(frozen=True)
class _ClusterRep:
    levels: tuple[float, ...]
    n: int
    p: int
    seed: int

    def __call__(self, rep: int) -> dict:
        (s_sim,) = rep_seeds(self.seed, rep, 1)
        theta, truth = block_setting(self.p, len(self.levels), self.levels)
        stats = sufficient_stats(simulate(SimConfig(theta, self.n, s_sim)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, mle = fit(stats)
        labels = kmeans_on_params(mle.theta_hat, len(self.levels), seed=s_sim)
        return dict(rep=rep, accuracy=clustering_accuracy(labels, truth))


def cluster_rows(levels, n: int, p: int, reps: int, seed: int = 0) -> list[dict]:
    return map_reps(_ClusterRep(tuple(levels), n, p, seed), range(reps))


# ------------------------------------------------------------------ summaries


def summarise(rows: list[dict], group: Sequence[str], values: Sequence[str]) -> list[dict]:
    """Mean and sd of ``values`` within each combination of ``group`` keys (first-seen order)."""
    order: list[tuple] = []
    buckets: dict[tuple, list[dict]] = {}
    for r in rows:
        key = tuple(r[g] for g in group)
        if key not in buckets:
            order.append(key)
            buckets[key] = []
        buckets[key].append(r)
    out = []
    for key in order:
        rs = buckets[key]
        row = dict(zip(group, key))
        row["reps"] = len(rs)
        for v in values:
            arr = np.array([float(r[v]) for r in rs])
            row[f"{v}_mean"] = float(arr.mean())
            row[f"{v}_sd"] = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        out.append(row)
    return out
