"""Monte-Carlo bias/variance experiments for the entropy estimator on the
Gaussian chain, with CSV/SVG/JSON reporting.

Plan files are flat ``key = value`` text::

    process.kind = chain        # or iid
    process.d = 2
    process.r = 0.25
    process.rho = 0.25
    estimator.k = 1, 2, 3
    estimator.metric = euclidean
    grid = 2^7, 2^8, 2^9, 2^10, 2^11, 2^12
    replicates = 200
    seed = 2019

Grid entries are numbers of points.  Replicate m draws its chain from
substream m of the plan seed; the chain for a smaller grid size is the
prefix of the chain for a larger one, exactly as if it had been simulated
on its own from the same substream.
"""

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from . import __version__
from .core_math import LogLogFit, Metric, gaussian_entropy, loglog_fit
from .errors import InvalidSpecError
from .estimator import EstimatorConfig, kl_entropy
from .processes import GaussianChainSpec, RngSeed, simulate_chains, standard_normals

REPORT_COLUMNS = ("n", "mean_estimate", "bias", "abs_bias", "variance", "std_error")
_NOISE_BLOCK = 8_000_000  # normals held in memory per replicate block


class PlanError(InvalidSpecError):
    """A plan file entry is missing or malformed; ``field`` names it."""

    def __init__(self, field, message):
        super().__init__(f"plan field {field!r}: {message}")
        self.field = field


@dataclass(frozen=True)
class ExperimentPlan:
    d: int
    r: float
    rho: float
    ks: Tuple[int, ...]
    sample_sizes: Tuple[int, ...]
    replicates: int
    seed: int
    kind: str = "chain"
    metric: Metric = Metric.EUCLIDEAN

    def __post_init__(self):
        if self.kind not in ("chain", "iid"):
            raise PlanError("process.kind", f"expected 'chain' or 'iid', got {self.kind!r}")
        sizes = tuple(int(n) for n in self.sample_sizes)
        if not sizes:
            raise PlanError("grid", "empty")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise PlanError("grid", "sample sizes must be strictly ascending")
        ks = tuple(int(k) for k in self.ks)
        if not ks or min(ks) < 1:
            raise PlanError("estimator.k", "need at least one k >= 1")
        if sizes[0] <= max(ks):
            raise PlanError("grid", f"every sample size must exceed k={max(ks)}")
        if self.replicates < 2:
            raise PlanError("replicates", "need at least 2 replicates for a variance")
        if not 0 <= self.seed < 2**64:
            raise PlanError("seed", "must be a 64-bit unsigned integer")
        object.__setattr__(self, "sample_sizes", sizes)
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "metric", Metric.parse(self.metric))
        try:
            self.process_spec()
        except InvalidSpecError as exc:
            raise PlanError("process", str(exc)) from None

    def process_spec(self):
        rho = 0.0 if self.kind == "iid" else self.rho
        return GaussianChainSpec(self.d, self.r, rho)

    @property
    def true_entropy(self):
        return gaussian_entropy(self.d, self.r)

    def to_dict(self):
        out = asdict(self)
        out["metric"] = self.metric.value
        out["ks"] = list(self.ks)
        out["sample_sizes"] = list(self.sample_sizes)
        out["true_entropy"] = self.true_entropy
        return out


def _parse_int(field, token):
    token = token.strip()
    try:
        if "^" in token:
            base, exp = token.split("^")
            return int(base) ** int(exp)
        return int(token)
    except ValueError:
        raise PlanError(field, f"not an integer: {token!r}") from None


def _parse_float(field, token):
    try:
        if "/" in token:
            num, den = token.split("/")
            return float(num) / float(den)
        return float(token)
    except (ValueError, ZeroDivisionError):
        raise PlanError(field, f"not a number: {token!r}") from None


def parse_plan(text):
    """Parse plan text; raises :class:`PlanError` naming the offending key."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PlanError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        raw[key] = value

    known = {
        "process.kind", "process.d", "process.r", "process.rho",
        "estimator.k", "estimator.metric", "grid", "replicates", "seed",
    }
    for key in raw:
        if key not in known:
            raise PlanError(key, "unknown key")
    for key in ("process.d", "process.r", "grid", "replicates", "seed"):
        if key not in raw:
            raise PlanError(key, "missing")
    kind = raw.get("process.kind", "chain")
    if kind == "chain" and "process.rho" not in raw:
        raise PlanError("process.rho", "missing")

    try:
        metric = Metric.parse(raw.get("estimator.metric", "euclidean"))
    except ValueError as exc:
        raise PlanError("estimator.metric", str(exc)) from None
    return ExperimentPlan(
        d=_parse_int("process.d", raw["process.d"]),
        r=_parse_float("process.r", raw["process.r"]),
        rho=_parse_float("process.rho", raw.get("process.rho", "0")),
        ks=tuple(_parse_int("estimator.k", t) for t in raw.get("estimator.k", "1, 2, 3").split(",")),
        sample_sizes=tuple(_parse_int("grid", t) for t in raw["grid"].split(",")),
        replicates=_parse_int("replicates", raw["replicates"]),
        seed=_parse_int("seed", raw["seed"]),
        kind=kind,
        metric=metric,
    )


def read_plan(path):
    with open(path) as fh:
        return parse_plan(fh.read())


class BiasRow(NamedTuple):
    n: int
    mean_estimate: float
    bias: float
    abs_bias: float
    variance: float
    std_error: float


@dataclass
class BiasReport:
    k: int
    true_entropy: float
    replicates: int
    rows: List[BiasRow]
    bias_fit: Optional[LogLogFit]
    variance_fit: Optional[LogLogFit]

    @classmethod
    def from_estimates(cls, k, sizes, estimates, true_entropy):
        """``estimates`` has one row per replicate and one column per size."""
        estimates = np.asarray(estimates, dtype=float)
        m = estimates.shape[0]
        rows = []
        for j, n in enumerate(sizes):
            col = estimates[:, j]
            mean = float(np.sum(col) / m)
            var = float(np.sum((col - mean) ** 2) / (m - 1))
            bias = mean - true_entropy
            rows.append(BiasRow(int(n), mean, bias, abs(bias), var, math.sqrt(var / m)))
        return cls(k, true_entropy, m, rows, _fit(rows, "abs_bias"), _fit(rows, "variance"))

    def to_csv(self):
        lines = [",".join(REPORT_COLUMNS)]
        for row in self.rows:
            lines.append(",".join([str(row.n)] + [repr(float(v)) for v in row[1:]]))
        return "\n".join(lines) + "\n"

    def slopes_text(self):
        def fmt(fit):
            return "NA" if fit is None else repr(fit.slope)

        return f"bias_slope {fmt(self.bias_fit)}\nvariance_slope {fmt(self.variance_fit)}\n"


def _fit(rows, attr):
    pts = [(row.n, getattr(row, attr)) for row in rows if getattr(row, attr) > 0.0]
    return loglog_fit(pts) if len(pts) >= 2 else None


def simulate_replicates(plan, replicates):
    """Paths of length max(grid) for the given replicate indices, shape (m, n, d)."""
    spec = plan.process_spec()
    n_max = plan.sample_sizes[-1]
    noise = np.stack(
        [standard_normals(RngSeed(plan.seed, m), (n_max, plan.d)) for m in replicates]
    )
    if plan.kind == "iid":
        return spec.stationary(noise)
    return simulate_chains(spec, noise)


def run_experiment(plan: ExperimentPlan, progress=None) -> Dict[int, BiasReport]:
    """Estimate entropy for every replicate, sample size and k in the plan."""
    sizes = plan.sample_sizes
    estimates = {k: np.empty((plan.replicates, len(sizes))) for k in plan.ks}
    block = max(1, _NOISE_BLOCK // (sizes[-1] * plan.d))
    for lo in range(0, plan.replicates, block):
        reps = range(lo, min(plan.replicates, lo + block))
        paths = simulate_replicates(plan, reps)
        for offset, m in enumerate(reps):
            for j, n in enumerate(sizes):
                prefix = paths[offset, :n]
                for k in plan.ks:
                    cfg = EstimatorConfig(k, plan.metric)
                    estimates[k][m, j] = kl_entropy(prefix, cfg).value
        if progress is not None:
            progress(reps.stop, plan.replicates)
    return {
        k: BiasReport.from_estimates(k, sizes, estimates[k], plan.true_entropy)
        for k in plan.ks
    }


# -- output -------------------------------------------------------------------


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_experiment(plan, reports, output_dir, wall_clock=None):
    """Write ``k{k}/report.csv``, ``k{k}/slopes.txt``, ``k{k}/chart.svg`` and a
    top-level ``manifest.json``; returns the manifest dict."""
    os.makedirs(output_dir, exist_ok=True)
    files = {}
    for k, report in sorted(reports.items()):
        sub = f"k{k}"
        os.makedirs(os.path.join(output_dir, sub), exist_ok=True)
        for name, text in (
            ("report.csv", report.to_csv()),
            ("slopes.txt", report.slopes_text()),
            ("chart.svg", render_svg(report, title=f"d={plan.d}, k={k}")),
        ):
            rel = f"{sub}/{name}"
            path = os.path.join(output_dir, sub, name)
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
            files[rel] = _sha256(path)
    manifest = {
        "tool": "klentropy",
        "version": __version__,
        "plan": plan.to_dict(),
        "seed": plan.seed,
        "files": files,
        "wall_clock_seconds": wall_clock,
    }
    with open(os.path.join(output_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def run_and_write(plan, output_dir, progress=None):
    start = time.perf_counter()
    reports = run_experiment(plan, progress=progress)
    manifest = write_experiment(plan, reports, output_dir, time.perf_counter() - start)
    return reports, manifest


def render_svg(report: BiasReport, title="", width=480, height=360):
    """Log-log chart of |bias| and variance against n, with fitted lines."""
    margin = 50
    series = [
        ("|bias|", "#1f77b4", [(r.n, r.abs_bias) for r in report.rows], report.bias_fit),
        ("variance", "#d62728", [(r.n, r.variance) for r in report.rows], report.variance_fit),
    ]
    pts = [(x, y) for _, _, s, _ in series for x, y in s if x > 0 and y > 0]
    if not pts:
        pts = [(1.0, 1.0), (10.0, 10.0)]
    lx = [math.log10(x) for x, _ in pts]
    ly = [math.log10(y) for _, y in pts]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(v):
        return margin + (v - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle" '
        f'font-size="12">log10 n</text>',
        f'<text x="15" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {height / 2:.1f})">log10 value</text>',
    ]
    for tick in range(math.ceil(x0), math.floor(x1) + 1):
        out.append(f'<text x="{sx(tick):.1f}" y="{height - margin + 15}" '
                   f'text-anchor="middle" font-size="10">{tick}</text>')
    for tick in range(math.ceil(y0), math.floor(y1) + 1):
        out.append(f'<text x="{margin - 5}" y="{sy(tick) + 3:.1f}" '
                   f'text-anchor="end" font-size="10">{tick}</text>')
    for i, (label, color, data, fit) in enumerate(series):
        for x, y in data:
            if x > 0 and y > 0:
                cx, cy = sx(math.log10(x)), sy(math.log10(y))
                out.append(f'<rect x="{cx - 3:.1f}" y="{cy - 3:.1f}" width="6" height="6" '
                           f'fill="{color}"/>')
        legend = label
        if fit is not None:
            # fit is in natural logs; a power law has the same slope in log10
            a, b = fit.slope, fit.intercept / math.log(10.0)
            out.append(
                f'<line x1="{sx(x0):.1f}" y1="{sy(a * x0 + b):.1f}" x2="{sx(x1):.1f}" '
                f'y2="{sy(a * x1 + b):.1f}" stroke="{color}"/>'
            )
            legend += f" slope {a:.2f}"
        out.append(f'<text x="{width - margin}" y="{margin + 15 * i}" text-anchor="end" '
                   f'font-size="11" fill="{color}">{legend}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
