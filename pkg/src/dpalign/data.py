"""Datasets on a shared even grid, the synthetic benchmark, CSV ingestion,
and the three evaluation metrics (alignment error, data fit, warp complexity).

CSV format: comma separated, '.' decimal separator, UTF-8, LF or CRLF line
endings, one sequence per row.  An optional single header row is detected by
any non-numeric cell; group labels are read from a final column only when the
header names it "group".  Numbers are written back with ``repr`` (shortest
round-trip decimal), so load -> save -> load reproduces values bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .gp_model import NoiseModel
from .warp import aux_total_variation, warp_from_aux


class ParseError(ValueError):
    """A CSV file could not be parsed; carries the 1-based row (and column)."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class MissingGroups(ValueError):
    """A metric that needs group labels was called without any."""


def _readonly(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """J sequences of length N observed on a shared even grid over [-1, 1]."""

    x: np.ndarray
    Y: np.ndarray
    groups: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim != 2 or Y.shape[1] != x.size:
            raise ValueError("Y must be a J x N matrix matching the grid")
        if not np.all(np.isfinite(Y)):
            raise ValueError("sequence values must be finite")
        if x.size < 2 or not np.allclose(x, np.linspace(-1.0, 1.0, x.size)):
            raise ValueError("x must be the even grid on [-1, 1]")
        groups = self.groups
        if groups is not None:
            groups = np.asarray(groups, dtype=int)
            if groups.shape != (Y.shape[0],):
                raise ValueError("groups must hold one label per sequence")
            groups = _readonly(groups.copy())
        object.__setattr__(self, "x", _readonly(x.copy()))
        object.__setattr__(self, "Y", _readonly(Y.copy()))
        object.__setattr__(self, "groups", groups)

    @property
    def J(self) -> int:
        return self.Y.shape[0]

    @property
    def N(self) -> int:
        return self.Y.shape[1]

    @classmethod
    def from_matrix(cls, Y, groups=None, name="") -> "Dataset":
        Y = np.asarray(Y, dtype=float)
        return cls(np.linspace(-1.0, 1.0, Y.shape[1]), Y, groups, name)


def _cubic(x):
    return x**3


#: base functions available to the synthetic generator; sinc is the
#: normalized convention sin(pi x) / (pi x) with value 1 at zero
GENERATORS = {"sinc": np.sinc, "cubic": _cubic}


@dataclass(frozen=True)
class SyntheticConfig:
    """Controls for the synthetic benchmark generator."""

    J: int = 10
    N: int = 50
    warp_severity: float = 0.5
    noise_std: float = 0.05
    generators: tuple = ("sinc", "cubic")

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if self.J < 2 or self.N < 4:
            raise ValueError("need J >= 2 sequences and N >= 4 samples")
        if self.warp_severity < 0 or self.noise_std < 0:
            raise ValueError("warp_severity and noise_std must be non-negative")
        unknown = [g for g in self.generators if g not in GENERATORS]
        if unknown or not self.generators:
            raise ValueError(f"unknown generators {unknown}; available: {sorted(GENERATORS)}")


def generate_synthetic(cfg: SyntheticConfig, seed: int) -> Dataset:
    """Warped noisy draws from the configured base functions.

    Sequences are split into near-equal contiguous groups, one per generator.
    Each sequence gets auxiliaries u ~ N(0, warp_severity^2), is evaluated at
    the induced monotone warp of the grid, and receives iid Gaussian noise.
    Severity zero uses the identity grid exactly.  Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    x = np.linspace(-1.0, 1.0, cfg.N)
    n_groups = len(cfg.generators)
    groups = (np.arange(cfg.J) * n_groups) // cfg.J
    rows = np.empty((cfg.J, cfg.N))
    for j in range(cfg.J):
        u = rng.normal(0.0, cfg.warp_severity, cfg.N)
        G = x if cfg.warp_severity == 0 else warp_from_aux(u)
        base = GENERATORS[cfg.generators[groups[j]]]
        rows[j] = base(G) + rng.normal(0.0, cfg.noise_std, cfg.N)
    return Dataset(x, rows, groups, name=f"synthetic(seed={seed})")


def _parse_cell(cell, row, col):
    try:
        return float(cell)
    except ValueError:
        raise ParseError(
            f"row {row}, column {col}: could not parse {cell.strip()!r} as a number",
            row=row, col=col,
        ) from None


def load_csv(path) -> Dataset:
    """Read a dataset from CSV, one sequence per row (see module docstring)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    lines = [(i + 1, line) for i, line in enumerate(raw.splitlines()) if line.strip()]
    if not lines:
        raise ParseError("file contains no data rows")

    first_cells = [c.strip() for c in lines[0][1].split(",")]
    has_header = False
    for cell in first_cells:
        try:
            float(cell)
        except ValueError:
            has_header = True
            break
    has_groups = has_header and first_cells[-1].lower() == "group"
    data_lines = lines[1:] if has_header else lines
    if not data_lines:
        raise ParseError("file contains no data rows")

    width = len(data_lines[0][1].split(","))
    n = width - 1 if has_groups else width
    if n < 2:
        raise ParseError(f"row {data_lines[0][0]}: sequences need at least 2 samples")

    rows, labels = [], []
    for lineno, line in data_lines:
        cells = line.split(",")
        if len(cells) != width:
            raise ParseError(
                f"row {lineno} has {len(cells)} cells, expected {width}", row=lineno
            )
        values = [_parse_cell(c, lineno, k + 1) for k, c in enumerate(cells[:n])]
        rows.append(values)
        if has_groups:
            g = _parse_cell(cells[-1], lineno, width)
            if g != int(g):
                raise ParseError(
                    f"row {lineno}, column {width}: group label must be an integer",
                    row=lineno, col=width,
                )
            labels.append(int(g))
    return Dataset(
        np.linspace(-1.0, 1.0, n),
        np.array(rows),
        np.array(labels) if has_groups else None,
        name=str(path),
    )


def save_csv(dataset: Dataset, path) -> None:
    """Write a dataset back to CSV in the canonical format.

    Values use ``repr`` so they survive a reload bit for bit; a header with a
    final "group" column is emitted only when labels are present.
    """
    lines = []
    if dataset.groups is not None:
        lines.append(",".join([f"y{k}" for k in range(dataset.N)] + ["group"]))
    for j in range(dataset.J):
        cells = [repr(float(v)) for v in dataset.Y[j]]
        if dataset.groups is not None:
            cells.append(str(int(dataset.groups[j])))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def alignment_error(S, groups, mode: str = "mean") -> float:
    """Sum over groups of the mean (or median) pairwise Euclidean distance.

    Distances are taken between member rows of ``S`` in R^N; singleton groups
    contribute zero.
    """
    if groups is None:
        raise MissingGroups("alignment error needs group labels")
    if mode not in ("mean", "median"):
        raise ValueError("mode must be 'mean' or 'median'")
    S = np.asarray(S, dtype=float)
    groups = np.asarray(groups)
    if groups.shape != (S.shape[0],):
        raise ValueError("groups must hold one label per row of S")
    total = 0.0
    for g in np.unique(groups):
        members = S[groups == g]
        if len(members) < 2:
            continue
        d = pdist(members)
        total += float(np.mean(d) if mode == "mean" else np.median(d))
    return total


def data_fit_metric(noise: NoiseModel) -> float:
    """Estimated observation-noise standard deviation, sqrt(1 / beta)."""
    return float(np.sqrt(1.0 / noise.beta))


def warp_complexity_metric(warps) -> float:
    """Total variation of all auxiliary vectors, summed over sequences."""
    return float(sum(aux_total_variation(w.u) for w in warps))


@dataclass(frozen=True)
class MetricsReport:
    """The three benchmark metrics of one fitted model."""

    mean_alignment_error: float
    median_alignment_error: float
    data_fit: float
    warp_complexity: float

    def __post_init__(self):
        for name in ("mean_alignment_error", "median_alignment_error",
                     "data_fit", "warp_complexity"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def metrics_report(aligned, groups, noise: NoiseModel, warps) -> MetricsReport:
    """Bundle the three metrics for a set of aligned sequences."""
    return MetricsReport(
        mean_alignment_error=alignment_error(aligned, groups, "mean"),
        median_alignment_error=alignment_error(aligned, groups, "median"),
        data_fit=data_fit_metric(noise),
        warp_complexity=warp_complexity_metric(warps),
    )
