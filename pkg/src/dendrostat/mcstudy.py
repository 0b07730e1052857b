"""Monte Carlo study: how often does AIC pick the true ARMA(1,1)?

Every replicate draws its own ``SeedSequence`` keyed on
``(base_seed, theta index, phi index, replicate)``, so cells can be run in
any order or concurrently without changing the result.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import svg
from .arma import ArmaSpec, candidate_set, select_by_aic, simulate_arma
from .exceptions import DomainError, ValidationError

DEFAULT_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
TRUE_ORDER = (1, 1)


@dataclass(frozen=True)
class McConfig:
    n_obs: int = 140
    n_reps: int = 200
    theta_grid: tuple = DEFAULT_GRID
    phi_grid: tuple = DEFAULT_GRID
    sigma2: float = 1.0
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "theta_grid", tuple(float(v) for v in self.theta_grid))
        object.__setattr__(self, "phi_grid", tuple(float(v) for v in self.phi_grid))
        if self.n_obs < 20:
            raise ValidationError("n_obs must be >= 20")
        if self.n_reps < 1:
            raise ValidationError("n_reps must be >= 1")
        if not self.theta_grid or not self.phi_grid:
            raise ValidationError("parameter grids must be non-empty")
        for v in self.theta_grid + self.phi_grid:
            if not 0.0 < v < 1.0:
                raise ValidationError(f"grid value {v} outside (0, 1)")
        if not self.sigma2 > 0:
            raise ValidationError("sigma2 must be positive")


@dataclass
class McGrid:
    config: McConfig
    counts: np.ndarray
    nonconverged: np.ndarray = field(default=None)

    @property
    def proportions(self):
        return self.counts / self.config.n_reps

    def to_dict(self):
        return {
            "config": asdict(self.config),
            "true_order": list(TRUE_ORDER),
            "candidates": [list(c) for c in candidate_set()],
            "theta": list(self.config.theta_grid),
            "phi": list(self.config.phi_grid),
            "counts": self.counts.tolist(),
            "proportions": self.proportions.tolist(),
            "nonconverged_fits": None if self.nonconverged is None else self.nonconverged.tolist(),
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta"] + [repr(v) for v in self.config.phi_grid])
        for th, row in zip(self.config.theta_grid, self.proportions):
            w.writerow([repr(th)] + [repr(float(v)) for v in row])
        return buf.getvalue()


def read_grid_csv(text):
    """Parse ``grid.csv`` back into (theta values, phi values, proportion matrix)."""
    rows = list(csv.reader(io.StringIO(text)))
    phis = [float(v) for v in rows[0][1:]]
    thetas = [float(r[0]) for r in rows[1:]]
    mat = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return thetas, phis, mat


def replicate_seed(base_seed, i, j, rep):
    return np.random.SeedSequence(int(base_seed), spawn_key=(int(i), int(j), int(rep)))


def _cell_index(config, theta, phi):
    try:
        return config.theta_grid.index(float(theta)), config.phi_grid.index(float(phi))
    except ValueError:
        raise ValidationError(f"({theta}, {phi}) is not a grid point of the configuration") from None


def run_cell(theta, phi, config, cell=None):
    """Return ``(count, proportion)`` of replicates where AIC selects ARMA(1,1).

    ``cell`` gives the grid coordinates used for seeding; by default they are
    looked up from ``config``.
    """
    count, _ = _run_cell(theta, phi, config, cell)
    return count, count / config.n_reps


def _run_cell(theta, phi, config, cell=None):
    spec = ArmaSpec([theta], [phi], config.sigma2)
    try:
        spec.validate()
    except DomainError as exc:
        raise DomainError(f"invalid ARMA(1,1) pair ({theta}, {phi}): {exc}") from None
    i, j = _cell_index(config, theta, phi) if cell is None else cell
    candidates = candidate_set()
    count = 0
    nonconv = 0
    for rep in range(config.n_reps):
        x = simulate_arma(spec, config.n_obs, replicate_seed(config.base_seed, i, j, rep))
        order, table = select_by_aic(x, candidates)
        nonconv += sum(not f.converged for f in table.values())
        count += order == TRUE_ORDER
    return count, nonconv


def run_grid(config, threads=1):
    """Run every cell; the result does not depend on ``threads``."""
    cells = [
        (i, j, th, ph)
        for i, th in enumerate(config.theta_grid)
        for j, ph in enumerate(config.phi_grid)
    ]

    def work(item):
        i, j, th, ph = item
        try:
            return _run_cell(th, ph, config, (i, j))
        except Exception as exc:
            raise type(exc)(f"cell theta={th}, phi={ph}: {exc}") from exc

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(c) for c in cells]
    shape = (len(config.theta_grid), len(config.phi_grid))
    counts = np.zeros(shape, dtype=np.int64)
    nonconv = np.zeros(shape, dtype=np.int64)
    for (i, j, _, _), (c, nc) in zip(cells, results):
        counts[i, j] = c
        nonconv[i, j] = nc
    return McGrid(config, counts, nonconv)


def _heatmap(grid):
    return svg.heatmap(
        grid.proportions,
        [f"{v:g}" for v in grid.config.theta_grid],
        [f"{v:g}" for v in grid.config.phi_grid],
        title="Proportion of replicates where AIC selects ARMA(1,1)",
        row_title="theta (AR)",
        col_title="phi (MA)",
    )


def render_image_plot(grid, path):
    """Write the heat map SVG to ``path`` and the matrix as CSV next to it."""
    path = Path(path)
    text = _heatmap(grid)
    svg.write(path, text)
    path.with_suffix(".csv").write_text(grid.to_csv(), encoding="utf-8")
    return text


def write_outputs(grid, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "grid.csv").write_text(grid.to_csv(), encoding="utf-8")
    (out / "grid.json").write_text(json.dumps(grid.to_dict(), indent=2) + "\n", encoding="utf-8")
    text = _heatmap(grid)
    svg.write(out / "image.svg", text)
    return out
