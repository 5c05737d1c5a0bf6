"""Benchmark runner: train a method on a scenario, score it against the
finite-difference oracle, and write a reproducible run bundle.

A run is fully determined by (scenario, method, seed, preset): sample
plans carry their own fixed seeds, training is full batch, and truth
values are read directly off oracle grid nodes, never interpolated.
Wall time is reported on stdout only so every file in a bundle is
byte-for-byte reproducible.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import losses, nets, oracle, scenarios, train

CLASSICAL_EPOCHS = {"fast": 4000, "paper": 16000}
QUANTUM_EPOCHS = 1200
QUANTUM_LR = 0.05
PRESET_SEEDS = {"fast": 3, "paper": 10}

METHOD_ORDER = ("holomorphic", "curlnet", "pinn", "hpinn",
                "multiholomorphic", "xpinn", "qholomorphic")
SCENARIO_ORDER = scenarios.names()

ROBOT_STARTS = tuple((x, 0.05) for x in (0.05, 0.15, 0.25, 0.35, 0.45))
ROBOT_STEP = 0.01
ROBOT_MAX_STEPS = 10_000


def _fmt(v):
    return format(float(v), ".17g")


# -- oracle handling ----------------------------------------------------------

_ORACLE_CACHE: dict = {}


def oracle_grid(scenario, preset="fast", cache_dir=None):
    """Reference solution for a scenario at the preset's node count.

    Solutions are cached in memory per (scenario, nodes) and, when
    cache_dir is given, on disk as npz; the robot grid in particular is
    worth keeping (641 nodes per side, a half-minute solve).
    """
    n = scenario.oracle_nodes[preset]
    key = (scenario.name, n)
    if key in _ORACLE_CACHE:
        return _ORACLE_CACHE[key]
    path = None
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        path = os.path.join(cache_dir, f"{scenario.name}_n{n}.npz")
        if os.path.exists(path):
            z = np.load(path)
            grid = oracle.FieldGrid(z["origin"], float(z["h"]),
                                    z["values"], z["mask"])
            _ORACLE_CACHE[key] = grid
            return grid
    lo, hi = scenario.domain.bbox()
    h = float(np.max(hi - lo)) / (n - 1)
    eps = scenario.dielectric.eps_at if scenario.dielectric else None
    grid = oracle.fd_laplace_solve(scenario.domain, scenario.features, h,
                                   eps_fn=eps)
    if path is not None:
        np.savez_compressed(path, origin=grid.origin, h=grid.h,
                            values=grid.values, mask=grid.mask)
    _ORACLE_CACHE[key] = grid
    return grid


@dataclass
class EvalSet:
    """Masked-in nodes of an interior sublattice of an oracle grid."""

    points: np.ndarray        # (N, dim) node coordinates
    truth: np.ndarray         # (N,) oracle values at those nodes
    origin: np.ndarray        # sublattice origin
    h: float                  # sublattice spacing
    shape: tuple              # full sublattice shape (before masking)
    mask: np.ndarray          # sublattice mask array


def eval_set(grid, m):
    """m-per-axis interior sublattice with truth read off grid nodes.

    stride = (n - 1) // m with an offset of stride // 2 keeps every
    evaluation node strictly inside the boundary ring and at exactly the
    same coordinates for any two grids with the same (n, m).
    """
    n = grid.shape[0]
    if any(s != n for s in grid.shape):
        raise ValueError("eval sublattice expects a cubic oracle grid")
    stride = (n - 1) // m
    start = stride // 2
    if stride < 1 or start + stride * (m - 1) >= n:
        raise ValueError(f"{m} eval nodes per axis do not fit {n} grid nodes")
    sl = tuple(slice(start, start + stride * m, stride)
               for _ in range(grid.dim))
    vals = grid.values[sl]
    mask = grid.mask[sl]
    axes = [grid.axis_coords(k)[sl[k]] for k in range(grid.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([mm.ravel() for mm in mesh])
    keep = mask.ravel()
    return EvalSet(pts[keep], vals.ravel()[keep],
                   grid.origin + start * grid.h, stride * grid.h,
                   vals.shape, mask)


# -- trained models as scalar fields ------------------------------------------


class _PartField:
    """Single-net objective addressed through the full parameter vector."""

    def __init__(self, objective):
        self._net = objective.parts[0][1]
        self._sl = objective.slices[0]

    def forward(self, params, X, order=2):
        return self._net.forward(params[self._sl], X, order)


class _TwoRegionField:
    """Two-net objective stitched along the region split.

    Each point is evaluated by the net that owns its side of the
    interface, so the assembled field keeps the intended kink in the
    gradient across the permittivity jump.
    """

    def __init__(self, objective, split):
        self._nets = [net for _, net in objective.parts]
        self._slices = objective.slices
        self._split = split

    def forward(self, params, X, order=2):
        X = np.atleast_2d(np.asarray(X, float))
        B, d = X.shape
        side1 = self._split(X)
        val = np.empty((B, 1))
        grad = np.empty((B, d, 1)) if order >= 1 else None
        hess = np.empty((B, d, d, 1)) if order >= 2 else None
        for net, sl, m in zip(self._nets, self._slices, (side1, ~side1)):
            if not m.any():
                continue
            v, g, hh = net.forward(params[sl], X[m], order)
            val[m] = v
            if order >= 1:
                grad[m] = np.broadcast_to(g, (m.sum(), d, 1))
            if order >= 2:
                hess[m] = hh
        return val, grad, hess


def model_field(objective, scenario):
    """Wrap a trained objective as one net-shaped scalar field."""
    if len(objective.parts) == 2 and scenario.dielectric is not None:
        return _TwoRegionField(objective, scenario.dielectric.split)
    return _PartField(objective)


def field_values(field, params, points, block=65536):
    """Model values and Laplacians at many points, in bounded memory.

    Forward passes run block by block (a second-order jet at 262k points
    of a width-32 net would otherwise not fit); the returned arrays are
    identical to a single full-batch call.
    """
    points = np.atleast_2d(np.asarray(points, float))
    n, d = points.shape
    vals = np.empty(n)
    laps = np.empty(n)
    for i in range(0, n, block):
        pts = points[i:i + block]
        v, _, h = field.forward(params, pts, order=2)
        vals[i:i + block] = np.asarray(v)[:, 0]
        lap = h[:, 0, 0, 0]
        for k in range(1, d):
            lap = lap + h[:, k, k, 0]
        laps[i:i + block] = lap
    return vals, laps


# -- robot paths ---------------------------------------------------------------


def robot_path(grad_fn, domain, start, step=ROBOT_STEP,
               max_steps=ROBOT_MAX_STEPS):
    """Steepest-ascent path through a potential field.

    grad_fn maps (1, dim) points to (1, dim) gradients. Unit steps of
    length `step` follow the normalized gradient until the path reaches
    the top band (y >= 1 - step, "arrived"), would leave the domain
    ("exited", the offending point is not appended), meets a vanishing
    gradient ("stationary") or runs out of steps ("max_steps").
    """
    x = np.asarray(start, float)
    if not domain.contains(x[None])[0]:
        raise ValueError("path must start inside the domain")
    pts = [x.copy()]
    status = "max_steps"
    for _ in range(max_steps):
        g = np.asarray(grad_fn(x[None]), float).reshape(-1)
        norm = float(np.linalg.norm(g))
        if norm < 1e-10:
            status = "stationary"
            break
        nxt = x + step * (g / norm)
        if not domain.contains(nxt[None])[0]:
            status = "exited"
            break
        x = nxt
        pts.append(x.copy())
        if x[1] >= 1.0 - step:
            status = "arrived"
            break
    return np.array(pts), status


def grid_gradient(grid):
    """Per-axis derivative grids of a FieldGrid, one-sided at mask edges.

    Central differences wherever both neighbours along an axis are
    masked in, first-order one-sided where only one is; a node with no
    live neighbour drops out of the derivative's mask.
    """
    out = []
    v = np.where(grid.mask, grid.values, np.nan)
    m = grid.mask
    for k in range(grid.dim):
        vp, mp = _shifted(v, k, +1), _shifted(m, k, +1)
        vn, mn = _shifted(v, k, -1), _shifted(m, k, -1)
        both = m & mp & mn
        fwd = m & mp & ~mn
        bwd = m & mn & ~mp
        g = np.full(v.shape, np.nan)
        g[both] = (vp[both] - vn[both]) / (2.0 * grid.h)
        g[fwd] = (vp[fwd] - v[fwd]) / grid.h
        g[bwd] = (v[bwd] - vn[bwd]) / grid.h
        out.append(oracle.FieldGrid(grid.origin, grid.h, g, m & (mp | mn)))
    return out


def _shifted(a, axis, delta):
    """a sampled at index + delta along an axis; nan/False past the edge."""
    fill = False if a.dtype == bool else np.nan
    out = np.full_like(a, fill)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if delta > 0:
        dst[axis], src[axis] = slice(0, -delta), slice(delta, None)
    else:
        dst[axis], src[axis] = slice(-delta, None), slice(0, delta)
    out[tuple(dst)] = a[tuple(src)]
    return out


def grid_gradient_fn(grid):
    """grad_fn view of a FieldGrid for robot_path."""
    comps = grid_gradient(grid)

    def fn(X):
        return np.column_stack([oracle.grid_sample(c, X) for c in comps])

    return fn


# -- single runs ---------------------------------------------------------------


@dataclass
class RunResult:
    scenario: str
    method: str
    seed: int
    preset: str
    epochs: int
    metrics: oracle.Metrics
    final_loss: float
    wall_time: float
    out_dir: str
    files: dict
    params: np.ndarray | None = None    # trained weights, in memory only
    paths: list | None = None    # robot only: [(points, status), ...]


def run(scenario_name, method, seed, preset="paper", epochs=None,
        out_root="runs", width=32, hidden_layers=3):
    """Train one (scenario, method, seed) and write its run bundle.

    Returns a RunResult; the bundle under out_root holds config.json,
    metrics.csv, field.csv, fieldgrid.txt, losstrace.csv and, for the
    robot scenario, paths.csv. Raises losses.IncompatibleMethod for
    pairings the method cannot express and train.TrainingDiverged when
    the loss leaves the representable range.
    """
    if preset not in CLASSICAL_EPOCHS:
        raise ValueError(f"unknown preset {preset!r}")
    t0 = time.perf_counter()
    scenario = scenarios.get(scenario_name)
    objective = losses.assemble(method, scenario, width=width,
                                hidden_layers=hidden_layers)
    quantum = method == "qholomorphic"
    if epochs is None:
        epochs = QUANTUM_EPOCHS if quantum else CLASSICAL_EPOCHS[preset]
    if quantum:
        from . import qsim
        cfg = train.TrainConfig(epochs=epochs, lr=QUANTUM_LR, seed=seed)
        report = qsim.train_qholo(objective, cfg)
    else:
        cfg = train.TrainConfig(epochs=epochs, seed=seed)
        report = train.train(objective, cfg)

    grid = oracle_grid(scenario, preset,
                       cache_dir=os.path.join(out_root, "oracles"))
    es = eval_set(grid, scenario.eval_nodes[preset])
    field = model_field(objective, scenario)
    vals, laps = field_values(field, report.params, es.points)
    diff = vals - es.truth
    met = oracle.Metrics(float(np.sqrt(np.mean(diff ** 2))),
                         float(np.mean(np.abs(diff))),
                         float(np.mean(np.abs(laps))))

    paths = None
    if scenario.name == "robot":
        def gfn(X):
            return field.forward(report.params, X, order=1)[1][:, :, 0]
        paths = [robot_path(gfn, scenario.domain, s) for s in ROBOT_STARTS]

    out_dir = os.path.join(out_root, f"{scenario.name}_{method}_s{seed}")
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "config": _write_config(out_dir, scenario, objective, cfg, preset,
                                epochs, grid, es, width, hidden_layers,
                                quantum),
        "metrics": _write_metrics(out_dir, scenario.name, method, seed, met,
                                  report.final_loss),
        "field": _write_field_csv(out_dir, es, vals),
        "fieldgrid": _write_fieldgrid(out_dir, es, vals),
        "losstrace": _write_losstrace(out_dir, report.trace),
    }
    if paths is not None:
        files["paths"] = _write_paths(out_dir, paths)

    wall = time.perf_counter() - t0
    return RunResult(scenario.name, method, seed, preset, epochs, met,
                     report.final_loss, wall, out_dir, files,
                     params=report.params, paths=paths)


def _write_config(out_dir, scenario, objective, cfg, preset, epochs,
                  grid, es, width, hidden_layers, quantum):
    config = {
        "scenario": scenario.name,
        "method": objective.method,
        "seed": cfg.seed,
        "preset": preset,
        "epochs": epochs,
        "optimizer": {"kind": "adam", "lr": cfg.lr, "beta1": cfg.beta1,
                      "beta2": cfg.beta2, "eps": cfg.eps},
        "gradients": ("central differences over angles, h=1e-6" if quantum
                      else "reverse-mode tape"),
        "net": {"width": width, "hidden_layers": hidden_layers,
                "parts": [name for name, _ in objective.parts],
                "n_params": objective.n_params},
        "input_shift": [float(v) for v in scenario.input_shift],
        "input_scale": scenario.input_scale,
        "plan": {"seed": scenario.plan_seed,
                 "boundary_n": scenario.boundary_n,
                 "face_n": scenario.face_n,
                 "collocation_n": scenario.collocation_n},
        "term_weights": dict(sorted(objective.weights.items())),
        "oracle": {"nodes": grid.shape[0], "h": grid.h, "tol": 1e-10},
        "eval": {"nodes_per_axis": es.shape[0], "points": len(es.points),
                 "h": es.h},
    }
    if scenario.dielectric is not None:
        die = scenario.dielectric
        config["dielectric"] = {"eps1": die.eps1, "eps2": die.eps2,
                                "interface_y": die.y_cut}
    if scenario.name == "robot":
        config["paths"] = {"starts": [list(s) for s in ROBOT_STARTS],
                           "step": ROBOT_STEP, "max_steps": ROBOT_MAX_STEPS}
    path = os.path.join(out_dir, "config.json")
    with open(path, "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_metrics(out_dir, scenario, method, seed, met, final_loss):
    path = os.path.join(out_dir, "metrics.csv")
    with open(path, "w") as fh:
        fh.write("scenario,method,seed,rmse,mae,mean_abs_laplacian,"
                 "final_loss\n")
        fh.write(",".join([scenario, method, str(seed), _fmt(met.rmse),
                           _fmt(met.mae), _fmt(met.mean_abs_laplacian),
                           _fmt(final_loss)]) + "\n")
    return path


def _write_field_csv(out_dir, es, vals):
    cols = "xyz"[:es.points.shape[1]]
    path = os.path.join(out_dir, "field.csv")
    with open(path, "w") as fh:
        fh.write(",".join(cols) + ",value,truth\n")
        for p, v, t in zip(es.points, vals, es.truth):
            cells = [_fmt(c) for c in p] + [_fmt(v), _fmt(t)]
            fh.write(",".join(cells) + "\n")
    return path


def _write_fieldgrid(out_dir, es, vals):
    full = np.full(int(np.prod(es.shape)), np.nan)
    full[es.mask.ravel()] = vals
    sub = oracle.FieldGrid(es.origin, es.h, full.reshape(es.shape), es.mask)
    path = os.path.join(out_dir, "fieldgrid.txt")
    oracle.write_grid_text(sub, path)
    return path


def _write_losstrace(out_dir, trace):
    path = os.path.join(out_dir, "losstrace.csv")
    with open(path, "w") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in trace:
            fh.write(f"{epoch},{_fmt(loss)}\n")
    return path


def _write_paths(out_dir, paths):
    path = os.path.join(out_dir, "paths.csv")
    with open(path, "w") as fh:
        fh.write("path,step,x,y,status\n")
        for i, (pts, status) in enumerate(paths):
            for j, p in enumerate(pts):
                fh.write(f"{i},{j},{_fmt(p[0])},{_fmt(p[1])},{status}\n")
    return path


# -- aggregation ----------------------------------------------------------------


def collect_runs(out_root):
    """All metrics.csv rows under out_root, as typed dicts."""
    rows = []
    if not os.path.isdir(out_root):
        return rows
    for name in sorted(os.listdir(out_root)):
        path = os.path.join(out_root, name, "metrics.csv")
        if not os.path.isfile(path):
            continue
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            for line in fh:
                rec = dict(zip(header, line.strip().split(",")))
                rec["seed"] = int(rec["seed"])
                for k in ("rmse", "mae", "mean_abs_laplacian", "final_loss"):
                    rec[k] = float(rec[k])
                rows.append(rec)
    return rows


def aggregate(rows):
    """Per-(scenario, method) mean and population std of each metric."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["scenario"], r["method"]), []).append(r)
    out = []
    for (scen, meth), rs in groups.items():
        rs = sorted(rs, key=lambda r: r["seed"])
        entry = {"scenario": scen, "method": meth, "seeds": len(rs),
                 "seed_list": [r["seed"] for r in rs]}
        for k in ("rmse", "mae", "mean_abs_laplacian"):
            v = np.array([r[k] for r in rs])
            entry[k + "_mean"] = float(np.mean(v))
            entry[k + "_std"] = float(np.std(v))
        out.append(entry)
    scen_pos = {s: i for i, s in enumerate(SCENARIO_ORDER)}
    meth_pos = {m: i for i, m in enumerate(METHOD_ORDER)}
    out.sort(key=lambda e: (scen_pos.get(e["scenario"], 99),
                            meth_pos.get(e["method"], 99)))
    return out


def write_table(entries, path):
    cols = ("scenario,method,seeds,rmse_mean,rmse_std,mae_mean,mae_std,"
            "lap_mean,lap_std")
    with open(path, "w") as fh:
        fh.write(cols + "\n")
        for e in entries:
            fh.write(",".join([
                e["scenario"], e["method"], str(e["seeds"]),
                _fmt(e["rmse_mean"]), _fmt(e["rmse_std"]),
                _fmt(e["mae_mean"]), _fmt(e["mae_std"]),
                _fmt(e["mean_abs_laplacian_mean"]),
                _fmt(e["mean_abs_laplacian_std"])]) + "\n")


def format_table(entries, scale100=True):
    """Console view: one block per scenario, mean +/- std per method."""
    if not entries:
        return "no runs found\n"
    s = 100.0 if scale100 else 1.0
    unit = " (x100)" if scale100 else ""
    lines = []
    for scen in dict.fromkeys(e["scenario"] for e in entries):
        block = [e for e in entries if e["scenario"] == scen]
        seeds = {e["seeds"] for e in block}
        tag = f"{min(seeds)}" if len(seeds) == 1 else \
            f"{min(seeds)}-{max(seeds)}"
        lines.append(f"{scen}  [{tag} seed(s) per method]{unit}")
        lines.append(f"  {'method':<18}{'rmse':<22}{'mean |laplacian|'}")
        for e in block:
            r = f"{s * e['rmse_mean']:.2f} +/- {s * e['rmse_std']:.2f}"
            l = (f"{s * e['mean_abs_laplacian_mean']:.2f} +/- "
                 f"{s * e['mean_abs_laplacian_std']:.2f}")
            lines.append(f"  {e['method']:<18}{r:<22}{l}")
        lines.append("")
    lines.append("spread is the population standard deviation over seeds")
    lines.append("")
    return "\n".join(lines)


def missing_runs(entries):
    """Seed gaps: methods of a scenario with fewer seeds than its max."""
    gaps = []
    for scen in dict.fromkeys(e["scenario"] for e in entries):
        block = [e for e in entries if e["scenario"] == scen]
        want = max(e["seeds"] for e in block)
        for e in block:
            if e["seeds"] < want:
                have = set(e["seed_list"])
                missed = [s for s in range(want) if s not in have]
                gaps.append((scen, e["method"], missed))
    return gaps


# -- structural self-checks ------------------------------------------------------


def check(out=print):
    """Fast invariants behind the benchmark claims; True when all hold.

    Three spot checks, each a few seconds: random holomorphic nets are
    harmonic to rounding, quantum spectral and circuit routes agree and
    give zero Laplacian, and curl-derived fields are divergence-free in
    every supported dimension.
    """
    ok = True
    rng = np.random.default_rng(0)

    worst = 0.0
    for i in range(5):
        net = nets.ComplexMlp(nets.MlpSpec(1, 3, 16, "sin"))
        p = net.init(20 + i)
        X = rng.uniform(size=(200, 2))
        _, _, hess = net.forward(p, X, order=2)
        worst = max(worst, float(np.abs(hess[:, 0, 0, 0]
                                        + hess[:, 1, 1, 0]).max()))
    ok &= _report(out, "holomorphic nets harmonic", worst, 1e-8)

    from . import qsim
    worst_lap = worst_val = 0.0
    for i in range(3):
        qnet = qsim.QuantumNet()
        p = qnet.init(40 + i)
        X = rng.uniform(size=(50, 2))
        val, _, hess = qnet.forward(p, X, order=2)
        worst_lap = max(worst_lap, float(np.abs(hess[:, 0, 0, 0]
                                                + hess[:, 1, 1, 0]).max()))
        t1, t2 = qnet.split(p)
        circ = np.array([qsim.qholo_eval(t1, t2, x, y) for x, y in X])
        worst_val = max(worst_val,
                        float(np.abs(circ - val[:, 0]).max()))
    ok &= _report(out, "quantum field harmonic", worst_lap, 1e-8)
    ok &= _report(out, "quantum spectral = circuit", worst_val, 1e-10)

    worst = 0.0
    for d in (2, 3, 4):
        pair = nets.CurlPair(nets.MlpSpec(d, 2, 8, "tanh"))
        p = pair.init(60 + d)
        X = rng.uniform(size=(100, d))
        _, cgrads = pair.curl(p, X, order=1)
        div = sum(cgrads[k][:, k] for k in range(d))
        worst = max(worst, float(np.abs(div).max()))
    ok &= _report(out, "curl fields divergence-free", worst, 1e-8)
    return bool(ok)


def _report(out, label, value, bound):
    good = value < bound
    out(f"{'PASS' if good else 'FAIL'}  {label}: max {value:.3g} "
        f"(bound {bound:g})")
    return good
