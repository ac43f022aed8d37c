"""Reproducible experiment runner for the purity-transition laboratory.

Every command resolves its flags into a canonical configuration dict,
embeds that dict and its sha256 digest in the artifact it writes, and
emits rows in a deterministic parameter order. Identical configs
therefore produce byte-identical files, and any artifact can be
regenerated from its own header via ``--config``. Scans accept
``start:stop:step`` ranges (inclusive endpoints) and comma lists, and
parallelize over ``--jobs`` workers without changing the output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateSimilarity,
    DivergedError,
    IntegrationFailure,
    NumericalFailure,
    PhaseError,
    UnsupportedGrid,
)
from .evolve import EvolveConfig, entropy_curve_series, entropy_density
from .largen import residual_entropy, saddle_points, stationary_entropy_curve
from .mc import TrajectoryConfig, estimate_purity
from .model import INITIAL_KINDS, ModelParams, build_generator, initial_purity
from .riccati import analytic_u, coefficients, integrate_u
from .spectral import (
    eigendecompose,
    hermitianize,
    project_initial,
    propagate,
    similarity_weights,
    stationary_entropy,
)

__all__ = ["main", "parse_values", "parse_int_values", "resolve_jobs"]

_SCHEMA = 1
_REQUIRED = object()


def parse_values(raw) -> list[float]:
    """Float list from `a:b:step` (inclusive), `x,y,z`, or a single value."""
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    if isinstance(raw, (int, float)):
        return [float(raw)]
    text = str(raw).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if not step > 0:
            raise ConfigError("range step must be positive")
        if stop < start:
            raise ConfigError("range stop must not precede start")
        count = int(math.floor((stop - start) / step + 1e-12)) + 1
        return [start + k * step for k in range(count)]
    return [float(p) for p in text.split(",") if p]


def parse_int_values(raw) -> list[int]:
    if isinstance(raw, (list, tuple)):
        return [int(v) for v in raw]
    if isinstance(raw, int):
        return [raw]
    return [int(p) for p in str(raw).split(",") if p]


def resolve_jobs(value: Optional[int]) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("MIPT_LAB_JOBS")
    return int(env) if env else 1


def _canonical(conf: dict) -> str:
    return json.dumps(conf, sort_keys=True, separators=(",", ":"))


def _digest(conf: dict) -> str:
    return "sha256:" + hashlib.sha256(_canonical(conf).encode()).hexdigest()


def _cell(v) -> str:
    if isinstance(v, (bool,)):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _render_csv(conf: dict, headers: list[str], rows: list[list]) -> str:
    lines = [
        f"# schema={_SCHEMA}",
        f"# config={_digest(conf)} {_canonical(conf)}",
        ",".join(headers),
    ]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _render_json(conf, headers, rows, meta) -> str:
    doc = {
        "schema": _SCHEMA,
        "digest": _digest(conf),
        "config": conf,
        "rows": [
            {h: _jsonable(v) for h, v in zip(headers, row)} for row in rows
        ],
    }
    if meta is not None:
        doc["meta"] = {k: _jsonable(v) for k, v in meta.items()}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _write_artifact(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pmap(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    from joblib import Parallel, delayed

    return list(Parallel(n_jobs=jobs)(delayed(fn)(t) for t in tasks))


def _model(conf, n_sites=None) -> ModelParams:
    return ModelParams(
        num_sites=int(n_sites if n_sites is not None else conf["N"]),
        local_dim=conf["d"],
        meas_ratio=conf["alpha"] if n_sites is None else conf["_alpha"],
        coupling=conf["J"],
    )


def _projected(params, init):
    gen = build_generator(params)
    weights = similarity_weights(gen)
    decomp = eigendecompose(hermitianize(gen, params))
    p0 = initial_purity(init, params)
    return project_initial(decomp, weights, p0), weights


# Scan workers live at module scope so process-based parallelism can
# pickle them; each returns one fully formed output row.


def _gap_task(task):
    d, j, alpha, n = task
    p = ModelParams(num_sites=n, local_dim=d, meas_ratio=alpha, coupling=j)
    decomp = eigendecompose(hermitianize(build_generator(p), p))
    e0 = float(decomp.energies[0])
    e1 = float(decomp.energies[1])
    return [alpha, n, e0, e1, e1 - e0]


def _sweep_task(task):
    d, j, alpha, n, init = task
    p = ModelParams(num_sites=n, local_dim=d, meas_ratio=alpha, coupling=j)
    decomp, weights = _projected(p, init)
    s_total = float(n * stationary_entropy(decomp, weights)[-1])
    theory = residual_entropy(p) if init == "one_mixed" else math.nan
    return [alpha, n, s_total, float(theory)]


def _run_coeffs(conf, jobs):
    gen = build_generator(_model(conf))
    rows = [
        [n, float(gen.diag[n]), float(gen.upper[n]), float(gen.lower[n])]
        for n in range(gen.num_sites + 1)
    ]
    return ["n", "a", "b", "c"], rows, None


def _run_spectrum(conf, jobs):
    p = _model(conf)
    decomp = eigendecompose(hermitianize(build_generator(p), p))
    rows = [[k, float(e)] for k, e in enumerate(decomp.energies)]
    return ["k", "energy"], rows, None


def _run_gap_scan(conf, jobs):
    tasks = [
        (conf["d"], conf["J"], alpha, n)
        for alpha in conf["alpha"]
        for n in conf["N"]
    ]
    rows = _pmap(_gap_task, tasks, jobs)
    return ["alpha", "N", "E0", "E1", "gap"], rows, None


def _run_evolve(conf, jobs):
    p = _model(conf)
    gen = build_generator(p)
    dt = conf["dt"]
    if dt is None:
        # Largest stable uniform step that lands exactly on t_max.
        bound = 0.4 / float(np.max(np.abs(gen.diag)))
        dt = conf["t_max"] / max(1, math.ceil(conf["t_max"] / bound))
    record = conf["record"]
    if record is None:
        record = [k * conf["t_max"] / 10.0 for k in range(11)]
    series = entropy_curve_series(
        gen,
        initial_purity(conf["init"], p),
        EvolveConfig(dt=dt, t_max=conf["t_max"], record_times=tuple(record)),
    )
    rows = [
        [float(t), n, float(s)]
        for t, curve in zip(series.times, series.curves)
        for n, s in enumerate(curve)
    ]
    return ["t", "n", "s"], rows, None


def _run_entropy_curve(conf, jobs):
    p = _model(conf)
    decomp, weights = _projected(p, conf["init"])
    if conf["t_max"] is None:
        s = stationary_entropy(decomp, weights)
    else:
        s = entropy_density(propagate(decomp, weights, conf["t_max"]))
    n_sites = p.num_sites
    rows = [[n, n / n_sites, float(v)] for n, v in enumerate(s)]
    return ["n", "x", "s"], rows, None


def _run_largen(conf, jobs):
    p = ModelParams(
        num_sites=2, local_dim=conf["d"], meas_ratio=conf["alpha"], coupling=conf["J"]
    )
    prof = stationary_entropy_curve(p, init=conf["init"], num_points=conf["grid_points"])
    rows = [
        [float(x), float(v), float(t), float(dd), float(al), float(ar), float(s)]
        for x, v, t, dd, al, ar, s in zip(
            prof.x, prof.V, prof.tau, prof.D, prof.A_L, prof.A_R, prof.s_inf
        )
    ]
    return ["x", "V", "tau", "D", "A_L", "A_R", "s_inf"], rows, None


def _run_saddle(conf, jobs):
    rows = []
    for alpha in conf["alpha"]:
        p = ModelParams(
            num_sites=2, local_dim=conf["d"], meas_ratio=alpha, coupling=conf["J"]
        )
        x_l, x_r = saddle_points(p)
        rows.append([alpha, float(x_l), float(x_r)])
    return ["alpha", "x_L", "x_R"], rows, None


def _run_riccati(conf, jobs):
    p = ModelParams(
        num_sites=2, local_dim=conf["d"], meas_ratio=conf["alpha"], coupling=conf["J"]
    )
    co = coefficients(p)
    series = integrate_u(p, t_max=conf["t_max"], dt=conf["dt"])
    rows = []
    for t, u in zip(series.times, series.u):
        try:
            ana = float(analytic_u(float(t), co))
        except DivergedError:
            ana = math.nan
        rows.append([float(t), float(u), ana])
    meta = {
        "diverged": bool(series.diverged),
        "t_c_estimate": series.t_c_estimate,
        "t0": co.t0,
        "t_c_analytic": co.t_c,
    }
    return ["t", "u", "u_analytic"], rows, meta


def _run_mc_validate(conf, jobs):
    p = _model(conf)
    cfg = TrajectoryConfig(
        dt=conf["dt"], t_max=conf["t"], n_traj=conf["n_traj"], seed=conf["seed"]
    )
    est = estimate_purity(p, cfg, conf["init"])
    decomp, weights = _projected(p, conf["init"])
    ode = np.exp(propagate(decomp, weights, est.time).log_values())
    rows = []
    for n in range(p.num_sites + 1):
        diff = float(est.raw_mean[n] - ode[n])
        se = float(est.raw_se[n])
        if se > 1e-14:
            z = diff / se
        else:
            z = 0.0 if abs(diff) <= 1e-10 else math.inf
        rows.append([n, float(est.raw_mean[n]), se, float(ode[n]), z])
    return ["n", "mc_mean", "mc_se", "ode_value", "z_score"], rows, None


def _run_sweep(conf, jobs):
    tasks = [
        (conf["d"], conf["J"], alpha, n, conf["init"])
        for alpha in conf["alpha"]
        for n in conf["N"]
    ]
    rows = _pmap(_sweep_task, tasks, jobs)
    return ["alpha", "N", "S_N", "S_theory"], rows, None


_LARGEN_INITS = ("pure", "order1_mixed")

_COMMANDS = {
    "coeffs": (
        "Tridiagonal generator coefficients a_n, b_n, c_n",
        [
            ("N", "int", _REQUIRED),
            ("d", "int", 2),
            ("alpha", "float", _REQUIRED),
            ("J", "float", 1.0),
        ],
        _run_coeffs,
    ),
    "spectrum": (
        "Eigenvalues of the Hermitian form of the generator",
        [
            ("N", "int", _REQUIRED),
            ("d", "int", 2),
            ("alpha", "float", _REQUIRED),
            ("J", "float", 1.0),
        ],
        _run_spectrum,
    ),
    "gap-scan": (
        "Two lowest levels and their gap over an (alpha, N) grid",
        [
            ("d", "int", 2),
            ("alpha", "values", _REQUIRED),
            ("N", "ints", _REQUIRED),
            ("J", "float", 1.0),
        ],
        _run_gap_scan,
    ),
    "evolve": (
        "Entropy density profiles from direct time integration",
        [
            ("N", "int", _REQUIRED),
            ("d", "int", 2),
            ("alpha", "float", _REQUIRED),
            ("J", "float", 1.0),
            ("init", "choice:" + ",".join(INITIAL_KINDS), "pure"),
            ("dt", "float", None),
            ("t_max", "float", _REQUIRED),
            ("record", "values", None),
        ],
        _run_evolve,
    ),
    "entropy-curve": (
        "Spectral entropy profile at a time, or the long-time limit",
        [
            ("N", "int", _REQUIRED),
            ("d", "int", 2),
            ("alpha", "float", _REQUIRED),
            ("J", "float", 1.0),
            ("init", "choice:" + ",".join(INITIAL_KINDS), "pure"),
            ("t_max", "float", None),
        ],
        _run_entropy_curve,
    ),
    "largen": (
        "Continuum potential, hopping, and stationary entropy curve",
        [
            ("d", "int", 2),
            ("alpha", "float", _REQUIRED),
            ("J", "float", 1.0),
            ("init", "choice:" + ",".join(_LARGEN_INITS), "pure"),
            ("grid_points", "int", 401),
        ],
        _run_largen,
    ),
    "saddle": (
        "Bisection saddle points of the overlap integrand",
        [
            ("d", "int", 2),
            ("alpha", "values", _REQUIRED),
            ("J", "float", 1.0),
        ],
        _run_saddle,
    ),
    "riccati": (
        "Half-cut curvature flow u(t), numeric and closed form",
        [
            ("d", "int", 2),
            ("alpha", "float", _REQUIRED),
            ("J", "float", 1.0),
            ("t_max", "float", _REQUIRED),
            ("dt", "float", _REQUIRED),
        ],
        _run_riccati,
    ),
    "mc-validate": (
        "Monte Carlo purities against the master-equation solution",
        [
            ("N", "int", _REQUIRED),
            ("d", "int", 2),
            ("alpha", "float", _REQUIRED),
            ("J", "float", 1.0),
            ("t", "float", _REQUIRED),
            ("dt", "float", 0.01),
            ("n_traj", "int", _REQUIRED),
            ("seed", "int", _REQUIRED),
            ("init", "choice:" + ",".join(INITIAL_KINDS), "pure"),
        ],
        _run_mc_validate,
    ),
    "sweep": (
        "Long-time total entropy over an (alpha, N) grid",
        [
            ("d", "int", 2),
            ("alpha", "values", _REQUIRED),
            ("N", "ints", _REQUIRED),
            ("J", "float", 1.0),
            ("init", "choice:" + ",".join(INITIAL_KINDS), "one_mixed"),
        ],
        _run_sweep,
    ),
}


def _convert(name: str, kind: str, raw):
    if raw is None:
        return None
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "values":
            return parse_values(raw)
        if kind == "ints":
            return parse_int_values(raw)
        if kind.startswith("choice:"):
            options = kind.split(":", 1)[1].split(",")
            if raw not in options:
                raise ConfigError(f"--{name} must be one of {options}, got {raw!r}")
            return raw
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for --{name}: {exc}") from exc
    raise AssertionError(f"unknown kind {kind}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mipt-lab",
        description="Experiment runner for the Brownian-circuit purity transition",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (help_text, params, _runner) in _COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text)
        for pname, _kind, default in params:
            flag = "--" + pname.replace("_", "-")
            req = " (required)" if default is _REQUIRED else ""
            cmd.add_argument(flag, dest=pname, default=None, help=f"{pname}{req}")
        cmd.add_argument("--config", default=None, help="JSON config file to merge")
        cmd.add_argument("--format", choices=("csv", "json"), default="csv")
        cmd.add_argument("--output", "-o", default="-", help="file path or - for stdout")
        cmd.add_argument("--jobs", type=int, default=None, help="parallel workers")
    return parser


def _resolve_config(args) -> dict:
    _help, params, _runner = _COMMANDS[args.command]
    file_conf = {}
    if args.config is not None:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if "config" in loaded and "rows" in loaded:
            loaded = loaded["config"]
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        file_conf = dict(loaded)
        declared = file_conf.pop("command", args.command)
        if declared != args.command:
            raise ConfigError(
                f"config file is for {declared!r}, not {args.command!r}"
            )
        known = {p[0] for p in params}
        unknown = set(file_conf) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    conf = {"command": args.command}
    for pname, kind, default in params:
        raw = getattr(args, pname)
        if raw is None:
            raw = file_conf.get(pname)
        if raw is None:
            if default is _REQUIRED:
                raise ConfigError(f"missing required --{pname.replace('_', '-')}")
            value = default
        else:
            value = _convert(pname, kind, raw)
        conf[pname] = value
    return conf


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        conf = _resolve_config(args)
        _help, _params, runner = _COMMANDS[args.command]
        headers, rows, meta = runner(conf, resolve_jobs(args.jobs))
        if args.format == "json":
            text = _render_json(conf, headers, rows, meta)
        else:
            text = _render_csv(conf, headers, rows)
        _write_artifact(args.output, text)
        return 0
    except (ConfigError, PhaseError, UnsupportedGrid, DegenerateSimilarity) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, IntegrationFailure, DivergedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
