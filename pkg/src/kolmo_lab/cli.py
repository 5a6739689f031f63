"""Batch runner: ``kolmo-lab <subcommand> --config <file> [--out DIR] [--threads N] [--seed S]``.

A config is one JSON object with run settings (``seed``, ``out``,
``threads``, ``resolution``) and an optional section per subcommand.
Missing keys take the shipped defaults; unknown keys are rejected.

Exit codes: 0 success, 1 validation error, 2 numerical failure (an
``error.json`` diagnostic is written), 3 acceptance failure.
"""

import argparse
import copy
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import errors

SUBCOMMANDS = ("geometry", "fundsol", "simulate", "solve", "harnack", "poincare", "sobolev",
               "price", "obstacle", "tail", "nonlocal-bound", "accept")

DEFAULTS = {
    "seed": 0,
    "out": "kolmo_out",
    "threads": 1,
    "resolution": [64, 128],
    "geometry": {"n": 1, "orientation": 1.0, "m": [], "blocks": [], "n_samples": 10000,
                 "times": [0.25, 0.5, 1.0, 2.0], "points": [[1.0, 1.0, 0.0], [0.5, -0.3, 0.2]]},
    "fundsol": {"orientation": 1.0, "A0": [[1.0]], "points": [[0.3, 0.2, 0.8], [-0.5, 0.4, 1.5]],
                "h": [0.08, 0.04, 0.02, 0.01], "mass_times": [0.5, 1.0, 2.0]},
    "simulate": {"n": 1, "T": 1.0, "dt": 0.001, "n_paths": 20000, "friction": False,
                 "record_every": 100, "kde": True},
    "solve": {"nv": 64, "nx": 64, "nt": 65, "v_range": [-2.0, 2.0], "x_range": [-2.0, 2.0],
              "t_range": [-1.0, 0.0], "coefficient": "checkerboard", "lam": 0.1, "Lam": 1.0,
              "cell": 0.55, "f": 0.0, "width": 0.5},
    "harnack": {"omega": 0.5, "rho": 0.3, "eta": 0.5, "R": 1.1, "f_norm": 0.05, "p": None},
    "poincare": {"omega": 0.5, "rho": 0.3, "eta": 0.5, "R": 1.1,
                 "theta0": [0.1, 0.25, 0.4, 0.55, 0.7, 0.85], "theta_primary": 0.25, "level": "q0.3"},
    "sobolev": {"n_fields": 20, "q": [2, 4, 6], "n": 32},
    "price": {"S0": 100.0, "sigma": 0.2, "rate": 0.05, "T": 1.0, "strike": 100.0,
              "averaging": "geometric", "levels": 2, "n_xi": 161, "n_a": 321, "mc_paths": 0,
              "mc_steps": 500},
    "obstacle": {"n": 41, "n_snap": 11, "amplitude": 0.3, "offset": 0.1, "width": 1.0},
    "tail": {"s": 0.5, "p": 2.0, "r": 1.0, "z0": [0.0, 0.0, 0.0], "profile": "indicator",
             "radius": 2.0, "beta": 2.0, "R_inf": 50.0},
    "nonlocal-bound": {"n_runs": 20},
    "accept": {"criteria": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11], "pricing_seed": 2024},
}

ENUMS = {("solve", "coefficient"): ["checkerboard", "constant"],
         ("price", "averaging"): ["geometric", "arithmetic"],
         ("tail", "profile"): ["indicator", "gaussian", "power"]}

NULLABLE = {("harnack", "p"): "number"}


def _schema_for(value, path=()):
    if path in NULLABLE:
        return {"type": [NULLABLE[path], "null"]}
    if path in ENUMS:
        return {"enum": ENUMS[path]}
    if isinstance(value, bool):
        return {"type": "boolean"}
    if isinstance(value, int):
        return {"type": "integer"}
    if isinstance(value, float):
        return {"type": "number"}
    if isinstance(value, str):
        return {"type": "string"}
    if isinstance(value, list):
        return {"type": "array"}
    if isinstance(value, dict):
        return {"type": "object", "additionalProperties": False,
                "properties": {k: _schema_for(v, path + (k,)) for k, v in value.items()}}
    return {}


SCHEMA = _schema_for(DEFAULTS)
SCHEMA["properties"]["seed"]["minimum"] = 0
SCHEMA["properties"]["threads"]["minimum"] = 1
SCHEMA["properties"]["subcommand"] = {"enum": list(SUBCOMMANDS)}


class ValidationFailure(Exception):
    pass


def load_config(path):
    """Parse and validate; returns the config merged over the defaults."""
    import jsonschema

    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ValidationFailure(f"cannot read config: {e}")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationFailure(f"config is not valid JSON: {e}")
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ValidationFailure(f"invalid config at '{where}': {e.message}")
    merged = copy.deepcopy(DEFAULTS)
    for k, v in cfg.items():
        if isinstance(v, dict) and isinstance(merged.get(k), dict):
            merged[k].update(v)
        else:
            merged[k] = v
    return merged


def default_config_path():
    return resources.files("kolmo_lab") / "configs" / "default.json"


# ---------------------------------------------------------------- output

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    return x


class Output:
    """Collects artifacts in ``out``; the manifest is written last by atomic rename."""

    def __init__(self, out):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = {}

    def _write(self, name, data):
        path = self.dir / name
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def json(self, name, obj):
        self._write(name, (json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n").encode())

    def csv(self, name, rows):
        if not rows:
            rows = [{"empty": ""}]
        keys = list(rows[0].keys())
        for r in rows[1:]:
            keys += [k for k in r if k not in keys]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\r\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(r.get(k, "")) for k in keys})
        self._write(name, buf.getvalue().encode())

    def manifest(self, cfg, sub, seed, threads, wall, code, extra=None):
        from . import kernels
        import scipy
        obj = {"subcommand": sub, "config": cfg, "seed": seed, "threads": threads,
               "exit_code": code, "wall_time": wall, "artifacts": self.files,
               "versions": {"kolmo_lab": __version__, "python": platform.python_version(),
                            "numpy": np.__version__, "scipy": scipy.__version__,
                            "backend": kernels.BACKEND}}
        if extra:
            obj.update(extra)
        data = (json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n").encode()
        tmp = self.dir / "manifest.json.tmp"
        tmp.write_bytes(data)
        os.replace(tmp, self.dir / "manifest.json")


def _cell(v):
    v = _clean(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v)
    return v


# ---------------------------------------------------------------- subcommands

def cmd_geometry(cfg, out, seed, threads):
    from . import group_geometry as gg
    c = cfg["geometry"]
    if c["m"]:
        L = gg.LieStructure(gg.BlockStructure(tuple(c["m"]), tuple(np.asarray(b) for b in c["blocks"])))
    else:
        L = gg.LieStructure.kinetic(c["n"], c["orientation"])
    rng = np.random.default_rng(seed)
    a, b, d = (rng.normal(size=(c["n_samples"], L.N + 1)) for _ in range(3))
    assoc = float(np.abs(gg.compose(L, gg.compose(L, a, b), d) - gg.compose(L, a, gg.compose(L, b, d))).max())
    inv = float(np.abs(gg.compose(L, a, gg.inverse(L, a))).max())
    A0 = np.eye(L.m0)
    ok, hyp = gg.hypoellipticity_check(L, A0)
    rows = []
    for t in c["times"]:
        C = gg.covariance(L, A0, t)
        rows.append({"t": t, "det": float(np.linalg.det(C)), "min_eig": float(np.linalg.eigvalsh(C)[0])})
    pts = [p for p in c["points"] if len(p) == L.N + 1]
    norms = [{"point": p, "norm": gg.homogeneous_norm(L, np.array(p))} for p in pts]
    out.json("geometry.json", {"Q": L.Q, "N": L.N, "associativity_error": assoc,
                               "inverse_error": inv, "hypoelliptic": ok, "hypoellipticity": hyp,
                               "norms": norms})
    out.csv("covariance.csv", rows)
    return 0


def cmd_fundsol(cfg, out, seed, threads):
    from . import fundamental_solution as fs
    from . import group_geometry as gg
    c = cfg["fundsol"]
    A0 = np.atleast_2d(c["A0"])
    L = gg.LieStructure.kinetic(A0.shape[0], c["orientation"])
    G = fs.GammaEvaluator(L, A0)
    rows = []
    for p in c["points"]:
        z = np.array(p, dtype=float)
        row = {"point": p, "gamma": G(z)}
        for h in c["h"]:
            row[f"residual_h{h}"] = fs.gamma_pde_residual(G, z, h)
        rows.append(row)
    mass = [{"t": t, "mass": fs.gamma_mass(G, t)} for t in c["mass_times"]]
    out.csv("gamma.csv", rows)
    out.json("fundsol.json", {"Q": G.Q, "mass": mass})
    return 0


def cmd_simulate(cfg, out, seed, threads):
    from . import fundamental_solution as fs
    from . import group_geometry as gg
    from . import stochastic as st
    c = cfg["simulate"]
    steps = int(round(c["T"] / c["dt"]))
    ens = st.simulate_langevin(c["n"], 0.0, 0.0, c["T"], c["dt"], c["n_paths"], seed,
                               friction=c["friction"], record_every=min(c["record_every"], steps),
                               threads=threads)
    rows = []
    for k, t in enumerate(ens.times):
        S = ens.states[:, k, :]
        row = {"t": float(t)}
        for i, li in enumerate(ens.labels):
            row[f"mean_{li}"] = float(S[:, i].mean())
        for i, li in enumerate(ens.labels):
            for j, lj in enumerate(ens.labels[i:], start=i):
                row[f"m2_{li}{lj}"] = float(np.mean(S[:, i] * S[:, j]))
        rows.append(row)
    summary = ens.summary()
    if c["kde"] and c["n"] == 1 and not c["friction"]:
        G = fs.GammaEvaluator(gg.LieStructure.kinetic(1, -1.0), [[1.0]])
        summary["kde_vs_gamma"] = st.density_vs_gamma(ens, G, c["T"])
    out.csv("moments.csv", rows)
    out.json("simulate.json", summary)
    return 0


def cmd_solve(cfg, out, seed, threads):
    from .kfp_solver import OperatorSpec, checkerboard, moments, solve
    from .grid import GridField
    c = cfg["solve"]
    if c["coefficient"] == "checkerboard":
        a = checkerboard(c["lam"], c["Lam"], c["cell"], seed=seed)
    else:
        a = c["Lam"]
    spec = OperatorSpec(a=a, f=c["f"], lam=c["lam"], Lam=c["Lam"])
    v = np.linspace(*c["v_range"], c["nv"])
    x = np.linspace(*c["x_range"], c["nx"])
    w = c["width"]
    u = solve(spec, v, x, c["t_range"][0], c["t_range"][1],
              lambda V, X: np.exp(-(V ** 2 + X ** 2) / (2 * w * w)), n_snap=c["nt"])
    rows = []
    for k, t in enumerate(u.axes[2]):
        prof = GridField((v, x), u.values[..., k], ("v", "x"))
        rows.append({"t": float(t), **moments(prof), "max": float(u.values[..., k].max()),
                     "min": float(u.values[..., k].min())})
    path = out.dir / "solution.bin"
    u.to_binary(path, dt=u.cfl.get("dt", 0.0), seed=seed)
    out.files["solution.bin"] = hashlib.sha256(path.read_bytes()).hexdigest()
    out.csv("solve_moments.csv", rows)
    out.json("solve.json", {"cfl": u.cfl, "shape": list(u.values.shape)})
    return 0


def parse_sweep(text):
    """``key=a:b:step`` to ``(key, values)`` with the end point included."""
    try:
        key, rng = text.split("=", 1)
        a, b, s = (float(q) for q in rng.split(":"))
    except ValueError:
        raise ValidationFailure(f"bad --sweep '{text}': expected key=start:stop:step")
    if s <= 0 or b < a:
        raise ValidationFailure(f"bad --sweep '{text}': need step > 0 and stop >= start")
    n = int(np.floor((b - a) / s + 1e-9)) + 1
    return key.strip(), [round(a + i * s, 12) for i in range(n)]


def _geometry_rows(cfg, section, seed, sweep, evaluate):
    from .acceptance import battery_problem
    from .kfp_solver import HarnackGeometry
    c = dict(cfg[section])
    n = cfg["resolution"][0]
    key, values = sweep if sweep else (None, [None])
    if key is not None and key not in ("omega", "rho", "eta", "R", "theta_primary"):
        raise ValidationFailure(f"cannot sweep '{key}' for {section}")
    cache = {}
    rows = []
    for val in values:
        par = dict(c)
        if key is not None:
            par[key] = val
        gkw = {k: par[k] for k in ("omega", "rho", "eta", "R") if k in par}
        if section == "poincare":
            gkw["theta0"] = tuple(par["theta0"])
            gkw["theta_primary"] = par["theta_primary"]
        row = {key: val} if key else {}
        try:
            geom = HarnackGeometry(**gkw)
        except errors.GeometryError as e:
            rows.append({**row, "status": "inadmissible", "reason": str(e)})
            continue
        dom = (geom.eta, geom.R)
        if dom not in cache:
            cache[dom] = battery_problem(seed, n, geom)
        spec, u = cache[dom]
        rep = evaluate(spec, u, geom, par)
        rows.append({**row, "status": "ok", "lhs": rep["lhs"], "rhs": rep["rhs"],
                     "fitted_constant": rep["fitted_constant"]})
    return rows


def cmd_harnack(cfg, out, seed, threads, sweep=None):
    from .kfp_solver import harnack_ratio

    def ev(spec, u, geom, par):
        return harnack_ratio(u, geom, f_norm=par["f_norm"], p=par["p"])

    rows = _geometry_rows(cfg, "harnack", seed, sweep, ev)
    out.csv("harnack.csv", rows)
    return 0


def cmd_poincare(cfg, out, seed, threads, sweep=None):
    from .kfp_solver import weak_poincare_check

    def ev(spec, u, geom, par):
        return weak_poincare_check(u, geom, level=par["level"])

    rows = _geometry_rows(cfg, "poincare", seed, sweep, ev)
    out.csv("poincare.csv", rows)
    return 0


def cmd_sobolev(cfg, out, seed, threads):
    from .acceptance import _as_periodic, sobolev_field
    from .kfp_solver import sobolev_embedding_check
    c = cfg["sobolev"]
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(c["n_fields"]):
        u, _ = sobolev_field(rng, n=c["n"])
        for q in c["q"]:
            rep = sobolev_embedding_check(_as_periodic(u), q, m0=3)
            rows.append({"field": i, "q": q, "lhs": rep["lhs"], "rhs": rep["rhs"],
                         "ratio": rep["fitted_constant"]})
    out.csv("sobolev.csv", rows)
    out.json("sobolev.json", {"fitted_constant": max(r["ratio"] for r in rows)})
    return 0


def cmd_price(cfg, out, seed, threads):
    from .finance import AsianModel, mc_asian_oracle, price_asian
    c = cfg["price"]
    m = AsianModel(S0=c["S0"], sigma=c["sigma"], r=c["rate"], T=c["T"],
                   averaging=c["averaging"], strike=c["strike"])
    res = price_asian(m, n_xi=c["n_xi"], n_a=c["n_a"], levels=c["levels"])
    if c["mc_paths"] > 0:
        res["mc"] = mc_asian_oracle(m, c["mc_paths"], seed, n_steps=c["mc_steps"])
    out.json("price.json", res)
    return 0


def cmd_obstacle(cfg, out, seed, threads):
    from .finance import ObstacleProblem, solve_obstacle
    from .kfp_solver import OperatorSpec
    c = cfg["obstacle"]
    v = np.linspace(-2, 2, c["n"])
    x = np.linspace(-2, 2, c["n"])

    def psi(V, X, t):
        return c["amplitude"] * np.exp(-(V ** 2 + X ** 2) / c["width"] ** 2) - c["offset"]

    def g(V, X, t):
        return np.maximum(psi(V, X, t), 0.0)

    ob = ObstacleProblem(OperatorSpec(), psi, g, v, x, -1.0, 0.0, n_snap=c["n_snap"])
    _, rep = solve_obstacle(ob)
    out.csv("penalty.csv", [{"eps": e, "gap": gp} for e, gp in zip(rep["eps"], rep["penalty_gap"])])
    rep = {k: val for k, val in rep.items() if k not in ("eps", "penalty_gap")}
    out.json("obstacle.json", rep)
    return 0


def cmd_tail(cfg, out, seed, threads):
    from . import nonlocal_kinetic as nl
    c = cfg["tail"]
    fp = nl.FractionalParams(s=c["s"], p=c["p"], R_inf=c["R_inf"])
    z0 = np.array(c["z0"], dtype=float)
    v0 = z0[0]
    if c["profile"] == "indicator":
        rad = c["radius"]

        def u(v, x, t):
            return (np.abs(v - v0) < rad).astype(float)
        decay = nl.Decay(support=rad)
    elif c["profile"] == "gaussian":
        rad = c["radius"]

        def u(v, x, t):
            return np.exp(-((v - v0) / rad) ** 2)
        decay = nl.Decay(beta=c["beta"], A=(c["beta"] / (2 * np.e)) ** (c["beta"] / 2) * rad ** c["beta"])
    else:
        beta = c["beta"]

        def u(v, x, t):
            return np.minimum(1.0, np.abs(v - v0) ** (-beta))
        decay = nl.Decay(beta=beta, A=1.0)
    a = nl.tail(fp, u, z0, c["r"], decay=decay)
    b = nl.tail_sup(fp, u, z0, c["r"], decay=decay)
    out.json("tail.json", {"tail": a["value"], "tail_sup": b["value"], "remainder": a["remainder"],
                           "params": a["params"]})
    return 0


def cmd_nonlocal_bound(cfg, out, seed, threads):
    from .acceptance import nonlocal_run
    c = cfg["nonlocal-bound"]
    rows = []
    for k in range(c["n_runs"]):
        fp, _, rep = nonlocal_run(seed, k)
        rows.append({"run": k, "p": fp.p, "s": fp.s, "lhs": rep["lhs"], "average": rep["average"],
                     "tail_sup": rep["tail_sup"], "exponent": rep["exponent"],
                     "fitted_constant": rep["fitted_constant"]})
    out.csv("nonlocal_bound.csv", rows)
    out.json("nonlocal_bound.json", {"fitted_constant": max(r["fitted_constant"] for r in rows)})
    return 0


def cmd_accept(cfg, out, seed, threads, compare=None):
    from . import acceptance as acc
    c = cfg["accept"]
    timings = {}
    summary = []
    data_files = []
    all_ok = True
    for k in c["criteria"]:
        if k not in acc.CRITERIA:
            raise ValidationFailure(f"unknown criterion {k}")
        kw = {"pricing_seed": c["pricing_seed"]} if k == 8 else {}
        if k == 5:
            kw["threads"] = threads
        res, secs = acc.run_criterion(k, seed=seed, **kw)
        timings[str(k)] = secs
        name = f"criterion_{k:02d}.json"
        out.json(name, {key: res[key] for key in ("id", "name", "pass", "metrics")})
        data_files.append(name)
        for tname, rows in res["tables"].items():
            fname = f"criterion_{k:02d}_{tname}.csv"
            out.csv(fname, rows)
            data_files.append(fname)
        all_ok &= res["pass"]
        summary.append({"id": k, "name": res["name"], "pass": res["pass"]})
        print(f"[{'PASS' if res['pass'] else 'FAIL'}] {k:2d} {res['name']} ({secs:.1f} s)", flush=True)
    if compare is not None:
        res = acc.criterion_12(compare, out.dir, data_files)
        all_ok &= res["pass"]
        summary.append({"id": 12, "name": res["name"], "pass": res["pass"],
                        "differing": res["metrics"]["differing"]})
        print(f"[{'PASS' if res['pass'] else 'FAIL'}] 12 {res['name']} "
              f"({res['metrics']['compared']} artifacts)", flush=True)
    out.json("acceptance_summary.json", {"criteria": summary, "pass": all_ok})
    return (0 if all_ok else 3), {"timings": timings}


COMMANDS = {"geometry": cmd_geometry, "fundsol": cmd_fundsol, "simulate": cmd_simulate,
            "solve": cmd_solve, "harnack": cmd_harnack, "poincare": cmd_poincare,
            "sobolev": cmd_sobolev, "price": cmd_price, "obstacle": cmd_obstacle,
            "tail": cmd_tail, "nonlocal-bound": cmd_nonlocal_bound, "accept": cmd_accept}

VALIDATION = (errors.DomainError, errors.PreconditionError)


def build_parser():
    ap = argparse.ArgumentParser(prog="kolmo-lab", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="JSON config (defaults to the shipped one)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--sweep", help="harnack/poincare: key=start:stop:step")
    ap.add_argument("--compare", help="accept: previous output directory for the determinism check")
    return ap


def run(argv=None):
    """Entry point returning the exit code."""
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config or default_config_path())
        if cfg.get("subcommand") not in (None, args.subcommand):
            raise ValidationFailure(f"config is for '{cfg['subcommand']}', not '{args.subcommand}'")
        seed = cfg["seed"] if args.seed is None else args.seed
        if seed < 0:
            raise ValidationFailure("seed must be non-negative")
        threads = args.threads or cfg["threads"]
        env = os.environ.get("KOLMO_LAB_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValidationFailure(f"KOLMO_LAB_THREADS='{env}' is not an integer")
        if threads < 1:
            raise ValidationFailure("threads must be positive")
        sweep = parse_sweep(args.sweep) if args.sweep else None
        if sweep and args.subcommand not in ("harnack", "poincare"):
            raise ValidationFailure("--sweep applies to harnack and poincare")
    except ValidationFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"seed: {seed}", flush=True)
    out = Output(args.out or cfg["out"])
    kw = {}
    if sweep:
        kw["sweep"] = sweep
    if args.subcommand == "accept":
        kw["compare"] = args.compare
    extra = None
    try:
        res = COMMANDS[args.subcommand](cfg, out, seed, threads, **kw)
        code, extra = res if isinstance(res, tuple) else (res, None)
    except (ValidationFailure, *VALIDATION) as e:
        print(f"error: {e}", file=sys.stderr)
        code = 1
        out.json("error.json", {"kind": type(e).__name__, "message": str(e)})
    except (errors.KolmoError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        diag = {"kind": type(e).__name__, "message": str(e)}
        for attr in ("step", "suggested_dt", "suggested_bounds", "report"):
            if getattr(e, attr, None) is not None:
                diag[attr] = getattr(e, attr)
        out.json("error.json", diag)
        code = 2
    out.manifest(cfg, args.subcommand, seed, threads, time.perf_counter() - t0, code, extra)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
