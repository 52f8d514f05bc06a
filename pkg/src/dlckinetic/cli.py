"""Config-driven scenario runner.

Usage::

    dlckinetic <command> [--config FILE] [--set key.path=value ...] [--out DIR]

Every output file starts with a ``#`` comment carrying the config hash and
the seed.  Stochastic commands refuse to run without an explicit seed.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import acceptance
from . import analytics as A
from .boltzmann import fixed_point, integrate, wild_solution
from .density import DiscreteDensity, ModelSpec, Regime, from_pointmass, from_poisson
from .ensemble import Ensemble, LeaCoulsonSpec, empirical_density, lea_coulson_sample, simulate
from .errors import ConfigError, DLCError
from .grazing import epsilon_sweep, grazing_evolve, lea_coulson_pgf, slope_at_one, sweep_csv
from .laws import GrazingSpec, hgt_case1, make_law, mutation_case2
from .scaling import moment_recursion, smoothing_iterate
from .steady import HgtParams, hgt_steady_density, size_biased_check

COMMANDS = ("evolve", "wild", "mc", "steady", "grazing", "sweep", "leacoulson",
            "scaling", "region", "metrics", "verify")
STOCHASTIC = {"mc": "mc.seed", "leacoulson": "leacoulson.seed", "scaling": "scaling.seed"}

# Every accepted key with its default.  ``None`` marks optional values.
DEFAULTS = {
    "model": {"family": "hgt_case1", "params": {"p_l": 0.3, "p_d": 0.1, "p_h": 0.2},
              "X": None, "Y": None},
    "initial": {"kind": "pointmass", "m0": 5},
    "solver": {"K": 200, "dt": 0.01, "t_end": 5.0, "wild_N": 60, "save_every": 10,
               "tol": 1e-12, "max_iter": 10000},
    "mc": {"agents": 100000, "seed": None},
    "steady": {"p0": 0.3, "p1": 0.6, "p2": 0.1, "q0": 0.8, "q1": 0.2, "q2": 0.0, "m0": 5.0},
    "grazing": {"tildeX": [[0, 0.3], [1, 0.6], [2, 0.1]], "tildeY": [[0, 0.8], [1, 0.2]],
                "b1": 1.0, "b2": 1.0, "m0": 5.0, "t": 1.0, "times": [0.0, 0.5, 1.0],
                "eps_list": [0.2, 0.1, 0.05], "ode_step": 1e-3, "zpoints": 101},
    "leacoulson": {"mu": 1.0, "beta1": 0.5, "beta2": 0.5, "t_end": 2.0, "samples": 100000,
                   "seed": None, "zgrid": [0.2, 0.5, 0.8]},
    "scaling": {"particles": 100000, "iters": 200, "seed": None, "i_max": 8},
    "region": {"step": 0.05, "max": 3.0},
    "metrics": {"r": 2.0, "times": [0.0, 0.5, 1.0, 2.0], "other": "poisson"},
    "verify": {"criteria": None},
    "outputs": {"directory": None},
}
# sub-mappings whose keys are free-form
FREE = {("model", "params")}


def _merge(base: dict, update: dict, path=()) -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        here = path + (k,)
        if k not in base:
            raise ConfigError(f"unknown key '{'.'.join(here)}'")
        if isinstance(base[k], dict) and here not in FREE:
            if not isinstance(v, dict):
                raise ConfigError(f"'{'.'.join(here)}' must be a mapping")
            out[k] = _merge(base[k], v, here)
        elif here in FREE:
            if not isinstance(v, dict):
                raise ConfigError(f"'{'.'.join(here)}' must be a mapping")
            out[k] = dict(v)
        else:
            out[k] = v
    return out


def parse_config(text: str | None, overrides=()) -> dict:
    """Merge YAML ``text`` and ``key.path=value`` overrides into the defaults."""
    try:
        data = yaml.safe_load(text) if text else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    cfg = _merge(DEFAULTS, data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' must look like key.path=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        patch: dict = {}
        node = patch
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = yaml.safe_load(raw)
        if tuple(parts[:-1]) in FREE:
            # a single entry of a free-form mapping; keep its siblings
            cfg[parts[0]][parts[1]][parts[-1]] = node[parts[-1]]
            continue
        cfg = _merge(cfg, patch)
    return cfg


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _field(cfg, dotted):
    node = cfg
    for p in dotted.split("."):
        node = node[p]
    return node


def _number(cfg, dotted, kind=float, positive=True):
    v = _field(cfg, dotted)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{dotted}' must be a number, got {v!r}")
    if kind is int and int(v) != v:
        raise ConfigError(f"'{dotted}' must be an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"'{dotted}' must be positive, got {v!r}")
    return kind(v)


def build_model(cfg: dict) -> ModelSpec:
    m = cfg["model"]
    fam = m["family"]
    try:
        if fam == "hgt_case1":
            X, Y, _ = hgt_case1(**m["params"])
        elif fam == "mutation_case2":
            X, Y = mutation_case2(**m["params"])
        elif fam == "custom":
            if m["X"] is None or m["Y"] is None:
                raise ConfigError("model.X and model.Y are required for family 'custom'")
            X, Y = make_law(m["X"], degenerate_ok=True), make_law(m["Y"], degenerate_ok=True)
        else:
            raise ConfigError(f"model.family must be hgt_case1, mutation_case2 or custom, got {fam!r}")
    except TypeError as exc:
        raise ConfigError(f"model.params: {exc}") from exc
    return ModelSpec(X, Y)


def build_initial(cfg: dict) -> DiscreteDensity:
    K = _number(cfg, "solver.K", int)
    kind = cfg["initial"]["kind"]
    m0 = _number(cfg, "initial.m0")
    if kind == "pointmass":
        return from_pointmass(int(m0), K)
    if kind == "poisson":
        return from_poisson(m0, K)
    raise ConfigError(f"initial.kind must be pointmass or poisson, got {kind!r}")


def build_grazing(cfg: dict) -> GrazingSpec:
    g = cfg["grazing"]
    return GrazingSpec(make_law(g["tildeX"], degenerate_ok=True), make_law(g["tildeY"], degenerate_ok=True),
                       _number(cfg, "grazing.b1"), _number(cfg, "grazing.b2"), _number(cfg, "grazing.m0"))


class Runner:
    def __init__(self, cfg: dict, out_dir: Path, echo=print):
        self.cfg = cfg
        self.out = out_dir
        self.echo = echo
        self.hash = config_hash(cfg)
        self.written: list[Path] = []

    def header(self, seed=None) -> str:
        return f"# config_hash={self.hash} seed={seed if seed is not None else 'none'}\n"

    def write(self, name: str, body: str, seed=None, raw: bool = False):
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        text = body if raw or body.startswith("#") else self.header(seed) + body
        path.write_text(text)
        self.written.append(path)
        self.echo(f"wrote {path}")

    def write_json(self, name: str, obj: dict, seed=None):
        # JSON has no comments, so the hash and seed travel as fields
        obj = {"config_hash": self.hash, "seed": seed, **obj}
        self.write(name, json.dumps(obj, indent=2, sort_keys=True) + "\n", seed, raw=True)

    # -- commands -------------------------------------------------------
    def evolve(self):
        model, f0 = build_model(self.cfg), build_initial(self.cfg)
        traj = integrate(f0, model, _number(self.cfg, "solver.t_end"), _number(self.cfg, "solver.dt"),
                         _number(self.cfg, "solver.save_every", int))
        rows = "".join(f"{t:.17g},{m:.17g},{v:.17g},{tail:.17g}\n" for t, m, v, tail in traj.summary_rows())
        self.write("trajectory.csv", "t,mean,variance,tail\n" + rows)
        self.write("final.csv", traj.final.to_csv(self.header()))
        if model.regime is Regime.CONSERVED:
            fp = fixed_point(f0, model, _number(self.cfg, "solver.tol"),
                             _number(self.cfg, "solver.max_iter", int))
            self.write("steady_fixed_point.csv", fp.to_csv(self.header()))
        return 0

    def wild(self):
        model, f0 = build_model(self.cfg), build_initial(self.cfg)
        t, N = _number(self.cfg, "solver.t_end"), _number(self.cfg, "solver.wild_N", int)
        w = wild_solution(f0, model, t, N)
        self.write("wild.csv", w.to_density().to_csv(self.header()))
        self.write_json("wild.json", {"t": t, "N": N, "residual": w.residual, "tail_mass": w.tail_mass})
        return 0

    def _seed(self, key):
        seed = _field(self.cfg, key)
        if seed is None:
            raise ConfigError(f"'{key}' is required for this command (no default seed)")
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"'{key}' must be a non-negative integer")
        return seed

    def mc(self):
        seed = self._seed("mc.seed")
        model = build_model(self.cfg)
        N = _number(self.cfg, "mc.agents", int)
        f0 = build_initial(self.cfg)
        if self.cfg["initial"]["kind"] == "pointmass":
            ens = Ensemble.constant(N, int(self.cfg["initial"]["m0"]), seed)
        else:
            ens = Ensemble.from_density(f0, N, seed)
        ens = simulate(ens, model, _number(self.cfg, "solver.t_end"))
        self.write("ensemble.csv", "value\n" + "".join(f"{v}\n" for v in ens.values.tolist()), seed)
        self.write("mc_density.csv", empirical_density(ens, f0.K).to_csv(self.header(seed)), seed)
        self.write_json("summary.json", ens.summary(), seed)
        return 0

    def steady(self):
        P = HgtParams.from_dict(self.cfg["steady"])
        d = hgt_steady_density(P, _number(self.cfg, "solver.K", int))
        self.write("steady.csv", d.to_csv(self.header()))
        self.write_json("steady_check.json", {
            "size_biased_residual": size_biased_check(d, P.grazing_spec()),
            "mean": d.mean, "variance": d.variance, "dispersion_index": d.variance / d.mean,
        })
        return 0

    def _zgrid(self):
        return np.linspace(0.0, 1.0, _number(self.cfg, "grazing.zpoints", int))

    def grazing(self):
        g = build_grazing(self.cfg)
        times = [float(t) for t in self.cfg["grazing"]["times"]]
        sol = grazing_evolve(g, build_initial(self.cfg), max(times), self._zgrid(),
                             _number(self.cfg, "grazing.ode_step"), times)
        self.write("grazing.csv", sol.to_csv(self.header()))
        return 0

    def sweep(self):
        g = build_grazing(self.cfg)
        rows = epsilon_sweep(g, build_initial(self.cfg), _number(self.cfg, "grazing.t"),
                             [float(e) for e in self.cfg["grazing"]["eps_list"]], self._zgrid(),
                             dt=_number(self.cfg, "solver.dt"))
        self.write("sweep.csv", sweep_csv(rows, self.header()))
        return 0

    def leacoulson(self):
        seed = self._seed("leacoulson.seed")
        c = self.cfg["leacoulson"]
        spec = LeaCoulsonSpec(c["mu"], c["beta1"], c["beta2"], c["t_end"])
        z = np.asarray(c["zgrid"], dtype=float)
        g = lea_coulson_pgf(spec, zgrid=z)
        w = lea_coulson_sample(spec, np.random.default_rng(seed), _number(self.cfg, "leacoulson.samples", int))
        rows = []
        for zi, gi in zip(z, g):
            x = zi ** w.astype(float)
            rows.append(f"{zi:.17g},{gi:.17g},{x.mean():.17g},{x.std(ddof=1) / math.sqrt(x.size):.17g}\n")
        self.write("leacoulson.csv", "z,pgf,mc_pgf,mc_std_error\n" + "".join(rows), seed)
        self.write_json("leacoulson.json", {
            "expected_mutants": spec.expected_mutants(),
            "pgf_slope_at_1": slope_at_one(lambda zz: lea_coulson_pgf(spec, zgrid=zz)),
            "sample_mean": float(w.mean()),
        }, seed)
        return 0

    def scaling(self):
        seed = self._seed("scaling.seed")
        model = build_model(self.cfg)
        moments = moment_recursion(model, _number(self.cfg, "scaling.i_max", int))
        rows = "".join(f"{i},{m:.17g},{str(math.isfinite(m)).lower()}\n" for i, m in enumerate(moments, 1))
        self.write("moments.csv", "i,m_i,finite\n" + rows)
        s = smoothing_iterate(model, _number(self.cfg, "scaling.particles", int),
                              _number(self.cfg, "scaling.iters", int), seed)
        self.write("fixedpoint.csv", s.to_csv(self.header(seed)), seed)
        self.write_json("scaling.json", {"m2": s.moment(2), "m2_std_error": s.moment_se(2),
                                         "m2_recursion": moments[1] if len(moments) > 1 else None}, seed)
        return 0

    def region(self):
        step, top = _number(self.cfg, "region.step"), _number(self.cfg, "region.max")
        grid = np.round(np.arange(1, int(round(top / step)) + 1) * step, 10)
        self.write("region.csv", A.region_csv(A.region_scan(grid), self.header()))
        return 0

    def metrics(self):
        model = build_model(self.cfg)
        f0 = build_initial(self.cfg)
        other = self.cfg["metrics"]["other"]
        if other != "poisson":
            raise ConfigError("metrics.other supports only 'poisson'")
        g0 = from_poisson(f0.mean, f0.K)
        r = _number(self.cfg, "metrics.r")
        times = sorted(float(t) for t in self.cfg["metrics"]["times"])
        dt = _number(self.cfg, "solver.dt")
        a = integrate(f0, model, times[-1], dt)
        b = integrate(g0, model, times[-1], dt)
        out = []
        for t in times:
            fa, fb = a.at(t, tol=dt / 2), b.at(t, tol=dt / 2)
            out.append({"t": t, "d_r": A.d_r(fa, fb, r).value, "d_r_star": A.d_r_star(fa, fb, r).value,
                        "bound": None})
        for row in out:
            row["bound"] = out[0]["d_r"] * math.exp(model.alpha(r) * row["t"])
        self.write_json("summary.json", {"r": r, "alpha_r": model.alpha(r), "metrics": out})
        return 0

    def verify(self):
        which = self.cfg["verify"]["criteria"]
        results = acceptance.run_all(None if which is None else set(which), echo=self.echo)
        lines = "".join(f"{o.number},{str(o.passed).lower()},{o.elapsed:.6f},\"{o.detail}\"\n" for o in results)
        self.write("verify.csv", "criterion,passed,seconds,detail\n" + lines)
        return 0 if all(o.passed for o in results) else 1


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dlckinetic", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", "-c", type=Path, help="YAML scenario file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value by dotted path (repeatable)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--agents", type=int, help="shorthand for --set mc.agents=N")
    p.add_argument("--seed", type=int, help="seed for the stochastic command being run")
    p.add_argument("--t-end", type=float, help="shorthand for --set solver.t_end=T")
    p.add_argument("--print-config", action="store_true", help="print the merged config and exit")
    return p


def run(command: str, config_path=None, overrides=(), out=None, echo=print) -> int:
    text = Path(config_path).read_text() if config_path else None
    cfg = parse_config(text, overrides)
    out_dir = out or cfg["outputs"]["directory"] or os.environ.get("DLC_OUTPUT_DIR") or "dlc_output"
    runner = Runner(cfg, Path(out_dir), echo)
    return getattr(runner, command)()


def _shorthand(args) -> list[str]:
    extra = []
    if args.agents is not None:
        extra.append(f"mc.agents={args.agents}")
    if args.t_end is not None:
        extra.append(f"solver.t_end={args.t_end!r}")
    if args.seed is not None:
        key = STOCHASTIC.get(args.command)
        if key is None:
            raise ConfigError(f"--seed has no effect on '{args.command}'")
        extra.append(f"{key}={args.seed}")
    return list(args.overrides) + extra


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        args.overrides = _shorthand(args)
        if args.print_config:
            text = args.config.read_text() if args.config else None
            sys.stdout.write(dump_config(parse_config(text, args.overrides)))
            return 0
        return run(args.command, args.config, args.overrides, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DLCError as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
