"""Command-line experiment runner.

Every diagnostic is a subcommand. A run reads an optional ``key = value``
config file, applies command-line flags on top, checks the memory estimate
against a cap, evaluates independent (J_r, seed) cells on a worker pool and
writes CSV curves plus a JSON summary that embeds the resolved config.

Exit codes: 0 success, 1 failed check (verify-bch), 2 config error,
3 resource refusal.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dynamics, entanglement, krylov, model, spectral
from .errors import ConfigError, NoIntersection, ResourceError, SequenceTooShort
from .io import write_csv, write_json
from .numerics import eigh_symmetric

EXPERIMENTS = (
    "woff",
    "spectrum",
    "rstat",
    "sff",
    "otoc",
    "krylov",
    "entanglement",
    "quench",
    "verify-bch",
)
FORMATS = ("csv", "json", "both")
GIB = 1024**3


@dataclass(frozen=True)
class GridSpec:
    """``count`` points from ``min`` to ``max``, linear or log; or explicit values."""

    min: float = 0.0
    max: float = 0.0
    count: int = 1
    spacing: str = "linear"
    explicit: tuple = ()

    def values(self):
        if self.explicit:
            return np.array(self.explicit, dtype=float)
        if self.spacing == "log":
            return np.logspace(np.log10(self.min), np.log10(self.max), self.count)
        return np.linspace(self.min, self.max, self.count)

    def __len__(self):
        return len(self.explicit) if self.explicit else self.count

    def label(self):
        v = self.values()
        if len(v) == 1:
            return f"{v[0]:g}"
        return f"{v[0]:g}-{v[-1]:g}x{len(v)}"


def parse_grid(text, name="grid"):
    """``min:max:count[:log|:linear]``, a comma list, or a single number."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) not in (3, 4):
                raise ValueError
            spacing = parts[3].strip() if len(parts) == 4 else "linear"
            if spacing not in ("linear", "log"):
                raise ValueError
            count = int(float(parts[2]))
            g = GridSpec(float(parts[0]), float(parts[1]), count, spacing)
        else:
            g = GridSpec(explicit=tuple(float(x) for x in text.split(",") if x.strip()))
    except ValueError:
        raise ConfigError(f"{name}: cannot parse grid {text!r}", field=name) from None
    if (g.explicit == () and ":" not in text) or g.count < 1:
        raise ConfigError(f"{name}: grid is empty", field=name)
    if g.spacing == "log" and g.min <= 0:
        raise ConfigError(f"{name}: log grid needs min > 0", field=name)
    return g


def _int(text):
    x = float(text)
    if x != int(x):
        raise ValueError
    return int(x)


def _ints(text):
    return tuple(_int(x) for x in text.split(",") if x.strip())


def _words(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError
        return text

    return parse


KEYS = {
    "experiment": _choice(EXPERIMENTS),
    "n": _int,
    "j1": float,
    "jr": float,
    "hx": float,
    "hz": float,
    "jr_grid": parse_grid,
    "t_grid": parse_grid,
    "sat_grid": parse_grid,
    "points": _int,
    "t_max": float,
    "eta": float,
    "window": _int,
    "theta": float,
    "seeds": _ints,
    "sites": _ints,
    "cut": _int,
    "ops": _words,
    "states": _words,
    "output_dir": str,
    "format": _choice(FORMATS),
    "mem_cap_gb": float,
    "scratch": str,
    "max_k": _int,
}

DEFAULTS = {
    "n": 7,
    "j1": 1.0,
    "jr": 1.0,
    "hx": 1.05,
    "hz": 0.5,
    "points": 100000,
    "t_max": 100.0,
    "eta": 0.5,
    "window": 51,
    "theta": spectral.THOULESS_THETA,
    "seeds": (0,),
    "cut": 3,
    "ops": ("O1", "O2", "R"),
    "states": ("all_down", "neel"),
    "output_dir": ".",
    "format": "both",
    "mem_cap_gb": 8.0,
    "scratch": None,
    "max_k": None,
}

# grids filled in per experiment when not given
GRID_DEFAULTS = {
    "woff": {"jr_grid": "5:100:20:log"},
    "rstat": {"jr_grid": "1.05:5:50"},
    "otoc": {"t_grid": "0.05:0.6:1000", "sat_grid": "0.1:1e10:300:log"},
    "krylov": {"t_grid": "0:5000:501"},
    "quench": {"t_grid": "0:500:501"},
}


@dataclass(frozen=True)
class RunConfig:
    chain: model.ChainConfig
    experiment: str
    grids: dict = field(default_factory=dict)
    seeds: tuple = (0,)
    output_dir: str = "."
    format: str = "both"
    options: dict = field(default_factory=dict)

    def j_ratios(self):
        g = self.grids.get("jr_grid")
        return [self.chain.j_ratio] if g is None else [float(x) for x in g.values()]

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "chain": asdict(self.chain),
            "grids": {k: asdict(v) for k, v in sorted(self.grids.items())},
            "seeds": list(self.seeds),
            "format": self.format,
            "options": dict(sorted(self.options.items())),
        }


def _parse_value(key, text, line=None):
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}" + (f" on line {line}" if line else ""),
                          field=key, line=line)
    try:
        if KEYS[key] is parse_grid:
            return parse_grid(text, key)
        return KEYS[key](text)
    except ConfigError as exc:
        raise ConfigError(str(exc) + (f" (line {line})" if line else ""), field=key, line=line) from None
    except ValueError:
        where = f" on line {line}" if line else ""
        raise ConfigError(f"invalid value for {key}: {text!r}{where}", field=key, line=line) from None


def read_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_").lower()
        values[key] = _parse_value(key, value, lineno)
    return values


def parse_config(text, overrides=None, require_experiment=True):
    """Validated RunConfig from config text plus overriding values.

    ``overrides`` maps keys to raw strings (as typed on the command line) or
    to already parsed values.
    """
    values = read_config_text(text or "")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        values[key] = _parse_value(key, value) if isinstance(value, str) else value
    merged = dict(DEFAULTS)
    merged.update(values)
    exp = merged.get("experiment")
    if exp is None and require_experiment:
        raise ConfigError("experiment is required", field="experiment")
    for key, spec in GRID_DEFAULTS.get(exp, {}).items():
        if key == "jr_grid" and "jr" in values:
            continue
        merged.setdefault(key, parse_grid(spec, key))
    if exp == "sff" and "t_grid" not in merged:
        merged["t_grid"] = GridSpec(1e-6, merged["t_max"], merged["points"])
    if exp == "verify-bch" and "n" not in values:
        merged["n"] = 3
    try:
        chain = model.ChainConfig(
            merged["n"], merged["j1"], merged["jr"], merged["hx"], merged["hz"]
        )
    except ValueError as exc:
        bad = "jr" if "j_ratio" in str(exc) else "n"
        raise ConfigError(f"{bad}: {exc}", field=bad) from None
    if exp == "verify-bch" and chain.n_sites != 3:
        raise ConfigError("verify-bch works on n = 3", field="n")
    if merged["window"] < 1 or merged["window"] % 2 == 0:
        raise ConfigError("window must be a positive odd count", field="window")
    n = chain.n_sites
    if (exp in ("entanglement", "quench") or "cut" in values) and not 1 <= merged["cut"] <= n - 1:
        raise ConfigError(f"cut must lie in 1..{n - 1}", field="cut")
    if "sites" in merged:
        if len(merged["sites"]) != 2 or not all(1 <= s <= n for s in merged["sites"]):
            raise ConfigError(f"sites must be two values in 1..{n}", field="sites")
    for op in merged["ops"]:
        if op not in ("O1", "O2", "R"):
            raise ConfigError(f"unknown operator {op!r}", field="ops")
    for st in merged["states"]:
        if st not in ("all_down", "all_up", "neel"):
            raise ConfigError(f"unknown state {st!r}", field="states")
    if not merged["seeds"]:
        raise ConfigError("seeds must not be empty", field="seeds")
    grids = {k: merged[k] for k in ("jr_grid", "t_grid", "sat_grid") if k in merged}
    if exp == "sff" and grids["t_grid"].values()[0] <= 0:
        raise ConfigError("sff times must be positive", field="t_grid")
    options = {
        k: merged[k]
        for k in ("eta", "window", "theta", "cut", "ops", "states", "mem_cap_gb", "scratch", "sites",
                  "max_k")
        if k in merged
    }
    return RunConfig(chain, exp, grids, tuple(merged["seeds"]), merged["output_dir"],
                     merged["format"], options)


def memory_estimate(cfg):
    """Rough peak bytes for a run, per worker."""
    d = cfg.chain.dim
    dense = 6 * d * d * 8
    exp = cfg.experiment
    if exp == "sff":
        return dense + 4 * 2048 * d * 16
    if exp == "otoc":
        return dense + 8 * d * d * 16
    if exp == "krylov":
        if cfg.options.get("scratch"):
            return dense + 12 * d * d * 16 + d * d * 8 * 2
        return dense + krylov.memory_estimate(d, cfg.options.get("max_k")) + d * d * 8 * 2
    if exp in ("entanglement", "quench"):
        return dense + 2 * d * d * 16
    return dense


def _threads():
    try:
        return max(1, int(os.environ.get("ERGOKIT_THREADS", "1")))
    except ValueError:
        return 1


class Runner:
    def __init__(self, cfg):
        self.cfg = cfg
        self.files = []

    def path(self, stem, ext):
        return os.path.join(self.cfg.output_dir, f"{stem}.{ext}")

    def stem(self, jr=None, seed=None, extra=""):
        c = self.cfg
        jr_tag = f"{jr:g}" if jr is not None else (c.grids["jr_grid"].label()
                                                    if "jr_grid" in c.grids else f"{c.chain.j_ratio:g}")
        seeds = c.seeds if seed is None else (seed,)
        seed_tag = "-".join(str(s) for s in seeds)
        s = f"{c.experiment}_N{c.chain.n_sites}_Jr{jr_tag}_seed{seed_tag}"
        return s + (f"_{extra}" if extra else "")

    def csv(self, stem, header, columns):
        if self.cfg.format in ("csv", "both"):
            p = self.path(stem, "csv")
            write_csv(p, header, columns)
            self.files.append(p)

    def json(self, stem, payload):
        if self.cfg.format in ("json", "both"):
            p = self.path(stem, "json")
            body = {"config": self.cfg.to_dict()}
            body.update(payload)
            write_json(p, body)
            self.files.append(p)

    def map(self, fn, items):
        items = list(items)
        threads = _threads()
        if threads == 1 or len(items) == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))

    def chain(self, jr):
        return self.cfg.chain.with_ratio(jr)

    def spectrum(self, jr, vectors=True):
        h = model.build_hamiltonian(self.chain(jr))
        return h, eigh_symmetric(h.matrix, vectors=vectors)


def run_woff(r):
    jrs = r.cfg.j_ratios()
    w = r.map(lambda jr: model.off_diagonal_weight(model.build_hamiltonian(r.chain(jr))), jrs)
    r.csv(r.stem(), ["j_ratio", "w_off"], [jrs, w])
    out = {"points": [[a, b] for a, b in zip(jrs, w)]}
    if len(jrs) >= 5:
        fit = model.fit_alpha([r.chain(j) for j in jrs], w)
        out.update(alpha=fit.extras["alpha"], fit_residual=fit.residual)
    r.json(r.stem(), out)
    return out


def run_spectrum(r):
    def cell(jr):
        _, sp = r.spectrum(jr, vectors=False)
        e = sp.eigenvalues
        r.csv(r.stem(jr), ["index", "energy"], [np.arange(len(e)), e])
        return {"j_ratio": jr, "e_min": e[0], "e_max": e[-1], "r": spectral.r_statistic(e)}

    out = {"cells": r.map(cell, r.cfg.j_ratios())}
    r.json(r.stem(), out)
    return out


def run_rstat(r):
    from scipy.stats import spearmanr

    jrs = r.cfg.j_ratios()
    rs = r.map(lambda jr: spectral.r_statistic(r.spectrum(jr, vectors=False)[1].eigenvalues), jrs)
    r.csv(r.stem(), ["j_ratio", "r"], [jrs, rs])
    out = {"pairs": [[a, b] for a, b in zip(jrs, rs)]}
    if len(jrs) >= 3:
        out["spearman"] = float(spearmanr(jrs, rs).statistic)
    r.json(r.stem(), out)
    return out


def run_sff(r):
    o = r.cfg.options
    t = r.cfg.grids["t_grid"].values()

    def cell(jr):
        _, sp = r.spectrum(jr, vectors=False)
        u = spectral.unfold(sp.eigenvalues)
        curve = spectral.sff(u, t, eta=o["eta"], window=o["window"])
        r.csv(r.stem(jr), ["t_scaled", "sff_raw", "sff_smoothed", "sff_goe"],
              [t, curve.raw, curve.values, spectral.sff_goe(t)])
        try:
            tth = spectral.thouless_time(curve, theta=o["theta"])
            g = spectral.g_metric(tth)
        except NoIntersection:
            tth = g = None
        summary = {"j_ratio": jr, "r": spectral.r_statistic(sp.eigenvalues),
                   "t_thouless": tth, "g": g, "eta": o["eta"], "window": o["window"],
                   "theta": o["theta"], "plateau": float(np.mean(curve.values[-max(1, len(t) // 20):]))}
        r.json(r.stem(jr), summary)
        return summary

    out = {"cells": r.map(cell, r.cfg.j_ratios())}
    if len(out["cells"]) > 1:
        r.json(r.stem(), out)
    return out


def run_otoc(r):
    n = r.cfg.chain.n_sites
    i, j = r.cfg.options.get("sites", (1, n))
    early = r.cfg.grids["t_grid"].values()
    late = r.cfg.grids["sat_grid"].values()

    def cell(jr):
        cfg = r.chain(jr)
        _, sp = r.spectrum(jr)
        s1 = dynamics.otoc_series(sp, i, j, early, cfg)
        s2 = dynamics.otoc_series(sp, i, j, late, cfg)
        sat, sat_std = dynamics.saturation_value(s2)
        r.csv(r.stem(jr, extra="early"), ["t", "C"], [s1.times, s1.values])
        r.csv(r.stem(jr, extra="late"), ["t", "C"], [s2.times, s2.values])
        summary = {"j_ratio": jr, "d": s1.d, "sites": [i, j], "saturation": sat, "saturation_std": sat_std}
        try:
            fit = dynamics.fit_kappa(s1, c_sat=max(sat, 1e-300))
            summary.update(kappa=float(fit.coefficients[0]), slope=fit.extras["slope"],
                           window=list(fit.extras["window"]),
                           next_order_ratio=fit.extras["next_order_ratio"],
                           next_order_ok=fit.extras["next_order_ok"])
        except Exception as exc:  # window problems are reported, not fatal
            summary["kappa_error"] = str(exc)
        order, exact = dynamics.leading_kappa(cfg, i, j)
        summary.update(leading_order=order, kappa_exact=exact)
        r.json(r.stem(jr), summary)
        return summary

    cells = r.map(cell, r.cfg.j_ratios())
    out = {"cells": cells}
    good = [c for c in cells if "kappa" in c]
    if len(good) >= 2:
        sc = dynamics.fit_kappa_scaling([c["j_ratio"] for c in good], [c["kappa"] for c in good])
        out.update(b=float(sc.coefficients[0]), free_power=sc.extras.get("free_power"))
    if len(cells) > 1:
        r.json(r.stem(), out)
    return out


def run_krylov(r):
    n = r.cfg.chain.n_sites
    o = r.cfg.options
    t = r.cfg.grids["t_grid"].values()
    cells = []
    for jr in r.cfg.j_ratios():
        for op in o["ops"]:
            for seed in (r.cfg.seeds if op == "R" else r.cfg.seeds[:1]):
                cells.append((jr, op, seed))

    def cell(item):
        jr, op, seed = item
        h, sp = r.spectrum(jr)
        vec = krylov.random_product_operator(n, seed) if op == "R" else krylov.seed_operator(op, n)
        stem = r.stem(jr, seed, extra=op)
        scratch = None
        if o.get("scratch"):
            os.makedirs(o["scratch"], exist_ok=True)
            scratch = krylov.scratch_path(o["scratch"], stem)
        dec = krylov.arnoldi(h, vec, spec=sp, scratch=scratch, max_k=o.get("max_k"))
        curve = krylov.complexity_curve(dec, t)
        phis = curve.final_amplitudes
        # a basis cut short by max_k does not span O(t): S_K is undefined there
        captured = float(np.sum(np.abs(phis) ** 2))
        s_k = krylov.spread_measure(phis) if abs(captured - 1.0) <= 1e-6 else None
        avg = krylov.time_averaged_complexity(vec, sp, dec)
        try:
            disp = krylov.bn_dispersion(dec.b[1:])
            sigma, n0, w = disp.sigma, disp.n0, disp.w
        except SequenceTooShort:
            sigma = n0 = w = None
        r.csv(stem + "_bn", ["n", "b_n"], [np.arange(dec.dim), dec.b])
        r.csv(stem + "_kc", ["t", "K_C"], [curve.times, curve.kc])
        r.csv(stem + "_phi2", ["n", "abs_phi_sq"], [np.arange(dec.dim), np.abs(phis) ** 2])
        summary = {
            "j_ratio": jr, "op": op, "seed": seed, "K": dec.dim, "K_bound": krylov.krylov_bound(sp.dim),
            "termination": dec.reason, "sigma_bn": sigma, "dispersion_n0": n0, "dispersion_w": w,
            "ipr": krylov.ipr(vec, sp), "s_k": s_k, "captured_weight": captured, "t_sat": float(t[-1]),
            "kbar_c": avg.value, "kc_final": float(curve.kc[-1]),
            "max_parseval_defect": curve.max_defect,
        }
        r.json(stem, summary)
        if scratch:
            del dec
            os.remove(scratch)
        return summary

    out = {"cells": r.map(cell, cells)}
    r.json(r.stem(), out)
    return out


def run_entanglement(r):
    cut = r.cfg.options["cut"]

    def cell(jr):
        _, sp = r.spectrum(jr)
        scan = entanglement.eigenstate_entanglement_scan(sp, cut)
        gs = entanglement.entanglement_entropy(sp.eigenvectors[:, 0], cut)
        r.csv(r.stem(jr), ["energy", "entropy"], [scan.energies, scan.entropies])
        summary = {"j_ratio": jr, "N": r.cfg.chain.n_sites, "cut": cut,
                   "ground_state_entropy": gs, "median_entropy": float(np.median(scan.entropies))}
        r.json(r.stem(jr), summary)
        return summary

    out = {"cells": r.map(cell, r.cfg.j_ratios())}
    if len(out["cells"]) > 1:
        r.json(r.stem(), out)
    return out


def run_quench(r):
    n = r.cfg.chain.n_sites
    cut = r.cfg.options["cut"]
    t = r.cfg.grids["t_grid"].values()

    def cell(jr):
        _, sp = r.spectrum(jr)
        summary = {"j_ratio": jr, "cut": cut, "plateaus": {}}
        for kind in r.cfg.options["states"]:
            ts = entanglement.quench_entropy_series(entanglement.named_state(kind, n), sp, cut, t)
            r.csv(r.stem(jr, extra=kind), ["t", "entropy"], [ts.times, ts.values])
            summary["plateaus"][kind] = float(np.mean(ts.values[len(t) // 2:]))
        r.json(r.stem(jr), summary)
        return summary

    out = {"cells": r.map(cell, r.cfg.j_ratios())}
    if len(out["cells"]) > 1:
        r.json(r.stem(), out)
    return out


def run_verify_bch(r):
    rep = dynamics.verify_bch_commutators(r.cfg.chain)
    for line in rep.lines():
        print(line)
    out = {"deviations": rep.deviations, "passed": rep.passed, "tol": rep.tol}
    r.json(r.stem(), out)
    return out


RUNNERS = {
    "woff": run_woff,
    "spectrum": run_spectrum,
    "rstat": run_rstat,
    "sff": run_sff,
    "otoc": run_otoc,
    "krylov": run_krylov,
    "entanglement": run_entanglement,
    "quench": run_quench,
    "verify-bch": run_verify_bch,
}


def run(cfg):
    """Execute a validated RunConfig; returns ``{"exit_code", "files", "summary"}``."""
    cap = cfg.options.get("mem_cap_gb", DEFAULTS["mem_cap_gb"]) * GIB
    est = memory_estimate(cfg)
    if est > cap:
        raise ResourceError(
            f"{cfg.experiment} needs about {est / GIB:.2f} GiB, above the {cap / GIB:.2f} GiB cap",
            estimate_bytes=est,
        )
    os.makedirs(cfg.output_dir, exist_ok=True)
    r = Runner(cfg)
    summary = RUNNERS[cfg.experiment](r)
    code = 0
    if cfg.experiment == "verify-bch" and not summary["passed"]:
        code = 1
    return {"exit_code": code, "files": r.files, "summary": summary, "memory_estimate": est}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file; flags override it")
    common.add_argument("--n", help="number of sites (odd, 3..13)")
    common.add_argument("--j1", help="left-half coupling")
    common.add_argument("--jr", help="coupling ratio J2/J1")
    common.add_argument("--hx", help="transverse field")
    common.add_argument("--hz", help="longitudinal field")
    common.add_argument("--jr-grid", help="J_r sweep, min:max:count[:log] or a comma list")
    common.add_argument("--t-grid", help="time grid, min:max:count[:log]")
    common.add_argument("--sat-grid", help="long-time grid for OTOC saturation")
    common.add_argument("--points", help="number of SFF time points")
    common.add_argument("--t-max", help="largest SFF time (Heisenberg units)")
    common.add_argument("--eta", help="SFF filter width")
    common.add_argument("--window", help="moving-average width in samples (odd)")
    common.add_argument("--theta", help="relative tolerance of the Thouless rule")
    common.add_argument("--seeds", help="comma-separated integer seeds")
    common.add_argument("--sites", help="OTOC sites i,j (1-based)")
    common.add_argument("--cut", help="entanglement cut x (left block 1..x)")
    common.add_argument("--ops", help="Krylov seeds: comma list of O1, O2, R")
    common.add_argument("--states", help="quench states: all_down, all_up, neel")
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument("--format", help="csv, json or both")
    common.add_argument("--mem-cap-gb", help="refuse runs whose estimate exceeds this")
    common.add_argument("--scratch", help="directory for out-of-core Krylov basis files")
    common.add_argument("--max-k", help="cap on the Krylov basis size")
    parser = argparse.ArgumentParser(prog="ergokit", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    raw = vars(args)
    overrides = {k: v for k, v in raw.items() if k not in ("config",) and v is not None}
    try:
        text = ""
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}", field="config") from None
        cfg = parse_config(text, overrides)
        report = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3
    for p in report["files"]:
        print(p)
    return report["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
