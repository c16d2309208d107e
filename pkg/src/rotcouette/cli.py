"""Batch front end: one JSON config in, a directory of reports out.

Usage::

    rotcouette config.json [--out-dir DIR]

Every run writes ``manifest.json`` (resolved config, seed, library versions,
timestamp and a sha256 digest of each output file) next to the command's
own outputs.  Exit status is 0 when every check passes, 1 when a check or
certificate fails, and 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import platform
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from rotcouette import __version__
from rotcouette import certify as _cert
from rotcouette import kelvin as _kel
from rotcouette import pseudomode as _pm
from rotcouette import sheardns as _dns
from rotcouette import symbol as _sym

__all__ = ["ConfigError", "RunConfig", "COMMANDS", "parse_config", "dispatch", "main"]

COMMANDS = ("spectrum", "window", "certify", "pseudomode", "kelvin", "dns", "escape-scan", "lemma-a3")
KEYS = (
    "f",
    "nu",
    "command",
    "grid",
    "delta",
    "delta_prime",
    "xi2_star",
    "xi3_star",
    "T",
    "eps",
    "deltas",
    "eps0",
    "seed",
    "out_dir",
)
LEMMA_CASES = ((1.0, 0.5, 2.0), (2.0, 1.0, 1.0), (0.9, 0.6, 5.0))


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class RunConfig:
    command: str
    f: float | None = None
    nu: float = 0.01
    grid: object = None
    delta: float | None = None
    delta_prime: float | None = None
    xi2_star: float = 0.0
    xi3_star: float | None = None
    T: float | None = None
    eps: float | None = None
    deltas: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4, 1e-5])
    eps0: float = 0.05
    seed: int = _cert.DEFAULT_SEED
    out_dir: str = "out"

    def resolved(self) -> dict:
        return asdict(self)


def _num(doc, key, *, positive=False, nonneg=False, unit=False):
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(key, f"value {v} is not finite")
    if positive and not v > 0:
        raise ConfigError(key, f"value {v} must be > 0")
    if nonneg and v < 0:
        raise ConfigError(key, f"value {v} must be >= 0")
    if unit and not 0 < v <= 1:
        raise ConfigError(key, f"value {v} must lie in (0, 1]")
    return v


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config document; defaults are filled in."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("$", f"malformed JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ConfigError("$", "top level must be an object")
    for k in doc:
        if k not in KEYS:
            raise ConfigError(k, "unknown key")
    if "command" not in doc:
        raise ConfigError("command", "missing required key")
    cmd = doc["command"]
    if cmd not in COMMANDS:
        raise ConfigError("command", f"unknown command {cmd!r}; expected one of {', '.join(COMMANDS)}")
    cfg = RunConfig(command=cmd)
    if "f" in doc:
        cfg.f = _num(doc, "f", positive=True)
    elif cmd != "lemma-a3" and cmd != "certify":
        raise ConfigError("f", f"required for command {cmd!r}")
    if "nu" in doc:
        cfg.nu = _num(doc, "nu", nonneg=True)
    for key in ("T", "eps", "eps0"):
        if key in doc:
            setattr(cfg, key, _num(doc, key, positive=True))
    for key in ("delta", "delta_prime"):
        if key in doc:
            setattr(cfg, key, _num(doc, key, unit=True))
    if "xi2_star" in doc:
        cfg.xi2_star = _num(doc, "xi2_star", nonneg=True)
    if "xi3_star" in doc:
        cfg.xi3_star = _num(doc, "xi3_star", positive=True)
    if "seed" in doc:
        s = doc["seed"]
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError("seed", f"expected a non-negative integer, got {s!r}")
        cfg.seed = s
    if "out_dir" in doc:
        if not isinstance(doc["out_dir"], str) or not doc["out_dir"]:
            raise ConfigError("out_dir", "expected a non-empty string")
        cfg.out_dir = doc["out_dir"]
    if "deltas" in doc:
        d = doc["deltas"]
        if not isinstance(d, list) or not d:
            raise ConfigError("deltas", "expected a non-empty list of numbers")
        vals = []
        for i, x in enumerate(d):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not (math.isfinite(x) and x > 0):
                raise ConfigError(f"deltas[{i}]", f"expected a positive number, got {x!r}")
            vals.append(float(x))
        cfg.deltas = vals
    if "grid" in doc:
        g = doc["grid"]
        if isinstance(g, bool):
            raise ConfigError("grid", "expected an integer or list of integers")
        if isinstance(g, int):
            if g < 2:
                raise ConfigError("grid", f"value {g} must be >= 2")
        elif isinstance(g, list):
            for i, x in enumerate(g):
                if isinstance(x, bool) or not isinstance(x, int) or x < 2:
                    raise ConfigError(f"grid[{i}]", f"expected an integer >= 2, got {x!r}")
        else:
            raise ConfigError("grid", "expected an integer or list of integers")
        cfg.grid = g
    _validate_ranges(cfg)
    return cfg


def _validate_ranges(cfg: RunConfig) -> None:
    cmd = cfg.command
    if cmd in ("spectrum", "pseudomode", "kelvin") and not 0 < cfg.f < 1:
        raise ConfigError("f", f"value {cfg.f} must lie in (0, 1) for {cmd!r}")
    if cmd == "escape-scan":
        inside, lo, hi = _sym.instability_window(cfg.f)
        if not inside:
            raise ConfigError("f", f"value {cfg.f} lies outside the instability window ({lo:.6f}, {hi:.6f})")
        if any(d >= cfg.eps0 for d in cfg.deltas):
            raise ConfigError("deltas", f"every entry must be below eps0={cfg.eps0}")
        if any(b >= a for a, b in zip(cfg.deltas, cfg.deltas[1:])):
            raise ConfigError("deltas", "entries must decrease strictly")
    if cmd in ("kelvin", "escape-scan", "dns") and not cfg.nu > 0:
        raise ConfigError("nu", f"value {cfg.nu} must be > 0 for {cmd!r}")
    if cmd == "dns":
        g = 32 if cfg.grid is None else cfg.grid
        if not isinstance(g, int) or g < 16 or g & (g - 1):
            raise ConfigError("grid", f"dns grid must be a power of two >= 16, got {g!r}")
    if cmd == "certify" and cfg.grid is not None:
        if not (isinstance(cfg.grid, list) and len(cfg.grid) == 3):
            raise ConfigError("grid", "certify grid must be [n_angle1, n_angle2, n_f]")
    if cmd == "pseudomode":
        if cfg.xi3_star is None:
            raise ConfigError("xi3_star", "required for 'pseudomode'")
        if cfg.delta is None:
            raise ConfigError("delta", "required for 'pseudomode'")
        try:
            _pm.PseudoModeSpec(cfg.xi2_star, cfg.xi3_star, cfg.delta, cfg.delta_prime or cfg.delta)
        except _sym.DomainError as e:
            raise ConfigError("delta", str(e)) from e


# -- output helpers -----------------------------------------------------------


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- commands -----------------------------------------------------------------


def _cmd_window(cfg, out: Path, slack: float):
    inside, lo, hi = _sym.instability_window(cfg.f)
    rep = {"f": cfg.f, "inside": inside, "lo": lo, "hi": hi, "rayleigh": _sym.rayleigh_discriminant(cfg.f)}
    if 0 < cfg.f < 1:
        lower, upper = _sym.growth_rates(_sym.FlowParams(cfg.f))
        rep.update(lower_rate=lower, upper_rate=upper, twice_lower_exceeds_upper=2 * lower > upper)
        ok = (2 * lower > upper) == inside
    else:
        ok = not inside
    _write_json(out / "window.json", rep)
    return ok, "window identity holds" if ok else "window identity violated"


def _cmd_spectrum(cfg, out: Path, slack: float):
    p = _sym.FlowParams(cfg.f, cfg.nu)
    xi3 = cfg.xi3_star if cfg.xi3_star is not None else 1.0
    A = _sym.symbol_streak(p, cfg.xi2_star, xi3)
    pairs = []
    worst = 0.0
    for e in _sym.streak_eigenpairs(p, cfg.xi2_star, xi3):
        r = float(np.linalg.norm(A @ e.vector - e.lam * e.vector) / np.linalg.norm(e.vector))
        worst = max(worst, r)
        pairs.append({"lambda": e.lam, "vector": e.vector, "residual": r, "degenerate": e.degenerate})
    npts = cfg.grid if isinstance(cfg.grid, int) else 40
    xi3s = 2.0 ** -np.arange(npts)
    ok = worst <= 1e-10
    scan = None
    if p.nu > 0:
        scan = _sym.lambda1_range_scan(p, [0.0], xi3s)
        np.savetxt(
            out / "lambda1_scan.csv",
            np.column_stack([xi3s, scan.values[0]]),
            fmt="%.16e",
            delimiter=",",
            header="xi3,lambda1",
            comments="",
        )
        ok = ok and scan.hi <= scan.bound + 1e-12 - slack
    _write_json(
        out / "spectrum.json",
        {
            "xi2": cfg.xi2_star,
            "xi3": xi3,
            "eigenpairs": pairs,
            "max_residual": worst,
            "lambda1_sup": None if scan is None else scan.sup,
            "lower_rate": p.lower_rate,
        },
    )
    return ok, f"max eigen-residual {worst:.3e}"


def _cmd_certify(cfg, out: Path, slack: float):
    g = cfg.grid or [201, 201, 99]
    f_grid = np.arange(1, g[2] + 1) / (g[2] + 1)
    nr = _cert.certify_numerical_range(f_grid, g[0], g[1], seed=cfg.seed)
    certs = [nr] + _cert.certify_routh_hurwitz(g[0], g[1], f_grid, seed=cfg.seed)
    for c in certs:
        c.bound += slack
    _write_json(out / "certificates.json", [c.to_dict() for c in certs])
    failed = [c.quantity for c in certs if not c.passed]
    return not failed, "all certificates pass" if not failed else f"failed: {', '.join(failed)}"


def _cmd_pseudomode(cfg, out: Path, slack: float):
    p = _sym.FlowParams(cfg.f, cfg.nu)
    spec = _pm.PseudoModeSpec(cfg.xi2_star, cfg.xi3_star, cfg.delta, cfg.delta_prime or cfg.delta)
    quad = cfg.grid if isinstance(cfg.grid, int) else 32
    fld = _pm.build_pseudomode(p, spec, quad)
    rep = _pm.residual(p, fld)
    ratio_ok, bad = _pm.component_ratio_check(fld, cfg.f)
    _pm.write_field_csv(out / "field.csv", fld)
    ok = ratio_ok and rep.total <= rep.I1 + rep.I2 + rep.quad_error
    if cfg.eps is not None:
        ok = ok and rep.total < cfg.eps - slack
    _write_json(
        out / "residual.json",
        {
            "spec": spec.as_dict(),
            **asdict(rep),
            "component_ratio_ok": ratio_ok,
            "first_bad_node": bad,
            "eps": cfg.eps,
            "in_pseudospectrum": None if cfg.eps is None else rep.in_pseudospectrum(cfg.eps),
            "center_mismatch": _pm.center_mismatch(p, fld),
        },
    )
    return ok, f"residual {rep.total:.3e}"


def _cmd_kelvin(cfg, out: Path, slack: float):
    p = _sym.FlowParams(cfg.f, cfg.nu)
    T = cfg.T if cfg.T is not None else 5.0
    eps = cfg.eps if cfg.eps is not None else 0.2
    cert = _pm.certify_pseudomode(p, T, eps, cfg.xi2_star)
    ens = _kel.ModeEnsemble.from_field(cert.field, radius=1.0)
    series, _ = _kel.propagate_field(p, ens, T, sample_times=np.linspace(0.0, T, 200))
    _kel.envelope_series(series, p.lower_rate, eps - slack)
    series.to_csv(out / "growth.csv")
    env_ok = bool(np.all(series.norms >= series.env_lo) and np.all(series.norms <= series.env_hi))
    up_ok = bool(np.all(series.norms <= series.upper_bound * (1 + 1e-6)))
    sob = [_kel.sobolev_ratio_check(ens, k, 1.0) for k in range(1, 7)]
    sob_ok = all(s[2] for s in sob)
    _write_json(
        out / "kelvin.json",
        {
            "T": T,
            "eps": eps,
            "xi3_eps": cert.xi3eps,
            "gamma": cert.gamma,
            "spec": cert.spec.as_dict(),
            "residual": asdict(cert.report),
            "envelope_ok": env_ok,
            "upper_bound_ok": up_ok,
            "sobolev": [{"k": k, "ratio": s[0], "bound": s[1], "pass": s[2]} for k, s in zip(range(1, 7), sob)],
            "max_envelope_deviation": float(np.max(np.abs(series.ratio - np.exp(series.times * p.lower_rate)))),
        },
    )
    return env_ok and up_ok and sob_ok, "envelope, upper bound and Sobolev checks"


def _dns_spec(cfg) -> _pm.PseudoModeSpec:
    base = _dns.default_dns_spec()
    return _pm.PseudoModeSpec(
        cfg.xi2_star,
        cfg.xi3_star if cfg.xi3_star is not None else base.xi3s,
        cfg.delta if cfg.delta is not None else base.delta,
        cfg.delta_prime if cfg.delta_prime is not None else (cfg.delta if cfg.delta is not None else base.deltap),
    )


def _cmd_dns(cfg, out: Path, slack: float):
    dc = _dns.DnsConfig(f=cfg.f, nu=cfg.nu, n=cfg.grid or 32, seed=cfg.seed)
    spec = _dns_spec(cfg)
    mode_f = cfg.f if 0 < cfg.f < 1 else 0.5
    init = _dns.init_from_pseudomode(dc, spec, cfg.deltas[0], mode_f=mode_f)
    T = cfg.T if cfg.T is not None else 5.0
    res = _dns.run(dc, init, T)
    _dns.write_run_csv(out / "run.csv", res)
    _dns.save_checkpoint(out / "checkpoint.npz", res.final, dc)
    ok = res.max_budget_ratio <= 1e-6 - slack and res.max_divergence <= 1e-12 and res.energy_inequality_ok
    _write_json(
        out / "dns.json",
        {
            "max_budget_ratio": res.max_budget_ratio,
            "max_divergence": res.max_divergence,
            "energy_inequality_ok": res.energy_inequality_ok,
            "remesh_events": res.remesh_events,
            "mode_f": mode_f,
            "steps": res.steps,
        },
    )
    return ok, f"budget {res.max_budget_ratio:.3e}, divergence {res.max_divergence:.3e}"


def _cmd_escape(cfg, out: Path, slack: float):
    dc = _dns.DnsConfig(f=cfg.f, nu=cfg.nu, n=cfg.grid or 32, seed=cfg.seed)
    res = _dns.escape_scan(dc, _dns_spec(cfg), cfg.deltas, cfg.eps0)
    rep = res.to_dict()
    ok = res.passed
    if slack and res.fitted_slope is not None:
        ok = abs(res.fitted_slope - res.expected_slope) <= (0.2 - slack) * res.expected_slope and res.bound_ok
    rep["pass"] = ok
    _write_json(out / "escape_scan.json", rep)
    return ok, f"slope {res.fitted_slope} vs {res.expected_slope}"


def _cmd_lemma(cfg, out: Path, slack: float):
    reps = []
    ok = True
    for a, b, K in LEMMA_CASES:
        r = _cert.weighted_integral_bound_check(a, b, K, 1000, seed=cfg.seed)
        passed = r.passed and r.worst_ratio <= 1.0 + 1e-9 - slack
        ok = ok and passed
        d = asdict(r)
        d["passed"] = passed
        reps.append(d)
    _write_json(out / "lemma_a3.json", reps)
    return ok, "weighted integral bound"


_HANDLERS = {
    "window": _cmd_window,
    "spectrum": _cmd_spectrum,
    "certify": _cmd_certify,
    "pseudomode": _cmd_pseudomode,
    "kelvin": _cmd_kelvin,
    "dns": _cmd_dns,
    "escape-scan": _cmd_escape,
    "lemma-a3": _cmd_lemma,
}


def dispatch(cfg: RunConfig, *, bound_slack: float = 0.0) -> int:
    """Run ``cfg.command`` and write outputs plus ``manifest.json`` into ``cfg.out_dir``.

    ``bound_slack`` tightens every pass threshold by the given amount; it
    exists so tests can exercise the failure path.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        ok, message = _HANDLERS[cfg.command](cfg, out, bound_slack)
        status = 0 if ok else 1
    except (_sym.DomainError, ConfigError) as e:
        ok, message, status = False, f"{type(e).__name__}: {e}", 2
    except (RuntimeError, FloatingPointError) as e:
        ok, message, status = False, f"{type(e).__name__}: {e}", 1
    import scipy

    files = sorted(p for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {
        "config": cfg.resolved(),
        "seed": cfg.seed,
        "versions": {
            "rotcouette": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timestamp": started,
        "status": status,
        "pass": ok,
        "message": message,
        "files": [{"name": p.name, "sha256": _sha256(p)} for p in files],
    }
    _write_json(out / "manifest.json", manifest)
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="rotcouette", description=__doc__.split("\n\n")[0])
    ap.add_argument("config", help="path to a JSON config, or - for stdin")
    ap.add_argument("--out-dir", help="override out_dir from the config")
    args = ap.parse_args(argv)
    try:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
        cfg = parse_config(text)
    except (OSError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.out_dir:
        cfg.out_dir = args.out_dir
    status = dispatch(cfg)
    print(f"{cfg.command}: exit {status} (see {Path(cfg.out_dir) / 'manifest.json'})")
    return status


if __name__ == "__main__":
    sys.exit(main())
