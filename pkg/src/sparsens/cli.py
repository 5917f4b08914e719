"""Command-line experiment runner.

Each command reads one JSON config, validates all of it before computing,
writes its report files into ``--out`` and exits with

* 0 when the verdict passes,
* 1 when it fails,
* 2 on configuration or input errors,
* 3 on resolution or domain errors.

The registry file can be overridden with the SPARSENS_REGISTRY environment
variable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import zipfile
from importlib import resources
from pathlib import Path

import numpy as np

from . import samples
from .errors import (
    BundleError,
    CalibrationError,
    CFLError,
    ConfigError,
    ContractError,
    DegenerateInputError,
    DomainError,
    InputError,
    RangeError,
    ResolutionError,
    SparsensError,
)
from .fieldio import decode_field, encode_field, read_field
from .registry import REGISTRY_ENV, load_registry
from .spectral_core import Field, Grid, format_exponent, lp_norm, parse_exponent, set_threads

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3

COMMANDS = ("certify", "freq", "heat-decay", "ns-run", "criterion", "region", "calibrate")

REQUIRED = object()

_EPOCH = (1980, 1, 1, 0, 0, 0)


# ---------------------------------------------------------------------------
# config validation


def _number(v, key):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return float(v)


def _integer(v, key):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return v


def _exponent(v, key):
    try:
        return format_exponent(parse_exponent(v))
    except (InputError, TypeError, ValueError):
        raise ConfigError(f"{key} must be an exponent in [1, inf], got {v!r}") from None


def _string(v, key):
    if not isinstance(v, str):
        raise ConfigError(f"{key} must be a string, got {v!r}")
    return v


def _boolean(v, key):
    if not isinstance(v, bool):
        raise ConfigError(f"{key} must be true or false, got {v!r}")
    return v


def _optional(conv):
    def check(v, key):
        return None if v is None else conv(v, key)

    return check


def _list_of(conv):
    def check(v, key):
        if not isinstance(v, list):
            raise ConfigError(f"{key} must be a list, got {v!r}")
        return [conv(x, f"{key}[{i}]") for i, x in enumerate(v)]

    return check


def _choice(*options):
    def check(v, key):
        if v not in options:
            raise ConfigError(f"{key} must be one of {list(options)}, got {v!r}")
        return v

    return check


def _section(raw, name: str, schema: dict) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(unknown)}")
    out = {}
    for key, (conv, default) in schema.items():
        if key in raw:
            out[key] = conv(raw[key], f"{name}.{key}")
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {name}.{key}")
        else:
            out[key] = default
    return out


GRID_SCHEMA = {
    "d": (_choice(1, 2, 3), REQUIRED),
    "n": (_integer, REQUIRED),
    "L": (_number, 2 * math.pi),
}

FIELD_KINDS = {
    "indicator_example": {"eps": (_number, 0.1)},
    "indicator": {
        "width": (_number, REQUIRED),
        "background": (_number, 0.0),
        "height": (_number, 1.0),
    },
    "gaussian_bump": {"sigma": (_number, REQUIRED), "amplitude": (_number, 1.0)},
    "plane_wave": {
        "kappa": (_list_of(_integer), REQUIRED),
        "amplitude": (_number, 1.0),
        "phase": (_number, 0.0),
    },
    "white_noise": {},
    "band_pass_noise": {"lo": (_number, REQUIRED), "hi": (_optional(_number), None)},
    "bump_array": {
        "sigma": (_number, REQUIRED),
        "count": (_integer, REQUIRED),
        "signed": (_boolean, False),
    },
    "taylor_green": {"amplitude": (_number, 1.0)},
    "vortex_dipole": {
        "width": (_number, REQUIRED),
        "separation": (_number, REQUIRED),
        "amplitude": (_number, 1.0),
    },
    "random_solenoidal": {"k_max": (_number, REQUIRED), "amplitude": (_number, 1.0)},
    "file": {"path": (_string, REQUIRED)},
}


def _field_section(raw) -> dict:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("section field needs a 'kind'")
    kind = raw["kind"]
    if kind not in FIELD_KINDS:
        raise ConfigError(f"unknown field kind {kind!r}; choose from {sorted(FIELD_KINDS)}")
    body = {k: v for k, v in raw.items() if k != "kind"}
    return {"kind": kind, **_section(body, "field", FIELD_KINDS[kind])}


SECTIONS = {
    "certify": {
        "sparseness": {
            "epsilon": (_number, REQUIRED),
            "beta": (_number, REQUIRED),
            "ell": (_number, REQUIRED),
            "p": (_exponent, "inf"),
        },
    },
    "freq": {
        "frequency": {
            "beta": (_number, REQUIRED),
            "J": (_number, REQUIRED),
            "p": (_exponent, "inf"),
        },
    },
    "heat-decay": {
        "decay": {
            "mode": (_choice("spatial", "frequency", "drop"), "spatial"),
            "gamma": (_number, 0.5),
            "p": (_exponent, "inf"),
            "kernel": (_choice("heat", "lowpass"), "heat"),
            "ell": (_optional(_number), None),
            "t": (_optional(_number), None),
        },
    },
    "ns-run": {
        "solver": {
            "t_end": (_number, REQUIRED),
            "dt": (_optional(_number), None),
            "snapshot_every": (_optional(_integer), None),
        },
        "monitor": {
            "T_ref": (_optional(_number), None),
            "p": (_list_of(_exponent), ["inf"]),
            "epsilon": (_number, 0.5),
            "beta": (_number, 0.5),
        },
    },
    "criterion": {
        "criterion": {
            "d": (_choice(2, 3), REQUIRED),
            "p": (_exponent, "inf"),
            "norm_p": (_number, REQUIRED),
            "T0": (_list_of(_number), REQUIRED),
        },
    },
    "region": {
        "region": {
            "d": (_integer, 3),
            "p": (_number, 3),
            "constraints": (_optional(_list_of(_string)), None),
            "k": (_integer, 1),
            "window": (_optional(_list_of(_number)), None),
        },
    },
    "calibrate": {
        "calibrate": {"dims": (_list_of(_choice(1, 2, 3)), [1, 2, 3])},
    },
}

WITH_FIELD = ("certify", "freq", "heat-decay", "ns-run")


def validate_config(command: str, raw: dict, seed: int | None = None) -> dict:
    """Normalised config with defaults filled in; raises ConfigError on any problem."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"command", "seed"} | set(SECTIONS[command])
    if command in WITH_FIELD:
        allowed |= {"grid", "field"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) for {command}: {', '.join(unknown)}")
    if raw.get("command", command) != command:
        raise ConfigError(f"config is for {raw['command']!r}, not {command!r}")
    cfg = {"command": command}
    cfg["seed"] = seed if seed is not None else _integer(raw.get("seed", 0), "seed")
    if command in WITH_FIELD:
        cfg["field"] = _field_section(raw.get("field"))
        if cfg["field"]["kind"] == "file":
            if "grid" in raw:
                raise ConfigError("grid must be omitted when the field comes from a file")
            cfg["grid"] = None
        else:
            cfg["grid"] = _section(raw.get("grid"), "grid", GRID_SCHEMA)
            _grid(cfg["grid"])
    for name, schema in SECTIONS[command].items():
        cfg[name] = _section(raw.get(name), name, schema)
    _semantic_checks(cfg)
    return cfg


def _grid(spec: dict) -> Grid:
    try:
        return Grid(spec["d"], spec["n"], spec["L"])
    except InputError as exc:
        raise ConfigError(f"invalid grid: {exc}") from None


def _unit_interval(value, key):
    if not 0.0 < value < 1.0:
        raise ConfigError(f"{key} must lie in (0, 1), got {value}")


def _semantic_checks(cfg: dict) -> None:
    c = cfg["command"]
    if c == "certify":
        s = cfg["sparseness"]
        _unit_interval(s["epsilon"], "sparseness.epsilon")
        _unit_interval(s["beta"], "sparseness.beta")
        if not s["ell"] > 0:
            raise ConfigError(f"sparseness.ell must be positive, got {s['ell']}")
    elif c == "freq":
        _unit_interval(cfg["frequency"]["beta"], "frequency.beta")
    elif c == "heat-decay":
        dcy = cfg["decay"]
        _unit_interval(dcy["gamma"], "decay.gamma")
        if dcy["mode"] == "frequency" and dcy["t"] is None:
            raise ConfigError("decay.t is required in frequency mode")
        for key in ("ell", "t"):
            if dcy[key] is not None and not dcy[key] > 0:
                raise ConfigError(f"decay.{key} must be positive")
    elif c == "ns-run":
        if not cfg["solver"]["t_end"] > 0:
            raise ConfigError("solver.t_end must be positive")
        m = cfg["monitor"]
        _unit_interval(m["epsilon"], "monitor.epsilon")
        _unit_interval(m["beta"], "monitor.beta")
        if m["T_ref"] is not None and not m["T_ref"] > cfg["solver"]["t_end"]:
            raise ConfigError("monitor.T_ref must exceed solver.t_end")
    elif c == "criterion":
        cr = cfg["criterion"]
        if not cr["norm_p"] > 0 or any(not t > 0 for t in cr["T0"]):
            raise ConfigError("criterion.norm_p and criterion.T0 must be positive")
    elif c == "region":
        w = cfg["region"]["window"]
        if w is not None and (len(w) != 4 or not (w[0] < w[1] and w[2] < w[3])):
            raise ConfigError("region.window must be [x_min, x_max, t_min, t_max]")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def build_field(cfg: dict, base: Path | None = None) -> Field:
    spec = dict(cfg["field"])
    kind = spec.pop("kind")
    if kind == "file":
        path = Path(spec["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        return read_field(path)
    g = _grid(cfg["grid"])
    rng = np.random.default_rng(cfg["seed"])
    if kind in ("white_noise", "bump_array", "random_solenoidal", "band_pass_noise"):
        spec["rng"] = rng
    if kind == "band_pass_noise" and spec["hi"] is None:
        spec["hi"] = math.inf
    if kind == "plane_wave":
        spec["kappa"] = tuple(spec["kappa"])
    return getattr(samples, kind)(g, **spec)


# ---------------------------------------------------------------------------
# runs


class Run:
    """Collects the files of one command invocation."""

    def __init__(self, out: Path, cfg: dict, registry_version: str):
        self.out = out
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.registry_version = registry_version
        self.files: dict[str, str] = {}
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, data) -> Path:
        raw = data.encode() if isinstance(data, str) else bytes(data)
        path = self.out / name
        path.write_bytes(raw)
        self.files[name] = hashlib.sha256(raw).hexdigest()
        return path

    def figure(self, name: str, draw) -> None:
        path = draw(self.out / name)
        self.files[name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def report(self, verdict: bool, results: dict) -> dict:
        doc = {
            "command": self.cfg["command"],
            "verdict": "pass" if verdict else "fail",
            "registry_version": self.registry_version,
            "config_sha256": self.hash,
            "seed": self.cfg["seed"],
            "results": results,
        }
        self.write("report.json", _json(doc))
        return doc

    def finish(self) -> dict:
        self.write("config.json", _json(self.cfg))
        manifest = {
            "command": self.cfg["command"],
            "config_sha256": self.hash,
            "seed": self.cfg["seed"],
            "registry_version": self.registry_version,
            "files": dict(sorted(self.files.items())),
        }
        (self.out / "manifest.json").write_text(_json(manifest))
        return manifest


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=1, sort_keys=True, allow_nan=False) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_certify(run: Run, u: Field) -> bool:
    from .plotting import plot_certificate
    from .sparseness import SparsenessParams, certify

    s = run.cfg["sparseness"]
    cert = certify(u, SparsenessParams(s["epsilon"], s["beta"], s["ell"], s["p"]))
    run.write("field.spns", encode_field(u))
    run.figure("certificate.png", lambda p: plot_certificate(u, cert.mask, cert.threshold, p))
    run.report(cert.verdict, {"certificate": cert.to_dict()})
    return cert.verdict


def run_freq(run: Run, u: Field) -> bool:
    from .frequency import FrequencySparsenessParams, besov_profile, certify_frequency
    from .plotting import plot_blocks

    f = run.cfg["frequency"]
    cert = certify_frequency(u, FrequencySparsenessParams(f["beta"], f["J"]), f["p"])
    prof = besov_profile(u)
    run.write("field.spns", encode_field(u))
    run.write("blocks.csv", prof.to_csv())
    run.figure("blocks.png", lambda p: plot_blocks(prof.levels, prof.linf, p))
    run.report(cert.verdict, {"certificate": cert.to_dict(), "besov": prof.to_dict()})
    return cert.verdict


def run_heat_decay(run: Run, u: Field, registry) -> bool:
    from .kernels import heat_kernel, lowpass_kernel
    from .plotting import plot_terms
    from .semigroup import decay_experiment, frequency_decay_experiment, heat_drop_ratio

    dcy = run.cfg["decay"]
    run.write("field.spns", encode_field(u))
    d = u.grid.d
    if dcy["mode"] == "spatial":
        kernel = (
            heat_kernel(d)
            if dcy["kernel"] == "heat"
            else lowpass_kernel(d, registry.kernel_table("lowpass", d))
        )
        rep = decay_experiment(
            u, dcy["gamma"], dcy["p"], kernel, ell=dcy["ell"], registry=registry, strict=False
        )
        names = list(rep.terms)
        run.figure(
            "terms.png",
            lambda p: plot_terms(names, [rep.terms[k] for k in names], dcy["gamma"] / 3.0, p),
        )
        run.report(rep.verdict, {"decay": rep.to_dict()})
        return rep.verdict
    if dcy["mode"] == "frequency":
        rep = frequency_decay_experiment(u, dcy["gamma"], dcy["p"], dcy["t"], registry)
        buf = ["j,measured,bound"] + [f"{j!r},{m!r},{b!r}" for j, m, b in rep.blocks]
        run.write("blocks.csv", "\n".join(buf) + "\n")
        run.report(rep.verdict, {"decay": rep.to_dict()})
        return rep.verdict
    ell = dcy["ell"] if dcy["ell"] is not None else 1.0
    C_cal = float(registry.constant("heat_drop", "C_cal", d))
    ratio = heat_drop_ratio(u, ell, C_cal)
    ok = ratio <= 0.75
    run.report(ok, {"drop": {"ell": ell, "C_cal": C_cal, "T": C_cal * ell * ell, "ratio": ratio}})
    return ok


def run_ns(run: Run, u: Field, registry) -> bool:
    from .navier_stokes import integrate, monitor
    from .plotting import plot_series
    from .sparseness import apriori_certificate

    s, m = run.cfg["solver"], run.cfg["monitor"]
    traj = integrate(u, s["t_end"], s["dt"], s["snapshot_every"])
    T_ref = m["T_ref"] if m["T_ref"] is not None else 2.0 * s["t_end"]
    mon = monitor(traj.times, traj.snapshots, T_ref, m["p"], registry)
    certs = []
    for t, snap in zip(traj.times, traj.snapshots):
        for p in m["p"]:
            if parse_exponent(p) <= 2 or lp_norm(snap, math.inf) == 0.0:
                continue
            try:
                ac = apriori_certificate(snap, m["epsilon"], m["beta"], p)
                ok = (
                    ac.certificate.verdict
                    and ac.witness_volume <= ac.volume_bound * (1 + 1e-12)
                    and ac.tail_norm <= ac.tail_bound * (1 + 1e-12)
                )
                certs.append({"t": t, "p": p, "a": ac.a, "ell": ac.ell, "holds": ok})
            except DomainError as exc:
                # scale beyond the box: the certificate is not applicable
                certs.append({"t": t, "p": p, "holds": None, "reason": str(exc)})
    energy_ok = all(b <= a * (1 + 1e-12) for a, b in zip(traj.energies, traj.energies[1:]))
    div_ok = max(traj.divergences) <= 1e-8
    verdict = energy_ok and div_ok and mon.apriori_holds and all(c["holds"] is not False for c in certs)
    run.write("final.spns", encode_field(traj.final))
    run.write("monitor.csv", mon.to_csv())
    if mon.rows:
        t = mon.series("t")
        norms = {k: mon.series(k) for k in mon.rows[0] if k.startswith("norm_")}
        run.figure("monitor.png", lambda p: plot_series(t, norms, p))
    run.report(
        verdict,
        {
            "dt": traj.dt,
            "times": traj.times,
            "energy_nonincreasing": energy_ok,
            "max_divergence": max(traj.divergences),
            "monitor": mon.to_dict(),
            "apriori": certs,
        },
    )
    return verdict


def run_criterion(run: Run, registry) -> bool:
    from .navier_stokes import criterion_thresholds

    cr = run.cfg["criterion"]
    rows = [criterion_thresholds(cr["norm_p"], cr["p"], cr["d"], T0, registry).to_dict() for T0 in cr["T0"]]
    keys = ["T0", "t_bar", "trivial", "gamma", "ell_bar", "ell", "tail_fraction", "local_fraction"]
    lines = [",".join(keys)]
    for r in rows:
        lines.append(",".join(repr(r[k]) if not isinstance(r[k], bool) else str(int(r[k])) for k in keys))
    run.write("thresholds.csv", "\n".join(lines) + "\n")
    run.report(True, {"thresholds": rows})
    return True


def run_region(run: Run) -> bool:
    from .plotting import plot_region
    from .scenarios import admissible_region

    r = run.cfg["region"]
    region = admissible_region(r["d"], r["p"], r["constraints"], k=r["k"], window=r["window"])
    run.write("region.json", region.to_json())
    run.write("vertices.csv", region.vertices_csv())
    run.write("region.dat", region.polyline())
    run.figure("region.png", lambda p: plot_region(region, p, r["window"]))
    run.report(True, {"empty": region.empty, "bounded": region.bounded, "vertex_count": len(region.vertices)})
    return True


def run_calibrate(run: Run) -> bool:
    from .calibration import build_registry, registry_text

    dims = tuple(run.cfg["calibrate"]["dims"])
    data = build_registry(run.cfg["seed"], dims, log=lambda msg: print(msg, file=sys.stderr))
    run.write("constants.json", registry_text(data))
    run.report(True, {"dims": list(dims), "entries": len(data["constants"])})
    return True


def execute(command: str, cfg: dict, out: Path, base: Path | None = None) -> tuple[int, dict]:
    """Run a validated config; returns (exit code, manifest)."""
    registry = load_registry()
    run = Run(out, cfg, registry.version)
    if command in WITH_FIELD:
        u = build_field(cfg, base)
        ok = {
            "certify": lambda: run_certify(run, u),
            "freq": lambda: run_freq(run, u),
            "heat-decay": lambda: run_heat_decay(run, u, registry),
            "ns-run": lambda: run_ns(run, u, registry),
        }[command]()
    elif command == "criterion":
        ok = run_criterion(run, registry)
    elif command == "region":
        ok = run_region(run)
    else:
        ok = run_calibrate(run)
    return (EXIT_PASS if ok else EXIT_FAIL), run.finish()


# ---------------------------------------------------------------------------
# bundles


def report_bundle(run_dir, archive) -> Path:
    """Zip a run directory with fixed timestamps; every manifest entry must be present."""
    run_dir, archive = Path(run_dir), Path(archive)
    mpath = run_dir / "manifest.json"
    if not mpath.is_file():
        raise BundleError(f"{run_dir} has no manifest.json; nothing to bundle")
    manifest = json.loads(mpath.read_text())
    files = manifest.get("files", {})
    if not files:
        raise BundleError("the run produced no outputs")
    for name, digest in files.items():
        path = run_dir / name
        if not path.is_file():
            raise BundleError(f"incomplete bundle: {name} is missing")
        if hashlib.sha256(path.read_bytes()).hexdigest() != digest:
            raise BundleError(f"incomplete bundle: {name} changed after the run")
    with zipfile.ZipFile(archive, "w", zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(files) + ["manifest.json"]:
            info = zipfile.ZipInfo(name, date_time=_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, (run_dir / name).read_bytes())
    return archive


def certify_from_bundle(archive, out: Path) -> tuple[int, dict]:
    """Re-run the certification stored in a bundle and compare with its report."""
    from .sparseness import SparsenessParams, certify

    try:
        with zipfile.ZipFile(archive) as zf:
            cfg = json.loads(zf.read("config.json"))
            old = json.loads(zf.read("report.json"))
            u = decode_field(zf.read("field.spns"))
    except (OSError, KeyError, zipfile.BadZipFile) as exc:
        raise BundleError(f"cannot read bundle {archive}: {exc}") from None
    if cfg.get("command") != "certify":
        raise BundleError(f"bundle holds a {cfg.get('command')!r} run, not certify")
    if cfg.get("grid", 0) is None:
        cfg = {k: v for k, v in cfg.items() if k != "grid"}
    cfg = validate_config("certify", cfg)
    s = cfg["sparseness"]
    cert = certify(u, SparsenessParams(s["epsilon"], s["beta"], s["ell"], s["p"]))
    new = cert.to_dict()
    before = old["results"]["certificate"]
    same = all(
        _clean(new[k]) == before[k]
        for k in ("verdict", "threshold", "measured_beta", "measured_epsilon")
    )
    registry = load_registry()
    run = Run(out, cfg, registry.version)
    run.report(cert.verdict and same, {"certificate": new, "reproduced": same, "bundle_verdict": before["verdict"]})
    code = EXIT_PASS if (cert.verdict and same) else EXIT_FAIL
    return code, run.finish()


# ---------------------------------------------------------------------------
# entry point


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (RangeError, ResolutionError, DomainError, CFLError)):
        return EXIT_DOMAIN
    if isinstance(exc, ContractError):
        return EXIT_FAIL
    if isinstance(exc, (ConfigError, InputError, CalibrationError, BundleError, DegenerateInputError)):
        return EXIT_CONFIG
    return EXIT_DOMAIN


def fixture_path(name: str) -> Path:
    path = Path(str(resources.files("sparsens") / "data" / "fixtures" / f"{name}.json"))
    if not path.is_file():
        raise ConfigError(f"no shipped fixture named {name!r}")
    return path


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file for the command")
    common.add_argument("--fixture", help="use a config shipped with the package (e.g. 'indicator')")
    common.add_argument("--seed", type=int, help="seed for randomised fields (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("sparsens-out"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    parser = argparse.ArgumentParser(
        prog="sparsens",
        description="Sparseness, heat-decay and Navier-Stokes diagnostics on periodic grids.",
        epilog=(
            f"Exit codes: 0 pass, 1 verdict fail, 2 config error, 3 resolution/domain error. "
            f"Set {REGISTRY_ENV} to use another constants registry."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "certify": "physical-space sparseness certificate",
        "freq": "frequency sparseness and Besov block profile",
        "heat-decay": "heat-semigroup decay experiments",
        "ns-run": "Navier-Stokes run with blow-up monitor",
        "criterion": "sparseness thresholds guaranteeing continuation",
        "region": "admissible similarity-exponent region",
        "calibrate": "rebuild the constants registry",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
        if name == "certify":
            p.add_argument("--from-bundle", type=Path, help="re-run a bundled certification")
        if name == "region":
            p.add_argument("--d", type=int, help="spatial dimension")
            p.add_argument("--p", type=float, help="Lebesgue exponent p >= d")
    b = sub.add_parser("bundle", help="zip a run directory with its manifest")
    b.add_argument("run_dir", type=Path)
    b.add_argument("archive", type=Path)
    return parser


def _load_raw(args) -> dict:
    if args.config is not None and args.fixture is not None:
        raise ConfigError("give either --config or --fixture, not both")
    path = args.config or (fixture_path(args.fixture) if args.fixture else None)
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "bundle":
            report_bundle(args.run_dir, args.archive)
            print(args.archive)
            return EXIT_PASS
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        set_threads(args.threads)
        if args.command == "certify" and args.from_bundle is not None:
            code, manifest = certify_from_bundle(args.from_bundle, args.out)
        else:
            raw = _load_raw(args)
            if args.command == "region":
                region = dict(raw.get("region") or {})
                if args.d is not None:
                    region["d"] = args.d
                if args.p is not None:
                    region["p"] = int(args.p) if float(args.p).is_integer() else args.p
                raw = {**raw, "region": region}
            elif not raw and args.command != "calibrate":
                raise ConfigError(f"{args.command} needs --config or --fixture")
            cfg = validate_config(args.command, raw, args.seed)
            base = (args.config.parent if args.config else None)
            code, manifest = execute(args.command, cfg, args.out, base)
    except SparsensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    report = json.loads((args.out / "report.json").read_text())
    print(json.dumps({"verdict": report["verdict"], "out": str(args.out)}))
    return code


if __name__ == "__main__":
    sys.exit(main())
