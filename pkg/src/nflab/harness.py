"""Config-driven runs: model -> arithmetic -> normal form -> propagation -> fits."""
from __future__ import annotations

import copy
import datetime as _dt
import hashlib
import json
import logging
import os
import re
import tempfile
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .algebra import h0_operator
from .arithmetic import diophantine_scan, frequency_system
from .errors import ConfigError, ContaminationError, NflabError, ResonanceViolation
from .normal_form import DrivenHamiltonian, iterate
from .propagator import coherent_norms, conjugate_state, fit_growth, map_trajectory, maro_check, propagate
from .quasiperiodic import QuasiPeriodicOperator
from .spectral import build_anharmonic_model, build_harmonic_model, build_zoll_model

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 2, 3, 4

_FREQ = {"oneOf": [
    {"type": "array", "items": {"type": ["number", "string"]}, "minItems": 1},
    {"type": ["number", "string"]},
    {"type": "object", "additionalProperties": False, "required": ["generators", "coeffs"],
     "properties": {"generators": {"type": "array"},
                    "coeffs": {"type": "array", "items": {"type": "array"}}}},
]}

_COEFF = {"oneOf": [{"type": "number"},
                    {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer"},
        "model": {
            "type": "object",
            "required": ["type"],
            "oneOf": [
                {"additionalProperties": False, "required": ["type", "nu", "cutoffs"],
                 "properties": {"type": {"const": "harmonic"}, "nu": _FREQ,
                                "cutoffs": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                                "buffer_fraction": {"type": "number", "minimum": 0}}},
                {"additionalProperties": False, "required": ["type", "k", "l", "cutoff"],
                 "properties": {"type": {"const": "anharmonic"}, "k": {"type": "integer"}, "l": {"type": "integer"},
                                "a": {"type": "number", "exclusiveMinimum": 0},
                                "cutoff": {"type": "integer", "minimum": 2},
                                "buffer_fraction": {"type": "number", "minimum": 0}}},
                {"additionalProperties": False, "required": ["type", "d", "cutoff"],
                 "properties": {"type": {"const": "zoll"}, "d": {"type": "integer", "minimum": 1},
                                "cutoff": {"type": "integer", "minimum": 1},
                                "multiplicity": {"enum": ["collapsed", "full"]},
                                "buffer_fraction": {"type": "number", "minimum": 0}}},
            ],
        },
        "perturbation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["order", "omega"],
            "properties": {
                "order": {"type": "number"},
                "omega": _FREQ,
                "terms": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False, "required": ["k", "coeff", "ops"],
                    "properties": {"k": {"type": "array", "items": {"type": "integer"}}, "coeff": _COEFF,
                                   "ops": {"type": "string"}, "dress": {"type": "number"}}}},
                "dense": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False, "required": ["k", "real"],
                    "properties": {"k": {"type": "array", "items": {"type": "integer"}},
                                   "real": {"type": "array"}, "imag": {"type": "array"}}}},
            },
        },
        "normal_form": {
            "type": "object",
            "additionalProperties": False,
            "required": ["regime", "N"],
            "properties": {
                "regime": {"enum": ["superlinear", "order_one"]},
                "N": {"type": "integer", "minimum": 0},
                "divisor_floor": {"type": "number", "exclusiveMinimum": 0},
                "k_max_total": {"type": "integer", "minimum": 1},
                "method": {"enum": ["exact", "quadrature", "series"]},
                "scan_sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}},
            },
        },
        "propagation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_span"],
            "properties": {
                "t_span": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "r": {"type": "array", "items": {"type": "number"}},
                "integrator": {"enum": ["magnus2", "magnus4"]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "frame": {"enum": ["direct", "transformed", "both", "oracle"]},
                "initial_level": {"type": "integer", "minimum": 0},
                "leak_threshold": {"type": "number", "exclusiveMinimum": 0},
                "fit_j_min": {"type": "integer", "minimum": 0},
            },
        },
        "maro": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_grid": {"type": "array", "items": {"type": "number"}},
                           "sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                           "r": {"type": "number"}},
        },
        "arithmetic": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"kappa": {"type": "number", "exclusiveMinimum": 0},
                           "K_max": {"type": "integer", "minimum": 1},
                           "variant": {"enum": ["non.res3", "non.res.re"]}},
        },
        "expect": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon_max": {"type": "object", "additionalProperties": {"type": "number"}},
                "epsilon_range": {"type": "object", "additionalProperties": {
                    "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
                "delta": {"type": "number"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "run_id": {"type": "string"},
                           "dump_operators": {"type": "boolean"}},
        },
    },
}


def validate_config(cfg):
    """Validate against the schema; errors name the offending key path."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {path}: {exc.message}") from None
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate_config(cfg)


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


# builders -------------------------------------------------------------------------------

def build_model_and_freq(mcfg, omega_spec=None):
    kind = mcfg["type"]
    bf = mcfg.get("buffer_fraction", 0.5)
    if kind == "harmonic":
        freq = frequency_system(mcfg["nu"], omega_spec)
        model = build_harmonic_model(freq.nu, mcfg["cutoffs"], bf)
        return model, freq
    if kind == "anharmonic":
        model = build_anharmonic_model(mcfg["k"], mcfg["l"], mcfg.get("a", 1.0), mcfg["cutoff"], bf)
    else:
        model = build_zoll_model(mcfg["d"], mcfg["cutoff"], mcfg.get("multiplicity", "collapsed"), bf)
    freq = frequency_system([1], omega_spec) if omega_spec is not None else None
    return model, freq


_TOKEN = re.compile(r"^(x|p|a|ad|n)(\d+)(?:\^(\d+))?$")


def ladder_monomial(model, ops):
    """Matrix of a product such as ``"ad0 a0"`` or ``"x0^3 p1"`` (left to right)."""
    D = model.buffer_dim
    out = np.eye(D, dtype=complex)
    for tok in ops.split():
        m = _TOKEN.match(tok)
        if not m:
            raise ConfigError(f"cannot parse operator token {tok!r}")
        name, mode, power = m.group(1), int(m.group(2)), int(m.group(3) or 1)
        if mode >= model.n_modes:
            raise ConfigError(f"operator {tok!r} refers to mode {mode} of a {model.n_modes}-mode model")
        if name == "x":
            mat = model.position(mode)
        elif name == "p":
            mat = model.momentum(mode)
        elif name == "a":
            mat = model.lowering(mode)
        elif name == "ad":
            mat = model.lowering(mode).T.conj()
        else:
            low = model.lowering(mode)
            mat = low.T.conj() @ low
        out = out @ np.linalg.matrix_power(np.asarray(mat, dtype=complex), power)
    return out


def build_perturbation(model, pcfg, omega):
    """Quasiperiodic perturbation W = T + T^* from a perturbation block.

    Each term contributes ``coeff * e^{ik.theta} * K0^(s/2) M K0^(s/2)`` to T,
    where M is the ladder monomial and s the optional dress exponent, so a
    single term ``{"k": [1], "coeff": 0.5, "ops": "x0"}`` gives cos(theta) x.
    Dense blocks are added to W as given (they must already pair k with -k).
    """
    omega = np.atleast_1d(omega)
    n = omega.size
    D = model.buffer_dim
    terms = {}

    def add(k, mat):
        k = tuple(int(v) for v in k)
        if len(k) != n:
            raise ConfigError(f"Fourier index {list(k)} has the wrong length for {n} drive angles")
        terms[k] = terms.get(k, np.zeros((D, D), dtype=complex)) + mat

    for term in pcfg.get("terms", []):
        c = term["coeff"]
        c = complex(c[0], c[1]) if isinstance(c, list) else complex(c)
        mat = ladder_monomial(model, term["ops"])
        s = term.get("dress", 0.0)
        if s:
            w = model.k0_eigs ** (s / 2.0)
            mat = w[:, None] * mat * w[None, :]
        add(term["k"], c * mat)
        add([-v for v in term["k"]], np.conj(c) * mat.conj().T)
    for blk in pcfg.get("dense", []):
        mat = np.asarray(blk["real"], dtype=float) + 1j * np.asarray(blk.get("imag", np.zeros((D, D))), dtype=float)
        if mat.shape != (D, D):
            raise ConfigError(f"dense block has shape {mat.shape}, buffer is {D}")
        add(blk["k"], mat)
    V = QuasiPeriodicOperator.from_dict(model, terms, omega, pcfg["order"])
    if not V.is_symmetric(1e-10):
        raise ConfigError("perturbation is not symmetric; dense blocks must pair k with -k")
    return V


def _linear_drive_amplitude(V):
    """Amplitude f if V = f cos(omega theta) x on a one-angle, one-mode harmonic model."""
    m = V.model
    if m.kind != "harmonic" or m.n_modes != 1 or V.n != 1:
        return None
    x = m.position(0)
    keys = sorted(tuple(k) for k in V.modes if np.any(V.coefficient(k)))
    if keys != [(-1,), (1,)]:
        return None
    c = V.coefficient([1])
    amp = 2.0 * np.vdot(x, c).real / np.vdot(x, x).real
    if not np.allclose(c, 0.5 * amp * x, atol=1e-12) or not np.allclose(V.coefficient([-1]), c, atol=1e-12):
        return None
    return float(amp)


# operator dump -----------------------------------------------------------------------------

def write_operator(path, array):
    """Binary dump: int64 ndim, int64 dims, then row-major complex128 data."""
    arr = np.ascontiguousarray(np.asarray(array, dtype=np.complex128))
    with open(path, "wb") as fh:
        np.array([arr.ndim, *arr.shape], dtype=np.int64).tofile(fh)
        arr.tofile(fh)


def read_operator(path):
    with open(path, "rb") as fh:
        ndim = int(np.fromfile(fh, dtype=np.int64, count=1)[0])
        shape = tuple(np.fromfile(fh, dtype=np.int64, count=ndim))
        data = np.fromfile(fh, dtype=np.complex128)
    return data.reshape(shape)


def _atomic_write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
    os.replace(tmp, path)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        v = float(o)
        return v if np.isfinite(v) else str(v)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _clean(obj):
    """Replace non-finite floats by strings so manifests are strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# the run ---------------------------------------------------------------------------------

class RunFailure(NflabError):
    def __init__(self, stage, cause, code):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage, self.cause, self.code = stage, cause, code


def run_config(cfg_or_path, out_dir=None, stop_after=None, dump_operators=None):
    """Execute a run and write its manifest. Returns ``(manifest, exit_code)``.

    ``stop_after`` may name a stage ("model", "arithmetic", "normal_form")
    to end the run early.
    """
    if isinstance(cfg_or_path, (str, os.PathLike)):
        cfg = load_config(cfg_or_path)
    else:
        cfg = validate_config(copy.deepcopy(cfg_or_path))
    ocfg = cfg.get("output", {})
    run_id = ocfg.get("run_id") or cfg.get("name") or config_hash(cfg)[:12]
    out = Path(out_dir or ocfg.get("dir") or "nflab_runs") / run_id
    out.mkdir(parents=True, exist_ok=True)
    dump = ocfg.get("dump_operators", False) if dump_operators is None else dump_operators
    manifest = {"run_id": run_id, "config_sha256": config_hash(cfg), "version": __version__,
                "seed": cfg.get("seed", 0), "started": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                "stages": {}, "verdicts": {}, "csv": {}, "status": "running", "failed_stage": None}
    mpath = out / "manifest.json"
    try:
        code = _run_stages(cfg, manifest, out, stop_after, dump)
    except Exception as exc:  # recorded, then mapped to an exit code
        stage = manifest.get("_stage", "model")
        code = EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_NUMERICAL
        if not isinstance(exc, NflabError):
            log.exception("unexpected failure in stage %s", stage)
        manifest["status"] = "failed"
        manifest["failed_stage"] = stage
        manifest["error"] = f"{type(exc).__name__}: {exc}"
    else:
        manifest["status"] = "ok" if code == EXIT_OK else "acceptance_failed"
    manifest.pop("_stage", None)
    manifest["finished"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    manifest["exit_code"] = code
    _atomic_write_json(mpath, _clean(manifest))
    manifest["path"] = str(mpath)
    return manifest, code


def _run_stages(cfg, manifest, out, stop_after, dump):
    stages = manifest["stages"]

    def enter(name):
        manifest["_stage"] = name

    # model + arithmetic ----------------------------------------------------------------
    enter("model")
    t0 = time.perf_counter()
    pcfg = cfg.get("perturbation")
    omega_spec = pcfg["omega"] if pcfg else None
    model, freq = build_model_and_freq(cfg["model"], omega_spec)
    H0 = h0_operator(model)
    stages["model"] = {"kind": model.kind, "buffer_dim": model.buffer_dim, "report_dim": model.report_dim,
                       "mu": model.mu, "integer_spectrum": model.integer_spectrum,
                       "lambda_shift": model.lambda_shift, "seconds": time.perf_counter() - t0}
    if stop_after == "model":
        return EXIT_OK

    enter("arithmetic")
    if freq is not None:
        stages["arithmetic"] = freq.as_dict()
        acfg = cfg.get("arithmetic")
        if acfg and freq.omega_coeffs is not None:
            try:
                rec = diophantine_scan(freq, acfg.get("kappa", 2.0), acfg.get("K_max", 50),
                                       acfg.get("variant", "non.res3"))
                stages["arithmetic"]["diophantine"] = rec.as_dict()
            except ResonanceViolation as exc:
                stages["arithmetic"]["diophantine"] = {"resonance_violation": str(exc)}
    if stop_after == "arithmetic":
        return EXIT_OK

    V = build_perturbation(model, pcfg, freq.omega if freq is not None else [0.0]) if pcfg else None
    if dump:
        opdir = out / "operators"
        opdir.mkdir(exist_ok=True)
        write_operator(opdir / "H0.bin", H0.matrix)
        if V is not None:
            write_operator(opdir / "V.bin", V.coeffs)

    # normal form ------------------------------------------------------------------------
    enter("normal_form")
    nf = None
    nfcfg = cfg.get("normal_form")
    if nfcfg and nfcfg["N"] > 0:
        if V is None:
            raise ConfigError("normal_form needs a perturbation block")
        t0 = time.perf_counter()
        nf = iterate(H0, V, nfcfg["N"], nfcfg["regime"], freq=freq,
                     divisor_floor=nfcfg.get("divisor_floor", 1e-6), k_max_total=nfcfg.get("k_max_total"),
                     method=nfcfg.get("method", "exact"), scan_sizes=nfcfg.get("scan_sizes"))
        stages["normal_form"] = dict(nf.summary(), seconds=time.perf_counter() - t0)
        if dump:
            for j, X in enumerate(nf.generators, 1):
                write_operator(out / "operators" / f"X{j}.bin", X.coeffs)
            write_operator(out / "operators" / "Z.bin", nf.Z.coeffs)
            write_operator(out / "operators" / "V_rem.bin", nf.V.coeffs)
    elif nfcfg:
        stages["normal_form"] = {"regime": nfcfg["regime"], "N": 0, "steps": []}
    if stop_after == "normal_form":
        return EXIT_OK

    # maro criterion -------------------------------------------------------------------
    mcfg = cfg.get("maro")
    if mcfg is not None and V is not None:
        enter("maro")
        sizes = mcfg.get("sizes") or [model.report_dim // 4, model.report_dim // 2, model.report_dim]
        grid = mcfg.get("n_grid") or list(np.arange(-2.0, 3.01, 0.25))
        r = mcfg.get("r", 1.0)
        raw = maro_check(DrivenHamiltonian(H0, V), grid, sizes, r=r)
        stages["maro"] = {"raw": raw.as_dict()}
        if nf is not None:
            stages["maro"]["transformed"] = maro_check(nf.hamiltonian(), grid, sizes, r=r).as_dict()

    # propagation ----------------------------------------------------------------------
    prop = cfg.get("propagation")
    fits = {}
    if prop is not None:
        enter("propagate")
        fits = _propagate_stage(cfg, prop, model, H0, V, nf, stages, manifest, out)

    # verdicts -------------------------------------------------------------------------
    enter("verdicts")
    code = EXIT_OK
    exp = cfg.get("expect", {})
    frame = "transformed" if "transformed" in fits else next(iter(fits), None)
    for r, bound in exp.get("epsilon_max", {}).items():
        eps = fits.get(frame, {}).get(float(r))
        ok = eps is not None and eps <= bound
        manifest["verdicts"][f"epsilon_r{r}_max"] = {"value": eps, "bound": bound, "pass": ok, "frame": frame}
        code = code if ok else EXIT_ACCEPTANCE
    for r, (lo, hi) in exp.get("epsilon_range", {}).items():
        eps = fits.get(frame, {}).get(float(r))
        ok = eps is not None and lo <= eps <= hi
        manifest["verdicts"][f"epsilon_r{r}_range"] = {"value": eps, "range": [lo, hi], "pass": ok, "frame": frame}
        code = code if ok else EXIT_ACCEPTANCE
    if "delta" in exp:
        d = nf.delta if nf is not None else None
        ok = d is not None and abs(d - exp["delta"]) < 1e-12
        manifest["verdicts"]["delta"] = {"value": d, "expected": exp["delta"], "pass": ok}
        code = code if ok else EXIT_ACCEPTANCE
    return code


def _time_grid(prop):
    t_a, t_b = prop["t_span"]
    dt = prop.get("dt", 0.25)
    n = int(round((t_b - t_a) / dt))
    return t_a + dt * np.arange(n + 1)


def _propagate_stage(cfg, prop, model, H0, V, nf, stages, manifest, out):
    t_grid = _time_grid(prop)
    r_list = [float(r) for r in prop.get("r", [0.5, 1.0])]
    frame = prop.get("frame", "direct")
    tol = prop.get("tol", 1e-8)
    integ = prop.get("integrator", "magnus4")
    leak = prop.get("leak_threshold", 1e-6)
    j_min = prop.get("fit_j_min", 3)
    level = prop.get("initial_level", 0)
    order = np.argsort(model.k0_eigs, kind="stable")
    psi0 = np.zeros(model.buffer_dim, dtype=complex)
    psi0[order[level]] = 1.0
    P = V if V is not None else QuasiPeriodicOperator.zero(model, [0.0], 0.0)
    H = DrivenHamiltonian(H0, P)
    result, fits = {}, {}
    trajs = {}

    if frame == "oracle":
        amp = _linear_drive_amplitude(V) if V is not None else 0.0
        if amp is None or level != 0:
            raise ConfigError("the coherent-state oracle needs a cos(omega t) x drive on a 1-D oscillator "
                              "started in its ground state")
        norms, _ = coherent_norms(t_grid, model.nu[0], amp, float(P.omega[0]), r_list)
        trajs["oracle"] = (t_grid, norms, None)
    if frame in ("direct", "both"):
        tr = propagate(H, psi0, t_grid, integ, tol, r_list, leak_threshold=leak)
        trajs["direct"] = (tr.t, {r: tr.norm(r) for r in r_list}, tr)
    if frame in ("transformed", "both"):
        if nf is None:
            raise ConfigError("transformed frame needs a normal_form block with N > 0")
        phi0 = conjugate_state(psi0, nf.generators, P.omega * t_grid[0], "inverse")
        tt = propagate(nf.hamiltonian(), phi0, t_grid, integ, tol, r_list, leak_threshold=leak)
        mapped = map_trajectory(tt, nf.generators, P.omega, r_list)
        trajs["transformed"] = (mapped.t, {r: mapped.norm(r) for r in r_list}, mapped)

    for name, (t, norms, tr) in trajs.items():
        info = {}
        if tr is not None:
            info.update(status=tr.status, trip_time=tr.trip_time, steps=tr.steps, rejected=tr.rejected,
                        max_unitarity_defect=float(tr.unitarity_defect.max()), max_leak=float(tr.leak.max()))
        fits[name] = {}
        info["fits"] = {}
        for r in r_list:
            try:
                if tr is not None:
                    g = fit_growth(tr, r=r, j_min=j_min, t0=t_grid[0])
                else:
                    g = fit_growth(t, norms[r], r=r, j_min=j_min, t0=t_grid[0])
                info["fits"][str(r)] = g.as_dict()
                fits[name][r] = g.epsilon
            except (ContaminationError, ConfigError) as exc:
                info["fits"][str(r)] = {"refused": str(exc)}
        csv_path = out / f"{manifest['run_id']}_{name}.csv"
        if tr is not None:
            tr.write_csv(csv_path, r_list)
        else:
            _write_norm_csv(csv_path, t, norms, r_list)
        manifest["csv"][name] = str(csv_path)
        result[name] = info
    if "direct" in trajs and "transformed" in trajs:
        d, m = trajs["direct"][2], trajs["transformed"][2]
        k = min(len(d.states), len(m.states))
        result["frame_difference"] = float(np.linalg.norm(d.states[:k] - m.states[:k], axis=1).max())
    stages["propagate"] = result
    return fits


def _write_norm_csv(path, t, norms, r_list):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"norm_{r:g}" for r in r_list] + ["unitarity_defect", "leak"])
        for i, ti in enumerate(t):
            w.writerow([repr(float(ti))] + [repr(float(norms[r][i])) for r in r_list] + ["0.0", "0.0"])


# comparison ---------------------------------------------------------------------------------

def _load_manifest(m):
    if isinstance(m, dict):
        return m
    with open(m) as fh:
        return json.load(fh)


def _fit_table(man):
    out = {}
    for frame, info in man.get("stages", {}).get("propagate", {}).items():
        if isinstance(info, dict):
            for r, fit in info.get("fits", {}).items():
                if "epsilon_hat" in fit:
                    out.setdefault(frame, {})[float(r)] = fit["epsilon_hat"]
    return out


def compare(manifest_a, manifest_b, configs=None):
    """Side-by-side growth exponents and boundedness tables of two runs.

    ``configs`` optionally supplies the two configs; their model and
    perturbation blocks must agree. Returns a dict with per-r deltas and a
    two-column text series (r, measured exponent) for each run.
    """
    a, b = _load_manifest(manifest_a), _load_manifest(manifest_b)
    if configs is not None:
        ca, cb = configs
        for key in ("model", "perturbation"):
            if ca.get(key) != cb.get(key):
                raise ConfigError(f"runs differ in their {key} block; refusing to compare")
    fa, fb = _fit_table(a), _fit_table(b)

    def best(fits):
        for frame in ("transformed", "direct", "oracle"):
            if frame in fits:
                return frame, fits[frame]
        return None, {}

    frame_a, ea = best(fa)
    frame_b, eb = best(fb)
    rows = []
    for r in sorted(set(ea) | set(eb)):
        va, vb = ea.get(r), eb.get(r)
        rows.append({"r": r, "a": va, "b": vb, "delta": None if va is None or vb is None else vb - va})

    def maro_of(man):
        mr = man.get("stages", {}).get("maro", {})
        src = mr.get("transformed") or mr.get("raw")
        if not src:
            return None
        return {"largest_bounded": src.get("largest_bounded"), "predicted_exponent": src.get("predicted_exponent"),
                "r": src.get("r")}

    report = {"a": {"run_id": a.get("run_id"), "frame": frame_a, "maro": maro_of(a)},
              "b": {"run_id": b.get("run_id"), "frame": frame_b, "maro": maro_of(b)},
              "epsilon": rows}
    ma, mb = report["a"]["maro"], report["b"]["maro"]
    if ma and mb and ma["largest_bounded"] is not None and mb["largest_bounded"] is not None:
        report["maro_delta"] = mb["largest_bounded"] - ma["largest_bounded"]
    report["series"] = {side: "\n".join(f"{row['r']:g} {row[side]:.6g}" for row in rows if row[side] is not None)
                        for side in ("a", "b")}
    return report
