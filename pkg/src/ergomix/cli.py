"""Command-line experiment runner.

Usage::

    ergomix run CONFIG.json [--seed N] [--out DIR]
    ergomix validate CONFIG.json
    ergomix reproduce-paper-example [--out DIR]

A config is a JSON object with keys ``kind``, ``model``, ``params`` and the
optional ``seed`` and ``output``.  Unknown keys anywhere in the document are
errors.  Each run writes ``report.json``, ``curve.csv`` and ``manifest.json``.

Exit status: 0 on success, 1 on a configuration error, 2 when a checked
inequality or statistical assertion fails (the report still records the
witness values).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from ergomix import __version__, bounds, kernel, models, montecarlo, serialize
from ergomix.kernel import ChainError
from ergomix.models import AffineTorusModel, CoverModel, DisplacementLaw, ModelError

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT = 0, 1, 2
CSV_SCHEMA_VERSION = 1
TOP_KEYS = {"kind", "model", "params", "seed", "output"}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# strict parsing helpers


def _strict(d, allowed, required=(), where="config"):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    missing = sorted(set(required) - set(d))
    if missing:
        raise ConfigError(f"missing key(s) in {where}: {', '.join(missing)}")
    return d


def _frac(x, where):
    try:
        return models.as_fraction(x)
    except (ModelError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _int(x, where, lo=None):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(f"{where} must be an integer")
    if lo is not None and x < lo:
        raise ConfigError(f"{where} must be >= {lo}")
    return x


def _num(x, where):
    if isinstance(x, dict):
        return float(_frac(x, where))
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{where} must be a number")
    return float(x)


# ---------------------------------------------------------------------------
# models


def build_model(doc):
    """Model document -> AffineTorusModel, CoverModel or MatrixChain."""
    if not isinstance(doc, dict) or "type" not in doc:
        raise ConfigError("model must be an object with a 'type'")
    t = doc["type"]
    try:
        if t == "affine_torus":
            _strict(doc, {"type", "dimension", "linear_parts", "displacement", "independent", "name"},
                    {"dimension", "linear_parts", "displacement"}, "model")
            parts = []
            for i, p in enumerate(doc["linear_parts"]):
                _strict(p, {"matrix", "weight"}, {"matrix", "weight"}, f"model.linear_parts[{i}]")
                parts.append((p["matrix"], _frac(p["weight"], "weight")))
            disp = _strict(doc["displacement"], {"direction", "atoms", "pieces"}, {"direction"},
                           "model.displacement")
            atoms = []
            for i, a in enumerate(disp.get("atoms", [])):
                _strict(a, {"position", "mass"}, {"position", "mass"}, f"displacement.atoms[{i}]")
                atoms.append((_frac(a["position"], "position"), _frac(a["mass"], "mass")))
            pieces = []
            for i, p in enumerate(disp.get("pieces", [])):
                _strict(p, {"start", "end", "height"}, {"start", "end", "height"}, f"displacement.pieces[{i}]")
                pieces.append(tuple(_frac(p[k], k) for k in ("start", "end", "height")))
            law = DisplacementLaw(tuple(disp["direction"]), tuple(atoms), tuple(pieces))
            return AffineTorusModel(_int(doc["dimension"], "dimension", 1), tuple(parts), law,
                                    bool(doc.get("independent", True)), str(doc.get("name", "")))
        if t == "cover":
            _strict(doc, {"type", "degree", "steps", "name"}, {"degree", "steps"}, "model")
            steps = []
            for i, s in enumerate(doc["steps"]):
                _strict(s, {"point", "mass"}, {"point", "mass"}, f"model.steps[{i}]")
                steps.append((tuple(s["point"]), _frac(s["mass"], "mass")))
            return CoverModel(_int(doc["degree"], "degree", 1), tuple(steps), str(doc.get("name", "")))
        if t == "nearest_neighbor":
            _strict(doc, {"type", "degree", "laziness"}, {"degree"}, "model")
            return CoverModel.nearest_neighbor(_int(doc["degree"], "degree", 1),
                                               _frac(doc.get("laziness", 0), "laziness"))
        if t == "birth_death":
            _strict(doc, {"type", "size", "down", "up"}, {"size", "down", "up"}, "model")
            return kernel.birth_death_chain(_int(doc["size"], "size", 2), _num(doc["down"], "down"),
                                            _num(doc["up"], "up"))
        if t == "matrix":
            _strict(doc, {"type", "P"}, {"P"}, "model")
            return kernel.MatrixChain(np.array(doc["P"], dtype=float))
    except (ModelError, ChainError) as exc:
        raise ConfigError(f"invalid model: {exc}") from exc
    raise ConfigError(f"unknown model type {t!r}")


def _chain_for(model, params):
    if isinstance(model, AffineTorusModel):
        if "m" not in params:
            raise ConfigError("torus models need params.m (resolution)")
        try:
            return kernel.discretize(model, _int(params["m"], "m", 1))
        except ChainError as exc:
            raise ConfigError(str(exc)) from exc
    if isinstance(model, kernel.LatticeChain):
        return model
    raise ConfigError("this experiment needs a torus or finite-chain model")


def _need_cover(model):
    if not isinstance(model, CoverModel):
        raise ConfigError("this experiment needs a cover model")
    return model


def _function(chain, spec, where="f"):
    """Function on chain states from {values} / {indicator} / {box}."""
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(f"{where} must be an object with exactly one of values, indicator, box")
    (kind, val), = spec.items()
    size = chain.space.size
    if kind == "values":
        arr = np.array(val, dtype=float).reshape(-1)
        if arr.size != size:
            raise ConfigError(f"{where}.values has {arr.size} entries, chain has {size} states")
        return arr
    if kind == "indicator":
        arr = np.zeros(size)
        for s in val:
            arr[chain.space.index(s)] = 1.0
        return arr
    if kind == "box":
        if not isinstance(chain.space, kernel.Torus):
            raise ConfigError("box functions need a torus chain")
        _strict(val, {"lower", "upper"}, {"lower", "upper"}, f"{where}.box")
        lo = np.array([float(_frac(x, "lower")) for x in val["lower"]])
        hi = np.array([float(_frac(x, "upper")) for x in val["upper"]])
        pts = chain.space.coords() / chain.space.m
        return np.all((pts >= lo) & (pts < hi), axis=1).astype(float)
    raise ConfigError(f"unknown function kind {kind!r} in {where}")


def _drift_function(chain, params):
    if "V" in params:
        return np.array(params["V"], dtype=float)
    if "V_base" in params:
        base = _num(params["V_base"], "V_base")
        return base ** np.arange(chain.space.size, dtype=float)
    raise ConfigError("drift experiments need params.V or params.V_base")


# ---------------------------------------------------------------------------
# experiment kinds


@dataclass
class Outcome:
    report: dict
    csv: str
    columns: list
    failed: bool = False


def _tv_curve(chain, n_max, starts=None):
    pi = kernel.stationary(chain)
    S = chain.space.size
    idx = np.arange(S) if starts is None else np.array([chain.space.index(s) for s in starts])
    arr = np.zeros((len(idx), S))
    arr[np.arange(len(idx)), idx] = 1.0
    arr = arr.reshape((len(idx),) + chain.space.shape)
    out = []
    for n in range(n_max + 1):
        if n:
            arr = chain.push(arr)
        out.append(float(kernel.tv_rows(arr, pi).max()))
    return out


def _decay_rate(tv):
    """Least-squares slope of log TV over the positive tail (empirical only)."""
    ns = [n for n, v in enumerate(tv) if v > 1e-14]
    ns = ns[len(ns) // 2 :]
    if len(ns) < 2:
        return None
    slope = np.polyfit(ns, np.log([tv[n] for n in ns]), 1)[0]
    return float(math.exp(slope))


def kind_mixing_curve(model, p, seed):
    _strict(p, {"m", "n_max", "starts"}, {"n_max"}, "params")
    chain = _chain_for(model, p)
    tv = _tv_curve(chain, _int(p["n_max"], "n_max", 0), p.get("starts"))
    rep = {"tv": tv, "empirical_rate": _decay_rate(tv), "states": chain.space.size}
    return Outcome(rep, serialize.sequence_csv(tv), ["n", "value"])


def kind_certify_doeblin(model, p, seed):
    _strict(p, {"m", "n0", "max_n0", "n_max", "starts"}, (), "params")
    chain = _chain_for(model, p)
    if "n0" in p:
        cert = kernel.doeblin_coefficient(chain, None, _int(p["n0"], "n0", 1))
    else:
        cert = kernel.find_doeblin(chain, None, _int(p.get("max_n0", 6), "max_n0", 1))
    rep = {"certificate": serialize.certificate_to_dict(cert), "verified": cert.verify(chain)}
    if not cert:
        rep["message"] = f"no minorization found (epsilon = 0 at n0 = {cert.n0})"
        return Outcome(rep, serialize.csv_text(["n", "bound", "empirical_tv"], []),
                       ["n", "bound", "empirical_tv"], failed=True)
    curve = bounds.doeblin_curve(chain, cert, _int(p.get("n_max", 200), "n_max", 0), p.get("starts"))
    bad = curve.violations()
    rep.update(curve=curve.to_dict(), violations=[list(r) for r in bad])
    return Outcome(rep, curve.to_csv(), ["n", "bound", "empirical_tv"], failed=bool(bad) or not rep["verified"])


def kind_lyapunov(model, p, seed):
    _strict(p, {"m", "V", "V_base", "alpha", "center", "n0", "beta"}, {"alpha"}, "params")
    chain = _chain_for(model, p)
    V = _drift_function(chain, p)
    alpha = _num(p["alpha"], "alpha")
    try:
        if "n0" in p:
            n0 = _int(p["n0"], "n0", 1)
            W, beta = bounds.build_lyapunov_from_power(chain, V, n0, alpha, p.get("beta"))
            cert = bounds.verify_lyapunov(chain, W, alpha ** (1.0 / n0))
            rep = {"constructed_from_power": {"n0": n0, "alpha": alpha, "beta": beta},
                   "certificate": cert.to_dict()}
        else:
            cert = bounds.verify_lyapunov(chain, V, alpha, p.get("center"))
            rep = {"certificate": cert.to_dict()}
    except bounds.DriftError as exc:
        rep = {"drift_holds": False, "message": str(exc), "witness": exc.witness, "excess": exc.excess}
        return Outcome(rep, serialize.csv_text(["n", "value"], []), ["n", "value"], failed=True)
    except bounds.BoundError as exc:
        raise ConfigError(str(exc)) from exc
    rep["drift_holds"] = True
    PV = kernel.function_power(chain, np.array(cert.V), 1).reshape(-1)
    ratio = (PV / np.array(cert.V)).tolist()
    return Outcome(rep, serialize.sequence_csv(ratio), ["n", "value"])


def kind_rosenthal(model, p, seed):
    _strict(p, {"m", "V", "V_base", "alpha", "d", "n_max", "max_n0", "center"}, {"alpha", "d", "n_max"}, "params")
    chain = _chain_for(model, p)
    V = _drift_function(chain, p)
    try:
        lyap = bounds.verify_lyapunov(chain, V, _num(p["alpha"], "alpha"), p.get("center"))
        d = _num(p["d"], "d")
        bounds.rosenthal_constants(lyap.alpha, lyap.beta, d)
    except bounds.DriftError as exc:
        rep = {"message": str(exc), "witness": exc.witness}
        return Outcome(rep, serialize.csv_text(["n", "bound", "empirical_tv"], []),
                       ["n", "bound", "empirical_tv"], failed=True)
    except bounds.BoundError as exc:
        raise ConfigError(str(exc)) from exc
    A = bounds.sublevel_set(V, d)
    cert = kernel.find_doeblin(chain, A, _int(p.get("max_n0", 40), "max_n0", 1))
    rep = {"lyapunov": lyap.to_dict(), "sublevel_set": list(A),
           "certificate": serialize.certificate_to_dict(cert)}
    if not cert:
        rep["message"] = "sublevel set is not small within max_n0 steps"
        return Outcome(rep, serialize.csv_text(["n", "bound", "empirical_tv"], []),
                       ["n", "bound", "empirical_tv"], failed=True)
    curve = bounds.rosenthal_curve(chain, cert, lyap, d, _int(p["n_max"], "n_max", 0))
    bad = curve.violations()
    rep.update(curve=curve.to_dict(), violations=[list(r) for r in bad])
    return Outcome(rep, curve.to_csv(), ["n", "bound", "empirical_tv"], failed=bool(bad))


def kind_carne(model, p, seed):
    _strict(p, {"A", "n_max"}, {"n_max"}, "params")
    model = _need_cover(model)
    A = p.get("A", [[0] * model.degree])
    if A == "V":
        A = model.symmetric_neighborhood().tolist()
    try:
        reps = bounds.carne_series(model, A, _int(p["n_max"], "n_max", 1))
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    cols = ["n", "ell", "lhs", "rhs", "ball_next", "ball_ell", "escaped", "holds"]
    rows = [(r.n, r.ell, r.lhs, r.rhs, r.ball_next, r.ball_ell, float(r.escaped), int(r.holds)) for r in reps]
    failed = any(not r.holds or r.escaped > 0 for r in reps)
    return Outcome({"reports": [r.to_dict() for r in reps], "all_hold": not failed},
                   serialize.csv_text(cols, rows), cols, failed)


def kind_escape_tail(model, p, seed):
    _strict(p, {"n_max"}, {"n_max"}, "params")
    n_max = _int(p["n_max"], "n_max", 1)
    rows, failed = [], False
    for n in range(1, n_max + 1):
        for ell in range(1, n + 1):
            tail, maj = bounds.escape_tail(n, ell)
            failed |= tail > maj
            rows.append((n, ell, tail, maj))
    cols = ["n", "ell", "tail", "majorant"]
    return Outcome({"n_max": n_max, "all_hold": not failed}, serialize.csv_text(cols, rows), cols, failed)


def kind_recurrence(model, p, seed):
    _strict(p, {"B", "N", "trials", "mc_horizon", "expect"}, {"N"}, "params")
    model = _need_cover(model)
    try:
        r = montecarlo.classify_recurrence(
            model, p.get("B"), _int(p["N"], "N", 4), _int(p.get("trials", 2000), "trials", 0),
            seed, p.get("mc_horizon"),
        )
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    cols = ["n", "value"]
    csv = serialize.csv_text(cols, list(zip(r.checkpoints, r.green)))
    failed = "expect" in p and p["expect"] != r.classification
    return Outcome(r.to_dict(), csv, cols, failed)


def kind_growth(model, p, seed):
    _strict(p, {"n_max"}, (), "params")
    model = _need_cover(model)
    try:
        g = models.measure_growth(model, _int(p.get("n_max", 50), "n_max", 2))
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    return Outcome(g.to_dict(), serialize.sequence_csv(g.ball_sizes, start=1), ["n", "value"])


def kind_slln(model, p, seed):
    _strict(p, {"m", "f", "n", "start"}, {"f", "n"}, "params")
    chain = _chain_for(model, p)
    f = _function(chain, p["f"])
    r = montecarlo.slln_check(chain, f, _int(p["n"], "n", 1), seed, p.get("start", 0))
    cols = ["n", "value"]
    return Outcome(r.to_dict(), serialize.csv_text(cols, r.trace), cols, r.passed is False)


def kind_clt(model, p, seed):
    _strict(p, {"m", "f", "n", "trials"}, {"f", "n", "trials"}, "params")
    chain = _chain_for(model, p)
    f = _function(chain, p["f"])
    try:
        r = montecarlo.clt_check(chain, f, _int(p["n"], "n", 1), _int(p["trials"], "trials", 1), seed)
    except montecarlo.SimulationError as exc:
        raise ConfigError(str(exc)) from exc
    return Outcome(r.to_dict(), serialize.sequence_csv(r.standardized), ["n", "value"], not r.passed)


def kind_lil(model, p, seed):
    _strict(p, {"m", "f", "n_max", "n_min", "start"}, {"f", "n_max"}, "params")
    chain = _chain_for(model, p)
    f = _function(chain, p["f"])
    try:
        r = montecarlo.lil_smoke(chain, f, _int(p["n_max"], "n_max", 16), seed, p.get("start", 0),
                                 _int(p.get("n_min", 1024), "n_min", 16))
    except montecarlo.SimulationError as exc:
        raise ConfigError(str(exc)) from exc
    cols = ["n", "value"]
    return Outcome(r.to_dict(), serialize.csv_text(cols, list(zip(r.checkpoints, r.running_max))),
                   cols, r.passed is False)


def kind_ratio(model, p, seed):
    _strict(p, {"f1", "f2", "starts", "n", "mode", "tolerance"}, {"f1", "f2", "starts", "n"}, "params")
    model = _need_cover(model)
    starts = p["starts"]
    if not isinstance(starts, list) or len(starts) != 2:
        raise ConfigError("params.starts must be a list of two start specifications")
    try:
        r = montecarlo.ratio_limit_check(model, p["f1"], p["f2"], tuple(starts), _int(p["n"], "n", 0),
                                         p.get("mode", "cesaro"))
    except (montecarlo.SimulationError, ModelError) as exc:
        raise ConfigError(str(exc)) from exc
    failed = "tolerance" in p and not r.deviation <= _num(p["tolerance"], "tolerance")
    return Outcome(r.to_dict(), serialize.sequence_csv(r.ratios.tolist()), ["n", "value"], failed)


def kind_conjecture_probe(model, p, seed):
    _strict(p, {"x", "A", "n_max"}, {"x", "A", "n_max"}, "params")
    model = _need_cover(model)
    try:
        r = montecarlo.conjecture_probe(model, p["x"], p["A"], _int(p["n_max"], "n_max", 1))
    except (montecarlo.SimulationError, ModelError) as exc:
        raise ConfigError(str(exc)) from exc
    return Outcome(r.to_dict(), serialize.sequence_csv(r.ratios.tolist()), ["n", "value"])


def _span_dimensions(model: AffineTorusModel):
    """Dimension of the generated subspace after each enlargement step."""
    gens = [a for a, w in model.linear_parts if w > 0]
    vecs = [model.direction.tolist()]
    dims = [models.exact_rank(vecs)]
    for _ in range(model.dimension - 1):
        vecs = vecs + [(g @ np.array(v)).tolist() for g in gens for v in vecs]
        dims.append(models.exact_rank(vecs))
    return dims


def kind_spread_out_check(model, p, seed):
    _strict(p, {"m", "cutoff"}, (), "params")
    if not isinstance(model, AffineTorusModel):
        raise ConfigError("spread_out_check needs an affine_torus model")
    rep = {"spread_out": model.is_spread_out(),
           "criterion": "krylov" if sum(1 for _, w in model.linear_parts if w > 0) == 1 else "invariant_subspace"}
    if "m" in p:
        try:
            per, why = models.check_aperiodic_torus(model, _int(p["m"], "m", 1), _int(p.get("cutoff", 64), "cutoff", 1))
        except ModelError as exc:
            raise ConfigError(str(exc)) from exc
        rep.update(period=per, aperiodic=per == 1, reason=why)
    dims = _span_dimensions(model)
    return Outcome(rep, serialize.sequence_csv(dims, start=1), ["n", "value"])


KINDS = {
    "mixing_curve": kind_mixing_curve,
    "certify_doeblin": kind_certify_doeblin,
    "rosenthal": kind_rosenthal,
    "lyapunov": kind_lyapunov,
    "carne": kind_carne,
    "escape_tail": kind_escape_tail,
    "recurrence": kind_recurrence,
    "growth": kind_growth,
    "slln": kind_slln,
    "clt": kind_clt,
    "lil": kind_lil,
    "ratio": kind_ratio,
    "conjecture_probe": kind_conjecture_probe,
    "spread_out_check": kind_spread_out_check,
}

# kinds that never read a model
MODEL_FREE = {"escape_tail"}


# ---------------------------------------------------------------------------
# driver


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return check_config(cfg)


def check_config(cfg) -> dict:
    required = {"kind", "params"}
    _strict(cfg, TOP_KEYS, required, "config")
    kind = cfg["kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(sorted(KINDS))}")
    if kind not in MODEL_FREE and "model" not in cfg:
        raise ConfigError(f"kind {kind!r} needs a model")
    if "seed" in cfg:
        seed = _int(cfg["seed"], "seed", 0)
        if seed >= 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
    if "model" in cfg:
        build_model(cfg["model"])
    if not isinstance(cfg["params"], dict):
        raise ConfigError("params must be a JSON object")
    return cfg


def config_hash(cfg) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_outputs(out: Path, cfg, outcome: Outcome, started: str) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    report = {"kind": cfg["kind"], "seed": cfg.get("seed", 0), "status": "fail" if outcome.failed else "ok",
              "result": outcome.report}
    serialize.write_json(report, out / "report.json")
    (out / "curve.csv").write_text(outcome.csv)
    files = []
    for name in ("report.json", "curve.csv"):
        data = (out / name).read_bytes()
        files.append({"name": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
    manifest = {
        "config_hash": config_hash(cfg),
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "files": files,
        "csv_schemas": {"curve.csv": {"version": CSV_SCHEMA_VERSION, "columns": outcome.columns}},
        "exit_status": EXIT_ASSERT if outcome.failed else EXIT_OK,
    }
    serialize.write_json(manifest, out / "manifest.json")
    return manifest


def execute(cfg) -> Outcome:
    model = build_model(cfg["model"]) if "model" in cfg else None
    return KINDS[cfg["kind"]](model, dict(cfg["params"]), int(cfg.get("seed", 0)))


def run(cfg, out=None, seed=None) -> tuple[int, dict]:
    """Execute a checked config; returns (exit status, manifest)."""
    cfg = dict(cfg)
    if seed is not None:
        cfg["seed"] = seed
    out = Path(out or cfg.get("output") or "ergomix_out")
    started = _now()
    outcome = execute(cfg)
    manifest = write_outputs(out, cfg, outcome, started)
    return manifest["exit_status"], manifest


def bundled_example() -> dict:
    text = resources.files("ergomix").joinpath("data/worked_example.json").read_text()
    return json.loads(text)


def reproduce_paper_example(out="paper_example") -> tuple[int, dict]:
    """Worked two-matrix torus example at both density weights.

    Writes one comparison table (delta, n, bound, empirical_tv) plus a summary
    report and manifest.
    """
    out = Path(out)
    started = _now()
    bundle = bundled_example()
    _strict(bundle, {"experiments"}, {"experiments"}, "bundled example")
    rows, summary, failed = [], [], False
    for cfg in bundle["experiments"]:
        cfg = check_config(cfg)
        outcome = execute(cfg)
        w = cfg["model"]["displacement"]["pieces"][0]["height"]
        delta = str(_frac(w, "height"))
        cert = outcome.report["certificate"]
        summary.append({"delta": delta, "epsilon": cert["epsilon"], "n0": cert["n0"],
                        "violations": outcome.report.get("violations", [])})
        for n, b, e in outcome.report["curve"]["rows"]:
            rows.append((delta, n, b, e))
        failed |= outcome.failed
    cols = ["delta", "n", "bound", "empirical_tv"]
    outcome = Outcome({"experiments": summary}, serialize.csv_text(cols, rows), cols, failed)
    manifest = write_outputs(out, {"kind": "reproduce-paper-example", "bundle": bundle}, outcome, started)
    return manifest["exit_status"], manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ergomix", description="Mixing, recurrence and limit-theorem experiments.")
    parser.add_argument("--version", action="version", version=f"ergomix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    p_rep = sub.add_parser("reproduce-paper-example", help="worked torus example at delta = 1 and 1/2")
    p_rep.add_argument("--out", default="paper_example")
    args = parser.parse_args(argv)

    try:
        if args.command == "validate":
            load_config(args.config)
            print("ok")
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
            if args.seed is not None and not 0 <= args.seed < 2**64:
                raise ConfigError("seed must fit in 64 unsigned bits")
            status, manifest = run(cfg, args.out, args.seed)
        else:
            status, manifest = reproduce_paper_example(args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps({"exit_status": status, "files": [f["name"] for f in manifest["files"]]}))
    return status


if __name__ == "__main__":
    sys.exit(main())
