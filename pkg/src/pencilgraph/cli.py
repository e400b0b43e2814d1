"""Command-line entry point: ``pencilgraph <command> --config run.yaml``.

Every run writes into ``<out>/<config hash>/``; artifacts embed the hash and
the package version.  Exit codes: 0 ok, 2 configuration or missing
artifact, 3 assumption violated, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .basis import (build_probe, frame_bound_profile, frame_bounds, gram_equality_gap,
                    sine_type_check)
from .characteristic import (delta_from_sample, dm_jet, edge1_pair_from_sample,
                             loop_pair_from_sample, subsample)
from .errors import (AssumptionViolated, ConditionCViolated, ConfigError, MissingArtifact,
                     NumericalFailure, PencilError)
from .inverse_edge import invert_edge
from .inverse_loop import invert_loop
from .io import (config_hash, jsonable, meta, read_json, write_csv, write_json,
                 write_svg_scatter)
from .model import check_assumption_A, normalize_shift, pencil_from_dict
from .shooting import IntegratorSettings, sample_pencil, wronskian_defect
from .spectral import (SignSequence, Spectrum, Subspectrum, build_subspectrum,
                       check_condition_C, lemma_om_margin, locate_eigenvalues,
                       number_eigenvalues, omega_sequence, remainder_profile, solve_betas,
                       spectrum_window)

log = logging.getLogger("pencilgraph")

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_NUMERICAL = 0, 2, 3, 4

# name: (default, validator description, check)
SOLVER_KEYS = {
    "rtol": (1e-11, "0 < rtol <= 1e-4", lambda v: 0 < v <= 1e-4),
    "atol": (1e-15, "0 < atol <= 1e-6", lambda v: 0 < v <= 1e-6),
    "N": (24, "integer 1..200", lambda v: isinstance(v, int) and 1 <= v <= 200),
    "window": (None, "null or [re0, re1, im0, im1]",
               lambda v: v is None or (isinstance(v, list) and len(v) == 4
                                       and v[0] < v[1] and v[2] < v[3])),
    "height": (2.0, "0 < height <= 10", lambda v: 0 < v <= 10),
    "truncation": (32, "integer 4..200", lambda v: isinstance(v, int) and 4 <= v <= 200),
    "basis": ("legendre", "legendre or exponential", lambda v: v in ("legendre", "exponential")),
    "regularization": (None, "null or >= 0", lambda v: v is None or v >= 0),
    "threshold": (1e-8, "0 < threshold < 1e-2", lambda v: 0 < v < 1e-2),
    "fit": (True, "boolean", lambda v: isinstance(v, bool)),
    "fit_degree": (10, "integer 0..40", lambda v: isinstance(v, int) and 0 <= v <= 40),
    "omega_N": (10, "integer 1..100", lambda v: isinstance(v, int) and 1 <= v <= 100),
    "branches": (None, "null or four branch labels",
                 lambda v: v is None or (isinstance(v, list) and len(v) == 4)),
    "probe_windows": ([6, 12, 18, 24], "list of positive integers",
                      lambda v: isinstance(v, list) and all(isinstance(w, int) and w > 0
                                                            for w in v)),
    "verify_samples": (50, "integer 1..1000", lambda v: isinstance(v, int) and 1 <= v <= 1000),
}
TOP_KEYS = {"pencil", "solver", "seed", "out"}


# configuration ------------------------------------------------------------------------

def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def resolve_config(raw: dict, overrides: dict) -> dict:
    """Validated config with defaults filled in; unknown keys are rejected."""
    extra = set(raw) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown config key(s): {sorted(extra)}")
    if "pencil" not in raw:
        raise ConfigError("config key 'pencil' is required")
    solver_in = raw.get("solver") or {}
    if not isinstance(solver_in, dict):
        raise ConfigError("'solver' must be a mapping")
    extra = set(solver_in) - set(SOLVER_KEYS)
    if extra:
        raise ConfigError(f"unknown solver key(s): {sorted(extra)}")
    solver = {k: copy.deepcopy(v[0]) for k, v in SOLVER_KEYS.items()}
    solver.update(solver_in)
    for k in ("N", "truncation"):
        if overrides.get(k) is not None:
            solver[k] = overrides[k]
    for k, (_, desc, ok) in SOLVER_KEYS.items():
        try:
            good = ok(solver[k])
        except TypeError:
            good = False
        if not good:
            raise ConfigError(f"solver.{k} = {solver[k]!r} out of range ({desc})")
    seed = overrides.get("seed")
    seed = raw.get("seed", 0) if seed is None else seed
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    pencil_from_dict(raw["pencil"])          # validates the pencil block
    return {"pencil": raw["pencil"], "solver": solver, "seed": seed}


class Run:
    """Resolved config, pencil objects and the run directory."""

    def __init__(self, config: dict, out_root, command: str):
        self.config = config
        self.solver = config["solver"]
        self.hash = config_hash(config)
        self.dir = Path(out_root) / self.hash
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.info = meta(self.hash, command)
        self.original = pencil_from_dict(config["pencil"])
        self.pencil, self.shift = normalize_shift(self.original)
        self.settings = IntegratorSettings(rtol=self.solver["rtol"], atol=self.solver["atol"])
        cfg_path = self.dir / "config.json"
        if not cfg_path.exists():
            write_json(cfg_path, config, self.info)

    def path(self, name) -> Path:
        return self.dir / name

    def require(self, name, producer) -> dict:
        p = self.path(name)
        if not p.exists():
            raise MissingArtifact(f"{name} not found in {self.dir}; run '{producer}' first")
        return read_json(p)

    def write(self, name, payload):
        return write_json(self.path(name), payload, self.info)

    def summary(self, payload: dict):
        payload = dict(payload)
        payload["run_dir"] = str(self.dir)
        self.write(f"{self.command.replace('-', '_')}_summary.json", payload)
        return payload


# commands -----------------------------------------------------------------------------

def _window(run: Run):
    w = run.solver["window"]
    return tuple(w) if w is not None else spectrum_window(run.solver["N"], run.solver["height"])


def cmd_forward(run: Run) -> dict:
    spath = run.path("spectrum.json")
    if spath.exists() and read_json(spath)["meta"]["config_hash"] == run.hash:
        log.info("cached spectrum found in %s", run.dir)
        return run.summary({"cached": True, **_spectrum_summary(read_json(spath))})
    report = check_assumption_A(run.pencil)
    spec = locate_eigenvalues(run.pencil, _window(run), run.settings)
    numbered, note = spec, None
    if report.A_holds:
        betas = solve_betas(run.pencil.alphas[:-1])
        numbered = number_eigenvalues(spec, betas)
    else:
        note = "assumption (A) fails; spectrum left unnumbered"
    payload = {"shift": run.shift, "assumption_A": report.to_dict(), "note": note,
               **numbered.to_dict(),
               "original_lambda": [e.lam - run.shift for e in numbered.entries]}
    run.write("spectrum.json", payload)
    rows = [[e.n if e.n is not None else "", e.k if e.k is not None else "",
             float(e.lam.real), float(e.lam.imag), e.multiplicity, float(e.residual)]
            for e in numbered.entries]
    write_csv(run.path("spectrum.csv"), ["n", "k", "re", "im", "multiplicity", "residual"],
              rows, run.info)
    lattice = []
    if numbered.betas is not None:
        lo, hi = int(np.floor(_window(run)[0] / 2)), int(np.ceil(_window(run)[1] / 2))
        lattice = [2 * n + b for n in range(lo, hi + 1) for b in numbered.betas.betas]
        lattice = [z for z in lattice if _window(run)[0] <= z <= _window(run)[1]]
    write_svg_scatter(run.path("spectrum.svg"), numbered.values, lattice, run.info,
                      title="eigenvalues (dots) and lattice 2n + beta_k (circles)")
    if report.A_holds:
        seq = omega_sequence(run.pencil, run.solver["omega_N"], run.settings)
        run.write("omega.json", seq.to_dict())
    return run.summary({"cached": False, **_spectrum_summary(read_json(spath))})


def _spectrum_summary(d) -> dict:
    return {"count": len(d["entries"]), "numbered": d["betas"] is not None,
            "assumption_A": d["assumption_A"], "window": d["window"], "shift": d["shift"]}


def cmd_betas(run: Run) -> dict:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        bs = solve_betas(run.pencil.alphas[:-1])
    payload = {**bs.to_dict(), "residuals": bs.residuals(),
               "warnings": [str(w.message) for w in caught]}
    run.write("betas.json", payload)
    return run.summary({"count": int(bs.betas.size), "betas": bs.betas,
                        "max_residual": float(np.max(bs.residuals()))})


def _spectrum(run: Run) -> Spectrum:
    d = run.require("spectrum.json", "forward")
    spec = Spectrum.from_dict(d)
    if spec.betas is None:
        raise AssumptionViolated("spectrum is unnumbered because assumption (A) fails")
    return spec


def _subspectrum(run: Run, mode: str) -> Subspectrum:
    name = f"subspectrum_{mode}.json"
    p = run.path(name)
    if p.exists():
        return Subspectrum.from_dict(read_json(p))
    spec = _spectrum(run)
    sub = build_subspectrum(spec, run.pencil, run.solver["N"], mode, run.solver["branches"],
                            run.solver["threshold"], run.settings)
    run.write(name, sub.to_dict())
    return sub


def cmd_subspectrum(run: Run) -> dict:
    out = {}
    for mode in ("edge", "loop"):
        sub = _subspectrum(run, mode)
        out[mode] = {"size": len(sub.entries),
                     "second_class": sum(e.cls == 2 for e in sub.entries),
                     "repeated": sum(c > 1 for _, c in sub.groups())}
    return run.summary(out)


def _fit_errors(fit_edge, truth_edge):
    t = np.linspace(0.0, np.pi, 401)
    return {"p_max_error": float(np.max(np.abs(fit_edge.p_at(t) - truth_edge.p_at(t)))),
            "q_max_error": float(np.max(np.abs(fit_edge.q_at(t) - truth_edge.q_at(t))))}


def _sample_grid():
    return np.linspace(-20.0, 20.0, 50) + 0.0123


def cmd_invert_edge(run: Run) -> dict:
    sub = _subspectrum(run, "edge")
    s = run.solver
    res = invert_edge(run.pencil.with_edge(0, run.pencil.edges[0].zero()), sub,
                      s["truncation"], s["basis"], fit_degree=s["fit_degree"], fit=s["fit"],
                      settings=run.settings, regularization=s["regularization"])
    truth = run.pencil.edges[0]
    run.write("edge_kernels.json", res.kernels.to_dict())
    lam = _sample_grid()
    ts = sample_pencil(run.pencil, lam, settings=run.settings, edges=[0])
    Sh, Sph = res.S_hat(lam), res.Sp_hat(lam)
    rows = [[float(l), float(a.real), float(a.imag), float(b.real), float(b.imag),
             float(c.real), float(d.real)] for l, a, b, c, d in zip(lam, Sh, Sph, ts.S[0], ts.Sp[0])]
    write_csv(run.path("edge_functions.csv"),
              ["lambda", "S_hat_re", "S_hat_im", "Sp_hat_re", "Sp_hat_im", "S_true", "Sp_true"],
              rows, run.info)
    diag = {"system": res.system.diagnostics, "alpha1": res.alpha1,
            "alpha1_true": float(np.real(truth.alpha)), "beta_used": res.beta_used,
            "S_gap": float(np.max(np.abs(Sh - ts.S[0]))),
            "Sp_gap": float(np.max(np.abs(Sph - ts.Sp[0]))),
            "moment_residual": abs(res.kernels.first.moment() - np.sin(res.alpha1 * np.pi))}
    if res.fit is not None:
        run.write("edge_fit.json", {"p": res.fit.edge.p, "q": res.fit.edge.q,
                                    "residual": res.fit.residual,
                                    "iterations": res.fit.iterations,
                                    "status": res.fit.status, "shift": run.shift})
        diag.update(_fit_errors(res.fit.edge, truth))
        diag["fit_residual"] = res.fit.residual
    run.write("edge_diagnostics.json", diag)
    return run.summary(diag)


def cmd_invert_loop(run: Run) -> dict:
    sub = _subspectrum(run, "loop")
    seq = SignSequence.from_dict(run.require("omega.json", "forward"))
    rep = check_condition_C(seq)
    if not rep.C_holds:
        raise ConditionCViolated("omega_n = 0 for some n", offending=rep.violations["C"])
    s = run.solver
    known = run.pencil.with_edge(run.pencil.m - 1, run.pencil.loop.zero())
    res = invert_loop(known, sub, seq, s["truncation"], s["basis"], truth=run.pencil,
                      fit=s["fit"], fit_degree=s["fit_degree"], settings=run.settings,
                      regularization=s["regularization"])
    run.write("loop_kernels.json", res.kernels.to_dict())
    lam = _sample_grid()
    ts = sample_pencil(run.pencil, lam, settings=run.settings, edges=[run.pencil.m - 1])
    Sh, dh = res.S_hat(lam), res.d_hat(lam)
    dtrue = ts.Sp[0] + ts.C[0] - 2
    rows = [[float(l), float(a.real), float(a.imag), float(b.real), float(b.imag),
             float(c.real), float(d.real)] for l, a, b, c, d in zip(lam, Sh, dh, ts.S[0], dtrue)]
    write_csv(run.path("loop_functions.csv"),
              ["lambda", "S_hat_re", "S_hat_im", "d_hat_re", "d_hat_im", "S_true", "d_true"],
              rows, run.info)
    ver = res.verification.to_dict()
    ver["lemma_margin_truth"] = lemma_om_margin(run.pencil, seq, run.settings)
    run.write("loop_verification.json", ver)
    out = {"system": res.system.diagnostics, **{k: ver[k] for k in (
        "nu_gap", "omega_truth_agrees", "S_gap", "d_gap", "d_at_nu_min")}}
    if res.fit is not None:
        run.write("loop_fit.json", {"p": res.fit.edge.p, "q": res.fit.edge.q,
                                    "residual": res.fit.residual, "status": res.fit.status})
        out.update(_fit_errors(res.fit.edge, run.pencil.loop))
    return run.summary(out)


def cmd_diagnose_basis(run: Run) -> dict:
    sub = _subspectrum(run, "edge")
    a1 = float(np.real(run.pencil.alphas[0]))
    probe = build_probe(sub, run.pencil, a1, settings=run.settings)
    M1, M2, cond = frame_bounds(probe)
    w = np.linalg.eigvalsh(0.5 * (probe.gram() + probe.gram().conj().T))
    w0 = np.linalg.eigvalsh(probe.gram("V0"))
    write_csv(run.path("basis_gram.csv"), ["i", "eig_V", "eig_V0"],
              [[i, float(a), float(b)] for i, (a, b) in enumerate(zip(w, w0))], run.info)
    c = probe.closeness()
    write_csv(run.path("basis_tails.csv"), ["abs_n", "sq_distance", "tail_sum"],
              [[int(n), float(a), float(b)] for n, a, b in zip(c["n"], c["per_n"], c["tail"])],
              run.info)
    windows = [x for x in run.solver["probe_windows"] if x <= sub.N] or [sub.N]
    profile = frame_bound_profile(sub, run.pencil, a1, windows, settings=run.settings)
    write_csv(run.path("basis_frames.csv"), ["window", "size", "M1", "M2", "condition"],
              [[p["window"], p["size"], p["M1"], p["M2"], p["condition"]] for p in profile],
              run.info)
    sine = sine_type_check(sub.branch_betas)
    run.write("sine_type.json", sine)
    gaps = gram_equality_gap(sorted(sub.index_set()), sub.branch_betas, a1)
    out = {"M1": M1, "M2": M2, "condition": cond, "decay_exponent": c["decay_exponent"],
           "gram_gaps": gaps, "sine_type_passes": sine["passes"],
           "separation": sine["separation"], "profile": profile}
    return run.summary(out)


def cmd_verify(run: Run) -> dict:
    """Forward consistency checks on the configured pencil at random lam."""
    rng = np.random.default_rng(run.config["seed"])
    ns = run.solver["verify_samples"]
    lam = rng.uniform(-10, 10, ns) + 1j * rng.uniform(-2, 2, ns)
    P = run.pencil
    s = sample_pencil(P, lam, settings=run.settings)
    D = delta_from_sample(s)
    A1, B1 = edge1_pair_from_sample(subsample(s, range(1, P.m)))
    Am, Bm = loop_pair_from_sample(subsample(s, range(P.m - 1)))
    dmv = dm_jet(s, P.m - 1).v
    scale = np.maximum(np.abs(D), 1e-300)
    out = {"assumption_A": check_assumption_A(P).to_dict(),
           "wronskian_max": float(np.max(wronskian_defect(s))),
           "identity_edge_rel": float(np.max(np.abs(D - A1 * s.S[0] - B1 * s.Sp[0]) / scale)),
           "identity_loop_rel": float(np.max(np.abs(D - Am * s.S[-1] - Bm * dmv) / scale)),
           "shift": run.shift, "seed": run.config["seed"]}
    if out["assumption_A"]["A_holds"]:
        bs = solve_betas(P.alphas[:-1])
        out["beta_residual_max"] = float(np.max(bs.residuals()))
        seq = omega_sequence(P, run.solver["omega_N"], run.settings)
        out["condition_C"] = check_condition_C(seq).to_dict()
        out["lemma_margin"] = lemma_om_margin(P, seq, run.settings)
    sp = run.path("spectrum.json")
    if sp.exists():
        spec = Spectrum.from_dict(read_json(sp))
        if spec.betas is not None:
            prof = remainder_profile(spec)
            out["remainder_max"] = {str(k): float(max(abs(v) for _, v in vals))
                                    for k, vals in prof.items()}
    run.write("verify.json", out)
    return run.summary(out)


COMMANDS = {"forward": cmd_forward, "betas": cmd_betas, "subspectrum": cmd_subspectrum,
            "invert-edge": cmd_invert_edge, "invert-loop": cmd_invert_loop,
            "diagnose-basis": cmd_diagnose_basis, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pencilgraph",
                                 description="Quadratic pencils on a star graph with a loop.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        p.add_argument("--config", required=True, help="YAML or JSON run config")
        p.add_argument("--out", default=None, help="output root (default: config 'out' or runs)")
        p.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
        p.add_argument("--window", type=int, default=None, dest="N",
                       help="subspectrum window N (|n| <= N)")
        p.add_argument("--truncation", type=int, default=None, help="kernel basis size L")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = load_config(args.config)
        config = resolve_config(raw, {"N": args.N, "truncation": args.truncation,
                                      "seed": args.seed})
        out_root = args.out or raw.get("out") or "runs"
        run = Run(config, out_root, args.command)
        result = COMMANDS[args.command](run)
    except (ConfigError, MissingArtifact) as exc:
        return _fail(EXIT_CONFIG, exc)
    except AssumptionViolated as exc:
        return _fail(EXIT_ASSUMPTION, exc)
    except NumericalFailure as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except PencilError as exc:
        return _fail(EXIT_NUMERICAL, exc)
    print(json.dumps(jsonable(result), indent=1, sort_keys=True))
    return EXIT_OK


def _fail(code, exc) -> int:
    err = {"error": type(exc).__name__, "message": str(exc)}
    off = getattr(exc, "offending", None)
    if off is not None:
        err["offending"] = jsonable(off)
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
