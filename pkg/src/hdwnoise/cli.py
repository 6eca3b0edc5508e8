"""Command-line interface.

Exit codes: 0 when no requested test rejects, 2 when at least one test
rejects the white-noise null, 1 on errors (for ``test``: only when every
requested test failed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classical import PortmanteauInput, hosking, li_mcleod
from .core import SpectralConstants, TEST_NAMES, test_gq1, test_gq1_star, test_gq_known_sigma
from .errors import DomainError, HDWNoiseError
from .io import ORIENTATIONS, ingest, load_sigma
from .moments import InnovationMoments, exact_gq_moments, exact_s1sq_moments, moments_V, prop42_leading
from .nu4 import DEFAULT_TEST_FUNCTIONS, SplitConfig, calibrate_uv, estimate_nu4
from .power import VmaSpec, power_beta, prop24_g11_law
from .simulation import plan_from_dict, run

log = logging.getLogger("hdwnoise")

EXIT_OK, EXIT_ERROR, EXIT_REJECT = 0, 1, 2

_TEST_ALIASES = {name.lower(): name for name in TEST_NAMES}
_TEST_ALIASES.update({"gq1*": "Gq1Star", "gq1_star": "Gq1Star", "li-mcleod": "LiMcLeod"})


def _parse_tests(text: str) -> list[str]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        if tok not in _TEST_ALIASES:
            raise DomainError(f"unknown test {tok!r}; choose from {', '.join(TEST_NAMES)}")
        out.append(_TEST_ALIASES[tok])
    if not out:
        raise DomainError("no tests requested")
    return out


def _parse_nu4(text: str):
    if text in ("estimate", "gaussian"):
        return text
    try:
        v = float(text)
    except ValueError:
        raise DomainError(f"--nu4 must be a number, 'estimate' or 'gaussian', got {text!r}") from None
    if not (v >= 1 and math.isfinite(v)):
        raise DomainError("--nu4 must be >= 1")
    return v


def _write(text: str, output: str | None):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _records_csv(records: list[dict]) -> str:
    fields = list(dict.fromkeys(k for r in records for k in r))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in r.items()})
    return buf.getvalue()


def _emit(payload: dict, records: list[dict], fmt: str, output: str | None):
    if fmt == "json":
        _write(json.dumps(payload, indent=2, default=_json_default), output)
    else:
        head = f"# hdwnoise {__version__} config={json.dumps(payload['config'], default=_json_default)}\n"
        _write(head + _records_csv(records), output)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    cfg["version"] = __version__
    return cfg


# ---- test -------------------------------------------------------------------

def run_test_command(args: argparse.Namespace) -> int:
    tests = _parse_tests(args.tests)
    nu4_opt = _parse_nu4(args.nu4)
    if not 0 < args.alpha < 1:
        raise DomainError("--alpha must lie in (0, 1)")
    x = ingest(args.input, args.orientation)
    if args.demean:
        x = x.demeaned()
    log.info("loaded p=%d T=%d (%s)", x.p, x.T, "complex" if x.is_complex else "real")

    nu4_value = {"gaussian": 3.0}.get(nu4_opt, nu4_opt) if nu4_opt != "estimate" else None
    nu4_note = None
    if nu4_opt == "estimate":
        try:
            nu4_value = estimate_nu4(x, SplitConfig(seed=args.seed)).nu4_hat
        except HDWNoiseError as e:
            nu4_note = str(e)

    results, n_err, any_reject = [], 0, False
    for name in tests:
        try:
            if name == "Gq":
                rep = test_gq_known_sigma(x, args.q, args.alpha, _constants(args, x, nu4_value))
            elif name == "Gq1":
                rep = test_gq1(x, args.q, args.alpha)
            elif name == "Gq1Star":
                if nu4_value is None:
                    raise DomainError(f"nu4 unavailable: {nu4_note}")
                rep = test_gq1_star(x, args.q, args.alpha, nu4_value)
            elif name == "Hosking":
                rep = hosking(PortmanteauInput(x, args.q), args.alpha)
            else:
                rep = li_mcleod(PortmanteauInput(x, args.q), args.alpha)
            d = rep.to_dict()
            d["error"] = None
            any_reject |= rep.reject
        except HDWNoiseError as e:
            n_err += 1
            d = {"test": name, "error": f"{type(e).__name__}: {e}"}
        results.append(d)

    payload = {"version": __version__, "config": _config(args),
               "data": {"p": x.p, "T": x.T, "complex": x.is_complex}, "results": results}
    _emit(payload, results, args.format, args.output)
    if n_err == len(tests):
        return EXIT_ERROR
    return EXIT_REJECT if any_reject else EXIT_OK


def _constants(args, x, nu4_value) -> SpectralConstants:
    nu4 = 3.0 if nu4_value is None else float(nu4_value)
    if x.is_complex and nu4_value is None:
        nu4 = 2.0
    if args.sigma0 == "identity":
        return SpectralConstants.identity(x.p, x.T, nu4)
    if args.sigma0 == "estimate":
        X = x.data
        S = X @ X.conj().T / x.T
    else:
        S = load_sigma(args.sigma0)
        if S.shape[0] != x.p:
            raise DomainError(f"Sigma0 is {S.shape[0]}x{S.shape[0]} but data have p={x.p}")
    return SpectralConstants.from_sigma(S, x.T, nu4)


# ---- simulate ---------------------------------------------------------------

def run_simulate_command(args: argparse.Namespace) -> int:
    cfg = json.loads(Path(args.config).read_text())
    for key in ("seed", "threads", "replicates"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    plan = plan_from_dict(cfg)
    table = run(plan)
    if args.curve:
        _write(table.curve_csv(args.curve), args.output)
        return EXIT_OK
    payload = {"version": __version__, "config": {**_config(args), "plan": table.config}, "rows": table.rows}
    _emit(payload, table.rows, args.format, args.output)
    return EXIT_OK


# ---- power ------------------------------------------------------------------

def run_power_command(args: argparse.Namespace) -> int:
    if args.a0 or args.a1:
        if not (args.a0 and args.a1):
            raise DomainError("--a0 and --a1 must be given together")
        spec = VmaSpec(load_sigma(args.a0), load_sigma(args.a1))
    else:
        if args.p is None or args.a is None:
            raise DomainError("give --p and --a (A0 = I, A1 = aI) or --a0/--a1 files")
        spec = VmaSpec.model_v(args.p, args.a)
    pred = power_beta(spec, args.T, args.nu4, args.alpha)
    mu_full, _ = prop24_g11_law(spec, args.T, args.nu4)
    rec = {"p": spec.p, "T": args.T, "nu4": args.nu4, "alpha": args.alpha, "beta": pred.beta,
           "mu_G11": pred.mu_G11, "mu_G11_finite_T": mu_full, "sigma_G11": pred.sigma_G11, "xi0": pred.xi0}
    payload = {"version": __version__, "config": _config(args), "result": rec}
    _emit(payload, [rec], args.format, args.output)
    return EXIT_OK


# ---- calibrate-nu4 ----------------------------------------------------------

def run_calibrate_command(args: argparse.Namespace) -> int:
    T2 = args.T2 if args.T2 is not None else args.T1
    cal = calibrate_uv(args.p, args.T1, T2, DEFAULT_TEST_FUNCTIONS, args.reps, args.seed,
                       args.weighting, args.threads)
    rows = [{"p": args.p, "T1": args.T1, "T2": T2, **r} for r in cal.rows()]
    payload = {"version": __version__, "config": _config(args), "rows": rows}
    _emit(payload, rows, args.format, args.output)
    return EXIT_OK


# ---- oracle -----------------------------------------------------------------

_LAWS = {"gaussian": InnovationMoments.gaussian, "gamma": InnovationMoments.gamma_ii,
         "rademacher": InnovationMoments.rademacher, "complex-gaussian": InnovationMoments.complex_gaussian}


def run_oracle_command(args: argparse.Namespace) -> int:
    if args.sigma0:
        S = load_sigma(args.sigma0)
    else:
        if args.p is None:
            raise DomainError("give --sigma0 FILE or --p")
        A = np.random.default_rng(args.seed).uniform(-1, 1, (args.p, args.p))
        S = 4.0 / args.p * A @ A.T
    m = _LAWS[args.law]()
    E, V = exact_gq_moments(S, m, args.q, args.T)
    rec = {"p": S.shape[0], "T": args.T, "q": args.q, "law": args.law, "E_Gq": E, "Var_Gq": V}
    if m.is_real:
        s = exact_s1sq_moments(S, m, args.T, args.q)
        rec.update(E_ps1sq=s.E_ps1sq, Var_ps1sq=s.Var_ps1sq, Cov_Gq_ps1sq=s.Cov_Gq_ps1sq)
        rec.update({f"leading_{k}": v for k, v in prop42_leading(S, m, args.q, args.T).items()})
    rec.update({k: v for k, v in moments_V(S, m)._asdict().items() if v is not None})
    payload = {"version": __version__, "config": _config(args), "result": rec}
    _emit(payload, [rec], args.format, args.output)
    return EXIT_OK


# ---- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdwnoise", description="High-dimensional white-noise tests.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output", "-o", default=None, help="write here instead of stdout")

    t = sub.add_parser("test", help="run white-noise tests on a data file")
    t.add_argument("input")
    t.add_argument("--orientation", choices=ORIENTATIONS, default="rows-are-time")
    t.add_argument("--q", type=int, default=1)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--tests", default="Gq1", help="comma list of Gq, Gq1, Gq1Star, Hosking, LiMcLeod")
    t.add_argument("--sigma0", default="identity", help="identity, estimate, or a matrix file (Gq only)")
    t.add_argument("--nu4", default="gaussian", help="a value, 'estimate' or 'gaussian'")
    t.add_argument("--demean", action="store_true", help="center each coordinate first (changes the null law)")
    t.add_argument("--seed", type=int, default=0)
    common(t)
    t.set_defaults(func=run_test_command)

    s = sub.add_parser("simulate", help="Monte Carlo size/power table from a JSON plan")
    s.add_argument("config")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--threads", type=int, default=None, help="default: $HDWNOISE_THREADS or CPU count")
    s.add_argument("--replicates", type=int, default=None)
    s.add_argument("--curve", choices=("a", "r"), default=None, help="emit a power-curve CSV instead")
    common(s)
    s.set_defaults(func=run_simulate_command)

    p = sub.add_parser("power", help="asymptotic power of G_{1,1} under VMA(1)")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--a", type=float, default=None, help="A0 = I, A1 = aI")
    p.add_argument("--a0", default=None, help="matrix file for A0")
    p.add_argument("--a1", default=None, help="matrix file for A1")
    p.add_argument("--nu4", type=float, default=3.0)
    p.add_argument("--alpha", type=float, default=0.05)
    common(p)
    p.set_defaults(func=run_power_command)

    c = sub.add_parser("calibrate-nu4", help="table of calibrated (u', v) for the nu4 estimator")
    c.add_argument("--p", type=int, required=True)
    c.add_argument("--T1", type=int, required=True)
    c.add_argument("--T2", type=int, default=None)
    c.add_argument("--reps", type=int, default=2000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--weighting", choices=("gls", "ols"), default="gls")
    c.add_argument("--threads", type=int, default=1)
    common(c)
    c.set_defaults(func=run_calibrate_command)

    o = sub.add_parser("oracle", help="exact finite-T moments of G_q and p*s1_hat^2")
    o.add_argument("--T", type=int, required=True)
    o.add_argument("--q", type=int, default=1)
    o.add_argument("--sigma0", default=None, help="matrix file; default random (4/p)AA'")
    o.add_argument("--p", type=int, default=None)
    o.add_argument("--law", choices=tuple(_LAWS), default="gaussian")
    o.add_argument("--seed", type=int, default=0)
    common(o)
    o.set_defaults(func=run_oracle_command)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (HDWNoiseError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
