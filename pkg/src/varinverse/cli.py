"""Command-line front end.

Exit codes: 0 success, 1 condition or certification failure, 2 schema or
parse error, 3 obstruction, 4 integration failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from .ode import IntegrationError
from .reports import VerificationError
from .search import ANSATZE, SearchResult, UnsupportedAnsatzError, search_multiplier
from .symexpr import (
    DomainError, EnvError, ExhaustedSamplesError, ParseError, UnknownSymbolError,
    mul, parse, power, to_string,
)
from .systems import (
    LinearSystem, SchemaError, SecondOrderSystem,
    multiplier_from_json, omega0_from_json, reduce_to_first_order, system_from_json,
)
from .variational1 import (
    canonical_omega0, check_first_order_conditions, first_order_action,
    quadratic_action, validate_omega0,
)
from .variational2 import build_lagrangian, check_multiplier, el_residual
from .verifier import SymbolicLagrangian, certify

log = logging.getLogger("varinverse")

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_OBSTRUCTION, EXIT_INTEGRATION = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str, payload: dict | None = None):
        super().__init__(message)
        self.code = code
        self.payload = payload


# io ---------------------------------------------------------------------

def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as err:
        raise CliError(EXIT_SCHEMA, f"{path}: invalid JSON ({err})") from None
    except OSError as err:
        raise CliError(EXIT_SCHEMA, f"{path}: {err.strerror}") from None


def _dump(doc, out: str | None):
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_system(path: str):
    return system_from_json(_load_json(path))


def _load_omega0(path: str | None, N: int):
    if path is None:
        return canonical_omega0(N)
    return validate_omega0(omega0_from_json(_load_json(path), N), N)


# check ------------------------------------------------------------------

def cmd_check(args) -> int:
    system = _load_system(args.system)
    if isinstance(system, SecondOrderSystem):
        if not args.multiplier:
            raise CliError(EXIT_SCHEMA, "check on a second-order system needs a multiplier file")
        h = multiplier_from_json(_load_json(args.multiplier), system.env)
        report = check_multiplier(system, h, args.samples, args.tol, args.seed)
    else:
        fo = system.as_first_order() if isinstance(system, LinearSystem) else system
        action = first_order_action(fo, _load_omega0(args.omega0, fo.N), args.dt)
        report = check_first_order_conditions(action, seed=args.seed, tol=max(args.tol, args.fo_tol))
    _dump({"conditions": report.to_json()}, args.out)
    if not report.all_passed:
        log.error("conditions failed: %s", ", ".join(report.failed()))
        return EXIT_FAIL
    return EXIT_OK


# build ------------------------------------------------------------------

def _search(system, ansatz: str, args):
    order = ANSATZE if ansatz == "auto" else (ansatz,)
    first_obstruction = None
    for name in order:
        try:
            found = search_multiplier(system, name, args.samples, args.seed, args.tol)
        except UnsupportedAnsatzError as err:
            if ansatz != "auto":
                raise CliError(EXIT_SCHEMA, str(err)) from None
            log.info("skipping %s: %s", name, err)
            continue
        if isinstance(found, SearchResult):
            return found
        first_obstruction = first_obstruction or found
    if first_obstruction is None:
        raise CliError(EXIT_SCHEMA, "no ansatz class applies to this system")
    raise CliError(EXIT_OBSTRUCTION, str(first_obstruction), {"obstruction": first_obstruction.to_json()})


def _exponent_notes(system, found: SearchResult, lagr, args) -> list:
    """For ``h = c(t) h0`` compare ``c`` with ``c^2``, the other exponent in circulation."""
    c = found.multiplier[0][0]
    notes = []
    for k in (1, 2):
        hk = [[mul(power(c, k - 1), e) for e in row] for row in found.multiplier]
        rep = check_multiplier(system, hk, args.samples, args.tol, args.seed)
        el, _ = el_residual(system, mul(power(c, k - 1), lagr.L), hk, args.samples, args.seed)
        notes.append({
            "candidate": to_string(hk[0][0]),
            "sym11_residual": rep["sym11"].max_residual,
            "el_residual": el,
            "satisfies_conditions": rep.all_passed,
        })
    return notes


def cmd_build(args) -> int:
    system = _load_system(args.system)
    if not isinstance(system, SecondOrderSystem):
        raise CliError(EXIT_SCHEMA, "build needs a second-order system; use first-order for the others")
    found = None
    if args.multiplier:
        h = multiplier_from_json(_load_json(args.multiplier), system.env)
    else:
        found = _search(system, args.ansatz, args)
        h = found.multiplier
    report = check_multiplier(system, h, args.samples, args.tol, args.seed)
    if not report.all_passed:
        _dump({"conditions": report.to_json()}, args.out)
        log.error("multiplier fails %s", ", ".join(report.failed()))
        return EXIT_FAIL
    lagr = build_lagrangian(system, h, tol=args.tol, samples=args.samples, seed=args.seed)
    action = SymbolicLagrangian(lagr.L, system.env, system, h)
    cert = certify(action, system, args.trajectories, args.seed, dt=args.dt, tol=args.certify_tol)
    doc = {
        "conditions": report.to_json(),
        "lagrangian": lagr.to_json(),
        "certify": cert.to_json(),
        "system": _load_json(args.system),
    }
    if found is not None:
        doc["ansatz"] = found.ansatz
        if found.ansatz == "scaled_time":
            doc["exponent_check"] = _exponent_notes(system, found, lagr, args)
    if not cert.passed:
        log.error("certification failed: residual %.3g > %.3g", cert.max_residual, cert.tol)
        sys.stdout.write(json.dumps({"certify": cert.to_json()}, sort_keys=True) + "\n")
        return EXIT_FAIL
    _dump(doc, args.out)
    return EXIT_OK


# first-order ------------------------------------------------------------

def _grid(args):
    if args.grid < 1:
        raise CliError(EXIT_SCHEMA, "--grid must be a positive number of intervals")
    if not args.t > 0:
        raise CliError(EXIT_SCHEMA, "--t must be positive")
    return np.linspace(0.0, args.t, args.grid + 1)


def _as_first_order(system):
    if isinstance(system, SecondOrderSystem):
        return reduce_to_first_order(system)
    return system


def cmd_first_order(args) -> int:
    grid = _grid(args)
    system = _as_first_order(_load_system(args.system))
    lin = system if isinstance(system, LinearSystem) else system.linear_parts()
    fo = system.as_first_order() if isinstance(system, LinearSystem) else system
    method = args.method
    if method == "auto":
        method = "linear" if lin is not None else "flow"
    if method == "linear" and lin is None:
        raise CliError(EXIT_SCHEMA, "--method linear needs a system affine in the state")
    omega0 = _load_omega0(args.omega0, fo.N)
    if method == "linear":
        action = quadratic_action(lin, omega0, grid, args.dt)
        doc = {"kind": "quadratic", "table": action.to_json()}
    else:
        action = first_order_action(fo, omega0, args.dt)
        rng = np.random.default_rng(args.seed)
        states = rng.uniform(-1.0, 1.0, size=(3, fo.N))
        table = []
        for t in grid:
            om = action.omega(t, states)
            J, H = action.J_and_H(t, states)
            table.append({"t": float(t), "x": states.tolist(), "Omega": om.tolist(), "J": J.tolist(), "H": H.tolist()})
        doc = {"kind": "flow", "table": table}
    doc["omega0"] = omega0.tolist()
    doc["dt"] = args.dt
    doc["system"] = _load_json(args.system)
    report = check_first_order_conditions(action, seed=args.seed, tol=max(args.tol, args.fo_tol), t_range=(0.0, args.t))
    doc["conditions"] = report.to_json()
    t_range = (0.0, max(args.t, 0.2))
    cert = certify(action, fo, args.trajectories, args.seed, dt=args.dt, tol=args.certify_tol, t_range=t_range)
    doc["certify"] = cert.to_json()
    _dump(doc, args.out)
    if not (report.all_passed and cert.passed):
        log.error("first-order action failed its checks")
        return EXIT_FAIL
    return EXIT_OK


# verify -----------------------------------------------------------------

def cmd_verify(args) -> int:
    system = _load_system(args.system)
    doc = _load_json(args.action)
    if not isinstance(doc, dict):
        raise CliError(EXIT_SCHEMA, "action file must be a JSON object")
    if isinstance(system, SecondOrderSystem):
        lag = doc.get("lagrangian")
        if not isinstance(lag, dict) or "multiplier" not in lag:
            raise CliError(EXIT_SCHEMA, "action file lacks a lagrangian section")
        h = [[parse(e, system.env) for e in row] for row in lag["multiplier"]]
        if lag.get("L"):
            L = parse(lag["L"], system.env)
        else:
            L = build_lagrangian(system, h, tol=args.tol, samples=args.samples, seed=args.seed).L
        action = SymbolicLagrangian(L, system.env, system, h)
        cert = certify(action, system, args.trajectories, args.seed, dt=args.dt, tol=args.certify_tol)
    else:
        fo = _as_first_order(system)
        lin = fo if isinstance(fo, LinearSystem) else fo.linear_parts()
        fo = fo.as_first_order() if isinstance(fo, LinearSystem) else fo
        if "omega0" not in doc:
            raise CliError(EXIT_SCHEMA, "action file lacks omega0")
        omega0 = validate_omega0(omega0_from_json(doc, fo.N), fo.N)
        if doc.get("kind") == "quadratic" and lin is not None:
            action = quadratic_action(lin, omega0, None, float(doc.get("dt", args.dt)))
        else:
            action = first_order_action(fo, omega0, float(doc.get("dt", args.dt)))
        cert = certify(action, fo, args.trajectories, args.seed, dt=args.dt, tol=args.certify_tol)
    _dump({"certify": cert.to_json()}, args.out)
    return EXIT_OK if cert.passed else EXIT_FAIL


# corpus -----------------------------------------------------------------

def corpus_dir() -> Path:
    return Path(str(resources.files("varinverse") / "corpus"))


def cmd_corpus(args) -> int:
    root = corpus_dir()
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    outdir = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="varinverse-corpus-"))
    outdir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for case in manifest["cases"]:
        if args.only and case["name"] not in args.only:
            continue
        argv = [a.format(corpus=root, outdir=outdir) for a in case["argv"]]
        if "--out" not in argv and argv[0] != "corpus":
            argv += ["--out", str(outdir / f"{case['name']}.json")]
        code = run(argv)
        ok = code == case["expect"]
        failures += not ok
        sys.stderr.write(f"{'ok  ' if ok else 'FAIL'} {case['name']}: exit {code} (expected {case['expect']})\n")
    return EXIT_OK if failures == 0 else EXIT_FAIL


# entry ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--samples", type=int, default=64, help="random points per condition check")
    common.add_argument("--tol", type=float, default=1e-8, help="condition tolerance")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--dt", type=float, default=1e-3, help="integrator step")
    common.add_argument("--out", help="output file (directory for corpus)")
    common.add_argument("--certify-tol", type=float, default=1e-4, help="tolerance of the discrete Euler-Lagrange check")
    common.add_argument("--fo-tol", type=float, default=1e-5, help="floor on the tolerance of first-order condition checks")
    common.add_argument("--trajectories", type=int, default=3, help="trajectories used by certify")
    common.add_argument("-v", "--verbose", action="store_true")

    # shared flags live on the subcommands: top-level copies would be reset by subparser defaults
    parser = argparse.ArgumentParser(prog="varinverse", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="evaluate multiplier conditions", allow_abbrev=False)
    p.add_argument("system")
    p.add_argument("multiplier", nargs="?")
    p.add_argument("--omega0", help="seed file for first-order systems")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("build", parents=[common], help="construct a second-order Lagrangian", allow_abbrev=False)
    p.add_argument("system")
    p.add_argument("multiplier", nargs="?")
    p.add_argument("--ansatz", choices=("auto",) + ANSATZE, default="auto")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("first-order", parents=[common], help="construct a first-order action", allow_abbrev=False)
    p.add_argument("system")
    p.add_argument("--omega0")
    p.add_argument("--t", type=float, default=1.0, help="time horizon")
    p.add_argument("--grid", type=int, default=10, help="number of tabulation intervals")
    p.add_argument("--method", choices=("auto", "flow", "linear"), default="auto")
    p.set_defaults(func=cmd_first_order)

    p = sub.add_parser("verify", parents=[common], help="certify an action file against a system", allow_abbrev=False)
    p.add_argument("system")
    p.add_argument("action")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("corpus", parents=[common], help="run the bundled examples", allow_abbrev=False)
    p.add_argument("--only", nargs="*", help="case names to run")
    p.set_defaults(func=cmd_corpus)
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.samples < 1:
            raise CliError(EXIT_SCHEMA, "--samples must be >= 1")
        if not args.dt > 0 or not args.tol > 0:
            raise CliError(EXIT_SCHEMA, "--dt and --tol must be positive")
        return args.func(args)
    except CliError as err:
        if err.payload is not None:
            sys.stdout.write(json.dumps(err.payload, sort_keys=True) + "\n")
        log.error("%s", err)
        return err.code
    except (SchemaError, ParseError, UnknownSymbolError, EnvError, UnsupportedAnsatzError) as err:
        log.error("%s: %s", type(err).__name__, err)
        return EXIT_SCHEMA
    except (IntegrationError, FloatingPointError) as err:
        log.error("integration failed: %s", err)
        return EXIT_INTEGRATION
    except (VerificationError, DomainError, ExhaustedSamplesError) as err:
        log.error("%s: %s", type(err).__name__, err)
        return EXIT_FAIL


def main(argv=None) -> None:
    sys.exit(run(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
