"""Command-line entry point.

Subcommands::

    qpreduce generate  --group G --n N --d D --recipe tok,tok --seed S --output DIR
    qpreduce reduce    --input CERT --cocycle COC --output OUT
    qpreduce normalize --input CERT --cocycle COC --group G --output OUT
    qpreduce suspend   --input DISCRETE_COC [--certificate CERT] --output OUT
    qpreduce verify    --input CERT --cocycle COC [--group G] --output OUT

Exit codes: 0 success, 1 usage or input error, 2 classification ambiguity,
3 conjugation failure, 4 constancy failure, 5 group-membership failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .cocycle import Certificate, CocycleEvaluator
from .groups import (EUCLIDEAN, HERMITIAN, SYMPLECTIC, GramForm, GroupMembershipError,
                     NonConstantError, cocycle_group_residual,
                     determinant_map, frame_group_residual, gram_map, reduce_to_group)
from .jordan import ConjugationError, decompose_real
from .planted import GROUPS, RecipeError, generate, planted_discrete
from .resonance import AmbiguityError, SearchBox
from .suspension import (BranchCutError, BumpProfile, DiscreteCocycle, LiftError, lift_reduction,
                         restrict_to_subtorus, suspend, verify_suspension)
from .torus import EvaluationGrid
from .verify import default_times, residual_conjugation

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_AMBIGUITY = 2
EXIT_CONJUGATION = 3
EXIT_CONSTANCY = 4
EXIT_MEMBERSHIP = 5

DEFAULT_TOLERANCES = {
    "residual": 1e-8,   # conjugation residual of emitted certificates
    "box": 1e-9,        # resonance search tolerance
    "constancy": 1e-9,  # largest nonzero Fourier mode of Gram/determinant maps
    "group": 1e-9,      # group defect of the input cocycle and the output frame
    "merge": 1e-8,      # rank tolerance when merging real blocks
}
GROUP_SAMPLES = 100


@dataclass
class JobSpec:
    """Parsed command line for one job."""

    command: str
    input_path: Optional[Path] = None
    output_path: Optional[Path] = None
    cocycle_path: Optional[Path] = None
    group: Optional[str] = None
    seed: int = 0
    grid: Optional[int] = None
    box: SearchBox = field(default_factory=SearchBox)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    extra: dict = field(default_factory=dict)

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])


class JobFailure(Exception):
    """Carries an exit code and a report to be written before exiting."""

    def __init__(self, code: int, message: str, report: Optional[dict] = None):
        super().__init__(message)
        self.code = code
        self.report = report or {}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path: Path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def read_json(path: Path):
    return json.loads(Path(path).read_text())


def load_certificate(path: Path) -> Certificate:
    data = read_json(path)
    if "certificate" in data:
        data = data["certificate"]
    return Certificate.from_dict(data)


def load_cocycle(path: Optional[Path], cert: Optional[Certificate] = None) -> CocycleEvaluator:
    """Cocycle from JSON; without a file the certificate's own conjugated cocycle is used."""
    if path is None:
        if cert is None:
            raise JobFailure(EXIT_INPUT, "a cocycle file is required")
        return CocycleEvaluator.from_certificate(cert)
    data = read_json(path)
    if "cocycle" in data:
        data = data["cocycle"]
    if "kind" not in data:
        return DiscreteCocycle.from_dict(data).evaluator()
    return CocycleEvaluator.from_dict(data)


def load_discrete(path: Path) -> DiscreteCocycle:
    data = read_json(path)
    if "cocycle" in data:
        data = data["cocycle"]
    if data.get("kind") == "discrete":
        return DiscreteCocycle.from_dict({"X1": data["X1"], "omega": data["omega"]})
    if "kind" in data:
        raise JobFailure(EXIT_INPUT, f"suspension needs a discrete cocycle, got {data['kind']!r}")
    return DiscreteCocycle.from_dict(data)


def _grid(spec: JobSpec, modulus: int, d: int) -> EvaluationGrid:
    return EvaluationGrid(spec.grid or 8, modulus, d)


def _sample_points(spec: JobSpec, modulus: int, d: int, count: int = GROUP_SAMPLES) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    return rng.uniform(0, modulus, size=(count, d))


def _conjugation_report(cocycle, cert, spec: JobSpec) -> dict:
    grid = _grid(spec, cert.modulus, cert.d)
    rep = residual_conjugation(cocycle, cert, grid, cert.time_samples or default_times(cert.discrete))
    out = rep.to_dict()
    out["grid"] = grid.to_dict()
    out["times"] = list(cert.time_samples)
    out["tolerance"] = spec.tol("residual")
    out["passed"] = rep.max_residual <= spec.tol("residual")
    return out


def constancy_report(cert: Certificate, group: str) -> dict:
    """Largest nonzero Fourier mode of the map whose constancy the group path relies on."""
    if group == "Sp_R":
        Y = gram_map(cert.frame, GramForm(SYMPLECTIC))
    elif group == "O_n":
        Y = gram_map(cert.frame, GramForm(EUCLIDEAN))
    elif group == "U_n":
        Y = gram_map(cert.frame, GramForm(HERMITIAN))
    elif group == "SL_R":
        Y, _ = determinant_map(cert.frame)
    else:
        return {"map": None, "max_nonzero_mode": 0.0}
    worst = 0.0
    for k, c in Y.items():
        if any(k):
            worst = max(worst, float(np.abs(c).max()))
    kind = "determinant" if group == "SL_R" else "gram"
    return {"map": kind, "max_nonzero_mode": worst}


# ----------------------------------------------------------------- commands

def cmd_generate(spec: JobSpec) -> dict:
    out_dir = spec.output_path
    if out_dir is None:
        raise JobFailure(EXIT_INPUT, "--output directory is required")
    if spec.extra.get("discrete"):
        dc, cert, _ = planted_discrete(spec.seed, n=spec.extra["n"], d=spec.extra["d"])
        cocycle = {"X1": dc.X1.to_dict(), "omega": dc.omega.tolist()}
        meta = {"discrete": True, "seed": spec.seed}
    else:
        if spec.group is None or not spec.extra.get("recipe"):
            raise JobFailure(EXIT_INPUT, "--group and --recipe are required")
        try:
            inst = generate(spec.group, spec.extra["n"], spec.extra["d"], spec.extra["recipe"],
                            seed=spec.seed)
        except RecipeError as exc:
            raise JobFailure(EXIT_INPUT, f"invalid recipe: {exc}")
        cocycle = inst.cocycle.to_dict()
        cert = inst.certificate
        meta = {"group": spec.group, "recipe": list(inst.recipe), "seed": spec.seed,
                "has_half_resonance": inst.has_half}
    out_dir = Path(out_dir)
    write_json(out_dir / "cocycle.json", cocycle)
    write_json(out_dir / "certificate.json", cert.to_dict())
    write_json(out_dir / "meta.json", meta)
    return {"written": [str(out_dir / f) for f in ("cocycle.json", "certificate.json", "meta.json")]}


def cmd_reduce(spec: JobSpec) -> dict:
    cert = load_certificate(spec.input_path)
    if cert.group_tag != "GL_C":
        raise JobFailure(EXIT_INPUT, f"reduce expects a GL_C certificate, got {cert.group_tag}")
    cocycle = load_cocycle(spec.cocycle_path, cert)
    base = {"box": spec.box.to_dict()}
    try:
        dec = decompose_real(cert, cert.omega or cocycle.omega, spec.box,
                             cocycle=cocycle, verify_tol=np.inf, merge_tol=spec.tol("merge"))
    except AmbiguityError as exc:
        raise JobFailure(EXIT_AMBIGUITY, str(exc), base)
    except ConjugationError as exc:
        raise JobFailure(EXIT_CONJUGATION, str(exc), base)
    out = dec.certificate
    report = dict(base, conjugation=_conjugation_report(cocycle, out, spec),
                  classes=[c.to_dict() for c in dec.classes],
                  modulus=out.modulus, half_dimension=dec.s,
                  real_frame=bool(out.frame.real))
    result = {"certificate": out.to_dict(), "report": report}
    if not report["conjugation"]["passed"]:
        raise JobFailure(EXIT_CONJUGATION, "real certificate fails verification", result)
    return result


def cmd_normalize(spec: JobSpec) -> dict:
    if spec.group not in GROUPS:
        raise JobFailure(EXIT_INPUT, f"--group must be one of {GROUPS}")
    cert = load_certificate(spec.input_path)
    cocycle = load_cocycle(spec.cocycle_path, cert)
    base = {"box": spec.box.to_dict(), "group": spec.group}
    pts = _sample_points(spec, 1, cocycle.d)
    member = cocycle_group_residual(cocycle, spec.group, pts, default_times(cocycle.is_discrete))
    base["input_group_residual"] = member
    if member > spec.tol("group"):
        raise JobFailure(EXIT_MEMBERSHIP,
                         f"input cocycle leaves {spec.group} (defect {member:.3e})", base)
    try:
        out = reduce_to_group(cert, spec.group, spec.box, cocycle, tol=spec.tol("constancy"),
                              verify_tol=spec.tol("residual"))
    except AmbiguityError as exc:
        raise JobFailure(EXIT_AMBIGUITY, str(exc), base)
    except NonConstantError as exc:
        base["constancy"] = exc.report.to_dict()
        raise JobFailure(EXIT_CONSTANCY, str(exc), base)
    except GroupMembershipError as exc:
        raise JobFailure(EXIT_MEMBERSHIP, str(exc), base)
    except ConjugationError as exc:
        raise JobFailure(EXIT_CONJUGATION, str(exc), base)
    pts_out = _sample_points(spec, out.modulus, out.d)
    report = dict(base,
                  conjugation=_conjugation_report(cocycle, out, spec),
                  group_residual=frame_group_residual(out.frame, spec.group, pts_out),
                  group_samples=GROUP_SAMPLES,
                  constancy=constancy_report(out, spec.group),
                  modulus=out.modulus)
    if spec.group == "SL_R":
        report["trace_B"] = float(abs(np.trace(out.B)))
    result = {"certificate": out.to_dict(), "report": report}
    if not report["conjugation"]["passed"]:
        raise JobFailure(EXIT_CONJUGATION, "normalized certificate fails verification", result)
    if report["group_residual"] > spec.tol("group"):
        raise JobFailure(EXIT_MEMBERSHIP, "normalized frame leaves the group", result)
    return result


def cmd_suspend(spec: JobSpec) -> dict:
    dc = load_discrete(spec.input_path)
    profile = BumpProfile(spec.extra.get("profile") or "raised_cosine")
    n_max = int(spec.extra.get("n_max") or 5)
    try:
        ev = suspend(dc, profile)
    except BranchCutError as exc:
        raise JobFailure(EXIT_INPUT, str(exc), {"offenders": exc.offenders[:20]})
    tol = spec.tol("residual")
    grid = _grid(spec, 1, dc.d)
    restriction = verify_suspension(ev, grid, n_max)
    report = {"restriction_residual": restriction, "n_max": n_max, "profile": profile.kind,
              "tolerance": tol, "grid": grid.to_dict()}
    result = {"suspension": {"base": dc.to_dict(), "log_field": ev.A_field.to_dict(),
                             "profile": profile.kind},
              "report": report}
    if restriction > tol:
        raise JobFailure(EXIT_CONJUGATION, "suspension does not restrict to the cocycle", result)
    cert_path = spec.extra.get("certificate")
    if cert_path:
        cert = load_certificate(cert_path)
        try:
            lift = lift_reduction(dc, cert, ev, tol=tol)
            restricted = restrict_to_subtorus(lift, tol=tol)
        except LiftError as exc:
            raise JobFailure(EXIT_CONJUGATION, str(exc), result)
        except BranchCutError as exc:
            raise JobFailure(EXIT_INPUT, str(exc), result)
        report.update(lift_periodicity=lift.periodicity_defect,
                      lift_conjugation=lift.conjugation_defect,
                      restricted_residual=restricted.residual)
        result["lift"] = {"B": lift.B, "modulus": lift.modulus}
        result["restricted_certificate"] = restricted.to_dict()
    return result


def cmd_verify(spec: JobSpec) -> dict:
    cert = load_certificate(spec.input_path)
    cocycle = load_cocycle(spec.cocycle_path, cert)
    report = {"conjugation": _conjugation_report(cocycle, cert, spec)}
    code = EXIT_OK if report["conjugation"]["passed"] else EXIT_CONJUGATION
    if spec.group is not None:
        pts = _sample_points(spec, cert.modulus, cert.d)
        g = frame_group_residual(cert.frame, spec.group, pts)
        report["group_residual"] = g
        report["group_passed"] = g <= spec.tol("group")
        if code == EXIT_OK and not report["group_passed"]:
            code = EXIT_MEMBERSHIP
    result = {"report": report}
    if code != EXIT_OK:
        raise JobFailure(code, "verification failed", result)
    return result


COMMANDS = {"generate": cmd_generate, "reduce": cmd_reduce, "normalize": cmd_normalize,
            "suspend": cmd_suspend, "verify": cmd_verify}


# ------------------------------------------------------------------ parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpreduce",
                                     description="Reduction certificates for quasi-periodic cocycles.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", type=Path, required=True, help="input JSON file")
        p.add_argument("--output", type=Path, help="output JSON file (directory for generate)")
        p.add_argument("--seed", type=int, default=0, help="seed for sampling (default 0)")
        p.add_argument("--grid", type=int, default=None,
                       help="points per axis of the verification grid (default 8)")
        p.add_argument("--box-K", dest="box_K", type=int, default=SearchBox().K,
                       help="resonance search bound |k|_inf <= K (default 10)")
        for name, val in DEFAULT_TOLERANCES.items():
            p.add_argument(f"--tol-{name}", dest=f"tol_{name}", type=float, default=val,
                           help=f"{name} tolerance (default {val:g})")

    g = sub.add_parser("generate", help="write a planted cocycle and its certificate")
    common(g, needs_input=False)
    g.add_argument("--group", choices=GROUPS)
    g.add_argument("--n", type=int, default=2, help="matrix size")
    g.add_argument("--d", type=int, default=1, help="torus dimension")
    g.add_argument("--recipe", default="", help="comma separated exponent tokens")
    g.add_argument("--discrete", action="store_true", help="plant a discrete cocycle instead")

    r = sub.add_parser("reduce", help="complex certificate -> real certificate modulo 2")
    common(r)
    r.add_argument("--cocycle", type=Path, help="cocycle JSON (default: from the certificate)")

    nz = sub.add_parser("normalize", help="real or complex certificate -> group certificate")
    common(nz)
    nz.add_argument("--cocycle", type=Path)
    nz.add_argument("--group", choices=GROUPS, required=True)

    s = sub.add_parser("suspend", help="suspend a discrete cocycle and lift a certificate")
    common(s)
    s.add_argument("--certificate", type=Path, help="discrete certificate to lift")
    s.add_argument("--profile", choices=BumpProfile.KINDS, default="raised_cosine")
    s.add_argument("--n-max", dest="n_max", type=int, default=5)

    v = sub.add_parser("verify", help="check a certificate against a cocycle")
    common(v)
    v.add_argument("--cocycle", type=Path)
    v.add_argument("--group", choices=GROUPS)
    return parser


def spec_from_args(args: argparse.Namespace) -> JobSpec:
    tols = {name: getattr(args, f"tol_{name}") for name in DEFAULT_TOLERANCES}
    extra = {}
    for key in ("n", "d", "discrete", "certificate", "profile", "n_max"):
        if hasattr(args, key):
            extra[key] = getattr(args, key)
    if getattr(args, "recipe", None):
        extra["recipe"] = [t.strip() for t in args.recipe.split(",") if t.strip()]
    return JobSpec(command=args.command,
                   input_path=getattr(args, "input", None),
                   output_path=args.output,
                   cocycle_path=getattr(args, "cocycle", None),
                   group=getattr(args, "group", None),
                   seed=args.seed,
                   grid=args.grid,
                   box=SearchBox(args.box_K, tols["box"]),
                   tolerances=tols,
                   extra=extra)


def run(spec: JobSpec) -> int:
    """Execute a job, write its output and return the exit code."""
    try:
        result = COMMANDS[spec.command](spec)
        code, message = EXIT_OK, None
    except JobFailure as exc:
        result, code, message = dict(exc.report), exc.code, str(exc)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        result, code, message = {}, EXIT_INPUT, f"{type(exc).__name__}: {exc}"
    if spec.command != "generate" or code != EXIT_OK:
        result = dict(result, exit_code=code, error=message)
        if spec.output_path is not None and spec.command != "generate":
            write_json(spec.output_path, result)
    if message:
        print(f"qpreduce {spec.command}: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(spec_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
