"""
Batch front-end.

    python -m app.cli ih fan.json
    python -m app.cli local-h subdivision.json --format tsv
    python -m app.cli verify rhr inputs.json --output report.json

Exit codes: 0 pass, 1 a verified statement failed, 2 input error,
3 internal consistency failure, 4 hypothesis not certified.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, List, Optional, Tuple, Type, TypeVar

from pydantic import BaseModel, ValidationError

from . import fan_service
from .database import SessionLocal, init_db
from .db_service import create_run, finish_run, update_run
from .exceptions import FanIHError, InputError
from .models import CheckKind, FanSpec, JobSpec, SubdivisionSpec, VerifyInput

logger = logging.getLogger("app.cli")

M = TypeVar("M", bound=BaseModel)


def _ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _strings(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cap", type=int, default=None, help="polynomial degree cap (default n + 1)")
    common.add_argument("--format", choices=("json", "tsv"), default="json")
    common.add_argument("--output", default=None, help="write the report here instead of stdout")
    common.add_argument("--record", action="store_true", help="record the run in the database")
    common.add_argument("--verbose", action="store_true", help="debug logging on stderr")

    parser = argparse.ArgumentParser(prog="fan-ih", description="Intersection cohomology of polyhedral fans")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ih", parents=[common], help="Betti numbers of IH")
    p.add_argument("fan")
    p.add_argument("--refinement", default=None, help="simplicial refinement for the duality pairing")

    p = sub.add_parser("local-h", parents=[common], help="multiplicity spaces of pi_* L")
    p.add_argument("subdivision")

    p = sub.add_parser("decompose", parents=[common], help="stalks and multiplicities of pi_* L^tau")
    p.add_argument("subdivision")
    p.add_argument("--tau", type=_ints, default=None, help="ray ids of a source cone")

    p = sub.add_parser("subdivide", parents=[common], help="star or barycentric subdivision")
    p.add_argument("mode", choices=("star", "barycentric"))
    p.add_argument("fan")
    p.add_argument("--cone", type=_ints, default=None, help="ray ids of the cone to subdivide")
    p.add_argument("--ray", type=_strings, default=None, help="new ray, comma separated rationals")

    p = sub.add_parser("complete-fan", parents=[common], help="complete a convex fan with an opposite ray")
    p.add_argument("fan")
    p.add_argument("--ray", type=_strings, required=True)

    p = sub.add_parser("verify", parents=[common], help="run a verifier")
    p.add_argument("kind", choices=[k.value for k in CheckKind])
    p.add_argument("inputs")
    p.add_argument("--eps", type=_strings, default=None, help="deformation parameters, e.g. 1/4,1/8")
    p.add_argument("--tau", type=_ints, default=None, help="ray ids of the cone tau")
    return parser


def _job(args: argparse.Namespace) -> JobSpec:
    inputs = [getattr(args, name) for name in ("fan", "subdivision", "inputs") if getattr(args, name, None)]
    return JobSpec(
        command=args.command,
        kind=getattr(args, "kind", None) or getattr(args, "mode", None),
        inputs=inputs,
        cap=args.cap,
        eps=getattr(args, "eps", None),
        format=args.format,
        refinement=getattr(args, "refinement", None),
        tau=getattr(args, "tau", None),
        output=args.output,
        record=args.record,
    )


def _load(path: str, model: Type[M]) -> M:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    return model.model_validate_json(text)


def execute(job: JobSpec, args: argparse.Namespace, db=None, run_id: Optional[str] = None) -> Tuple[dict, bool]:
    """Run a job; returns the JSON-ready report and whether it counts as a pass."""
    source = job.inputs[0]
    if job.command == "ih":
        refinement = _load(job.refinement, SubdivisionSpec) if job.refinement else None
        report: BaseModel = fan_service.betti_table(_load(source, FanSpec), job.cap, refinement)
    elif job.command == "local-h":
        report = fan_service.local_h(_load(source, SubdivisionSpec), job.cap)
    elif job.command == "decompose":
        return fan_service.decomposition(_load(source, SubdivisionSpec), job.tau, job.cap), True
    elif job.command == "subdivide":
        spec = _load(source, FanSpec)
        if job.kind == "barycentric":
            report = fan_service.subdivide_barycentric(spec)
        elif args.cone is None or args.ray is None:
            raise InputError("star subdivision needs --cone and --ray")
        else:
            report = fan_service.subdivide_star(spec, args.cone, args.ray)
    elif job.command == "complete-fan":
        report = fan_service.complete_fan(_load(source, FanSpec), args.ray)
    else:
        check = fan_service.verify(
            CheckKind(job.kind), _load(source, VerifyInput), job.cap, job.eps, job.tau, db=db, run_id=run_id
        )
        return check.model_dump(mode="json"), check.passed
    return report.model_dump(mode="json"), True


# rendering
def render_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _check_rows(report: dict, out: List[str]) -> None:
    for row in report.get("table", []):
        cells = [
            report["name"],
            str(row["degree"]),
            str(row["i"]),
            "" if row.get("rank") is None else str(row["rank"]),
            "" if row.get("required") is None else str(row["required"]),
            ",".join(str(x) for x in row.get("inertia") or []),
            ",".join(str(x) for x in row.get("expected") or []),
            "pass" if row["passed"] else "fail",
        ]
        out.append("\t".join(cells))
    for child in report.get("children", []):
        _check_rows(child, out)


def render_tsv(command: str, payload: dict) -> str:
    out: List[str] = []
    if command == "ih":
        out.append("degree\tdim")
        out.extend(f"{d}\t{n}" for d, n in sorted(payload["dims"].items(), key=lambda kv: int(kv[0])))
    elif command in ("local-h", "decompose"):
        w = payload["w"]
        out.append("cone\trays\tdegree\tdim")
        for s in sorted(w["cones"], key=int):
            rays = ",".join(str(i) for i in w["rays"][s])
            for d, n in sorted(w["cones"][s].items(), key=lambda kv: int(kv[0])):
                out.append(f"{s}\t{rays}\t{d}\t{n}")
    elif command == "verify":
        out.append("check\tdegree\ti\trank\trequired\tinertia\texpected\tresult")
        _check_rows(payload, out)
        out.append(f"passed\t{'true' if payload['passed'] else 'false'}")
    else:
        raise InputError(f"tsv output is not available for {command}")
    return "\n".join(out) + "\n"


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        job = _job(args)
    except ValidationError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return 2

    db = run_id = None
    if job.record:
        init_db()
        db = SessionLocal()
        run_id = create_run(db, job.command if not job.kind else f"{job.command}:{job.kind}", job.model_dump()).run_id
        update_run(db, run_id, status="running")

    report: Optional[dict] = None
    try:
        report, passed = execute(job, args, db, run_id)
        text = render_tsv(job.command, report) if job.format == "tsv" else render_json(report)
        _emit(text, job.output)
        code = 0 if passed else 1
    except ValidationError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        code = InputError.exit_code
    except FanIHError as exc:
        logger.debug("run aborted", exc_info=True)
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        code = exc.exit_code

    if db is not None:
        status = "passed" if code == 0 else ("failed" if code == 1 else "error")
        finish_run(db, run_id, status, code, report)
        db.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
