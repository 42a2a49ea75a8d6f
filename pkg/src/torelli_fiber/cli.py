"""``torelli-fiber`` command line.

Exit codes: 0 on success, 2 on usage or input errors, 3 when a verification
(``expand`` or ``tuples --check``) fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .graph_core import OrientedEdge
from .ideal import components_through_point, is_radical_squarefree, local_ring, minimal_primes
from .intersect import classify, closed_form, codim, enumerate_nonvanishing, part_tuple
from .plumbing_series import PlumbingError, default_positions, verify_refinement
from .serialize import ParseError, dumps, stratum_from_json, stratum_to_json, tree_from_json, tree_to_dot
from .strata import enumerate_strata, strata_poset

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VERIFY = 3

CACHE_ENV = "TORELLI_FIBER_CACHE"


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    params: dict
    version: str
    inputs: dict[str, str]
    output_digest: str = ""
    duration: float = 0.0

    @property
    def digest(self) -> str:
        key = {"command": self.command, "params": self.params, "version": self.version, "inputs": self.inputs}
        return hashlib.sha256(dumps(key).encode()).hexdigest()

    def to_json(self) -> dict:
        out = asdict(self)
        out["digest"] = self.digest
        return out


@dataclass
class Result:
    text: str
    code: int = EXIT_OK


def _parts(text: str) -> tuple[int, ...]:
    try:
        items = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"parts must be comma-separated integers, got {text!r}") from None
    if not items:
        raise argparse.ArgumentTypeError("parts must be nonempty")
    try:
        return part_tuple(items)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _check_g(g: int, parts: tuple[int, ...]) -> None:
    if g < 1:
        raise UsageError("g must be positive")
    if sum(parts) != g:
        raise UsageError(f"parts {list(parts)} do not sum to g={g}")


def _read_json(path: str) -> tuple[object, str]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(raw), hashlib.sha256(raw).hexdigest()
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# commands; each returns a Result given parsed args


def cmd_strata(args: argparse.Namespace) -> Result:
    _check_g(args.g, args.parts)
    strata = enumerate_strata(args.g, args.parts, dedup_unordered=args.dedup_unordered)
    if args.format == "dot":
        docs = [tree_to_dot(s.tree, f"S{i}", s.color) for i, s in enumerate(strata)]
        return Result("".join(docs))
    if args.format == "tsv":
        rows = ["index\tedges\tvertices\tcanonical"]
        for i, s in enumerate(strata):
            desc = " ".join(f"{v}:{g}/{s.color_of(v)}" for v, g in s.tree.vertices)
            rows.append(f"{i}\t{len(s.tree.edges)}\t{desc}\t{s.canonical}")
        return Result("\n".join(rows) + "\n")
    body = {"g": args.g, "parts": list(args.parts), "strata": [stratum_to_json(s) for s in strata]}
    return Result(dumps(body) + "\n")


def cmd_local_ring(args: argparse.Namespace) -> Result:
    data, _ = _read_json(args.stratum)
    stratum = stratum_from_json(data)
    ideal = local_ring(stratum)
    primes = minimal_primes(ideal)
    comps = components_through_point(stratum)
    body = {
        "ideal": ideal.to_json(),
        "primes": [{"cover": p.sorted_cover(), "dimension": p.dimension} for p in primes],
        "components": [stratum_to_json(c) for _, c in comps],
        "reduced": is_radical_squarefree(ideal),
    }
    if args.format == "tsv":
        rows = ["kind\tedges\tdimension"]
        rows += [f"generator\t{','.join(g)}\t" for g in ideal.sorted_generators()]
        rows += [f"prime\t{','.join(p.sorted_cover())}\t{p.dimension}" for p in primes]
        rows.append(f"reduced\t{str(body['reduced']).lower()}\t")
        return Result("\n".join(rows) + "\n")
    return Result(dumps(body) + "\n")


def _positions(text: str | None, tree) -> dict[OrientedEdge, Fraction] | None:
    if text is None:
        return None
    try:
        raw = json.loads(text)
        pos = {OrientedEdge.parse(str(k)): Fraction(str(v)) for k, v in raw.items()}
    except (json.JSONDecodeError, ValueError, ZeroDivisionError, AttributeError) as exc:
        raise UsageError(f"bad --positions: {exc}") from exc
    merged = default_positions(tree)
    merged.update(pos)
    return merged


def cmd_expand(args: argparse.Namespace) -> Result:
    data, _ = _read_json(args.stratum)
    tree = tree_from_json(data)
    if args.source == args.target:
        raise UsageError("source and target must differ")
    if args.order < 1:
        raise UsageError("--order must be at least 1")
    report = verify_refinement(
        tree,
        args.source,
        args.target,
        args.order,
        index=args.index,
        max_degree=args.max_degree,
        total_degree=args.total_degree,
        positions=_positions(args.positions, tree),
    )
    code = EXIT_OK if report.passed else EXIT_VERIFY
    if args.format == "json":
        return Result(dumps(report.to_json()) + "\n", code)
    return Result(report.to_text() + "\n", code)


def cmd_tuples(args: argparse.Namespace) -> Result:
    if args.g_max < 2:
        raise UsageError("--g-max must be at least 2")
    rows = []
    mismatches = []
    for g in range(2, args.g_max + 1):
        found = enumerate_nonvanishing(g)
        if args.check and found != closed_form(g):
            mismatches.append(g)
        for p in found:
            rows.append(
                {
                    "g": g,
                    "tuple": list(p),
                    "d": codim(p),
                    "twoGMinus3": 2 * g - 3,
                    "threeGMinus3": 3 * g - 3,
                    "classification": classify(p).value,
                }
            )
    if args.format == "json":
        body: dict = {"rows": rows}
        if args.check:
            body["check"] = "FAIL" if mismatches else "PASS"
            body["mismatches"] = mismatches
        text = dumps(body) + "\n"
    else:
        lines = ["g\ttuple\td\t2g-3\t3g-3\tclassification"]
        for r in rows:
            tup = ",".join(map(str, r["tuple"]))
            lines.append(f"{r['g']}\t{tup}\t{r['d']}\t{r['twoGMinus3']}\t{r['threeGMinus3']}\t{r['classification']}")
        if args.check:
            lines.append("# check: " + ("FAIL at g=" + ",".join(map(str, mismatches)) if mismatches else "PASS"))
        text = "\n".join(lines) + "\n"
    return Result(text, EXIT_VERIFY if mismatches else EXIT_OK)


def cmd_poset(args: argparse.Namespace) -> Result:
    _check_g(args.g, args.parts)
    poset = strata_poset(args.g, args.parts)
    if args.format == "dot":
        return Result(poset.to_dot())
    return Result(dumps(poset.to_json()) + "\n")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torelli-fiber", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--no-cache", action="store_true", help="bypass the result cache")
    parser.add_argument("--manifest", metavar="FILE", help="write the run manifest as JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("strata", help="enumerate colored strata")
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--parts", type=_parts, required=True, help="comma-separated, e.g. 1,3")
    p.add_argument("--dedup-unordered", action="store_true", help="identify colorings up to equal-part swaps")
    p.add_argument("--format", choices=["json", "dot", "tsv"], default="json")
    p.set_defaults(func=cmd_strata)

    p = sub.add_parser("local-ring", help="monomial local ring of a stratum")
    p.add_argument("stratum", help="stratum JSON file")
    p.add_argument("--format", choices=["json", "tsv"], default="json")
    p.set_defaults(func=cmd_local_ring)

    p = sub.add_parser("expand", help="plumbing expansion and its path-sum check")
    p.add_argument("stratum", help="tree or stratum JSON file")
    p.add_argument("--source", required=True, help="vertex whose correction is expanded")
    p.add_argument("--target", required=True, help="vertex carrying the differential")
    p.add_argument("--order", type=int, required=True, help="highest recursion order")
    p.add_argument("--index", type=int, default=1, help="which basis differential of the target")
    p.add_argument("--max-degree", type=int, default=None, help="per-variable s-degree cap")
    p.add_argument("--total-degree", type=int, default=None, help="total s-degree cap")
    p.add_argument("--positions", default=None, help='JSON map of node positions, e.g. {"-e1": 0}')
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("tuples", help="part tuples with possibly nonzero pullback")
    p.add_argument("--g-max", type=int, required=True)
    p.add_argument("--check", action="store_true", help="compare with the closed form")
    p.add_argument("--format", choices=["tsv", "json"], default="tsv")
    p.set_defaults(func=cmd_tuples)

    p = sub.add_parser("poset", help="specialization poset with components marked")
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--parts", type=_parts, required=True)
    p.add_argument("--format", choices=["json", "dot"], default="json")
    p.set_defaults(func=cmd_poset)
    return parser


def _cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "torelli_fiber")


def _cache_get(digest: str) -> Result | None:
    path = _cache_dir() / f"{digest}.json"
    try:
        data = json.loads(path.read_text())
        return Result(data["output"], int(data["code"]))
    except (OSError, ValueError, KeyError, TypeError):
        return None


def _cache_put(digest: str, result: Result) -> None:
    d = _cache_dir()
    try:
        d.mkdir(parents=True, exist_ok=True)
        tmp = d / f"{digest}.{os.getpid()}.tmp"
        tmp.write_text(dumps({"output": result.text, "code": result.code}))
        tmp.replace(d / f"{digest}.json")
    except OSError:
        pass


def _manifest_for(args: argparse.Namespace) -> RunManifest:
    skip = {"func", "command", "no_cache", "manifest"}
    params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items() if k not in skip}
    inputs = {}
    if getattr(args, "stratum", None):
        _, inputs[args.stratum] = _read_json(args.stratum)
    return RunManifest(args.command, params, __version__, inputs)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func: Callable[[argparse.Namespace], Result] = args.func
    start = time.perf_counter()
    try:
        manifest = _manifest_for(args)
        result = None if args.no_cache else _cache_get(manifest.digest)
        if result is None:
            result = func(args)
            if not args.no_cache:
                _cache_put(manifest.digest, result)
    except (UsageError, ParseError, PlumbingError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"torelli-fiber {args.command}: {msg}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(result.text)
    manifest.output_digest = hashlib.sha256(result.text.encode()).hexdigest()
    manifest.duration = time.perf_counter() - start
    if args.manifest:
        Path(args.manifest).write_text(dumps(manifest.to_json()) + "\n")
    return result.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
