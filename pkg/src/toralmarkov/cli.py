"""Command line: build, verify, code, decode and shadow.

Exit codes: 0 success, 1 malformed input, 2 infeasible request (bad matrix or
beta), 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .local_product import make_budget
from .partition import (
    MarkovPartition,
    build_cover,
    build_partition,
    cover_markov_check,
    cross_validate_cover,
    partition_from_json,
    partition_to_json,
    validate_partition,
    verify_markov,
)
from .shadowing import DefectTooLarge, WindowTooSmall, pseudo_orbit, shadow
from .symbolic import (
    BoundaryHit,
    EmptyCylinder,
    ItineraryWindow,
    TransitionMatrix,
    all_codes,
    encode,
    is_admissible,
    is_irreducible,
    perron_eigenvalue,
    pi_point,
    random_word,
    semiconjugacy_residual,
    transition_matrix,
)
from .torus import NotHyperbolic, NotUnimodular, ToralAutomorphism, TorusPoint, make_automorphism, parse_matrix

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    matrix: tuple[int, int, int, int]
    beta: float = 0.1
    samples: int = 20
    seed: int = 42
    depth: int = 15
    out: str = "."
    svg: bool = False


class InputError(ValueError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _parse_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    try:
        x, y = (float(v) for v in parts)
    except ValueError as exc:
        raise InputError(f"expected x,y got {text!r}") from exc
    return x, y


def _parse_word(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"malformed word {text!r}") from exc


def _load_partition(path: str) -> tuple[ToralAutomorphism, MarkovPartition, dict]:
    try:
        data = json.loads(Path(path).read_text())
        f = make_automorphism(data["matrix"])
        return f, partition_from_json(f, data), data
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise InputError(f"cannot read partition from {path}: {exc}") from exc


# -- SVG ---------------------------------------------------------------------
def render_svg(partition: MarkovPartition, size: int = 800) -> str:
    """Cells as parallelograms in the unit square, wrapped around the torus."""
    polys = []
    for k, R in enumerate(partition.cells):
        c = R.corners()
        shift = np.floor(R.center)
        c = c - shift
        hue = (k * 137) % 360
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                pts = " ".join(f"{(x + dx) * size:.2f},{(1 - (y + dy)) * size:.2f}" for x, y in c)
                polys.append(f'<polygon points="{pts}" fill="hsl({hue},60%,75%)" stroke="black" stroke-width="0.5"/>')
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">\n'
        f'<defs><clipPath id="torus"><rect x="0" y="0" width="{size}" height="{size}"/></clipPath></defs>\n'
        f'<g clip-path="url(#torus)">\n' + "\n".join(polys) + "\n</g>\n</svg>\n"
    )


# -- build ---------------------------------------------------------------------
def cmd_build(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        f = make_automorphism([cfg.matrix[:2], cfg.matrix[2:]])
    except (NotHyperbolic, NotUnimodular) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    # the cover is built for beta/2, so every cell ends up with diameter below beta
    if not 0 < cfg.beta < 0.5:
        print(f"error: beta must lie in (0, 1/2), got {cfg.beta}", file=sys.stderr)
        return EXIT_INFEASIBLE
    budget = make_budget(f, cfg.beta / 2, strict=False)
    rng = np.random.default_rng(cfg.seed)
    cover = build_cover(f, budget)
    cover_rep = cover_markov_check(f, cover, samples=10 * cfg.samples, rng=rng)
    cross_fail = cross_validate_cover(f, cover, budget, samples=cfg.samples, rng=rng)
    part = build_partition(f, cover)
    valid = validate_partition(part)
    A = transition_matrix(f, part)
    markov = verify_markov(f, part, samples=cfg.samples, rng=rng, depth=min(cfg.depth, 10))
    irreducible = is_irreducible(A)
    perron = perron_eigenvalue(A)
    residual = max(semiconjugacy_residual(f, part, random_word(A, cfg.depth, rng)) for _ in range(cfg.samples))

    suites = {
        "partition": valid.ok and part.diameter < cfg.beta,
        "markov": markov.ok,
        "cover_shadow_cross_validation": cross_fail == 0,
        "irreducible": irreducible,
        "perron": abs(perron - abs(f.lambda_u)) <= 1e-3,
        "semiconjugacy": residual <= 1e-6,
    }
    ok = all(suites.values())

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    data = {
        "matrix": [list(r) for r in f.matrix],
        "budget": asdict(budget),
        "budget_violations": budget.violations(),
        **partition_to_json(part),
        "verification": {k: bool(v) for k, v in suites.items()},
    }
    (out / "partition.json").write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    (out / "matrix.csv").write_text(A.to_csv())
    lines = [
        f"matrix: {f.matrix}",
        f"lambda_u: {_fmt(f.lambda_u)}",
        f"lambda_s: {_fmt(f.lambda_s)}",
        f"beta requested: {_fmt(cfg.beta)}",
        f"seed: {cfg.seed}",
        "budget: " + ", ".join(f"{k}={_fmt(v)}" for k, v in asdict(budget).items()),
        f"budget chain violations: {'; '.join(budget.violations()) or 'none'}",
        f"cover rectangles: {len(cover)} (net side {cover.net.side}, diameter {_fmt(cover.max_diameter)})",
        f"cover fiber checks: {cover_rep.checked} sampled, {cover_rep.stable_violations} stable and "
        f"{cover_rep.unstable_violations} unstable violations (informational)",
        f"cover shadow cross-validation failures: {cross_fail}",
        f"cells: {len(part)}",
        f"max diameter: {_fmt(part.diameter)}",
        f"area sum: {_fmt(float(valid.area_sum))}",
        f"interior overlaps: {valid.overlaps}",
        f"improper cells: {valid.improper}",
        f"uncovered probe points: {valid.uncovered}",
        *markov.summary(),
        f"transition matrix ones: {int(A.entries.sum())}",
        f"irreducible: {irreducible}",
        f"perron eigenvalue: {_fmt(perron)}",
        f"max semiconjugacy residual (N={cfg.depth}): {residual:.3e}",
        *(f"suite {k}: {'pass' if v else 'FAIL'}" for k, v in suites.items()),
        f"result: {'pass' if ok else 'FAIL'}",
    ]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    if cfg.svg:
        (out / "partition.svg").write_text(render_svg(part))
    print("\n".join(lines), file=stdout)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_verify(path: str, samples: int, seed: int, stdout=None) -> int:
    stdout = stdout or sys.stdout
    f, part, _ = _load_partition(path)
    rng = np.random.default_rng(seed)
    valid = validate_partition(part)
    rep = verify_markov(f, part, samples=samples, rng=rng)
    lines = [
        f"cells: {len(part)}",
        f"area sum: {_fmt(float(valid.area_sum))}",
        f"interior overlaps: {valid.overlaps}",
        *rep.summary(),
    ]
    ok = valid.ok and rep.ok
    lines.append(f"result: {'pass' if ok else 'FAIL'}")
    print("\n".join(lines), file=stdout)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_code(path: str, point: str, depth: int, show_all: bool, stdout=None) -> int:
    stdout = stdout or sys.stdout
    f, part, _ = _load_partition(path)
    x = TorusPoint(*_parse_pair(point))
    code = encode(f, part, x, depth)
    if isinstance(code, BoundaryHit):
        print(f"boundary hit at j={code.j} (cells {','.join(map(str, code.cells))})", file=stdout)
        if show_all:
            for w in all_codes(f, part, x, depth):
                print(w, file=stdout)
        return EXIT_OK
    print(code, file=stdout)
    return EXIT_OK


def cmd_decode(path: str, word: str, matrix_file: str | None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    f, part, _ = _load_partition(path)
    w = _parse_word(word)
    if len(w) % 2 == 0:
        raise InputError("a word needs an odd number of symbols (a_-N .. a_N)")
    if matrix_file is not None:
        try:
            A = TransitionMatrix.from_csv(Path(matrix_file).read_text())
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read {matrix_file}: {exc}") from exc
        try:
            admissible = is_admissible(A, w)
        except IndexError as exc:
            raise InputError(str(exc)) from exc
        if not admissible:
            raise InputError("word is not admissible for the transition matrix")
    try:
        x, radius = pi_point(f, part, ItineraryWindow.of(w))
    except (EmptyCylinder, IndexError) as exc:
        raise InputError(str(exc)) from exc
    print(f"{_fmt(x.x)},{_fmt(x.y)} +- {radius:.3e}", file=stdout)
    return EXIT_OK


def read_pseudo_orbit_file(path: str) -> list[TorusPoint]:
    pts = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            x, y = line.split()
            pts.append(TorusPoint(float(x), float(y)))
    return pts


def cmd_shadow(path: str, matrix: str, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        m = parse_matrix(matrix)
        pts = read_pseudo_orbit_file(path)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    try:
        f = make_automorphism(m)
    except (NotHyperbolic, NotUnimodular) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    try:
        q = pseudo_orbit(f, pts)
        res = shadow(f, q)
    except (DefectTooLarge, WindowTooSmall) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    print(f"point: {_fmt(res.point.x)},{_fmt(res.point.y)}", file=stdout)
    print(f"delta: {q.delta:.3e}", file=stdout)
    print(f"beta_certified: {res.beta_certified:.3e}", file=stdout)
    print(f"tail_bound: {res.tail_bound:.3e}", file=stdout)
    return EXIT_OK


# -- entry point -------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    """Usage errors are malformed input, so they exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="toralmarkov", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build and verify a Markov partition")
    b.add_argument("--matrix", required=True, help="a,b,c,d (row-major)")
    b.add_argument("--beta", type=float, default=0.1, help="upper bound on cell diameters")
    b.add_argument("--samples", type=int, default=20)
    b.add_argument("--seed", type=int, default=42)
    b.add_argument("--depth", type=int, default=15)
    b.add_argument("--out", default=".")
    b.add_argument("--svg", action="store_true")

    v = sub.add_parser("verify", help="re-verify a partition file")
    v.add_argument("--in", dest="inp", required=True)
    v.add_argument("--samples", type=int, default=20)
    v.add_argument("--seed", type=int, default=42)

    c = sub.add_parser("code", help="itinerary of a point")
    c.add_argument("--in", dest="inp", required=True)
    c.add_argument("--point", required=True, help="x,y")
    c.add_argument("--depth", type=int, default=5)
    c.add_argument("--all-codes", action="store_true")

    d = sub.add_parser("decode", help="point with a given itinerary")
    d.add_argument("--in", dest="inp", required=True)
    d.add_argument("--word", required=True, help="comma-separated symbols a_-N..a_N")
    d.add_argument("--matrix-file")

    s = sub.add_parser("shadow", help="shadow a pseudo-orbit file")
    s.add_argument("--input", required=True)
    s.add_argument("--matrix", required=True)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "build":
            try:
                m = parse_matrix(args.matrix)
            except ValueError as exc:
                raise InputError(str(exc)) from exc
            cfg = RunConfig((*m[0], *m[1]), args.beta, args.samples, args.seed, args.depth, args.out, args.svg)
            return cmd_build(cfg)
        if args.command == "verify":
            return cmd_verify(args.inp, args.samples, args.seed)
        if args.command == "code":
            return cmd_code(args.inp, args.point, args.depth, args.all_codes)
        if args.command == "decode":
            return cmd_decode(args.inp, args.word, args.matrix_file)
        return cmd_shadow(args.input, args.matrix)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
