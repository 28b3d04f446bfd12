"""Command-line entry point.

Every command writes one JSON document (``"schema": "v1"``) to stdout, or CSV
where ``--csv`` is offered.  Exit codes: 0 ok, 1 domain error (the error class
name goes to stderr), 2 usage or parse error.

Object arguments (fields, polynomials, lattices, algebras, bimodules, ...)
accept either a path to a JSON file or the JSON text itself.
"""
import argparse
import io
import json
import math
import os
import re
import sys
from contextlib import redirect_stdout
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from . import bimodule as bm
from . import dynamics as dyn
from . import heights as ht
from . import lattice as lat
from . import nctorus as nct
from . import ssalgebra as ssa
from .errors import BudgetExceeded, NcHeightError
from .numfield import NumberField

SCHEMA = "v1"


class UsageError(Exception):
    pass


@dataclass
class CommandResult:
    code: int
    output: str
    diagnostics: str = ""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- input parsing

def _load(text, what="document"):
    """Inline JSON, or a path to a JSON file."""
    s = text.strip()
    if s[:1] in "[{\"" or s[:1].isdigit() or s[:1] == "-":
        try:
            return json.loads(s)
        except json.JSONDecodeError as exc:
            if s[:1] in "[{\"":
                raise UsageError(f"malformed JSON for {what}: {exc}")
    if not os.path.exists(text):
        raise UsageError(f"{what}: no such file and not valid JSON: {text!r}")
    try:
        with open(text) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {text}: {exc}")


def _rational(text):
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational number: {text!r}")


def _int_list(text):
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x != ""]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}")


def _rational_list(text):
    return [_rational(x) for x in text.split(",") if x.strip()]


def _poly(doc):
    """Polynomial document, or a bare coefficient list (constant term first)."""
    if isinstance(doc, list):
        return ht.IntPolynomial.univariate([Fraction(str(c)) for c in doc])
    return ht.IntPolynomial.from_json(doc)


def _entry(v):
    if isinstance(v, list):
        return [Fraction(str(c)) for c in v]
    return Fraction(str(v))


def _alg_element(alg, doc):
    return alg.element([[[_entry(a) for a in row] for row in blk] for blk in doc])


def _algebra(doc):
    return ssa.SemisimpleAlgebra.from_json(doc)


def _bimodule(doc):
    return bm.HermitianBimodule.from_json(doc)


def _observable(doc):
    """{"index": value} with real values or [re, im] pairs."""
    out = {}
    for k, v in dict(doc).items():
        out[int(k)] = complex(float(v[0]), float(v[1])) if isinstance(v, list) else complex(float(Fraction(str(v))))
    return out


# ---------------------------------------------------------------- output helpers

def _q(x):
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _real(x, bits):
    """Decimal string carrying about ``bits`` bits of the value."""
    dps = max(1, int(bits * math.log10(2)))
    with mpmath.workprec(max(bits, 53) + 10):
        return mpmath.nstr(mpmath.mpf(x), dps, strip_zeros=False, min_fixed=-math.inf, max_fixed=math.inf)


def _complex(z, bits):
    return [_real(z.real, bits), _real(z.imag, bits)]


def _obs_json(f, bits):
    return {str(k): _complex(v, bits) for k, v in sorted(f.items())}


def _fmt(doc):
    doc = dict(doc)
    doc["schema"] = SCHEMA
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- commands: heights

def cmd_height(a):
    bits = a.precision
    if a.kind == "number":
        if a.value is not None:
            number = _rational(a.value)
        elif a.min_poly is not None:
            number = _int_list(a.min_poly)
        elif a.field is not None and a.element is not None:
            field = NumberField.from_json(_load(a.field, "field"))
            number = (field, field.coerce(_rational_list(a.element)))
        else:
            raise UsageError("height number needs --value, --min-poly or --field with --element")
        rep = ht.height_algebraic_number(number)
        doc = rep.to_json(bits)
        doc["H"], doc["h"] = _real(rep.H, min(bits, 53)), _real(rep.h, min(bits, 53))
        if isinstance(number, Fraction):
            doc["H_exact"] = _q(ht.height_rational_exact(number))
        return doc
    if a.kind == "poly":
        if a.poly is None:
            raise UsageError("height poly needs --poly")
        rep = ht.polynomial_height(_poly(_load(a.poly, "polynomial")), grid=a.grid)
        return rep.to_json(min(bits, 53))
    if a.map is None:
        raise UsageError("height morphism needs --map")
    ell = [_poly(p) for p in _load(a.map, "map")]
    constraints = None
    if a.constraints is not None:
        c = _load(a.constraints, "constraints")
        constraints = ([_poly(p) for p in c.get("ideal_x", [])], [_poly(p) for p in c.get("ideal_y", [])])
    return ht.morphism_height(ell, constraints, grid=a.grid).to_json(min(bits, 53))


def cmd_mahler(a):
    if a.coeffs is not None:
        f = ht.IntPolynomial.univariate(_int_list(a.coeffs))
    elif a.poly is not None:
        f = _poly(_load(a.poly, "polynomial"))
    else:
        raise UsageError("mahler needs --coeffs or --poly")
    if a.torus or f.nvars > 1:
        est, err, singular = ht.mahler_measure_torus(f, a.grid)
        return {"M": _real(est, 53), "error_estimate": _real(err, 53), "singular_points": singular,
                "method": "torus", "precision_bits": 53}
    lm, exact_one = ht.log_mahler_measure(f)
    bits = min(a.precision, 128)
    with mpmath.workprec(bits + 10):
        m = mpmath.mpf(1) if exact_one else mpmath.exp(lm)
    return {"M": _real(m, bits), "log_M": _real(0 if exact_one else lm, bits), "exact_one": exact_one,
            "method": "roots", "precision_bits": bits}


def cmd_lehmer(a):
    budget = a.budget if a.budget is not None else 5_000_000
    partial = False
    try:
        hits = ht.lehmer_search(a.degree, _int_list(a.coeffs), a.reciprocal, budget)
    except BudgetExceeded as exc:
        hits, partial = exc.partial, True
        if not hits:
            raise
    if hits:
        print(f"search time {hits[0].seconds:.2f}s", file=sys.stderr)
    if a.csv:
        return ht.lehmer_csv(hits, timing=False)
    return {"hits": [{"coeffs": list(h.coeffs), "degree": h.degree, "M": _real(h.M, 53)} for h in hits],
            "M": _real(hits[0].M, 53) if hits else None, "budget_exceeded": partial, "precision_bits": 53}


# ---------------------------------------------------------------- commands: lattices

def cmd_lattice(a):
    L = lat.QuadLattice.from_json(_load(a.lattice, "lattice"))
    k = L.rank
    if a.kind == "reduce":
        red = lat.lll_reduce(L, _rational(a.delta))
        doc = red.to_json()
        doc.update({"transform": red.transform, "defect": _real(lat.orthogonality_defect(red), 53),
                    "defect_bound": _real(2 ** (k * (k - 1) / 4), 53), "precision_bits": 53})
        return doc
    if a.kind == "volume":
        budget = a.budget if a.budget is not None else 200000
        v = lat.k_volume(L, not a.lll_only, budget)
        return {"volume": _real(v.value, 53), "lll_volume": _real(v.lll_value, 53), "method": v.method,
                "transform": v.basis_transform, "flags": v.flags, "precision_bits": 53}
    return {"defect": _real(lat.orthogonality_defect(L), 53), "defect_sq": _q(lat.orthogonality_defect_sq(L)),
            "precision_bits": 53}


# ---------------------------------------------------------------- commands: algebras

def _order(alg, a):
    if a.order is None:
        return ssa.Order(alg, alg.basis())
    doc = _load(a.order, "order")
    basis = doc["basis"] if isinstance(doc, dict) else doc
    return ssa.Order(alg, [_alg_element(alg, x) for x in basis])


def cmd_algebra(a):
    if a.kind == "make":
        if a.blocks is None:
            raise UsageError("algebra make needs --blocks")
        layout = _load(a.blocks, "blocks")
        blocks = layout["blocks"] if isinstance(layout, dict) else layout
        pairs = [(int(b["n"]), b.get("ext_min_poly", [0, 1])) if isinstance(b, dict) else (int(b[0]), b[1])
                 for b in blocks]
        alg, order = ssa.make_algebra(pairs, a.involution)
        doc = alg.to_json()
        doc["dim"] = alg.dim
        doc["order"] = {"basis": [x.to_json() for x in order.basis]}
        return doc
    if a.algebra is None:
        raise UsageError(f"algebra {a.kind} needs --algebra")
    adoc = _load(a.algebra, "algebra")
    alg = _algebra(adoc)
    if a.kind == "validate-order":
        if a.order is None and isinstance(adoc, dict) and "order" in adoc:
            basis = [_alg_element(alg, x) for x in adoc["order"]["basis"]]
        else:
            basis = _order(alg, a).basis
        problems = ssa.validate_order(alg, basis)
        return {"valid": not problems, "violations": problems}
    if a.kind == "norm":
        if a.generators is None:
            raise UsageError("algebra norm needs --generators")
        order = _order(alg, a)
        gens = [_alg_element(alg, x) for x in _load(a.generators, "generators")]
        r_alt = None if a.r_alt is None else _rational(a.r_alt)
        nd = ssa.ideal_norm_degree(order, gens, _rational(a.r), r_alt=r_alt)
        return {"N": _q(nd.N), "deg": _real(nd.deg, 53), "abs_N": _q(nd.abs_N), "flags": nd.flags,
                "precision_bits": 53}
    if a.idempotent is None:
        raise UsageError("algebra rank needs --idempotent")
    e = _load(a.idempotent, "idempotent")
    # a single element is a list of blocks; a matrix over A is a list of rows of elements
    if isinstance(e, dict):
        e = e["matrix"]
        elem = [[_alg_element(alg, x) for x in row] for row in e]
    else:
        elem = _alg_element(alg, e)
    rank = ssa.hattori_stallings_rank(alg, elem)
    emb = ssa.embed_center(alg, a.policy)
    val, flags = emb.real(rank)
    return {"rank": rank.to_json(), "embedded": _real(val, 53), "flags": flags, "embedding": emb.to_json(),
            "precision_bits": 53}


# ---------------------------------------------------------------- commands: bimodules

def _height_doc(E, functional, bits):
    if functional == "canonical":
        return bm.canonical_basis_height(E).to_json()
    if functional == "lattice":
        r = bm.lattice_volume_height(E)
        return {"value": _real(r.normalized, bits), "raw": _real(r.raw, bits), "vol_A": _real(r.vol_left, bits),
                "vol_B": _real(r.vol_right, bits), "flags": r.flags, "precision_bits": bits}
    if functional == "hs":
        return {"value": _q(bm.hs_height(E))}
    return bm.jones_index(E).to_json()


def cmd_bimodule(a):
    bits = min(a.precision, 53)
    if a.kind == "make":
        if a.left is None or a.components is None:
            raise UsageError("bimodule make needs --left and --components")
        A = _algebra(_load(a.left, "algebra"))
        B = A if a.right is None else _algebra(_load(a.right, "algebra"))
        beta_a = None if a.beta_a is None else _load(a.beta_a, "beta")
        beta_b = None if a.beta_b is None else _load(a.beta_b, "beta")
        E = bm.make_hermitian_bimodule(A, B, _load(a.components, "components"), beta_a, beta_b)
        doc = E.to_json()
        doc["dim"] = E.dim()
        return doc
    if a.E is None:
        raise UsageError(f"bimodule {a.kind} needs --E")
    E = _bimodule(_load(a.E, "bimodule"))
    if a.kind == "tensor":
        if a.F is None:
            raise UsageError("bimodule tensor needs --F")
        F = _bimodule(_load(a.F, "bimodule"))
        T = bm.tensor_bimodules(E, F)
        doc = T.to_json()
        doc["dim"] = T.dim()
        if a.oracle:
            budget = a.budget if a.budget is not None else 4096
            orc = bm.concrete_tensor_oracle(E, F, budget=budget, seed=a.seed)
            doc["oracle"] = {"dim": orc.dim, "matches": orc.dim == T.dim()}
        return doc
    if a.kind == "height":
        return _height_doc(E, a.functional, bits)
    if a.kind == "index":
        return bm.jones_index(E).to_json()
    if a.p is None:
        raise UsageError("bimodule nonarch needs --p")
    v = bm.nonarch_height_component(E, a.p, a.nonarch_kind)
    doc = v.to_json()
    doc["value"] = _real(float(v), bits)
    doc["global_product"] = _q(bm.global_height_product(E).as_fraction())
    return doc


# ---------------------------------------------------------------- commands: dynamics

def _universe(a):
    if a.universe is None:
        raise UsageError("needs --universe (a list of bimodules or a universe document)")
    doc = _load(a.universe, "universe")
    members = doc["members"] if isinstance(doc, dict) else doc
    functional = doc.get("functional", a.functional) if isinstance(doc, dict) else a.functional
    return dyn.build_universe([_bimodule(m) for m in members], functional)


def _heights_arg(a):
    vals = _load(a.heights, "heights")
    out = []
    for v in vals:
        q = Fraction(str(v))
        if q <= 0:
            raise UsageError("heights must be positive")
        out.append(q)
    return out


def cmd_dynamics(a):
    bits = min(a.precision, 53)
    if a.kind == "rank-mult":
        if a.blocks is None or a.r is None:
            raise UsageError("rank-mult needs --blocks and --r")
        return {"count": dyn.rank_multiplicity(_int_list(a.blocks), a.r)}
    if a.kind == "universe":
        return _universe(a).to_json()
    if a.kind in ("convolve", "evolve"):
        U = _universe(a)
        f = _observable(_load(a.f, "observable")) if a.f is not None else None
        if f is None:
            raise UsageError(f"{a.kind} needs --f")
        if a.kind == "convolve":
            if a.g is None:
                raise UsageError("convolve needs --g")
            return {"result": _obs_json(dyn.convolve(f, _observable(_load(a.g, "observable")), U), bits),
                    "precision_bits": bits}
        return {"result": _obs_json(dyn.time_evolve(f, a.t, U), bits), "t": _real(a.t, bits),
                "precision_bits": bits}
    if a.kind == "spectrum":
        if a.heights is not None:
            levels = dyn.hamiltonian_spectrum(_heights_arg(a), tol=a.tol)
        else:
            levels = dyn.hamiltonian_spectrum(_universe(a), a.constraint, a.tol)
        return levels.to_json()
    # partition
    if a.blocks is not None:
        if a.R is None:
            raise UsageError("partition with --blocks needs --R")
        pv = dyn.partition_function(beta=a.beta, blocks=_int_list(a.blocks), R=a.R)
        doc = pv.to_json()
        doc.update({"Z": _real(pv.value, bits), "precision_bits": bits})
        return doc
    if a.heights is not None:
        levels = dyn.hamiltonian_spectrum(_heights_arg(a), tol=a.tol)
    elif a.universe is not None:
        levels = dyn.hamiltonian_spectrum(_universe(a), a.constraint, a.tol)
    else:
        raise UsageError("partition needs --heights, --universe or --blocks")
    if a.betas is not None:
        betas = [float(b) for b in a.betas.split(",")]
        if a.csv:
            return dyn.partition_sweep_csv(levels, betas)
        return {"sweep": [{"beta": _real(b, bits), "Z": _real(dyn.partition_function(levels, b).value, bits)}
                          for b in betas], "precision_bits": bits}
    pv = dyn.partition_function(levels, a.beta)
    return {"Z": _real(pv.value, bits), "terms": pv.terms, "precision_bits": bits}


# ---------------------------------------------------------------- commands: noncommutative torus

def cmd_nctorus(a):
    if a.kind == "check":
        if a.theta is None:
            raise UsageError("nctorus check needs --theta")
        alg = nct.NCTorusAlgebra(a.theta, a.mode)
        return nct.verify_arithmetic_axioms(alg, seed=a.seed).to_json()
    if a.a is None:
        raise UsageError(f"nctorus {a.kind} needs --a")
    x = nct.NCTorusElement.from_json(_load(a.a, "element"))
    if a.kind == "trace":
        t = x.trace()
        if x.algebra.mode == "exact":
            return {"trace": [_q(c) for c in t.coeffs], "theta": x.algebra.theta_json()}
        return {"trace": _complex(t, 53), "theta": x.algebra.theta_json(), "precision_bits": 53}
    if a.b is None:
        raise UsageError("nctorus mul needs --b")
    y = nct.NCTorusElement.from_json(_load(a.b, "element"))
    return (x * y).to_json()


# ---------------------------------------------------------------- parser

def build_parser():
    p = _Parser(prog="ncheight", description="Heights, lattices, bimodules and their dynamics.")
    p.add_argument("--precision", type=int, default=53, help="bits carried by decimal output (default 53)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=None, help="enumeration budget for searches")
    # the same flags are accepted after the subcommand; SUPPRESS keeps the top-level defaults
    common = argparse.ArgumentParser(add_help=False)
    for flag, typ in (("--precision", int), ("--seed", int), ("--budget", int)):
        common.add_argument(flag, type=typ, default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    h = sub.add_parser("height", parents=[common], help="Weil heights of numbers, polynomials and maps")
    h.add_argument("kind", choices=["number", "poly", "morphism"])
    h.add_argument("--value", help="rational p/q")
    h.add_argument("--min-poly", help="primitive integer minimal polynomial, constant term first")
    h.add_argument("--field", help="field document")
    h.add_argument("--element", help="comma-separated coordinates in the power basis")
    h.add_argument("--poly", help="polynomial document or coefficient list")
    h.add_argument("--map", help="list of polynomial documents")
    h.add_argument("--constraints", help='{"ideal_x": [...], "ideal_y": [...]}')
    h.add_argument("--grid", type=int, default=256)
    h.set_defaults(func=cmd_height)

    m = sub.add_parser("mahler", parents=[common], help="Mahler measure")
    m.add_argument("--coeffs", help="integer coefficients, constant term first")
    m.add_argument("--poly", help="polynomial document")
    m.add_argument("--torus", action="store_true", help="torus quadrature instead of roots")
    m.add_argument("--grid", type=int, default=256)
    m.set_defaults(func=cmd_mahler)

    le = sub.add_parser("lehmer", parents=[common], help="search for small Mahler measure")
    le.add_argument("--degree", type=int, required=True)
    le.add_argument("--coeffs", required=True, help="allowed coefficients, e.g. -1,0,1")
    le.add_argument("--reciprocal", action="store_true")
    le.add_argument("--csv", action="store_true")
    le.set_defaults(func=cmd_lehmer)

    la = sub.add_parser("lattice", parents=[common], help="LLL reduction, k-volume, orthogonality defect")
    la.add_argument("kind", choices=["reduce", "volume", "defect"])
    la.add_argument("--lattice", required=True, help='{"basis": [...]} or {"gram": [...]}')
    la.add_argument("--delta", default="3/4")
    la.add_argument("--lll-only", action="store_true")
    la.set_defaults(func=cmd_lattice)

    al = sub.add_parser("algebra", parents=[common], help="semisimple algebras and orders")
    al.add_argument("kind", choices=["make", "validate-order", "norm", "rank"])
    al.add_argument("--blocks", help='[{"n": 2, "ext_min_poly": [0, 1]}, ...]')
    al.add_argument("--involution", default="auto", choices=["auto", "galois", "identity"])
    al.add_argument("--algebra")
    al.add_argument("--order", help="order basis (list of elements)")
    al.add_argument("--generators")
    al.add_argument("--r", default="1")
    al.add_argument("--r-alt")
    al.add_argument("--idempotent")
    al.add_argument("--policy", default="largest", choices=["largest", "first"])
    al.set_defaults(func=cmd_algebra)

    b = sub.add_parser("bimodule", parents=[common], help="hermitian bimodules")
    b.add_argument("kind", choices=["make", "tensor", "height", "index", "nonarch"])
    b.add_argument("--left")
    b.add_argument("--right")
    b.add_argument("--components")
    b.add_argument("--beta-a")
    b.add_argument("--beta-b")
    b.add_argument("--E")
    b.add_argument("--F")
    b.add_argument("--oracle", action="store_true")
    b.add_argument("--functional", default="canonical", choices=sorted(bm.HEIGHT_FUNCTIONALS))
    b.add_argument("--p", type=int)
    b.add_argument("--nonarch-kind", default="volume", choices=["volume", "rank"])
    b.set_defaults(func=cmd_bimodule)

    d = sub.add_parser("dynamics", parents=[common], help="convolution algebras, spectra, partition functions")
    d.add_argument("kind", choices=["universe", "convolve", "evolve", "spectrum", "partition", "rank-mult"])
    d.add_argument("--universe", help="list of bimodule documents or a universe document")
    d.add_argument("--functional", default="canonical", choices=sorted(bm.HEIGHT_FUNCTIONALS))
    d.add_argument("--f")
    d.add_argument("--g")
    d.add_argument("--t", type=float, default=1.0)
    d.add_argument("--heights", help="list of positive rationals")
    d.add_argument("--constraint", choices=["left-normalized"])
    d.add_argument("--tol", type=float, default=1e-10)
    d.add_argument("--beta", type=float, default=2.0)
    d.add_argument("--betas", help="comma-separated sweep")
    d.add_argument("--csv", action="store_true")
    d.add_argument("--blocks")
    d.add_argument("--r", type=int)
    d.add_argument("--R", type=int)
    d.set_defaults(func=cmd_dynamics)

    n = sub.add_parser("nctorus", parents=[common], help="noncommutative torus")
    n.add_argument("kind", choices=["mul", "trace", "check"])
    n.add_argument("--a")
    n.add_argument("--b")
    n.add_argument("--theta")
    n.add_argument("--mode", choices=["exact", "numeric"])
    n.set_defaults(func=cmd_nctorus)
    return p


def _glue_negative_values(argv):
    """Let "--coeffs -1,0,1" through: argparse would read "-1,0,1" as an option."""
    out = []
    for tok in argv:
        if out and re.match(r"^-\d", tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def run_command(argv):
    argv = _glue_negative_values(list(argv))
    parser = build_parser()
    out = io.StringIO()
    try:
        with redirect_stdout(out):
            args = parser.parse_args(argv)
    except UsageError as exc:
        return CommandResult(2, "", f"{exc}\n")
    except SystemExit as exc:  # --help
        return CommandResult(int(exc.code or 0), out.getvalue(), "")
    if args.precision < 1:
        return CommandResult(2, "", "--precision must be positive\n")
    err = io.StringIO()
    try:
        saved, sys.stderr = sys.stderr, err
        try:
            doc = args.func(args)
        finally:
            sys.stderr = saved
    except UsageError as exc:
        return CommandResult(2, "", f"{exc}\n")
    except NcHeightError as exc:
        return CommandResult(1, "", f"{type(exc).__name__}: {exc}\n")
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        # shape errors inside a well-formed JSON document
        return CommandResult(2, "", f"malformed input: {type(exc).__name__}: {exc}\n")
    text = doc if isinstance(doc, str) else _fmt(doc)
    return CommandResult(0, text, err.getvalue())


def main(argv=None):
    res = run_command(sys.argv[1:] if argv is None else argv)
    if res.output:
        sys.stdout.write(res.output)
    if res.diagnostics:
        sys.stderr.write(res.diagnostics)
    return res.code


if __name__ == "__main__":
    sys.exit(main())
