"""Command-line front end: JSON job files in, JSON reports out.

Exit codes: 0 pass, 2 fail, 3 indeterminate, 4 parse or calibration error,
1 for anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from json import decoder as _jdec
from json import scanner as _jscan
from pathlib import Path

import mpmath

from . import __version__
from .arith import AbelianField, characters_of
from .curve import KNOWN_CURVES, ApCache, EllipticCurveData, TorusPoint, elliptic_log, periods
from .dilog import (Divisor, GaloisDivisor, character_sums, elliptic_D, elliptic_J,
                    kronecker_bridge)
from .errors import CalibrationFailed, EllregError, JobError
from .lfun import cut_independence, local_factor_identity, lvalues_all
from .mpnum import Approx, PrecisionContext
from .zagier import (DEFAULT_MAX_HEIGHT, FAIL, INDETERMINATE, PASS, corollary_check,
                     prop13_check, search_divisor, theorem1_check)
from .arith import primes_up_to

log = logging.getLogger("ellreg")

TASKS = ("info", "dilog", "lvalue", "check-prop11", "check-prop13", "check-theorem1",
         "check-corollary", "search")
EXIT = {PASS: 0, FAIL: 2, INDETERMINATE: 3}
EXIT_ERROR = 4

DEFAULTS = {"prec": 384, "digits": 40, "cutoff": 2000, "max_height": DEFAULT_MAX_HEIGHT,
            "coeff_bound": 1000, "p_max": 200, "X0": "1/7"}


# ---------------------------------------------------------------------------
# JSON with source positions


class _PosDict(dict):
    pos = 0


class _PosList(list):
    pos = 0


def _parse_object(s_and_end, *args, **kwargs):
    obj, end = _jdec.JSONObject(s_and_end, *args, **kwargs)
    out = _PosDict(obj)
    out.pos = s_and_end[1] - 1
    return out, end


def _parse_array(s_and_end, *args, **kwargs):
    arr, end = _jdec.JSONArray(s_and_end, *args, **kwargs)
    out = _PosList(arr)
    out.pos = s_and_end[1] - 1
    return out, end


class _PositionDecoder(json.JSONDecoder):
    def __init__(self):
        super().__init__()
        self.parse_object = _parse_object
        self.parse_array = _parse_array
        self.scan_once = _jscan.py_make_scanner(self)


class _Source:
    def __init__(self, text: str):
        self.text = text

    def where(self, node) -> tuple[int | None, int | None]:
        pos = getattr(node, "pos", None)
        if pos is None:
            return None, None
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, node, message: str) -> JobError:
        line, col = self.where(node)
        return JobError(message, line, col)


# ---------------------------------------------------------------------------
# job specification


@dataclass
class JobSpec:
    curve: EllipticCurveData
    field: AbelianField
    divisors: dict = field(default_factory=dict)   # name -> {residue: [(coeff, point spec)]}
    task: str = "info"
    params: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _fraction(src: _Source, node, value, what: str) -> Fraction:
    try:
        if isinstance(value, bool) or not isinstance(value, (str, int)):
            raise ValueError
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise src.error(node, f"{what}: cannot parse {value!r} as an exact rational")


def _integer(src: _Source, node, value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, str) and value.lstrip("-").isdigit():
            return int(value)
        raise src.error(node, f"{what}: expected an integer, got {value!r}")
    return value


def _parse_curve(src: _Source, node) -> EllipticCurveData:
    if not isinstance(node, dict):
        raise src.error(node, "curve must be an object")
    label = node.get("label", "")
    if "ainvs" in node:
        ainvs = node["ainvs"]
        if not isinstance(ainvs, list) or len(ainvs) != 5:
            raise src.error(ainvs if isinstance(ainvs, list) else node,
                            "curve.ainvs must list a1, a2, a3, a4, a6")
        coeffs = [_fraction(src, ainvs, a, "curve.ainvs") for a in ainvs]
        if "conductor" not in node:
            raise src.error(node, "curve.conductor is required with explicit ainvs")
        conductor = _integer(src, node, node["conductor"], "curve.conductor")
    elif label in KNOWN_CURVES:
        coeffs, conductor = KNOWN_CURVES[label]
    else:
        raise src.error(node, f"unknown curve label {label!r} and no ainvs given")
    try:
        return EllipticCurveData(tuple(coeffs), conductor, label)
    except ValueError as exc:
        raise src.error(node, f"curve: {exc}")


def _parse_field(src: _Source, node) -> AbelianField:
    if node is None:
        return AbelianField(1)
    if not isinstance(node, dict):
        raise src.error(node, "field must be an object with keys m and H")
    m = _integer(src, node, node.get("m", 1), "field.m")
    if m < 1:
        raise src.error(node, "field.m must be positive")
    H = node.get("H", [])
    if not isinstance(H, list):
        raise src.error(node, "field.H must be a list of residues")
    gens = tuple(_integer(src, H, h, "field.H") for h in H)
    try:
        return AbelianField(m, gens)
    except ValueError as exc:
        raise src.error(H, f"field.H: {exc}")


def _parse_point(src: _Source, node, where):
    if not isinstance(node, dict) or len(node) != 1:
        raise src.error(node if isinstance(node, (dict, list)) else where,
                        'point must be {"torus": [r, s]} or {"xy": {...}}')
    if "torus" in node:
        rs = node["torus"]
        if not isinstance(rs, list) or len(rs) != 2:
            raise src.error(rs if isinstance(rs, list) else node, "torus point needs two coordinates")
        r, s = (_fraction(src, rs, v, "torus coordinate") for v in rs)
        return TorusPoint.exact(r, s)
    if "xy" in node:
        xy = node["xy"]
        if not isinstance(xy, dict) or set(xy) != {"x", "y"}:
            raise src.error(xy if isinstance(xy, dict) else node, 'xy point needs keys "x" and "y"')
        parts = []
        for key in ("x", "y"):
            pair = xy[key]
            if not isinstance(pair, list) or len(pair) != 2 or not all(isinstance(v, str) for v in pair):
                raise src.error(pair if isinstance(pair, list) else xy,
                                f"xy.{key} must be a pair of decimal strings [re, im]")
            for v in pair:
                try:
                    mpmath.mpf(v)
                except (ValueError, TypeError):
                    raise src.error(pair, f"xy.{key}: cannot parse {v!r} as a decimal")
            parts.append(tuple(pair))
        return ("xy", parts[0], parts[1])
    raise src.error(node, f"unknown point encoding {next(iter(node))!r}")


def _parse_divisors(src: _Source, node, F: AbelianField) -> dict:
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise src.error(node, "divisors must be an object mapping names to divisor data")
    out = {}
    for name, data in node.items():
        if not isinstance(data, dict):
            raise src.error(data if isinstance(data, list) else node,
                            f"divisor {name!r} must map residues to term lists")
        orbit = {}
        for key, terms in data.items():
            try:
                residue = int(key)
                sigma = F.rep(residue)
            except ValueError:
                raise src.error(data, f"divisor {name!r}: {key!r} is not a unit mod {F.modulus}")
            if sigma in orbit:
                raise src.error(data, f"divisor {name!r}: residue {key} repeats an element of G")
            if not isinstance(terms, list):
                raise src.error(data, f"divisor {name!r}[{key}] must be a list of [coeff, point]")
            parsed = []
            for term in terms:
                if not isinstance(term, list) or len(term) != 2:
                    raise src.error(term if isinstance(term, list) else terms,
                                    f"divisor {name!r}[{key}]: each term is [coefficient, point]")
                coeff = _integer(src, term, term[0], f"divisor {name!r} coefficient")
                parsed.append((coeff, _parse_point(src, term[1], term)))
            orbit[sigma] = parsed
        missing = [s for s in F.elements if s not in orbit]
        if missing:
            raise src.error(data, f"divisor {name!r}: no data for G elements {missing}")
        out[name] = orbit
    return out


def parse_job(text: str) -> JobSpec:
    src = _Source(text)
    try:
        raw = json.loads(text, cls=_PositionDecoder)
    except json.JSONDecodeError as exc:
        raise JobError(exc.msg, exc.lineno, exc.colno)
    if not isinstance(raw, dict):
        raise src.error(raw, "job must be a JSON object")
    task = raw.get("task", "info")
    if task not in TASKS:
        raise src.error(raw, f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
    if "curve" not in raw:
        raise src.error(raw, "job needs a curve")
    curve = _parse_curve(src, raw["curve"])
    F = _parse_field(src, raw.get("field"))
    divisors = _parse_divisors(src, raw.get("divisors"), F)
    params = dict(raw.get("parameters") or {})
    for key in ("divisor", "pool"):
        if key in raw:
            params[key] = raw[key]
    names = params.get("pool", []) if task == "search" else [params.get("divisor")]
    if task in ("dilog", "check-theorem1", "check-corollary", "search"):
        if not names or any(n is None for n in names):
            raise src.error(raw, f"task {task} needs a {'pool' if task == 'search' else 'divisor'} entry")
        for n in names:
            if n not in divisors:
                raise src.error(raw, f"divisor {n!r} is not defined")
    return JobSpec(curve, F, divisors, task, params, raw)


# ---------------------------------------------------------------------------
# report encoding


def encode(value, digits: int, bits: int | None = None):
    """JSON-safe rendering; Approx values carry their error and precision."""
    if isinstance(value, Approx):
        v = mpmath.mpmathify(value.value)
        out = {"re": mpmath.nstr(mpmath.re(v), digits)}
        if isinstance(v, mpmath.mpc):
            out["im"] = mpmath.nstr(mpmath.im(v), digits)
        out["err"] = mpmath.nstr(value.err, 3)
        if bits is not None:
            out["bits"] = bits
        return out
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, mpmath.mpc):
        return {"re": mpmath.nstr(value.real, digits), "im": mpmath.nstr(value.imag, digits)}
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, digits)
    if isinstance(value, dict):
        return {str(k): encode(v, digits, bits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v, digits, bits) for v in value]
    return value


def write_atomic(path: Path, data: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=False)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# task runners


class _Runner:
    def __init__(self, job: JobSpec, ctx: PrecisionContext, digits: int, cache: ApCache | None):
        self.job = job
        self.ctx = ctx
        self.digits = digits
        self.cache = cache
        self._lattice = None
        self._lvalues = None

    def enc(self, v):
        return encode(v, self.digits, self.ctx.bits)

    @property
    def lattice(self):
        if self._lattice is None:
            self._lattice = periods(self.job.curve, self.ctx)
        return self._lattice

    @property
    def lvalues(self):
        if self._lvalues is None:
            self._lvalues = lvalues_all(self.job.curve, self.job.field, self.ctx, self.cache)
        return self._lvalues

    def galois_divisor(self, name: str) -> GaloisDivisor:
        data = self.job.divisors[name]
        orbit = {}
        for sigma, terms in data.items():
            items = []
            for coeff, spec in terms:
                if isinstance(spec, TorusPoint):
                    items.append((coeff, spec))
                else:
                    with self.ctx.workprec():
                        x = mpmath.mpc(*spec[1])
                        y = mpmath.mpc(*spec[2])
                    items.append((coeff, elliptic_log(self.job.curve, self.lattice, (x, y), self.ctx)))
            orbit[sigma] = Divisor.of(items)
        return GaloisDivisor.from_mapping(self.job.field, orbit)

    # individual tasks return (status, payload)

    def info(self):
        E, F, L = self.job.curve, self.job.field, self.lattice
        chars = [{"label": c.label, "order": c.order, "parity": c.parity, "conductor": c.conductor}
                 for c in characters_of(F)]
        return PASS, {
            "curve": {"label": E.label, "ainvs": [str(a) for a in E.ainvs], "conductor": E.conductor,
                      "discriminant": str(E.discriminant), "c4": str(E.c4), "c6": str(E.c6),
                      "j": str(E.j_invariant)},
            "lattice": {"omega1": self.enc(Approx(L.omega1, L.err)),
                        "omega2": self.enc(Approx(L.omega2, L.err)),
                        "tau": self.enc(Approx(L.tau, L.err)),
                        "q": self.enc(Approx(L.q, L.err)), "rhombic": L.rhombic},
            "field": {"m": F.modulus, "H": list(F.subgroup_gens), "degree": F.degree,
                      "real": F.is_real, "elements": list(F.elements), "characters": chars},
        }

    def dilog(self):
        name = self.job.params["divisor"]
        ell = self.galois_divisor(name)
        L = self.lattice
        sums = character_sums(self.job.field, L, ell, self.ctx)
        per_sigma = []
        for (s, D), (_, J) in zip(sums.D_values, sums.J_values):
            per_sigma.append({"sigma": s, "divisor": str(ell.at(s)), "D": self.enc(D), "J": self.enc(J)})
        payload = {"divisor": name, "values": per_sigma, "characters": self._sum_rows(sums)}
        if self.job.params.get("kronecker"):
            R = int(self.job.params.get("cutoff", DEFAULTS["cutoff"]))
            bridge = []
            for s, div in ell.orbit:
                for _, P in div.terms:
                    if P.is_origin():
                        continue
                    lhs, rhs = kronecker_bridge(L, P, R, self.ctx)
                    bridge.append({"point": str(P), "kronecker": self.enc(lhs), "dilog": self.enc(rhs),
                                   "defect": mpmath.nstr(abs(lhs.value - rhs.value), 3)})
            payload["kronecker"] = {"cutoff": R, "points": bridge}
        ok = all(e.cancels() for e in sums.entries)
        return PASS if ok else FAIL, payload

    def _sum_rows(self, sums):
        return [{"chi": e.chi.label, "parity": e.parity, "S_D": self.enc(e.S_D), "S_J": self.enc(e.S_J),
                 "mu": self.enc(e.mu), "cancels": e.cancels()} for e in sums.entries]

    def _lvalue_rows(self):
        rows = []
        for r in self.lvalues.rows:
            rows.append({"chi": r.chi.label, "parity": r.chi.parity, "level": r.level,
                         "w": self.enc(Approx(r.w, r.data.residual)),
                         "residual": mpmath.nstr(r.data.residual, 3),
                         "Lprime0": self.enc(r.Lprime0), "L2": self.enc(r.L2)})
        return rows

    def lvalue(self):
        T = self.lvalues
        return PASS, {"characters": self._lvalue_rows(),
                      "aggregates": {"leading_coefficient": self.enc(T.leading_coefficient),
                                     "derivative_at_zero": self.enc(T.derivative_at_zero),
                                     "L_EF_2": self.enc(T.L_at_two),
                                     "level_product": T.level_product,
                                     "w_product": self.enc(Approx(T.w_product, 0))}}

    def prop11(self):
        E, F = self.job.curve, self.job.field
        X0 = Fraction(str(self.job.params.get("X0", DEFAULTS["X0"])))
        p_max = int(self.job.params.get("p_max", DEFAULTS["p_max"]))
        threshold = mpmath.mpf(10) ** (-0.6 * self.ctx.digits)
        rows, worst = [], mpmath.mpf(0)
        for p in primes_up_to(p_max):
            if (E.conductor * F.modulus) % p == 0:
                continue
            lhs, rhs, defect = local_factor_identity(E, F, p, X0, self.ctx)
            worst = max(worst, defect)
            rows.append({"p": p, "lhs": self.enc(lhs), "rhs": str(rhs), "defect": mpmath.nstr(defect, 3)})
        status = PASS if worst < threshold else FAIL
        return status, {"X0": str(X0), "p_max": p_max, "threshold": mpmath.nstr(threshold, 3),
                        "max_defect": mpmath.nstr(worst, 3), "primes": rows}

    def prop13(self):
        res = prop13_check(self.job.curve, self.job.field, self.max_height, self.ctx,
                           self.lvalues, cache=self.cache)
        return res.verdict, {"characters": self._lvalue_rows(),
                             "ratio": self.enc(res.ratio),
                             "ratio_with_factorial": self.enc(res.ratio_with_factorial),
                             "guess": str(res.guess) if res.guess else None,
                             "expected_abs": str(res.expected),
                             "matches_expected": res.matches_expected,
                             "revalidated": res.revalidated, "note": res.note}

    @property
    def max_height(self):
        return int(self.job.params.get("max_height", DEFAULTS["max_height"]))

    def _report_rows(self, report):
        rows = []
        lv = report.metadata["lvalues"]
        sums = report.metadata["sums"]
        for e in report.entries:
            r = lv.row(e.chi)
            s = sums.entry(e.chi)
            rows.append({"chi": e.chi.label, "parity": e.parity, "level": r.level,
                         "w": self.enc(Approx(r.w, r.data.residual)),
                         "residual": mpmath.nstr(r.data.residual, 3),
                         "Lprime0": self.enc(r.Lprime0), "L2": self.enc(r.L2),
                         "S_D": self.enc(s.S_D), "S_J": self.enc(s.S_J),
                         "ratio": self.enc(e.ratio) if e.ratio is not None else None,
                         "guess": str(e.guess) if e.guess else None,
                         "status": e.status, "note": e.note})
        return rows

    def theorem1(self):
        ell = self.galois_divisor(self.job.params["divisor"])
        report = theorem1_check(self.job.curve, self.job.field, ell, self.max_height, self.ctx,
                                self.lvalues, self.lattice, cache=self.cache)
        return report.verdict, {"divisor": self.job.params["divisor"],
                                "characters": self._report_rows(report),
                                "orbit_consistent": report.orbit_consistent,
                                "revalidated": report.revalidated,
                                "cancellation_ok": report.metadata["cancellation_ok"]}

    def corollary(self):
        ell = self.galois_divisor(self.job.params["divisor"])
        res = corollary_check(self.job.curve, self.job.field, ell, self.max_height, self.ctx,
                              self.lvalues, self.lattice, cache=self.cache)
        return res.verdict, {"divisor": self.job.params["divisor"], "real_case": res.real_case,
                             "determinant": self.enc(res.determinant), "value": self.enc(res.value),
                             "guess": str(res.guess) if res.guess else None,
                             "eigenvalue_defect": mpmath.nstr(res.eigenvalue_defect, 3),
                             "note": res.note}

    def search(self):
        names = list(self.job.params["pool"])
        pool = [self.galois_divisor(n) for n in names]
        bound = int(self.job.params.get("coeff_bound", DEFAULTS["coeff_bound"]))
        res = search_divisor(self.job.curve, self.job.field, pool, bound, self.ctx, self.max_height,
                             self.lvalues, self.lattice, self.cache)
        if res is None:
            return FAIL, {"pool": names, "coeff_bound": bound, "found": False}
        return res.report.verdict, {
            "pool": names, "coeff_bound": bound, "found": True,
            "coefficients": dict(zip(names, res.coefficients)),
            "target_multipliers": res.denominators,
            "relation_residual": mpmath.nstr(res.residual, 3),
            "characters": self._report_rows(res.report),
            "revalidated": res.report.revalidated}


RUNNERS = {"info": _Runner.info, "dilog": _Runner.dilog, "lvalue": _Runner.lvalue,
           "check-prop11": _Runner.prop11, "check-prop13": _Runner.prop13,
           "check-theorem1": _Runner.theorem1, "check-corollary": _Runner.corollary,
           "search": _Runner.search}


def run(job: JobSpec, timings: bool = False) -> tuple[int, dict]:
    """Execute a job; returns (exit code, report)."""
    p = {**DEFAULTS, **job.params}
    ctx = PrecisionContext(int(p["prec"]))
    digits = int(p["digits"])
    cache = ApCache(p["cache_dir"], job.curve.label) if p.get("cache_dir") and job.curve.label else None
    job.params = p
    runner = _Runner(job, ctx, digits, cache)
    report = {"version": __version__, "task": job.task,
              "inputs": {k: v for k, v in job.raw.items()},
              "precision": {"bits": ctx.bits, "guard_bits": ctx.guard_bits, "output_digits": digits},
              "conventions": {"functional_equation": "Lambda(s) = -w conj-Lambda(2-s)",
                              "lattice": "omega1 > 0, Im tau > 0, Re tau in {0, 1/2}"}}
    start = time.perf_counter()
    try:
        status, payload = RUNNERS[job.task](runner)
    except CalibrationFailed as exc:
        report.update({"verdict": "ERROR", "error": str(exc)})
        return EXIT_ERROR, report
    report["result"] = payload
    report["verdict"] = status
    if timings:
        report["timings"] = {"total_seconds": round(time.perf_counter() - start, 3)}
    return EXIT[status], report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ellreg", description=__doc__.splitlines()[0])
    ap.add_argument("job", help="JSON job file ('-' reads stdin)")
    ap.add_argument("--prec", type=int, help="working precision in bits (default 384)")
    ap.add_argument("--digits", type=int, help="digits printed in reports (default 40)")
    ap.add_argument("--cutoff", type=int, help="lattice-sum radius R (default 2000)")
    ap.add_argument("--max-height", type=int, dest="max_height",
                    help=f"largest accepted rational height (default {DEFAULT_MAX_HEIGHT:.0e})")
    ap.add_argument("--coeff-bound", type=int, dest="coeff_bound",
                    help="largest integer-relation coefficient (default 1000)")
    ap.add_argument("--cache-dir", dest="cache_dir", help="directory for a_p cache files")
    ap.add_argument("--out", help="report path (default: print to stdout)")
    ap.add_argument("--timings", action="store_true", help="add wall-clock timings to the report")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = sys.stdin.read() if args.job == "-" else Path(args.job).read_text()
        job = parse_job(text)
    except OSError as exc:
        print(f"error: cannot read job: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except JobError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for key in ("prec", "digits", "cutoff", "max_height", "coeff_bound", "cache_dir"):
        value = getattr(args, key)
        if value is not None:
            job.params[key] = value
    try:
        code, report = run(job, timings=args.timings)
    except EllregError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out = args.out or job.params.get("out")
    if out:
        write_atomic(Path(out), report)
    else:
        json.dump(report, sys.stdout, indent=2)
        sys.stdout.write("\n")
    print(f"{job.task}: {report['verdict']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
