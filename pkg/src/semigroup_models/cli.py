"""Command-line verification suites.

Every suite builds seeded random inputs (or reads them with ``--in``), runs
the corresponding pipeline and emits a JSON report of named checks.  Exit
codes: 0 all checks pass, 1 some check fails, 2 precondition error, 3 I/O
error, 64 usage error.
"""

import argparse
import json
import math
import sys
import time

import numpy as np

from . import numerics as nx
from .cogenerator import (
    DEFAULT_TIME_GRID,
    cogenerator_of,
    mobius,
    sampler_from_cogenerator,
    semigroup_at,
)
from .commutant import build_commuting_model, commutant_solve, represent_cogenerator, repair_symbol
from .dilation import (
    dilation_isometry,
    leg_tuple,
    power_time_rank_check,
    minimality_defect,
    random_pure_factors,
    tensor_invariant_subspace_check,
    verify_semigroup_dilation,
)
from .exceptions import HeadroomError, NotACogeneratorError, PreconditionError
from .hardy import (
    OperatorSymbol,
    SubspaceBasis,
    blaschke_model_space,
    compress,
    kron_subspaces,
    margin_frame,
    shift_matrix,
    shift_semigroup_matrix,
    toeplitz_of_symbol,
)
from .normal import model_semigroup_at, normal_model, off_diagonal_residual, random_commuting_normal
from .wold import (
    all_subsets,
    classification_agrees,
    classify_multishift,
    mixed_model,
    slocinski_decompose,
    subset_pattern_tuple,
)

SCHEMA = 1
EXIT_PASS, EXIT_FAIL, EXIT_PRECONDITION, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3, 64
SUITES = ("roundtrip", "commutant", "normal", "wold", "dilate", "tensor-q")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class Suite:
    """Collects named checks; ``lower_bound`` checks pass when the residual reaches the tolerance."""

    def __init__(self):
        self.checks = []

    def check(self, name, fn, tolerance, lower_bound=False):
        start = time.perf_counter()
        residual = float(fn())
        elapsed = (time.perf_counter() - start) * 1000.0
        if lower_bound:
            ok = math.isfinite(residual) and residual >= tolerance
        else:
            ok = math.isfinite(residual) and residual <= tolerance
        self.checks.append({"name": name, "residual": residual, "tolerance": float(tolerance),
                            "pass": bool(ok), "runtime_ms": round(elapsed, 3)})


def _times(text):
    try:
        out = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"--times must be a comma separated list of numbers, got {text!r}") from None
    if not out or any(t < 0 for t in out):
        raise UsageError("--times needs non-negative values")
    return out


def _load_matrices(path):
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "matrices" in data:
        return [nx.matrix_from_dict(m) for m in data["matrices"]]
    return [nx.matrix_from_dict(data)]


def _random_contraction(dim, rng, norm):
    m = nx.random_matrix(dim, rng)
    return norm * m / nx.op_norm(m)


# suites

def suite_roundtrip(args, rng, s):
    if args.inputs:
        cases = args.inputs
    else:
        cases = [np.zeros((args.dim, args.dim), dtype=complex)]
        cases += [_random_contraction(args.dim, rng, rng.uniform(0.3, 0.9)) for _ in range(args.cases)]
    samplers = [sampler_from_cogenerator(t) for t in cases]
    s.check("roundtrip.cogenerator_recovery",
            lambda: max(nx.op_norm(cogenerator_of(sm).matrix - t) for sm, t in zip(samplers, cases)), 1e-6)
    s.check("roundtrip.mobius_involution",
            lambda: max(nx.op_norm(mobius(mobius(t)) - t) for t in cases), args.tol)
    s.check("roundtrip.semigroup_law",
            lambda: max(sm.law_residuals(args.times)["law"] for sm in samplers), args.tol)
    s.check("roundtrip.contractivity",
            lambda: max(sm.law_residuals(args.times)["norm_excess"] for sm in samplers), args.tol)

    N, margin = args.trunc, min(args.margin, args.trunc - 1)
    f = margin_frame(N, 1, N - margin)

    def shift_law():
        worst = 0.0
        for a in args.times:
            for b in args.times:
                lhs = shift_semigroup_matrix(a, N) @ shift_semigroup_matrix(b, N)
                worst = max(worst, nx.op_norm((lhs - shift_semigroup_matrix(a + b, N)) @ f))
        return worst

    def shift_compression():
        worst = 0.0
        for k in (2, 4, 8):
            if k > N:
                continue
            for t in args.times:
                worst = max(worst, nx.op_norm(shift_semigroup_matrix(t, N)[:k, :k] - semigroup_at(shift_matrix(k), t)))
        return worst

    s.check("roundtrip.shift_semigroup_law", shift_law, args.tol)
    s.check("roundtrip.shift_truncation_compression", shift_compression, args.tol)


def _scalar_commutant_case(rng, max_dim):
    d = int(rng.integers(2, max_dim + 1))
    zeros = 0.7 * np.sqrt(rng.uniform(0, 1, d)) * np.exp(2j * np.pi * rng.uniform(size=d))
    Q, _ = blaschke_model_space(zeros)
    N = Q.ambient_dim
    deg = int(rng.integers(1, 2 * d + 1))
    c = rng.standard_normal(deg + 1) + 1j * rng.standard_normal(deg + 1)
    psi0 = OperatorSymbol.scalar(c)
    psi0 = OperatorSymbol.scalar(c * rng.uniform(0.5, 0.99) / psi0.sup_norm(_circle(512)))
    return Q, compress(toeplitz_of_symbol(psi0, N), Q), d


def _circle(k):
    return np.exp(2j * np.pi * np.arange(k) / k)


def repair_example(kappa_value=0.0, N=8, k=4):
    """Compressions of ``diag(1, theta)`` and its repair ``diag(kappa, theta)`` onto ``Q`` in ``H^2(D, E_2)``."""
    th = _blaschke_factor_coeffs(0.5, N)
    coeffs = np.zeros((N, 2, 2), dtype=complex)
    coeffs[0, 0, 0] = 1.0
    coeffs[:, 1, 1] = th
    eta = OperatorSymbol(coeffs)
    kappa = OperatorSymbol(np.full((1, 1, 1), kappa_value, dtype=complex))
    psi = repair_symbol(eta, kappa)
    frame = np.zeros((2 * N, k), dtype=complex)
    frame[2 * np.arange(k) + 1, np.arange(k)] = 1.0
    Q = SubspaceBasis(frame)
    diff = compress(toeplitz_of_symbol(psi, N), Q) - compress(toeplitz_of_symbol(eta, N), Q)
    return nx.op_norm(diff), psi


def _blaschke_factor_coeffs(a, N):
    """Taylor coefficients of ``(z - a)/(1 - a z)`` for real ``a``."""
    c = np.empty(N, dtype=complex)
    c[0] = -a
    c[1:] = (1 - a * a) * a ** np.arange(N - 1)
    return c


def suite_commutant(args, rng, s):
    cases = [_scalar_commutant_case(rng, max(2, min(args.dim, 8))) for _ in range(args.cases)]
    solved = [(Q, T, commutant_solve(Q, T, 4 * d + 8)) for Q, T, d in cases]
    s.check("commutant.compression_residual", lambda: max(sol.residual for _, _, sol in solved), args.tol)
    s.check("commutant.symbol_contractive", lambda: max(sol.sup_norm for _, _, sol in solved) - 1.0, args.tol)

    reps = [represent_cogenerator(Q, T, 4 * d + 8) for Q, T, d in cases]
    s.check("commutant.repaired_compression", lambda: max(r[1] for r in reps), args.tol)
    s.check("commutant.class_ce_rejections", lambda: sum(not r[2].accepted for r in reps), 0)
    s.check("commutant.repair_example", lambda: max(repair_example(0.0)[0], repair_example(-1.0)[0]), 1e-10)

    def semigroup_commutation():
        model = build_commuting_model(args.n, seed=int(rng.integers(2 ** 31)))
        worst = 0.0
        for t in args.times:
            ops = [semigroup_at(c, t) for c in model.cogenerators]
            for i in range(len(ops)):
                for j in range(i + 1, len(ops)):
                    worst = max(worst, nx.op_norm(nx.commutator(ops[i], ops[j])))
        return worst

    s.check("commutant.semigroup_commutation", semigroup_commutation, args.tol)


def suite_normal(args, rng, s):
    kinds = ("normal", "unitary", "selfadjoint")
    if args.inputs:
        cases = [(args.inputs, "input")]
    else:
        cases = [(random_commuting_normal(args.dim, args.n, rng, kinds[k % 3])[0], kinds[k % 3])
                 for k in range(args.cases)]
    models = [normal_model(ts) for ts, _ in cases]

    def off_diag():
        return max(off_diagonal_residual(ts, m.gamma) / max(1.0, max(nx.op_norm(t) for t in ts))
                   for (ts, _), m in zip(cases, models))

    def reconstruction():
        worst = 0.0
        for (ts, _), m in zip(cases, models):
            for j, t_op in enumerate(ts):
                for t in args.times:
                    worst = max(worst, nx.op_norm(model_semigroup_at(m, j, t) - semigroup_at(t_op, t)))
        return worst

    def unitary_outputs():
        worst = 0.0
        for (ts, kind), m in zip(cases, models):
            if kind != "unitary":
                continue
            for j in range(len(ts)):
                for t in args.times:
                    u = model_semigroup_at(m, j, t)
                    worst = max(worst, nx.op_norm(nx.dagger(u) @ u - np.eye(u.shape[0])))
        return worst

    def atom_at_one():
        try:
            normal_model([np.diag([1.0, 0.5]).astype(complex)])
        except NotACogeneratorError:
            return 0.0
        return 1.0

    s.check("normal.off_diagonal", off_diag, 1e-7)
    s.check("normal.reconstruction", reconstruction, 1e-7)
    s.check("normal.unitary_outputs", unitary_outputs, 1e-9)
    s.check("normal.atom_at_one_rejected", atom_at_one, 0)


def suite_wold(args, rng, s):
    n = args.n
    N = min(args.trunc, 8 if n <= 2 else 5)
    margin = max(1, min(args.margin, N // 2))
    patterns = [set(a) for a in all_subsets(n)]
    tuples = [subset_pattern_tuple(n, a, seed=int(rng.integers(2 ** 31)), N=N, margin=margin) for a in patterns]
    decs = [slocinski_decompose(t) for t in tuples]

    s.check("wold.dimension_mismatches",
            lambda: sum(dec.dims[a] != t.ground_truth[a] for t, dec in zip(tuples, decs) for a in dec.dims), 0)
    s.check("wold.completeness", lambda: max(d.residuals["completeness"] for d in decs), args.tol)
    s.check("wold.orthogonality", lambda: max(d.residuals["orthogonality"] for d in decs), args.tol)
    s.check("wold.reducing", lambda: max(d.residuals["reducing"] for d in decs), args.tol)
    s.check("wold.classification_errors", lambda: sum(not classification_agrees(d, n) for d in decs), 0)

    def multishift_errors():
        errs = 0
        for a, t in zip(patterns, tuples):
            flag, mult = classify_multishift(t)
            expected = len(a) == n
            errs += flag != expected or (expected and mult != t.dim // N ** n)
        return errs

    s.check("wold.multishift_errors", multishift_errors, 0)
    s.check("wold.mixed_model", lambda: max(mixed_model(t).residual for t in tuples), args.tol)

    def headroom():
        full = tuples[-1]
        try:
            slocinski_decompose(full, n_max=N - 1)
        except HeadroomError:
            return 0.0
        return 1.0

    s.check("wold.headroom_detected", headroom, 0)


def suite_dilate(args, rng, s):
    if args.inputs:
        ts = args.inputs
    else:
        factors = random_pure_factors(args.n, rng, max_leg=2, norm=0.5)
        ts, _ = leg_tuple(factors, rng)
    res = dilation_isometry(ts, N=args.trunc, tol=args.tol)
    slack = 1e-12
    tail = res.tail
    s.check("dilate.isometry", lambda: res.residuals["isometry"], max(tail["isometry"], args.tol) + slack)
    s.check("dilate.intertwining", lambda: max(res.residuals["intertwining"]), tail["intertwining"] + slack)
    s.check("dilate.compression", lambda: max(res.residuals["compression"]), tail["compression"] + slack)
    s.check("dilate.star_invariance", lambda: max(res.residuals["star_invariance"]),
            tail["intertwining"] + slack)
    s.check("dilate.semigroup_intertwining",
            lambda: max(verify_semigroup_dilation(res, ts, args.times).values()), tail["intertwining"] + slack)
    s.check("dilate.minimality", lambda: minimality_defect(res, margin_degree=2), args.tol)

    def power_time():
        # small-norm tuple keeps the time grid well conditioned at full span
        small, _ = leg_tuple(random_pure_factors(args.n, rng, max_leg=2, norm=0.005 if args.n > 2 else 0.01), rng)
        ranks = power_time_rank_check(dilation_isometry(small, tol=1e-9))
        return 0.0 if ranks["equal"] else 1.0

    s.check("dilate.power_time_rank", power_time, 0)


def suite_tensor(args, rng, s):
    N = 4
    e = np.zeros((N, 2), dtype=complex)
    e[0, 0] = e[1, 1] = 1.0
    jet = SubspaceBasis(e)

    def jet_product():
        q = kron_subspaces(*[jet] * args.n)
        r = tensor_invariant_subspace_check(q, args.n, N)
        return r.factor_residual if r.verdict else 1.0

    def blaschke_product():
        zs = [0.6 * np.exp(2j * np.pi * rng.uniform(size=2)) * np.sqrt(rng.uniform(size=2)) for _ in range(2)]
        cut = max(blaschke_model_space(z)[0].ambient_dim for z in zs)
        qs = [blaschke_model_space(z, cut)[0] for z in zs]
        r = tensor_invariant_subspace_check(kron_subspaces(*qs), 2, cut)
        return r.factor_residual if r.verdict and [f.dim for f in r.factors] == [2, 2] else 1.0

    def non_tensor():
        f = np.zeros((N * N, 3), dtype=complex)
        f[0, 0] = f[N, 1] = f[1, 2] = 1.0  # 1, z1, z2
        r = tensor_invariant_subspace_check(SubspaceBasis(f), 2, N)
        return 0.0 if r.verdict else r.commutator_residual

    s.check("tensor-q.jet_product_factors", jet_product, args.tol)
    s.check("tensor-q.blaschke_product_factors", blaschke_product, args.tol)
    s.check("tensor-q.non_tensor_commutator", non_tensor, 1e-2, lower_bound=True)


RUNNERS = {
    "roundtrip": suite_roundtrip,
    "commutant": suite_commutant,
    "normal": suite_normal,
    "wold": suite_wold,
    "dilate": suite_dilate,
    "tensor-q": suite_tensor,
}


def build_parser():
    p = _Parser(prog="semigroup-models", description="Verification suites for contractive semigroup models.")
    p.add_argument("suite", choices=SUITES + ("verify-all",))
    p.add_argument("--dim", type=int, default=8, help="operator dimension")
    p.add_argument("--n", type=int, default=2, help="number of commuting operators")
    p.add_argument("--trunc", type=int, default=32, help="truncation N")
    p.add_argument("--margin", type=int, default=8, help="margin M below the truncation")
    p.add_argument("--tol", type=float, default=1e-8, help="check tolerance")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--times", default="0.1,0.5,1,2", help="comma-separated nonnegative times")
    p.add_argument("--cases", type=int, default=10, help="random cases per suite")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--in", dest="input", help="JSON matrix or {\"matrices\": [...]} to check")
    return p


def run(argv):
    """Run one command line; returns ``(exit_code, report or None, message)``."""
    try:
        args = build_parser().parse_args(argv)
        args.times = _times(args.times)
        if args.dim < 1 or args.n < 1 or args.trunc < 2 or args.margin < 0 or args.cases < 0 or args.tol <= 0:
            raise UsageError("--dim, --n, --cases must be positive, --trunc >= 2, --margin >= 0, --tol > 0")
        if args.n > 3 and args.suite in ("wold", "dilate", "tensor-q", "verify-all"):
            raise UsageError("--n above 3 is not supported by the tensor suites")
    except UsageError as exc:
        return EXIT_USAGE, None, f"usage error: {exc}"
    try:
        args.inputs = _load_matrices(args.input) if args.input else None
    except (OSError, ValueError, KeyError, TypeError) as exc:
        return EXIT_IO, None, f"cannot read --in {args.input}: {exc}"

    suites = SUITES if args.suite == "verify-all" else (args.suite,)
    s = Suite()
    try:
        for k, name in enumerate(suites):
            RUNNERS[name](args, np.random.default_rng([args.seed, k]), s)
    except PreconditionError as exc:
        return EXIT_PRECONDITION, None, f"precondition error: {exc}"
    checks = sorted(s.checks, key=lambda c: c["name"])
    report = {
        "schema": SCHEMA,
        "suite": args.suite,
        "seed": args.seed,
        "truncation": {"N": args.trunc, "M": args.margin, "tol": args.tol},
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            return EXIT_IO, report, f"cannot write --out {args.out}: {exc}"
    failed = [c["name"] for c in checks if not c["pass"]]
    msg = text if not args.out else f"{args.suite}: {len(checks) - len(failed)}/{len(checks)} checks pass"
    if failed:
        msg += "\nfailed: " + ", ".join(failed)
    return (EXIT_PASS if report["pass"] else EXIT_FAIL), report, msg


def main(argv=None):
    code, _, msg = run(sys.argv[1:] if argv is None else argv)
    print(msg, file=sys.stdout if code in (EXIT_PASS, EXIT_FAIL) else sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
