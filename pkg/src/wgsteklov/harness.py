"""Study orchestration and command-line front end.

Drives the full pipeline (mesh, assemble, condense, solve) over refinement
sequences, reports eigenvalue errors and observed convergence orders, runs
the companion source-problem studies, and exports eigenfunction samples.
All reports are deterministic: identical configurations produce byte-identical
output.
"""

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import glb as glb_mod
from .assembly import AlphaStabilizer, GammaStabilizer, NegInvLog, PowerEps, assemble
from .eigen import NumericalError, condense, solve_condensed
from .mesh import DOMAINS, build_structured_mesh, locate_cell, mesh_stats, mesh_to_json
from .polyquad import CellBasis
from .source import exponential_solution, projection_errors, solve_source, v_norm_error, x_norm_error

# High-accuracy reference values for the first four eigenvalues on the unit
# square, used when a study is configured with refs="builtin:square".  They
# are themselves numerical, so lower-bound checks carry a 1e-9 slack.
SQUARE_REFERENCE_EIGENVALUES = (
    0.2400790854320629,
    1.492303134033900,
    1.492303134115401,
    2.082647053961881,
)

LOWER_BOUND_SLACK = 1e-9


@dataclass
class StudyConfig:
    """Configuration of a convergence study."""

    domain: str
    k: int
    stabilizer: object
    levels: tuple
    n_eigs: int = 4
    refs: tuple = None
    out: str = None
    fmt: str = "csv"
    field_grid: int = None

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        self.levels = tuple(int(n) for n in self.levels)
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError(f"levels must be strictly increasing, got {self.levels}")
        if self.n_eigs < 1:
            raise ValueError(f"number of eigenvalues must be >= 1, got {self.n_eigs}")
        if self.fmt not in ("csv", "json", "markdown"):
            raise ValueError(f"unknown output format {self.fmt!r}")
        if isinstance(self.stabilizer, GammaStabilizer) and isinstance(
            self.stabilizer.spec, PowerEps
        ):
            if not 0.0 < self.stabilizer.spec.eps < 1.0:
                raise ValueError("power-law exponent must lie in (0, 1)")
        if self.refs is not None:
            self.refs = tuple(float(r) for r in self.refs)


def observed_order(err_coarse, err_fine):
    """Order between two consecutive levels: log2(e(h) / e(h/2))."""
    return float(np.log2(err_coarse / err_fine))


def fitted_order(hs, errors):
    """Least-squares slope of log(error) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    mask = errors > 0
    if mask.sum() < 2:
        return float("nan")
    slope = np.polyfit(np.log(hs[mask]), np.log(errors[mask]), 1)[0]
    return float(slope)


class ConvergenceReport:
    """Eigenvalue study results: per-level values, errors, orders, flags.

    `orders[j][i]` compares level i-1 to level i (None on the first level or
    when either error is nonpositive); `lower_bound[j][i]` records a strictly
    positive error; `trend[j][i]` records nondecrease from the previous level.
    """

    def __init__(self, config, ns, hs, eigenvalues):
        self.config = config
        self.ns = list(ns)
        self.hs = list(hs)
        self.eigenvalues = [list(row) for row in eigenvalues]
        m = config.n_eigs
        refs = config.refs
        self.n_refs = 0 if refs is None else min(len(refs), m)
        self.errors = None
        self.orders = None
        self.lower_bound = None
        if refs is not None:
            self.errors = [
                [refs[j] - lams[j] for lams in self.eigenvalues] for j in range(self.n_refs)
            ]
            self.lower_bound = [[e > 0.0 for e in row] for row in self.errors]
            self.orders = []
            for row in self.errors:
                orow = [None]
                for prev, cur in zip(row, row[1:]):
                    orow.append(observed_order(prev, cur) if prev > 0 and cur > 0 else None)
                self.orders.append(orow)
        self.trend = []
        for j in range(m):
            seq = [lams[j] for lams in self.eigenvalues]
            self.trend.append([None] + [b >= a for a, b in zip(seq, seq[1:])])

    def trend_nondecreasing(self, j):
        """True when the j-th eigenvalue never decreases across the levels."""
        return all(flag for flag in self.trend[j][1:])

    def render(self, fmt=None):
        fmt = fmt or self.config.fmt
        if fmt == "csv":
            return self._render_csv()
        if fmt == "json":
            return self._render_json()
        if fmt == "markdown":
            return self._render_markdown()
        raise ValueError(f"unknown output format {fmt!r}")

    def _render_csv(self):
        m = self.config.n_eigs
        multi = len(self.ns) > 1  # order columns need at least two levels
        cols = ["n", "h"]
        cols += [f"lambda_{j + 1}" for j in range(m)]
        for j in range(self.n_refs):
            cols += [f"error_{j + 1}", f"lower_{j + 1}"]
            if multi:
                cols.append(f"order_{j + 1}")
        if multi:
            cols += [f"trend_{j + 1}" for j in range(m)]
        lines = [",".join(cols)]
        for i, n in enumerate(self.ns):
            row = [str(n), _fmt(self.hs[i])]
            row += [_fmt(self.eigenvalues[i][j]) for j in range(m)]
            for j in range(self.n_refs):
                row += [
                    _fmt(self.errors[j][i]),
                    "1" if self.lower_bound[j][i] else "0",
                ]
                if multi:
                    order = self.orders[j][i]
                    row.append("" if order is None else _fmt(order))
            if multi:
                for j in range(m):
                    flag = self.trend[j][i]
                    row.append("" if flag is None else ("1" if flag else "0"))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def _render_json(self):
        payload = {
            "domain": self.config.domain,
            "k": self.config.k,
            "stabilizer": describe_stabilizer(self.config.stabilizer),
            "levels": self.ns,
            "h": self.hs,
            "eigenvalues": self.eigenvalues,
            "references": None if self.config.refs is None else list(self.config.refs),
            "errors": self.errors,
            "orders": self.orders,
            "lower_bound": self.lower_bound,
            "trend": self.trend,
        }
        return json.dumps(payload, indent=2) + "\n"

    def _render_markdown(self):
        m = self.config.n_eigs
        header = ["quantity"] + [f"n={n}" for n in self.ns] + ["trend"]
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "---|" * len(header),
        ]
        for j in range(m):
            vals = [f"{self.eigenvalues[i][j]:.10e}" for i in range(len(self.ns))]
            trend = "nondecreasing" if self.trend_nondecreasing(j) else "not monotone"
            lines.append("| " + " | ".join([f"lambda_{j + 1}"] + vals + [trend]) + " |")
            if self.errors is not None and j < self.n_refs:
                errs = [f"{self.errors[j][i]:.4e}" for i in range(len(self.ns))]
                lines.append("| " + " | ".join([f"error_{j + 1}"] + errs + [""]) + " |")
                orders = [
                    "" if o is None else f"{o:.4f}" for o in self.orders[j]
                ]
                lines.append("| " + " | ".join([f"order_{j + 1}"] + orders + [""]) + " |")
        return "\n".join(lines) + "\n"

    def save(self, path, fmt=None):
        with open(path, "w") as fh:
            fh.write(self.render(fmt))


def describe_stabilizer(stabilizer):
    if isinstance(stabilizer, AlphaStabilizer):
        return f"alpha:{stabilizer.alpha:g}"
    spec = stabilizer.spec
    if isinstance(spec, PowerEps):
        return f"pow:{spec.eps:g}"
    if isinstance(spec, NegInvLog):
        return "neglog"
    return f"fixed:{float(spec):g}"


def _fmt(x):
    return f"{x:.16e}"


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except NumericalError as exc:
        raise NumericalError(f"stage '{name}' failed: {exc}") from exc


def run_eigen_study(config):
    """Run the eigenvalue convergence study described by `config`."""
    ns, hs, eigenvalues = [], [], []
    for n in config.levels:
        mesh = _stage("mesh", build_structured_mesh, config.domain, n)
        pair = _stage("assemble", assemble, mesh, config.k, config.stabilizer)
        pencil = _stage("condense", condense, pair)
        result = _stage("solve", solve_condensed, pencil, config.n_eigs)
        ns.append(n)
        hs.append(mesh.h_max)
        eigenvalues.append([float(v) for v in result.values])
    report = ConvergenceReport(config, ns, hs, eigenvalues)
    if config.out:
        report.save(config.out)
    return report


class SourceReport:
    """Source-problem study results: per-level V and X errors and orders."""

    def __init__(self, ns, hs, v_errors, x_errors, proj_v, proj_x, label):
        self.ns = ns
        self.hs = hs
        self.v_errors = v_errors
        self.x_errors = x_errors
        self.proj_v = proj_v
        self.proj_x = proj_x
        self.label = label
        self.v_orders = [None] + [
            observed_order(a, b) for a, b in zip(v_errors, v_errors[1:])
        ]
        self.x_orders = [None] + [
            observed_order(a, b) for a, b in zip(x_errors, x_errors[1:])
        ]
        self.v_fitted = fitted_order(hs, v_errors)
        self.x_fitted = fitted_order(hs, x_errors)

    def render(self, fmt="csv"):
        if fmt == "csv":
            cols = "n,h,v_error,v_order,x_error,x_order,proj_v,proj_x"
            lines = [cols]
            for i, n in enumerate(self.ns):
                lines.append(
                    ",".join(
                        [
                            str(n),
                            _fmt(self.hs[i]),
                            _fmt(self.v_errors[i]),
                            "" if self.v_orders[i] is None else _fmt(self.v_orders[i]),
                            _fmt(self.x_errors[i]),
                            "" if self.x_orders[i] is None else _fmt(self.x_orders[i]),
                            _fmt(self.proj_v[i]),
                            _fmt(self.proj_x[i]),
                        ]
                    )
                )
            return "\n".join(lines) + "\n"
        if fmt == "json":
            payload = {
                "solution": self.label,
                "levels": self.ns,
                "h": self.hs,
                "v_error": self.v_errors,
                "v_order": self.v_orders,
                "v_fitted_order": self.v_fitted,
                "x_error": self.x_errors,
                "x_order": self.x_orders,
                "x_fitted_order": self.x_fitted,
                "projection_v": self.proj_v,
                "projection_x": self.proj_x,
            }
            return json.dumps(payload, indent=2) + "\n"
        raise ValueError(f"unknown output format {fmt!r}")

    def save(self, path, fmt="csv"):
        with open(path, "w") as fh:
            fh.write(self.render(fmt))


def run_source_study(domain, k, stabilizer, levels, solution=None):
    """Solve the boundary-flux problem across levels and report error orders."""
    solution = solution or exponential_solution()
    ns, hs, v_errs, x_errs, pvs, pxs = [], [], [], [], [], []
    for n in levels:
        mesh = _stage("mesh", build_structured_mesh, domain, n)
        u_h = _stage("solve", solve_source, mesh, k, stabilizer, solution.flux)
        v_errs.append(v_norm_error(u_h, solution, mesh, k))
        x_errs.append(x_norm_error(u_h, solution, mesh, k))
        pv, px = projection_errors(solution, mesh, k)
        pvs.append(pv)
        pxs.append(px)
        ns.append(n)
        hs.append(mesh.h_max)
    return SourceReport(ns, hs, v_errs, x_errs, pvs, pxs, solution.label)


def export_eigenfunction_field(result, mesh, k, j, grid_resolution):
    """CSV sample of the j-th (1-based) eigenfunction's interior component.

    Samples u0 cellwise on a uniform grid over the bounding unit square,
    omitting points outside the domain; the sign is normalized so the sample
    of largest magnitude is positive.
    """
    if not 1 <= j <= result.vectors.shape[1]:
        raise ValueError(f"eigenfunction index {j} out of range")
    u = result.vectors[:, j - 1]
    dim_cell = CellBasis(mesh.vertices[mesh.cells[0]], k).dim
    bases = {}
    coords = np.linspace(0.0, 1.0, grid_resolution)
    xs, ys, values = [], [], []
    for y in coords:
        for x in coords:
            ci = locate_cell(mesh, x, y)
            if ci < 0:
                continue
            if ci not in bases:
                bases[ci] = CellBasis(mesh.vertices[mesh.cells[ci]], k)
            phi = bases[ci].eval(np.array([[x, y]]))[0]
            c0 = u[ci * dim_cell : (ci + 1) * dim_cell]
            xs.append(x)
            ys.append(y)
            values.append(float(phi @ c0))
    values = np.asarray(values)
    if len(values) and values[np.argmax(np.abs(values))] < 0:
        values = -values
    lines = ["x,y,u"]
    for x, y, v in zip(xs, ys, values):
        lines.append(f"{x:.16e},{y:.16e},{v:.16e}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# command-line interface


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def parse_stabilizer(gamma, alpha):
    """Stabilizer from CLI strings: gamma 'pow:EPS'|'neglog'|'fixed:V', or alpha."""
    if (gamma is None) == (alpha is None):
        raise ValueError("exactly one of --gamma and --alpha is required")
    if alpha is not None:
        return AlphaStabilizer(float(alpha))
    if gamma == "neglog":
        return GammaStabilizer(NegInvLog())
    if gamma.startswith("pow:"):
        return GammaStabilizer(PowerEps(float(gamma[4:])))
    if gamma.startswith("fixed:"):
        return GammaStabilizer(float(gamma[6:]))
    raise ValueError(f"unknown gamma spec {gamma!r} (expected pow:EPS, neglog, or fixed:V)")


def parse_refs(text):
    if text is None or text == "none":
        return None
    if text == "builtin:square":
        return SQUARE_REFERENCE_EIGENVALUES
    return tuple(float(v) for v in text.split(","))


def parse_levels(text):
    return tuple(int(v) for v in text.split(","))


def load_config_file(path):
    """Key-value configuration file: one `key = value` per line, # comments."""
    data = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            data[key.strip().replace("-", "_")] = value.strip()
    return data


def _merge_config(args):
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            if getattr(args, key, None) is None:
                setattr(args, key, value)
    return args


def _build_parser():
    parser = _Parser(prog="wg-steklov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *names):
        p.add_argument("--config", help="key-value configuration file")
        if "domain" in names:
            p.add_argument("--domain", choices=DOMAINS)
        if "k" in names:
            p.add_argument("--k")
        if "stab" in names:
            p.add_argument("--gamma", help="pow:EPS | neglog | fixed:VALUE")
            p.add_argument("--alpha", help="volume-weighted stabilizer coefficient")
        if "levels" in names:
            p.add_argument("--levels", help="comma-separated mesh levels, e.g. 8,16,32,64")
        if "out" in names:
            p.add_argument("--out", help="output path (default: stdout)")
            p.add_argument("--format", choices=("csv", "json", "markdown"))

    p = sub.add_parser("mesh", help="build a mesh and print its statistics")
    common(p, "domain")
    p.add_argument("--n")
    p.add_argument("--out", help="write a JSON mesh dump to this path")

    p = sub.add_parser("solve", help="solve one eigenvalue problem")
    common(p, "domain", "k", "stab")
    p.add_argument("--n")
    p.add_argument("--eigs")

    p = sub.add_parser("converge", help="eigenvalue convergence study")
    common(p, "domain", "k", "stab", "levels", "out")
    p.add_argument("--eigs")
    p.add_argument("--refs", help="builtin:square | none | comma-separated values")

    p = sub.add_parser("source", help="boundary-flux source-problem study")
    common(p, "domain", "k", "stab", "levels", "out")
    p.add_argument("--direction", help="a,b with a^2+b^2=1 for u = exp(a x + b y)")

    p = sub.add_parser("glb", help="guaranteed-lower-bound certificate study")
    common(p, "domain", "k", "levels", "out")
    p.add_argument("--alpha")
    p.add_argument("--index")
    p.add_argument("--stab-bound", dest="stab_bound")
    p.add_argument("--proj-bound", dest="proj_bound", help="value, or 'estimate'")
    p.add_argument("--probe-degree", dest="probe_degree")
    p.add_argument("--refs", help="builtin:square | none | comma-separated values")

    p = sub.add_parser("field", help="export an eigenfunction sample grid")
    common(p, "domain", "k", "stab")
    p.add_argument("--n")
    p.add_argument("--eig")
    p.add_argument("--grid")
    p.add_argument("--out")
    return parser


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise ValueError(f"missing required option --{name.replace('_', '-')}")


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_mesh(args):
    _require(args, "domain", "n")
    mesh = build_structured_mesh(args.domain, int(args.n))
    if args.out:
        _emit(mesh_to_json(mesh) + "\n", args.out)
    for key, value in mesh_stats(mesh).items():
        print(f"{key} = {value}")
    return 0


def _cmd_solve(args):
    _require(args, "domain", "n", "k")
    stab = parse_stabilizer(args.gamma, args.alpha)
    mesh = build_structured_mesh(args.domain, int(args.n))
    pair = assemble(mesh, int(args.k), stab)
    result = solve_condensed(condense(pair), int(args.eigs or 4))
    for value in result.values:
        print(_fmt(value))
    return 0


def _cmd_converge(args):
    _require(args, "domain", "k", "levels")
    config = StudyConfig(
        domain=args.domain,
        k=int(args.k),
        stabilizer=parse_stabilizer(args.gamma, args.alpha),
        levels=parse_levels(args.levels),
        n_eigs=int(args.eigs or 4),
        refs=parse_refs(args.refs),
        fmt=args.format or "csv",
    )
    report = run_eigen_study(config)
    _emit(report.render(), args.out)
    return 0


def _cmd_source(args):
    _require(args, "domain", "k", "levels")
    stab = parse_stabilizer(args.gamma, args.alpha)
    if args.direction:
        a, b = (float(v) for v in args.direction.split(","))
        solution = exponential_solution(a, b)
    else:
        solution = exponential_solution()
    report = run_source_study(args.domain, int(args.k), stab, parse_levels(args.levels), solution)
    _emit(report.render(args.format or "csv"), args.out)
    return 0


def _cmd_glb(args):
    _require(args, "domain", "k", "levels", "alpha", "stab_bound")
    proj = args.proj_bound
    proj_bound = None if proj in (None, "estimate") else float(proj)
    config = glb_mod.GlbConfig(
        alpha=float(args.alpha),
        stab_bound=float(args.stab_bound),
        proj_bound=proj_bound,
        index=int(args.index or 1),
    )
    rows = glb_mod.run_glb_study(
        args.domain,
        parse_levels(args.levels),
        int(args.k),
        config,
        refs=parse_refs(args.refs),
        probe_degree=int(args.probe_degree) if args.probe_degree else None,
    )
    if (args.format or "csv") == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        cols = list(rows[0].keys())
        lines = [",".join(cols)]
        for row in rows:
            lines.append(",".join("" if row[c] is None else str(row[c]) for c in cols))
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


def _cmd_field(args):
    _require(args, "domain", "n", "k", "eig", "grid", "out")
    stab = parse_stabilizer(args.gamma, args.alpha)
    mesh = build_structured_mesh(args.domain, int(args.n))
    pair = assemble(mesh, int(args.k), stab)
    result = solve_condensed(condense(pair), int(args.eig))
    text = export_eigenfunction_field(result, mesh, int(args.k), int(args.eig), int(args.grid))
    _emit(text, args.out)
    return 0


_COMMANDS = {
    "mesh": _cmd_mesh,
    "solve": _cmd_solve,
    "converge": _cmd_converge,
    "source": _cmd_source,
    "glb": _cmd_glb,
    "field": _cmd_field,
}


def main(argv=None):
    """CLI entry point; returns 0 on success, 1 on bad usage, 2 on numerical failure."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"wg-steklov: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"wg-steklov: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"wg-steklov: numerical failure: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
