"""Command-line interface: every pipeline as a subcommand with CSV/JSON/SVG output.

Exit codes: 0 success, 1 numerical failure (including failed cross-checks),
2 invalid input.
"""
from __future__ import annotations

import argparse
import ast
import json
import logging
import math
import operator
import os
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("cvforge")

SQRT_PI = math.sqrt(math.pi)


class InputError(ValueError):
    """Invalid flags, configuration or references."""


class CheckFailed(RuntimeError):
    """A requested numerical cross-check did not meet its tolerance."""


# ---------------------------------------------------------------- flag grammar

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt, "log": math.log, "exp": math.exp, "log10": math.log10}


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
            and len(node.args) == 1 and not node.keywords):
        return _FUNCS[node.func.id](_eval(node.args[0]))
    raise ValueError("unsupported expression")


def parse_real(text) -> float:
    """Evaluate a numeric flag such as ``0.5``, ``sqrt(pi)/2``, ``2*sqrt(pi)`` or ``sqrt(2*pi)``."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        value = _eval(ast.parse(str(text).strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError) as exc:
        raise argparse.ArgumentTypeError(f"cannot parse number {text!r}") from exc
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"non-finite value {text!r}")
    return value


def parse_reals(text) -> list[float]:
    """Comma-separated list of :func:`parse_real` values; empty text gives an empty list."""
    if isinstance(text, (list, tuple)):
        return [parse_real(v) for v in text]
    return [parse_real(v) for v in str(text).split(",") if v.strip()]


def parse_complex(text) -> complex:
    """``re,im`` pair or a Python complex literal such as ``0.5+0.5j``."""
    if isinstance(text, (int, float, complex)):
        return complex(text)
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return complex(parse_real(text[0]), parse_real(text[1]))
    s = str(text).strip()
    if "," in s:
        parts = parse_reals(s)
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"expected re,im but got {text!r}")
        return complex(*parts)
    try:
        return complex(s.replace(" ", ""))
    except ValueError:
        return complex(parse_real(s))


# ---------------------------------------------------------------- output helpers


@dataclass
class RunConfig:
    """Resolved settings of one invocation, written next to its outputs."""

    command: str
    options: dict
    out_dir: str
    seed: int | None = None
    version: str = __version__
    files: list = field(default_factory=list)

    def path(self, name: str) -> Path:
        p = Path(self.out_dir) / name
        self.files.append(str(p))
        return p


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def write_csv(path, columns, rows, command: str) -> None:
    """CSV with a versioned comment line, a header naming the columns, then the rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# cvforge {__version__} {command}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_grid_csv(path, x, p, W, command: str) -> None:
    rows = ((xi, pj, W[i, j]) for i, xi in enumerate(x) for j, pj in enumerate(p))
    write_csv(path, ("x", "p", "wigner"), rows, command)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, data) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(data), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _diverging(v: float) -> str:
    # blue (-1) through white (0) to red (+1)
    v = max(-1.0, min(1.0, v))
    if v >= 0:
        r, g, b = 255, round(255 * (1 - v)), round(255 * (1 - v))
    else:
        r, g, b = round(255 * (1 + v)), round(255 * (1 + v)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def write_svg_heatmap(path, x, p, W, cell: int = 4) -> None:
    """Self-contained SVG heatmap, colour scale symmetric about zero; ``x`` runs right, ``p`` up."""
    W = np.asarray(W)
    scale = float(np.max(np.abs(W))) or 1.0
    nx, npp = W.shape
    width, height = nx * cell, npp * cell
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width + 120}" height="{height + 40}">',
        '<g transform="translate(10,10)">',
    ]
    for i in range(nx):
        for j in range(npp):
            parts.append(f'<rect x="{i * cell}" y="{(npp - 1 - j) * cell}" width="{cell}" height="{cell}" '
                         f'fill="{_diverging(W[i, j] / scale)}"/>')
    parts.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="none" stroke="black"/>')
    parts.append(f'<text x="0" y="{height + 20}" font-size="12">x: {x[0]:.3g} to {x[-1]:.3g}, '
                 f'p: {p[0]:.3g} to {p[-1]:.3g}, |W| max {scale:.4g}</text>')
    for q in range(11):
        v = 1 - q / 5
        parts.append(f'<rect x="{width + 20}" y="{q * height / 11:.1f}" width="20" '
                     f'height="{height / 11 + 0.5:.1f}" fill="{_diverging(v)}"/>')
    parts.append(f'<text x="{width + 45}" y="12" font-size="11">{scale:.3g}</text>')
    parts.append(f'<text x="{width + 45}" y="{height}" font-size="11">{-scale:.3g}</text>')
    parts.append("</g></svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- shared resolution


def _catalog(args):
    from .optimize import catalog_load

    try:
        return catalog_load(getattr(args, "catalog", None))
    except FileNotFoundError as exc:
        raise InputError(f"catalog not found: {exc.filename}") from exc


def _resolve_params(name_or_entries, args, repetitions: int = 1):
    """A catalog set name, ``ideal``, or inline entries ``a,b,...``.

    :returns: ``(params, ParamSet or None)``
    """
    from .optimize import find_set
    from .polycore import ParamVector

    spec = name_or_entries
    if isinstance(spec, (list, tuple)):
        return ParamVector(parse_reals(spec), repetitions), None
    spec = str(spec).strip()
    if spec == "ideal":
        return "ideal", None
    if spec == "" or spec[0] in "-+.0123456789(":
        try:
            return ParamVector(parse_reals(spec), repetitions), None
        except argparse.ArgumentTypeError as exc:
            raise InputError(str(exc)) from exc
    try:
        ps = find_set(spec, _catalog(args))
    except KeyError as exc:
        raise InputError(exc.args[0]) from exc
    return ps.params(), ps


def _squeezing(args, t, default_k=None) -> float:
    """``k`` from ``--k``, ``--db`` or ``--n``; without any, ``default_k`` or the periodic value at ``n = 5``."""
    from .gkp import optimal_k, squeezing_convert

    given = [u for u in ("k", "db", "n") if getattr(args, u, None) is not None]
    if len(given) > 1:
        raise InputError("give only one of --k, --db, --n")
    if not given:
        return float(optimal_k(t, 5) if default_k is None else default_k)
    unit = given[0]
    return squeezing_convert(getattr(args, unit), {"k": "k", "db": "dB", "n": "n"}[unit], t)["k"]


def _add_squeezing(p, default_note="2t sqrt(21/4), i.e. n = 5"):
    g = p.add_argument_group("squeezing (one of)")
    g.add_argument("--k", type=parse_real, help=f"envelope width k (default {default_note})")
    g.add_argument("--db", type=parse_real, help="squeezing in dB, 20 log10 k")
    g.add_argument("--n", type=parse_real, help="index n of k = 2 t sqrt(n + 1/4)")


# ---------------------------------------------------------------- decompose


def cmd_decompose(args, run: RunConfig) -> dict:
    from .decomp import compile_S, compile_T, cubic_strengths, gate_census

    params, ps = _resolve_params(args.set, args)
    t = args.t if args.t is not None else (ps.t if ps else SQRT_PI / 2)
    if params == "ideal":
        raise InputError("the ideal rotation has no finite circuit")
    strategy = {"min": "min_strength", "equal": "equal"}[args.strategy]
    if args.kind == "S":
        circ = compile_S(params, t, strategy=strategy)
    else:
        if args.strategy != "min":
            raise InputError("the Toffoli-based compilation has a fixed splitter plan")
        circ = compile_T(params, t)
    r = cubic_strengths(circ)
    census = gate_census(circ)
    out = run.path("circuit.json")
    out.write_text(circ.to_json() + "\n", encoding="utf-8")
    print(f"set {args.set}  t={t:.10g}  strategy={strategy}  kind={args.kind}")
    print("cubic strengths r:", " ".join(f"{v:+.4f}" for v in r) if r else "(none)")
    print(f"{'gate':<14}{'count':>6}")
    for kind in sorted(census):
        print(f"{kind:<14}{census[kind]:>6}")
    print(f"{'total':<14}{len(circ):>6}")
    return {"t": t, "strategy": strategy, "kind": args.kind, "cubic_strengths": r, "census": census,
            "gates": len(circ)}


# ---------------------------------------------------------------- conditional GKP and magic


def _window_rows(label, L, params, t, k, alpha, target, center, probabilities, full_line, x, samples):
    from .schemes import p0_statistics, p0_total_probability, solve_window

    rows = []
    for prob in probabilities:
        c = solve_window(params, t, k, prob, alpha, center, x)
        st = p0_statistics(params, t, k, alpha, (center - c, center + c), x, target, samples)
        rows.append((label, L, center - c, center + c, st["probability"], st["min_fidelity"], st["mean_fidelity"]))
    if full_line:
        # fidelity columns sample +-15 around the centre; the probability covers the whole line
        prob = p0_total_probability(params, t, k, alpha, x)
        st = p0_statistics(params, t, k, alpha, (center - 15, center + 15), x, target, samples)
        rows.append((label, L, "-inf", "inf", prob, st["min_fidelity"], st["mean_fidelity"]))
    return rows


def _conditional(args, run: RunConfig, magic: bool) -> dict:
    from .gkp import GkpSpec, default_grid
    from .schemes import conditional_gkp, magic_p0, magic_target

    names = [s.strip() for s in args.set.split(",") if s.strip()] if isinstance(args.set, str) else list(args.set)
    if not names:
        raise InputError("no parameter set given")
    rows, results = [], {}
    for name in names:
        params, ps = _resolve_params(name, args)
        if magic:
            d = args.d if args.d is not None else SQRT_PI
            t = math.pi / d
            k = _squeezing(args, t, default_k=2 * t * math.sqrt(1.25))
            center = magic_p0(k, d) if args.p0 is None else args.p0
            target = magic_target(k, d)
        else:
            t = args.t if args.t is not None else (ps.t if ps else SQRT_PI / 2)
            d = args.d if args.d is not None else math.pi / t
            k = _squeezing(args, t)
            delta = args.delta if args.delta is not None else float((ps.extra if ps else {}).get("delta", 0.0))
            center = 0.0 if args.p0 is None else args.p0
            target = GkpSpec(d, k, delta=delta)
        x = default_grid(k, d, args.points)
        alpha = None if magic else k / t * np.exp(1j * target.delta)
        res = conditional_gkp(params, t, k, alpha, center, x, target)
        L = ps.L if ps else 0
        results[name] = {"t": t, "d": d, "k": k, "p0": center, "fidelity": res.fidelity,
                         "probability_density": res.probability, "L": L}
        rows += _window_rows(name, L, params, t, k, alpha, target, center, args.probability, args.full_line,
                             x, args.samples)
        if len(names) == 1:
            write_csv(run.path("wavefunction.csv"), ("x", "re_psi", "im_psi"),
                      zip(res.psi.x, res.psi.amps.real, res.psi.amps.imag), run.command)
            if args.wigner:
                from .gkp import wigner_of_grid

                xs = np.linspace(-args.extent, args.extent, args.grid)
                xu, W = wigner_of_grid(res.psi, xs, xs)
                write_grid_csv(run.path("wigner.csv"), xu, xs, W, run.command)
                if args.svg:
                    write_svg_heatmap(run.path("wigner.svg"), xu, xs, W)
    write_csv(run.path("windows.csv"),
              ("set", "L", "p0_low", "p0_high", "probability", "threshold_fidelity", "mean_fidelity"),
              rows, run.command)
    for name, r in results.items():
        print(f"{name}: p0={r['p0']:.6g} fidelity={r['fidelity']:.6f} density={r['probability_density']:.6g}")
    for row in rows:
        print(f"  window [{_fmt(row[2])}, {_fmt(row[3])}]  probability={row[4]:.6g}  "
              f"threshold fidelity={row[5]:.6f}")
    return {"sets": results,
            "windows": [dict(zip(("set", "L", "p0_low", "p0_high", "probability", "threshold_fidelity",
                                  "mean_fidelity"), r)) for r in rows]}


def cmd_gkp_cond(args, run):
    return _conditional(args, run, magic=False)


def cmd_gkp_magic(args, run):
    return _conditional(args, run, magic=True)


# ---------------------------------------------------------------- CZ


def cmd_cz(args, run: RunConfig) -> dict:
    from .schemes import cz_fock_oracle, cz_gate

    if args.identity:
        sets = [("ideal", "ideal", 0)]
    elif args.sets:
        sets = []
        for name in args.sets.split(","):
            params, ps = _resolve_params(name.strip(), args)
            sets.append((name.strip(), params, ps.L if ps else 0))
    else:
        sets = [(ps.name, ps.params(), ps.L) for ps in _catalog(args) if ps.application == "cz"]
        sets.sort(key=lambda s: s[2])
    rows, table = [], {}
    for name, params, L in sets:
        res = cz_gate(params, args.points, args.cutoff)
        rows.append((name, L, res.worst_case, res.leakage))
        table[name] = {"L": L, "worst_case_fidelity": res.worst_case, "leakage": res.leakage}
        print(f"{name:<12} L={L:<3} F_wc={res.worst_case:.7f}")
    write_csv(run.path("cz_table.csv"), ("set", "L", "worst_case_fidelity", "leakage"), rows, run.command)
    out = {"table": table}
    if args.identity and table["ideal"]["worst_case_fidelity"] < 1 - 1e-4:
        raise CheckFailed("ideal rotation does not give a CZ gate")
    if args.oracle:
        params, ps = _resolve_params(args.oracle, args)
        grid = cz_gate(params, args.points, args.cutoff).worst_case
        fock = cz_fock_oracle(params, cutoffs=(args.oracle_cutoff, args.oracle_cutoff)).worst_case
        diff = abs(grid - fock)
        out["oracle"] = {"set": args.oracle, "grid": grid, "fock": fock, "difference": diff}
        print(f"oracle {args.oracle}: grid {grid:.7f}  fock {fock:.7f}  |diff| {diff:.2e}")
        if diff >= 1e-3:
            raise CheckFailed(f"grid and Fock CZ fidelities differ by {diff:.2e}")
    return out


# ---------------------------------------------------------------- measurement-free and logical states


def _mode_wigner(run, x, components, norm, args):
    from .gkp import wigner_of_mixture

    xs = np.linspace(-args.extent, args.extent, args.grid)
    xu, W = wigner_of_mixture(x, components / np.sqrt(norm), xs, xs)
    write_grid_csv(run.path("wigner.csv"), xu, xs, W, run.command)
    if args.svg:
        write_svg_heatmap(run.path("wigner.svg"), xu, xs, W)


def cmd_mf(args, run: RunConfig) -> dict:
    from .gkp import comb_peaks
    from .schemes import measurement_free_protocol

    params, ps = _resolve_params(args.set, args)
    k = _squeezing(args, SQRT_PI / 2, default_k=10 ** (11.5 / 20))
    u = parse_reals(args.u) if args.u is not None else [0.0] * args.N
    if len(u) != args.N:
        raise InputError(f"--u needs {args.N} values")
    res = measurement_free_protocol(args.N, u, k, params, points=args.points, ntot=args.ntot)
    state = res["state"]
    x = state.x
    marg = res["marginal"] / res["norm"]
    pos, heights = comb_peaks(x, marg, args.peak_height)
    write_csv(run.path("marginal.csv"), ("x", "density"), zip(x, marg), run.command)
    if args.wigner:
        _mode_wigner(run, x, state.amps, res["norm"], args)
    out = {"k": k, "dB": 20 * math.log10(k), "N": args.N, "u": u, "fidelity": res["fidelity"],
           "norm": res["norm"], "ancilla_excited": res["ancilla_excited"],
           "peaks_over_sqrt_pi": (pos / SQRT_PI).tolist(), "peak_heights": heights.tolist()}
    print(f"fidelity {res['fidelity']:.6f}  ancilla outside |0_L> {res['ancilla_excited']:.3e}")
    print("peaks / sqrt(pi):", " ".join(f"{v:+.4f}" for v in pos / SQRT_PI))
    return out


def cmd_logical(args, run: RunConfig) -> dict:
    from .gkp import GkpSpec, default_grid, gaussian_gkp
    from .gridsim import selfdual_grid
    from .schemes import conditional_gkp, ideal_logical_state_prep, logical_state_prep, optimal_k

    t = SQRT_PI / 2
    k = _squeezing(args, t, default_k=optimal_k(t, 4.5))
    a, b = parse_complex(args.alpha), parse_complex(args.beta)
    nrm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
    if nrm == 0:
        raise InputError("alpha and beta cannot both vanish")
    qubit = (a / nrm, b / nrm)
    x, _ = selfdual_grid(args.points)
    comb = GkpSpec(2 * SQRT_PI, k, odd_phase=-1)
    if args.input == "comb":
        psi = gaussian_gkp(comb, x)
        input_fid = 1.0
    else:
        params, _ = _resolve_params(args.input_set, args)
        # the conditional state has narrow chirped features; compute it finely and let the prep low-pass it
        ext = default_grid(k, 2 * SQRT_PI, 2)[-1]
        x_in = np.linspace(-ext, ext, int(2 * ext / args.input_dx) + 1)
        res = conditional_gkp(params, t, k, x=x_in, target=comb)
        psi, input_fid = res.psi, res.fidelity
    if args.set == "ideal-gates":
        out = ideal_logical_state_prep(psi, qubit, k, points=args.points)
        state_amps = None
    else:
        params, _ = _resolve_params(args.set, args)
        out = logical_state_prep(psi, qubit, params, k, points=args.points, ntot=args.ntot)
        state_amps = out.pop("state").amps
    out["input_fidelity"] = input_fid
    out["k"] = k
    out["qubit"] = [complex(v) for v in qubit]
    if args.wigner and state_amps is not None:
        _mode_wigner(run, x, state_amps, float(np.sum(np.abs(state_amps) ** 2) * (x[1] - x[0])), args)
    print(f"input fidelity {input_fid:.6f}")
    print(f"traced fidelity {out['traced_fidelity']:.6f}  measured fidelity {out['measured_fidelity']:.6f}  "
          f"success {out['success_probability']:.6f}")
    return out


# ---------------------------------------------------------------- loss


def _channel_set(spec: str):
    spec = spec.strip()
    if spec in ("all", "none"):
        return spec
    out = []
    for tok in spec.replace("+", " ").split():
        if tok == "inputs":
            out.append("LC1")
        elif tok.startswith("qnd") and tok[3:].isdigit():
            out.append(f"LC{int(tok[3:]) + 1}")
        else:
            out.append(tok)
    return out


def cmd_loss(args, run: RunConfig) -> dict:
    from .schemes import loss_study

    params, ps = _resolve_params(args.set, args)
    if params == "ideal":
        raise InputError("loss study needs a finite gate sequence")
    t = args.t if args.t is not None else (ps.t if ps else SQRT_PI / 2)
    k = _squeezing(args, t)
    etas = parse_reals(args.etas)
    groups = [g for g in args.channels.split(";") if g.strip()]
    points = tuple(int(v) for v in parse_reals(args.points))
    rows, table = [], []
    for g in groups:
        for eta in etas:
            res = loss_study(eta, _channel_set(g), params, t, k, args.p0, points, args.window, args.tol)
            rows.append((eta, g.strip(), res.fidelity, res.probability, res.branches, res.pruned))
            table.append(dict(zip(("eta", "channels", "fidelity", "probability", "branches", "pruned"), rows[-1])))
            print(f"eta={eta:<7g} {g.strip():<10} fidelity={res.fidelity:.7f}  branches={res.branches}")
    write_csv(run.path("loss.csv"), ("eta", "channels", "fidelity", "probability_density", "branches", "pruned"),
              rows, run.command)
    return {"rows": table}


# ---------------------------------------------------------------- optimize


def cmd_optimize(args, run: RunConfig) -> dict:
    from .optimize import ConvergenceError, Objective, basin_hop, catalog_load, catalog_store, \
        find_set, seed_order_conditions

    if args.from_set:
        x0, ps0 = _resolve_params(args.from_set, args)
        if x0 == "ideal":
            raise InputError("cannot start from the ideal rotation")
    elif args.seed_m:
        free = parse_reals(args.free) if args.free else None
        try:
            x0 = seed_order_conditions(args.seed_m, args.seed_order, free)
        except ConvergenceError as exc:
            raise InputError(str(exc)) from exc
    else:
        raise InputError("give --from-set or --seed-m")
    t = args.t if args.t is not None else SQRT_PI / 2
    k = _squeezing(args, t)
    obj = Objective(args.objective, t=t, k=k, d=args.d, p0=args.p0, points=args.points,
                    repetitions=x0.repetitions)
    executor = None
    if args.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        executor = ProcessPoolExecutor(args.workers)
    try:
        best = basin_hop(obj, x0, hops=args.hops, step_scale=args.step, rng_seed=args.seed,
                         temperature=args.temperature, budget=args.budget, batch=args.batch,
                         executor=executor, name=args.name, application=args.application, t=t)
    finally:
        if executor is not None:
            executor.shutdown()
    best.extra["objective_kind"] = args.objective
    write_json(run.path("paramset.json"), best.to_dict())
    cat = args.catalog or os.environ.get("CVFORGE_CATALOG")
    if cat:
        sets = catalog_load(cat) if Path(cat).exists() else []
        try:
            find_set(best.name, sets)
        except KeyError:
            pass
        else:
            if not args.replace:
                raise InputError(f"set {best.name!r} already in catalog; use --replace")
            sets = [s for s in sets if s.name != best.name]
        catalog_store(sets + [best], cat)
        print(f"stored {best.name} in {cat}")
    print(f"{best.name}: objective {best.objective:.6e}  entries " + " ".join(f"{v:.5f}" for v in best.entries))
    return {"set": best.to_dict(), "catalog": cat}


# ---------------------------------------------------------------- wigner


def _analytic_state(kind: str, arg: str, x):
    """Closed-form wavefunction and, when finite, the Fock amplitudes of a named state."""
    from .focksim import coherent_state, fock_state, squeezed_vacuum
    from .gridsim import hermite_functions

    if kind == "vacuum":
        return np.pi ** -0.25 * np.exp(-x**2 / 2) + 0j, lambda c: fock_state(0, c)
    if kind == "fock":
        n = int(parse_real(arg))
        if n < 0:
            raise InputError("photon number must be nonnegative")
        return hermite_functions(n, x)[n] + 0j, lambda c: fock_state(n, max(c, n))
    if kind == "coherent":
        beta = parse_complex(arg)
        x0, p0 = math.sqrt(2) * beta.real, math.sqrt(2) * beta.imag
        psi = np.pi ** -0.25 * np.exp(-((x - x0) ** 2) / 2 + 1j * p0 * x - 0.5j * x0 * p0)
        return psi, lambda c: coherent_state(beta, c)
    if kind == "squeezed":
        xi = parse_real(arg)
        w = math.exp(-xi)
        psi = (np.pi * w**2) ** -0.25 * np.exp(-(x**2) / (2 * w**2)) + 0j
        return psi, lambda c: squeezed_vacuum(xi, c)
    raise InputError(f"unknown state {kind!r}")


def _fock_from_grid(x, psi, cutoff):
    from .focksim import FockState
    from .gridsim import hermite_functions

    h = hermite_functions(cutoff, x)
    c = np.trapezoid(h * psi[None, :], x, axis=1)
    return FockState(c.astype(complex))


def cmd_wigner(args, run: RunConfig) -> dict:
    from .focksim import FockState, wigner as fock_wigner
    from .gkp import GkpSpec, GridWavefunction, default_grid, gaussian_gkp, wigner_of_grid
    from .gridsim import centered_grid
    from .schemes import conditional_gkp

    kind, _, arg = args.state.partition(":")
    fock_route = None
    if kind in ("gkp", "set"):
        t = args.t
        if kind == "set":
            params, ps = _resolve_params(arg or args.set, args)
            t = t if t is not None else (ps.t if ps else SQRT_PI / 2)
            delta = float((ps.extra if ps else {}).get("delta", 0.0))
        else:
            t = t if t is not None else SQRT_PI / 2
            delta = 0.0
        d = args.d if args.d is not None else math.pi / t
        delta = args.delta if args.delta is not None else delta
        k = _squeezing(args, t)
        ext = default_grid(k, d, 2)[-1]
        x = centered_grid(args.points, 2 * ext / args.points)
        spec = GkpSpec(d, k, delta=delta)
        if kind == "set":
            psi = conditional_gkp(params, t, k, k / t * np.exp(1j * delta), 0.0, x, spec).psi
        else:
            psi = gaussian_gkp(spec, x)
        amps = psi.amps
    else:
        x = centered_grid(args.points, 2 * args.span / args.points)
        amps, fock_route = _analytic_state(kind, arg, x)
        psi = GridWavefunction((x,), amps)
    xs = np.linspace(-args.extent, args.extent, args.grid)
    xu, W = wigner_of_grid(psi, xs, xs)
    write_grid_csv(run.path("wigner.csv"), xu, xs, W, run.command)
    if args.svg:
        write_svg_heatmap(run.path("wigner.svg"), xu, xs, W)
    dp = xs[1] - xs[0]
    out = {"state": args.state, "w_origin": float(W[np.argmin(np.abs(xu)), np.argmin(np.abs(xs))]),
           "w_min": float(W.min()), "w_max": float(W.max()),
           "integral": float(np.sum(W) * (xu[1] - xu[0]) * dp) if len(xu) > 1 else None}
    print(f"W(0,0) = {out['w_origin']:.6g}   (1/pi = {1 / math.pi:.6g})   range [{out['w_min']:.4g}, {out['w_max']:.4g}]")
    if args.compare:
        st = fock_route(args.cutoff) if fock_route else _fock_from_grid(psi.x, psi.amps / psi.norm(), args.cutoff)
        tail = float(np.sum(np.abs(st.amps[-5:]) ** 2) / np.sum(np.abs(st.amps) ** 2))
        keep = np.nonzero(np.abs(st.amps) > 1e-12 * np.abs(st.amps).max())[0][-1] + 1
        st = FockState(st.amps[:keep])
        Wf = fock_wigner(FockState(st.amps / np.linalg.norm(st.amps)), xu, xs)
        diff = float(np.max(np.abs(W - Wf)))
        out["compare"] = {"sup_norm": diff, "cutoff": args.cutoff, "fock_tail_weight": tail}
        print(f"grid vs Fock Wigner sup-norm difference {diff:.3e} (cutoff {args.cutoff})")
        if diff >= 1e-2:
            raise CheckFailed(f"Wigner routes differ by {diff:.3e}")
    return out


# ---------------------------------------------------------------- manifest


def load_manifest() -> list[dict]:
    """Figure-reproduction commands bundled with the package."""
    return json.loads(resources.files("cvforge").joinpath("data/figures.json").read_text(encoding="utf-8"))


def cmd_manifest(args, run: RunConfig) -> dict:
    entries = load_manifest()
    if not args.run:
        for e in entries:
            print(f"{e['id']:<18} {e['description']}")
            print(f"{'':<18} cvforge {' '.join(e['argv'])}")
        return {"entries": [e["id"] for e in entries]}
    wanted = entries if args.run == ["all"] else [e for e in entries if e["id"] in args.run]
    missing = set(args.run) - {e["id"] for e in entries} - {"all"}
    if missing:
        raise InputError(f"unknown manifest ids: {sorted(missing)}")
    codes = {}
    for e in wanted:
        argv = list(e["argv"]) + ["--out-dir", str(Path(run.out_dir) / e["id"])]
        print(f"== {e['id']}: cvforge {' '.join(argv)}")
        codes[e["id"]] = main(argv)
    if any(codes.values()):
        raise CheckFailed(f"manifest entries failed: {sorted(k for k, v in codes.items() if v)}")
    return {"exit_codes": codes}


# ---------------------------------------------------------------- parser


def _common(p):
    p.add_argument("--config", help="JSON file of option values (flags take precedence)")
    p.add_argument("--out-dir", default="cvforge_out", help="directory for CSV/JSON/SVG outputs")
    p.add_argument("--catalog", default=None, help="parameter-set catalog (default $CVFORGE_CATALOG or bundled)")
    p.add_argument("-v", "--verbose", action="store_true")


def _wigner_flags(p, extent=8.0, grid=161):
    p.add_argument("--wigner", action="store_true", help="also write the Wigner function on a grid")
    p.add_argument("--extent", type=parse_real, default=extent, help="phase-space half-width of the Wigner grid")
    p.add_argument("--grid", type=int, default=grid, help="Wigner grid points per axis")
    p.add_argument("--svg", action="store_true", help="render the Wigner grid as an SVG heatmap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cvforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="compile a rotation sequence into cubic gates and splitters")
    _common(p)
    p.add_argument("--set", default="square_L7", help="catalog set name or inline entries a,b,...")
    p.add_argument("--t", type=parse_real, default=None, help="rotation scale (default: the set's)")
    p.add_argument("--strategy", choices=("min", "equal"), default="min")
    p.add_argument("--kind", choices=("S", "T"), default="S", help="QND-based S or Toffoli-based T sequence")
    p.set_defaults(func=cmd_decompose)

    for name, func, magic in (("gkp-cond", cmd_gkp_cond, False), ("gkp-magic", cmd_gkp_magic, True)):
        p = sub.add_parser(name, help=("conditional magic-state generation" if magic
                                       else "conditional GKP generation and window statistics"))
        _common(p)
        p.add_argument("--set", default="ideal" if magic else "square_L7",
                       help="comma-separated set names (or inline entries, or 'ideal')")
        if not magic:
            p.add_argument("--t", type=parse_real, default=None, help="rotation scale (default: the set's)")
            p.add_argument("--delta", type=parse_real, default=None, help="comb offset phase")
        p.add_argument("--d", type=parse_real, default=None, help="comb spacing (default pi/t, sqrt(pi) for magic)")
        _add_squeezing(p, "n = 1" if magic else "n = 5")
        p.add_argument("--p0", type=parse_real, default=None, help="window centre (default 0, magic: pi^2/(8kd))")
        p.add_argument("--probability", type=parse_reals, default=[], help="acceptance probabilities to solve windows for")
        p.add_argument("--full-line", action="store_true", help="also report the window covering all outcomes")
        p.add_argument("--samples", type=int, default=41, help="outcomes sampled per window for the threshold")
        p.add_argument("--points", type=int, default=4001)
        _wigner_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("cz", help="worst-case CZ fidelity table")
    _common(p)
    p.add_argument("--sets", default=None, help="comma-separated set names (default: all CZ sets)")
    p.add_argument("--identity", action="store_true", help="inject the ideal rotation instead")
    p.add_argument("--oracle", default=None, help="cross-check one set against the Fock-basis circuit")
    p.add_argument("--oracle-cutoff", type=int, default=60)
    p.add_argument("--points", type=int, default=2048)
    p.add_argument("--cutoff", type=int, default=12)
    p.set_defaults(func=cmd_cz)

    p = sub.add_parser("mf", help="measurement-free comb generation")
    _common(p)
    p.add_argument("--N", type=int, default=2, help="rounds")
    p.add_argument("--u", default="0,0.093", help="preparation strengths u_1..u_N")
    p.add_argument("--set", default="third_order_L60")
    _add_squeezing(p, "11.5 dB")
    p.add_argument("--points", type=int, default=4096)
    p.add_argument("--ntot", type=int, default=16, help="photon-number truncation of the ancilla rails")
    p.add_argument("--peak-height", type=float, default=0.05, help="relative height of reported peaks")
    _wigner_flags(p)
    p.set_defaults(func=cmd_mf)

    p = sub.add_parser("logical", help="arbitrary logical state from an alternating-sign comb")
    _common(p)
    p.add_argument("--alpha", default="sqrt(1/2)", help="amplitude of |0> (re,im or complex literal)")
    p.add_argument("--beta", default="0.5+0.5j", help="amplitude of |1>")
    p.add_argument("--input", choices=("comb", "conditional"), default="conditional")
    p.add_argument("--input-set", default="square_L9")
    p.add_argument("--input-dx", type=parse_real, default=0.0025, help="grid spacing for the conditional input")
    p.add_argument("--set", default="mf_L11", help="rotation set for the Rabi-type gates, or ideal-gates")
    _add_squeezing(p, "n = 4.5")
    p.add_argument("--points", type=int, default=4096)
    p.add_argument("--ntot", type=int, default=8)
    _wigner_flags(p)
    p.set_defaults(func=cmd_logical)

    p = sub.add_parser("loss", help="photon loss inside the conditional GKP circuit")
    _common(p)
    p.add_argument("--etas", default="0,0.005,0.01,0.015,0.02", help="loss reflectivities")
    p.add_argument("--channels", default="inputs;qnd2;all",
                   help="';'-separated channel groups: all, none, inputs, qndJ, LCj, LCj+LCk")
    p.add_argument("--set", default="square_L3")
    p.add_argument("--t", type=parse_real, default=None)
    _add_squeezing(p)
    p.add_argument("--p0", type=parse_real, default=0.0)
    p.add_argument("--points", default="256,2048", help="grid sizes of the mode and the meter")
    p.add_argument("--window", type=parse_real, default=6.0)
    p.add_argument("--tol", type=parse_real, default=1e-8, help="relative weight below which branches are dropped")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("optimize", help="basin hopping for a new parameter set")
    _common(p)
    p.add_argument("--objective", default="gkp_fidelity_at_p0",
                   choices=("cz_worst_case", "gkp_fidelity_at_p0", "magic_fidelity", "supnorm"))
    p.add_argument("--from-set", default=None, help="start from a catalog set")
    p.add_argument("--seed-m", type=int, default=None, help="start from an order-condition seed with m pairs")
    p.add_argument("--seed-order", type=int, default=1)
    p.add_argument("--free", default=None, help="pinned leading entries of the seed")
    p.add_argument("--t", type=parse_real, default=None)
    _add_squeezing(p)
    p.add_argument("--d", type=parse_real, default=None)
    p.add_argument("--p0", type=parse_real, default=0.0)
    p.add_argument("--points", type=int, default=4001)
    p.add_argument("--hops", type=int, default=20)
    p.add_argument("--step", type=parse_real, default=0.05)
    p.add_argument("--temperature", type=parse_real, default=1e-3)
    p.add_argument("--budget", type=int, default=400, help="objective evaluations per local search")
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="optimized")
    p.add_argument("--application", default="generic")
    p.add_argument("--replace", action="store_true", help="overwrite a catalog entry of the same name")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("wigner", help="Wigner function of a named state")
    _common(p)
    p.add_argument("--state", default="vacuum",
                   help="vacuum, fock:N, coherent:RE,IM, squeezed:XI, gkp, or set:NAME")
    p.add_argument("--set", default="square_L9", help="set used by --state set")
    p.add_argument("--t", type=parse_real, default=None)
    p.add_argument("--d", type=parse_real, default=None)
    p.add_argument("--delta", type=parse_real, default=None)
    _add_squeezing(p)
    p.add_argument("--points", type=int, default=8000, help="wavefunction grid points")
    p.add_argument("--span", type=parse_real, default=12.0, help="wavefunction half-width for Fock-type states")
    p.add_argument("--extent", type=parse_real, default=6.0)
    p.add_argument("--grid", type=int, default=121)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--compare", action="store_true", help="compare with the Fock-basis Wigner function")
    p.add_argument("--cutoff", type=int, default=120, help="Fock cutoff for --compare")
    p.set_defaults(func=cmd_wigner)

    p = sub.add_parser("manifest", help="list or run the figure-reproduction commands")
    _common(p)
    p.add_argument("--run", nargs="*", default=None, help="ids to run ('all' for every entry)")
    p.set_defaults(func=cmd_manifest)
    parser.subcommands = sub.choices
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from ``--config`` so that explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    args = parser.parse_args(argv)
    if not known.config:
        return args
    try:
        with open(known.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    cfg.pop("command", None)
    sub = parser.subcommands[args.command]
    dests = {a.dest: a for a in sub._actions}
    unknown = sorted(set(k.replace("-", "_") for k in cfg) - set(dests))
    if unknown:
        raise InputError(f"unknown config keys for {args.command}: {unknown}")
    # string defaults pass through the option's type when parsed
    sub.set_defaults(**{dests[k.replace("-", "_")].dest: v for k, v in cfg.items()})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        try:
            args = _apply_config(parser, argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        opts = {k: v for k, v in vars(args).items() if k not in ("func", "config", "out_dir", "verbose")}
        try:
            os.makedirs(args.out_dir, exist_ok=True)
        except OSError as exc:
            raise InputError(f"cannot create output directory {args.out_dir}: {exc}") from exc
        if not os.access(args.out_dir, os.W_OK):
            raise InputError(f"output directory {args.out_dir} is not writable")
        run = RunConfig(args.command, opts, args.out_dir, getattr(args, "seed", None))
        summary = args.func(args, run)
        write_json(run.path("result.json"), {"config": asdict(run), "result": summary})
        return 0
    except (InputError, KeyError, argparse.ArgumentTypeError) as exc:
        print(f"cvforge: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"cvforge: error: {exc}", file=sys.stderr)
        return 2
    except (CheckFailed, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"cvforge: numerical failure: {exc}", file=sys.stderr)
        return 1
