"""Parameter sets for the controlled-rotation sequences: order-condition seeds,
seeded basin hopping and the bundled catalog."""
from __future__ import annotations

import json
import logging
import os
import re
from concurrent.futures import Executor
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np
from scipy.optimize import minimize

from .polycore import ParamVector, build_polys, order_condition_residuals, supnorm_error

__all__ = [
    "APPLICATIONS",
    "ConvergenceError",
    "ParamSet",
    "Objective",
    "seed_order_conditions",
    "basin_hop",
    "catalog_load",
    "catalog_store",
    "default_catalog_path",
    "find_set",
]

log = logging.getLogger(__name__)

APPLICATIONS = ("cz", "gkp_square", "gkp_qunaught", "gkp_hex", "magic", "mf", "generic")
SQRT_PI = float(np.sqrt(np.pi))


class ConvergenceError(RuntimeError):
    """Newton iteration did not reach the requested residual."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = np.asarray(residuals)


@dataclass
class ParamSet:
    """Named parameter vector with its intended use."""

    name: str
    entries: list
    t: float
    application: str = "generic"
    provenance: str = "optimized"
    objective: float | None = None
    repetitions: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = [float(v) for v in self.entries]
        if not np.all(np.isfinite(self.entries)):
            raise ValueError(f"set {self.name!r} has non-finite entries")
        if self.application not in APPLICATIONS:
            raise ValueError(f"unknown application {self.application!r}")
        if self.provenance not in ("bundled", "optimized"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def L(self) -> int:
        """Number of nonzero gates over all repetitions."""
        return int(np.count_nonzero(self.entries)) * self.repetitions

    def params(self) -> ParamVector:
        return ParamVector(self.entries, self.repetitions)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- order conditions


def _fd_jacobian(fun, x, h=1e-7):
    f0 = fun(x)
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return f0, J


def seed_order_conditions(m: int, order: int, free_params=None, tol: float = 1e-12, max_iter: int = 200) -> ParamVector:
    """Solve the order conditions through ``order`` for ``m`` gate pairs by damped Newton.

    Starts from the uniform Trotter point (all entries ``1/m``). ``free_params``
    pins the leading stored entries to the given values; the remaining entries
    are solved for, taking minimum-norm least-squares steps where the system is
    underdetermined or has dependent equations.

    :raises ValueError: if fewer unknowns than independent conditions remain
    :raises ConvergenceError: if the residual does not drop below ``sqrt(tol)``
    """
    if m < 1 or order < 1:
        raise ValueError("need m >= 1 and order >= 1")
    fixed = np.asarray([] if free_params is None else free_params, dtype=float).ravel()
    n_free = 2 * m - fixed.size
    if n_free < 1:
        raise ValueError("no unknowns left after pinning free parameters")

    def full(z):
        return np.concatenate([fixed, z])

    def res(z):
        return order_condition_residuals(full(z), order)

    # number of independent conditions: Jacobian rank at a generic point
    generic = 1.0 / m + 0.1 * np.sin(np.arange(1, 2 * m + 1))
    _, J_all = _fd_jacobian(lambda e: order_condition_residuals(e, order), generic)
    if np.linalg.matrix_rank(J_all, tol=1e-6) > n_free:
        raise ValueError("not enough degrees of freedom for the requested order")
    z = np.full(n_free, 1.0 / m)
    for _ in range(max_iter):
        r, J = _fd_jacobian(res, z)
        nr = np.linalg.norm(r)
        if nr < tol:
            break
        step = np.linalg.lstsq(J, -r, rcond=1e-10)[0]
        lam = 1.0
        while lam > 1e-6:
            if np.linalg.norm(res(z + lam * step)) < nr:
                break
            lam /= 2
        z = z + lam * step
    r = res(z)
    if np.linalg.norm(r) > np.sqrt(tol):
        raise ConvergenceError(f"Newton did not converge (residual {np.linalg.norm(r):.3e})", r)
    return ParamVector(full(z))


# ---------------------------------------------------------------- objectives


@dataclass(frozen=True)
class Objective:
    """Scheme-level figure of merit, smaller is better.

    ``kind`` is one of ``cz_worst_case``, ``gkp_fidelity_at_p0``, ``magic_fidelity``
    or ``supnorm``. Fidelity-type objectives return ``1 - F``.
    """

    kind: str
    t: float = SQRT_PI / 2
    k: float = float(np.sqrt(21 * np.pi / 4))
    d: float | None = None
    p0: float = 0.0
    t_max: float | None = None
    points: int = 4001
    repetitions: int = 1

    def __post_init__(self):
        if self.kind not in ("cz_worst_case", "gkp_fidelity_at_p0", "magic_fidelity", "supnorm"):
            raise ValueError(f"unknown objective {self.kind!r}")

    def __call__(self, entries) -> float:
        from . import schemes
        from .gkp import GkpSpec

        pv = ParamVector(np.asarray(entries, float), self.repetitions)
        if self.kind == "supnorm":
            return supnorm_error(build_polys(pv), self.t_max or SQRT_PI)
        if self.kind == "cz_worst_case":
            return 1.0 - schemes.cz_gate(pv).worst_case
        if self.kind == "magic_fidelity":
            x = np.linspace(-25, 25, self.points)
            return 1.0 - schemes.conditional_magic(pv, self.k, x=x, d=self.d or SQRT_PI).fidelity
        d = self.d or np.pi / self.t
        x = np.linspace(-25, 25, self.points)
        target = GkpSpec(d, self.k)
        return 1.0 - schemes.conditional_gkp(pv, self.t, self.k, p0=self.p0, x=x, target=target).fidelity


# ---------------------------------------------------------------- basin hopping


def _safe(objective, z):
    try:
        v = float(objective(z))
    except Exception as exc:  # noqa: BLE001 - any failure skips the hop
        log.warning("objective failed at %s: %s", np.round(z, 6), exc)
        return np.inf
    return v if np.isfinite(v) else np.inf


def _local(objective, z0, budget, tol):
    res = minimize(lambda z: _safe(objective, z), z0, method="Nelder-Mead",
                   options={"maxfev": budget, "xatol": tol, "fatol": tol})
    return np.asarray(res.x, float), float(res.fun)


def _hop(args):
    objective, z0, step, seed, budget, tol = args
    rng = np.random.default_rng(seed)
    trial = z0 + rng.normal(scale=step, size=z0.size)
    return _local(objective, trial, budget, tol)


def basin_hop(objective, x0, hops: int = 100, step_scale: float = 0.3, rng_seed: int = 0,
              temperature: float = 1.0, budget: int = 400, tol: float = 1e-8, batch: int = 8,
              executor: Executor | None = None, name: str = "optimized", application: str = "generic",
              t: float | None = None) -> ParamSet:
    """Seeded basin hopping with a simplex local search.

    Hops run in batches of ``batch``; every hop in a batch perturbs the current
    point with its own seeded stream. Candidates are ordered by ``(value, entries)``
    and offered to the Metropolis test in that order, so results do not depend on
    whether ``executor`` runs them concurrently. The best point ever seen is returned.

    :param objective: callable on a flat entry array (picklable if ``executor`` is a process pool)
    :param x0: :class:`ParamVector` or array of stored entries
    """
    entries0 = x0.entries if isinstance(x0, ParamVector) else np.asarray(x0, float)
    reps = x0.repetitions if isinstance(x0, ParamVector) else 1
    master = np.random.SeedSequence(rng_seed)
    accept_rng = np.random.default_rng(master.spawn(1)[0])
    cur, fcur = _local(objective, entries0.astype(float), budget, tol)
    best, fbest = cur.copy(), fcur
    history = [fbest]
    done = 0
    while done < hops:
        size = min(batch, hops - done)
        seeds = master.spawn(size)
        jobs = [(objective, cur, step_scale, s, budget, tol) for s in seeds]
        results = list(executor.map(_hop, jobs)) if executor is not None else [_hop(j) for j in jobs]
        results.sort(key=lambda r: (r[1], tuple(r[0])))
        for z, f in results:
            if f < fbest:
                best, fbest = z.copy(), f
            if np.isfinite(f) and (f <= fcur or accept_rng.random() < np.exp(-(f - fcur) / temperature)):
                cur, fcur = z, f
            history.append(fbest)
        done += size
    return ParamSet(name, list(best), t if t is not None else getattr(objective, "t", SQRT_PI / 2),
                    application, "optimized", fbest, reps, {"history": history, "seed": rng_seed})


# ---------------------------------------------------------------- catalog


def default_catalog_path():
    """Path of the catalog in use: ``$CVFORGE_CATALOG`` or the bundled file."""
    env = os.environ.get("CVFORGE_CATALOG")
    if env:
        return env
    return str(resources.files("cvforge").joinpath("data/catalog.json"))


def catalog_load(path=None) -> list[ParamSet]:
    """Read a JSON array of parameter-set records.

    :raises ValueError: on malformed content or duplicate names
    """
    path = default_catalog_path() if path is None else path
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed catalog {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise ValueError("catalog must be a JSON array")
    sets = []
    for rec in raw:
        try:
            sets.append(ParamSet(**rec))
        except TypeError as exc:
            raise ValueError(f"malformed catalog record {rec!r}") from exc
    names = [s.name for s in sets]
    if len(set(names)) != len(names):
        raise ValueError("duplicate set names in catalog")
    return sets


def catalog_store(sets, path) -> None:
    """Write sets sorted by name with stable key order."""
    names = [s.name for s in sets]
    if len(set(names)) != len(names):
        raise ValueError("duplicate set names")
    data = [s.to_dict() for s in sorted(sets, key=lambda s: s.name)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def find_set(name: str, sets=None) -> ParamSet:
    """Look up a set by name in ``sets`` or the default catalog.

    ``L7_square`` is accepted as an alias of ``square_L7``.
    """
    sets = catalog_load() if sets is None else sets
    m = re.fullmatch(r"L(\d+)_(\w+)", name)
    wanted = {name, f"{m.group(2)}_L{m.group(1)}"} if m else {name}
    for s in sets:
        if s.name in wanted:
            return s
    raise KeyError(f"no parameter set named {name!r}")
