"""Command-line front end: scenarios in, CSV trajectories and JSON reports out.

Subcommands::

    svinvopt gamma-star --sigma 1 --mu 1 --kappa 0 --r 1 --k 1 --Q 0.1
    svinvopt simulate scenario.ini [--csv out.csv] [--json out.json]
    svinvopt verify scenario.ini [--json report.json] [--sabotage-sign]
    svinvopt sweep --factor-min 0.6 --factor-max 10 --points 20 [--out sweep.csv]

Exit codes: 0 pass, 1 usage or parse error, 2 infeasible parameters,
3 divergence, 4 verification failure.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from . import functionals as fn
from . import verify as vf
from .model import (
    ControllerParams,
    InfeasibleParameters,
    PhysicalParams,
    assumption_A_margin,
    closed_loop_matrix,
    gamma_star,
    spectral_abscissa,
)
from .presets import PRESETS, initial_state
from .sim import (
    DivergenceError,
    HorizonTooShort,
    InputSignal,
    simulate_closed_loop,
    simulate_open_loop,
    total_cost_J,
)
from .spectral import wavenumbers

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_DIVERGENCE, EXIT_FAILED = 0, 1, 2, 3, 4
CSV_SCHEMA = 1
SEED_ENV = "SVINVOPT_SEED"

CHECKS = (
    "value_identity",
    "energy_identity",
    "decay",
    "monotone_V",
    "coercivity",
    "lemma2",
    "inverse_optimality",
    "mode_energy",
    "gain_margins",
    "tank_closed_form",
)


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario file."""


def _fmt(x) -> str:
    return format(float(x), ".17g")


# --- scenario --------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    phys: PhysicalParams = field(default_factory=PhysicalParams)
    ctrl: ControllerParams = field(default_factory=lambda: ControllerParams(gamma=3.0))
    m: int = 16
    preset: str = "mode1"
    amplitude: float = 1.0
    xi0: float = 0.0
    w0: float = 0.0
    coefficients: tuple | None = None
    T: float = 20.0
    dt: float = 1e-3
    method: str = "rk4"
    output_every: int = 1
    checks: tuple = CHECKS
    perturbations: int = 10
    seed: int = vf.DEFAULT_SEED
    csv: str | None = None
    json: str | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ScenarioError("numerics.m must be >= 1")
        if not (self.T > 0 and self.dt > 0):
            raise ScenarioError("numerics.T and numerics.dt must be > 0")
        if self.method not in ("rk4", "expm"):
            raise ScenarioError(f"numerics.method must be rk4 or expm, got {self.method!r}")
        if self.output_every < 1:
            raise ScenarioError("numerics.output_every must be >= 1")
        if self.coefficients is None and self.preset not in PRESETS:
            raise ScenarioError(f"initial.preset {self.preset!r} unknown; valid: {', '.join(PRESETS)}")
        bad = [c for c in self.checks if c not in CHECKS]
        if bad:
            raise ScenarioError(f"unknown check(s) {', '.join(bad)}; valid: {', '.join(CHECKS)}")

    def initial(self):
        return initial_state(
            self.preset, self.m, self.amplitude, self.xi0, self.w0, self.coefficients
        )

    def resolved(self) -> dict:
        d = asdict(self)
        d["gamma_star"] = _gamma_star_or_none(self.phys, self.ctrl)
        return d


def _gamma_star_or_none(phys, ctrl):
    try:
        return gamma_star(phys, ctrl.r, ctrl.k, ctrl.Q)
    except InfeasibleParameters:
        return None


_SCHEMA = {
    "physical": {"sigma": float, "mu": float, "kappa": float},
    "controller": {"gamma": float, "gamma_factor": float, "r": float, "k": float, "Q": float},
    "initial": {"preset": str, "amplitude": float, "xi0": float, "w0": float, "coefficients": str},
    "numerics": {"m": int, "T": float, "dt": float, "method": str, "output_every": int},
    "checks": {"names": str, "perturbations": int, "seed": str},
    "output": {"csv": str, "json": str},
}


def _read_ini(text: str, source: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (Q)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(str(exc)) from None
    out = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ScenarioError(f"{source}: unknown section [{sec}]; valid: {', '.join(_SCHEMA)}")
        out[sec] = {}
        for key, raw in cp.items(sec):
            conv = _SCHEMA[sec].get(key)
            if conv is None:
                raise ScenarioError(
                    f"{source}: unknown key {sec}.{key}; valid: {', '.join(_SCHEMA[sec])}"
                )
            try:
                out[sec][key] = conv(raw.strip())
            except ValueError:
                raise ScenarioError(
                    f"{source}: {sec}.{key} = {raw!r} is not a valid {conv.__name__}"
                ) from None
    return out


def _seed(value=None) -> int:
    env = os.environ.get(SEED_ENV)
    raw = env if env is not None else value
    if raw is None:
        return vf.DEFAULT_SEED
    try:
        return int(str(raw), 0)
    except ValueError:
        raise ScenarioError(f"seed {raw!r} is not an integer") from None


def load_scenario(path: str) -> Scenario:
    """Parse an INI scenario file; the resulting Scenario is fully resolved."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from None
    return scenario_from_text(text, path)


def scenario_from_text(text: str, source: str = "<scenario>") -> Scenario:
    cfg = _read_ini(text, source)
    phys_kw = cfg.get("physical", {})
    ctl = dict(cfg.get("controller", {}))
    ini = cfg.get("initial", {})
    num = cfg.get("numerics", {})
    chk = cfg.get("checks", {})
    outp = cfg.get("output", {})
    try:
        phys = PhysicalParams(**phys_kw)
        gamma = ctl.pop("gamma", None)
        factor = ctl.pop("gamma_factor", None)
        if gamma is not None and factor is not None:
            raise ScenarioError("give controller.gamma or controller.gamma_factor, not both")
        base = ControllerParams(gamma=1.0, **ctl)
        if gamma is None:
            gs = gamma_star(phys, base.r, base.k, base.Q)
            gamma = (factor if factor is not None else 1.5) * gs
        ctrl = base.with_gamma(gamma)
        coeffs = None
        if "coefficients" in ini:
            coeffs = tuple(float(c) for c in ini["coefficients"].replace(",", " ").split())
        names = CHECKS
        if "names" in chk:
            names = tuple(n.strip() for n in chk["names"].split(",") if n.strip())
        return Scenario(
            phys=phys,
            ctrl=ctrl,
            m=num.get("m", 16),
            preset=ini.get("preset", "mode1"),
            amplitude=ini.get("amplitude", 1.0),
            xi0=ini.get("xi0", 0.0),
            w0=ini.get("w0", 0.0),
            coefficients=coeffs,
            T=num.get("T", 20.0),
            dt=num.get("dt", 1e-3),
            method=num.get("method", "rk4"),
            output_every=num.get("output_every", 1),
            checks=names,
            perturbations=chk.get("perturbations", 10),
            seed=_seed(chk.get("seed")),
            csv=outp.get("csv"),
            json=outp.get("json"),
        )
    except InfeasibleParameters:
        raise
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"{source}: {exc}") from None


# --- output ----------------------------------------------------------------


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        _atomic_write(path, text)


def _to_json(obj) -> str:
    return json.dumps(vf._jsonable(obj), indent=2, allow_nan=True) + "\n"


def csv_columns(m: int) -> list:
    base = ["t", "xi", "w", "f", "V", "W", "q", "cost_q_int", "cost_f_int"]
    base += ["phi_L2", "phi_x_L2", "phi_xx_L2", "phi_t_L2"]
    return base + [f"a_{n}" for n in range(1, m + 1)] + [f"adot_{n}" for n in range(1, m + 1)]


def trajectory_table(traj, ctrl, phys) -> np.ndarray:
    """Rows of the CSV trajectory, columns as in :func:`csv_columns`."""
    m = traj.m
    X = traj.states
    k2 = wavenumbers(m) ** 2
    A, Adot = X[:, 2 : 2 + m], X[:, 2 + m :]
    Wm = fn.W_matrix(phys, ctrl.r, m)
    W = np.einsum("ij,jk,ik->i", X[:, 2:], Wm, X[:, 2:])
    q = np.einsum("ij,jk,ik->i", X, fn.q_matrix(phys, ctrl, m), X)
    cols = [
        traj.times,
        X[:, 0],
        X[:, 1],
        traj.f_values,
        traj.V_series,
        W,
        q,
        traj.cost_q_integral,
        traj.cost_f_integral,
        A**2 @ np.ones(m),
        A**2 @ k2,
        A**2 @ k2**2,
        Adot**2 @ np.ones(m),
    ]
    return np.column_stack(cols + [A, Adot])


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={CSV_SCHEMA}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


# --- commands --------------------------------------------------------------


def cmd_gamma_star(args) -> int:
    phys = PhysicalParams(args.sigma, args.mu, args.kappa)
    margin = assumption_A_margin(phys, args.r, args.k, args.Q)
    try:
        gs = gamma_star(phys, args.r, args.k, args.Q)
    except InfeasibleParameters:
        print(f"infeasible: assumption (A) margin {margin:.16f} <= 0", file=sys.stderr)
        print(f"margin {margin:.16f}")
        return EXIT_INFEASIBLE
    print(f"gamma_star {gs:.16f}")
    print(f"margin {margin:.16f}")
    return EXIT_OK


def _run_scenario(sc: Scenario, feedback_sign: float = 1.0):
    return simulate_closed_loop(
        sc.phys, sc.ctrl, sc.initial(), sc.T, sc.dt, sc.method, feedback_sign=feedback_sign
    )


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    traj = _run_scenario(sc, -1.0 if args.sabotage_sign else 1.0)
    rows = trajectory_table(traj, sc.ctrl, sc.phys)[:: sc.output_every]
    if (len(traj) - 1) % sc.output_every:
        rows = np.vstack([rows, trajectory_table(traj, sc.ctrl, sc.phys)[-1]])
    _emit(format_csv(csv_columns(sc.m), rows), args.csv or sc.csv)

    summary = {
        "version": __version__,
        "scenario": sc.resolved(),
        "terminal": dict(zip(csv_columns(sc.m), rows[-1])),
        "value_identity_residual": vf.check_value_identity(traj).residual,
    }
    V0 = traj.V_series[0]
    try:
        summary["J"] = total_cost_J(traj)
        summary["tail_ratio"] = traj.V_series[-1] / V0 if V0 > 0 else 0.0
    except HorizonTooShort as exc:
        summary["J"] = None
        summary["tail_ratio"] = exc.ratio
    rates = {}
    if V0 > 0:
        for name, series in (
            ("V", traj.V_series),
            ("weak_norm", vf.weak_norm_series(traj)),
            ("strong_norm", vf.strong_norm_series(traj)),
        ):
            try:
                rates[name] = vf.check_decay(traj.times, series).to_dict()
            except ValueError as exc:
                rates[name] = {"error": str(exc)}
    summary["decay"] = rates
    json_path = args.json or sc.json
    if json_path:
        _atomic_write(json_path, _to_json(summary))
    else:
        sys.stderr.write(_to_json(summary))
    return EXIT_OK


def _decay_reports(traj, label):
    out = []
    for name, series in (
        ("V", traj.V_series),
        ("weak_norm", vf.weak_norm_series(traj)),
        ("strong_norm", vf.strong_norm_series(traj)),
    ):
        kind = "V_weak" if name == "V" else "strong_norm"
        d = vf.check_decay(traj.times, series, kind, series_name=name)
        out.append(
            vf.VerificationReport(
                f"decay[{name}]{label}", -d.fitted_rate, 0.0, {"decay": d.to_dict()}
            )
        )
    return out


def run_checks(sc: Scenario, feedback_sign: float = 1.0) -> list:
    """Run the scenario's checks and return their reports in a fixed order."""
    rng = np.random.default_rng(sc.seed)
    phys, ctrl = sc.phys, sc.ctrl
    init = sc.initial()
    gs = gamma_star(phys, ctrl.r, ctrl.k, ctrl.Q)
    reports = []
    traj = None

    def closed():
        nonlocal traj
        if traj is None:
            traj = _run_scenario(sc, feedback_sign)
        return traj

    def failed(name, exc):
        return vf.VerificationReport(name, math.inf, 0.0, {"error": f"{type(exc).__name__}: {exc}"})

    for name in sc.checks:
        try:
            if name == "value_identity":
                reports.append(vf.check_value_identity(closed()))
            elif name == "energy_identity":
                f = InputSignal.random_piecewise(rng, 10, sc.T / 2, 1.0, compact=True)
                ol = simulate_open_loop(phys, init, f, sc.T / 2, 1e-2)
                for r in (-0.5, 0.0, 1.0, 2.0):
                    reports.append(vf.check_energy_identity(ol, r, phys))
            elif name == "decay":
                reports.extend(_decay_reports(closed(), ""))
            elif name == "monotone_V":
                V = closed().V_series
                rise = float(np.max(np.diff(V), initial=0.0)) / max(V[0], vf.REL_FLOOR)
                reports.append(vf.VerificationReport("monotone_V", rise, 1e-12, {}))
            elif name == "coercivity":
                # with Q = 0 the cost does not weigh the liquid: tank part only
                res = fn.coercivity_margin(phys, ctrl, sc.m if ctrl.Q > 0 else 0)
                tol = 0.0 if ctrl.gamma > gs else math.inf
                reports.append(
                    vf.VerificationReport(
                        "coercivity", -res.A_min, tol, {"A_min": res.A_min, "m": sc.m}
                    )
                )
            elif name == "lemma2":
                a = fn.lemma2_margin(phys, ctrl, sc.m)
                b = fn.coercivity_margin(phys, ctrl.with_gamma(2 * ctrl.gamma), sc.m).A_min
                reports.append(vf.VerificationReport("lemma2", abs(a - b), 1e-12, {"margin": a}))
            elif name == "inverse_optimality":
                perts = [
                    InputSignal.random_piecewise(
                        rng, int(rng.integers(2, 8)), sc.T / 4, 1.0, compact=True, grid=sc.dt
                    )
                    for _ in range(sc.perturbations)
                ]
                reports.append(
                    vf.check_inverse_optimality(
                        phys, ctrl, init, perts, sc.T, sc.dt, sc.method
                    )
                )
            elif name == "mode_energy":
                for n in range(1, min(4, sc.m) + 1):
                    reports.append(vf.check_mode_energy_envelope(closed(), phys, n))
            elif name == "gain_margins":
                factors = (0.6, 1.0, 10.0, 100.0)
                reports.extend(
                    vf.check_gain_margins(
                        phys, ctrl.r, ctrl.k, ctrl.Q, init, [f * gs for f in factors], sc.T
                    )
                )
            elif name == "tank_closed_form":
                tank = ControllerParams(ctrl.gamma, ctrl.r, ctrl.k, 0.0)
                x0 = init.as_vector().copy()
                x0[0], x0[1] = (sc.xi0, sc.w0) if (sc.xi0 or sc.w0) else (1.0, 0.0)
                tr = simulate_closed_loop(phys, tank, x0, sc.T, sc.dt, "expm")
                xi, w = vf.tank_feedback_solution(tank.gamma, tank.k, x0[0], x0[1], tr.times)
                err = np.max(np.hypot(tr.states[:, 0] - xi, tr.states[:, 1] - w))
                scale = max(np.hypot(x0[0], x0[1]), vf.REL_FLOOR)
                reports.append(vf.VerificationReport("tank_closed_form", err / scale, 1e-10, {}))
        except (DivergenceError, HorizonTooShort) as exc:
            reports.append(failed(name, exc))
    return reports


def cmd_verify(args) -> int:
    sc = load_scenario(args.scenario)
    gamma_star(sc.phys, sc.ctrl.r, sc.ctrl.k, sc.ctrl.Q)  # raises if infeasible
    if args.checks:
        sc = replace(sc, checks=tuple(c.strip() for c in args.checks.split(",") if c.strip()))
    reports = run_checks(sc, -1.0 if args.sabotage_sign else 1.0)
    doc = {
        "version": __version__,
        "seed": sc.seed,
        "scenario": sc.resolved(),
        "reports": [r.to_dict() for r in reports],
    }
    path = args.json or sc.json
    text = _to_json(doc)
    _emit(text, path)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.check_name} residual={r.residual:.3e} tol={r.tolerance:.1e}", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


SWEEP_COLUMNS = ["gamma", "gamma_over_gamma_star", "abscissa", "A_min", "fitted_rate"]


def cmd_sweep(args) -> int:
    phys = PhysicalParams(args.sigma, args.mu, args.kappa)
    gs = gamma_star(phys, args.r, args.k, args.Q)
    if args.gamma_min is not None or args.gamma_max is not None:
        if args.gamma_min is None or args.gamma_max is None:
            raise ScenarioError("--gamma-min and --gamma-max go together")
        lo, hi = args.gamma_min, args.gamma_max
    else:
        lo, hi = args.factor_min * gs, args.factor_max * gs
    if args.points <= 0 or lo > hi:
        gammas = np.empty(0)
    elif args.log:
        gammas = np.geomspace(lo, hi, args.points)
    else:
        gammas = np.linspace(lo, hi, args.points)
    init = initial_state(args.init, args.m, xi0=1.0)
    rows = []
    for g in gammas:
        ctrl = ControllerParams(float(g), args.r, args.k, args.Q)
        absc = spectral_abscissa(closed_loop_matrix(phys, ctrl, args.m))
        a_min = fn.coercivity_margin(phys, ctrl, args.m if args.Q > 0 else 0).A_min
        try:
            tr = simulate_closed_loop(phys, ctrl, init, args.T, args.dt, "expm")
            rate = vf.check_decay(tr.times, tr.V_series).fitted_rate
        except DivergenceError:
            rate = -math.inf
        rows.append([g, g / gs, absc, a_min, rate])
    _emit(format_csv(SWEEP_COLUMNS, rows), args.out)
    return EXIT_OK


# --- parser ----------------------------------------------------------------


def _add_params(p):
    p.add_argument("--sigma", type=float, default=1.0, help="surface tension (default 1)")
    p.add_argument("--mu", type=float, default=1.0, help="viscosity (default 1)")
    p.add_argument("--kappa", type=float, default=0.0, help="wall friction (default 0)")
    p.add_argument("--r", type=float, default=1.0, help="functional weight (default 1)")
    p.add_argument("--k", type=float, default=1.0, help="tank gain (default 1)")
    p.add_argument("--Q", type=float, default=0.1, help="liquid weight (default 0.1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svinvopt",
        description="Inverse-optimal feedback for a tank carrying viscous liquid.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gamma-star", help="critical gain and feasibility margin")
    _add_params(p)
    p.set_defaults(func=cmd_gamma_star)

    p = sub.add_parser("simulate", help="closed-loop run to CSV plus JSON summary")
    p.add_argument("scenario", help="INI scenario file")
    p.add_argument("--csv", help="trajectory output (default: [output] csv, else stdout)")
    p.add_argument("--json", help="summary output (default: [output] json, else stderr)")
    p.add_argument("--sabotage-sign", action="store_true", help="debug: flip the feedback sign")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run verification checks, JSON report array")
    p.add_argument("scenario", help="INI scenario file")
    p.add_argument("--json", help="report output (default: [output] json, else stdout)")
    p.add_argument("--checks", help=f"comma list overriding the scenario; valid: {', '.join(CHECKS)}")
    p.add_argument("--sabotage-sign", action="store_true", help="debug: flip the feedback sign")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser(
        "sweep",
        help="stability across gains",
        description="One CSV row per gain with columns: gamma, gamma_over_gamma_star, "
        "abscissa (closed-loop spectral abscissa), A_min (coercivity margin of q; "
        "tank part only when Q = 0), "
        "fitted_rate (decay rate of V fitted on [T/4, T]).",
    )
    _add_params(p)
    p.add_argument("--m", type=int, default=16, help="modes retained (default 16)")
    p.add_argument("--factor-min", type=float, default=0.6, help="lowest gain / gamma*")
    p.add_argument("--factor-max", type=float, default=10.0, help="highest gain / gamma*")
    p.add_argument("--gamma-min", type=float, help="lowest absolute gain (overrides factors)")
    p.add_argument("--gamma-max", type=float, help="highest absolute gain")
    p.add_argument("--points", type=int, default=20, help="number of gains (default 20)")
    p.add_argument("--log", action="store_true", help="geometric spacing")
    p.add_argument("--init", default="mode1", choices=PRESETS, help="liquid preset")
    p.add_argument("--T", type=float, default=20.0, help="horizon for the decay fit")
    p.add_argument("--dt", type=float, default=1e-2, help="exact-integrator step")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InfeasibleParameters as exc:
        print(f"infeasible parameters: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
