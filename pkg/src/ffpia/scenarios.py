"""Scenario catalog, configuration and reporting for the command line.

Configuration is a flat JSON object; unknown keys are rejected.  See
``CONFIG_DEFAULTS`` for every accepted key and its default.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis as an
from . import circuits as cc
from . import quadnet as qn
from . import sampling as sp
from .quadnet import V0

SCHEMA_VERSION = 1
CROSS_ENGINE_TOL = 1e-10
MC_SIGMAS = 5.0
MC_BATCHES = 20

CONFIG_DEFAULTS = {
    "scenario": None,
    "engine": "both",
    "gain": 2.0,
    "reflectivity": None,
    "theta": 0.0,
    "ancilla_db": -5.0,          # null: infinitely squeezed ancillas (ideal amplifier)
    "anti_excess_db": 0.0,
    "excitations": None,         # list of {"mode", "axis", "amplitude"}; scenario default if null
    "imperfections": False,
    "main_path_loss": 0.07,
    "homodyne_efficiency": 0.99,
    "visibility": 0.98,
    "final_bs_R": 0.5,
    "kl_pairs": [[1, 2], [2, 3], [1, 3], [3, 5]],
    "scan_points": 20000,
    "shots": 100000,
    "seed": 20111,
    "out": "out",
}

ENGINES = ("analytic", "montecarlo", "both")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    engine: str = "both"
    gain: float | None = 2.0
    reflectivity: float | None = None
    theta: float = 0.0
    ancilla_db: float | None = -5.0
    anti_excess_db: float = 0.0
    excitations: tuple | None = None
    imperfections: bool = False
    main_path_loss: float = 0.07
    homodyne_efficiency: float = 0.99
    visibility: float = 0.98
    final_bs_R: float = 0.5
    kl_pairs: tuple = ((1, 2), (2, 3), (1, 3), (3, 5))
    scan_points: int = 20000
    shots: int = 100000
    seed: int = 20111
    out: str = "out"

    @property
    def imperfection_model(self) -> cc.ImperfectionModel | None:
        if not self.imperfections:
            return None
        return cc.ImperfectionModel(self.main_path_loss, self.homodyne_efficiency, self.visibility)

    def pia_params(self) -> cc.PiaParams:
        anc = -math.inf if self.ancilla_db is None else self.ancilla_db
        return cc.PiaParams(gain=self.gain, reflectivity=self.reflectivity, theta=self.theta,
                            ancilla_A_dB=anc, ancilla_B_dB=anc,
                            anti_excess_dB=self.anti_excess_db,
                            imperfections=self.imperfection_model)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in CONFIG_DEFAULTS}
        d["kl_pairs"] = [list(p) for p in self.kl_pairs]
        if self.excitations is not None:
            d["excitations"] = [dict(e) for e in self.excitations]
        return d


def parse_config(text: str, overrides: dict | None = None) -> ScenarioConfig:
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ConfigError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(raw, overrides)


def config_from_dict(raw: dict, overrides: dict | None = None) -> ScenarioConfig:
    raw = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    problems = validate_dict(raw)
    if problems:
        raise ConfigError("; ".join(problems))
    d = {k: raw.get(k, v) for k, v in CONFIG_DEFAULTS.items()}
    if "reflectivity" in raw and raw["reflectivity"] is not None and "gain" not in raw:
        d["gain"] = None
    d["kl_pairs"] = tuple(tuple(p) for p in d["kl_pairs"])
    if d["excitations"] is not None:
        d["excitations"] = tuple(
            {"mode": str(e["mode"]), "axis": e["axis"], "amplitude": float(e.get("amplitude", 1.0))}
            for e in d["excitations"])
    return ScenarioConfig(**d)


def validate_dict(raw: dict) -> list[str]:
    """Return a list of diagnostics; empty means the config is valid."""
    out = []
    for k in raw:
        if k not in CONFIG_DEFAULTS:
            out.append(f"unknown key {k!r}")
    name = raw.get("scenario")
    if name is None:
        out.append("key 'scenario' is required")
    elif name not in CATALOG:
        out.append(f"unknown scenario {name!r}")
    if raw.get("engine", "both") not in ENGINES:
        out.append(f"key 'engine': must be one of {ENGINES}")
    if raw.get("gain") is not None and raw.get("reflectivity") is not None:
        out.append("keys 'gain' and 'reflectivity' are both set; give one")
    g, r = raw.get("gain"), raw.get("reflectivity")
    if g is not None and (not _num(g) or g < 1):
        out.append("key 'gain': must be a number >= 1")
    if r is not None and (not _num(r) or not 0 < r <= 1):
        out.append("key 'reflectivity': must be in (0, 1]")
    a = raw.get("ancilla_db", -5.0)
    if a is not None and (not _num(a) or a > 0):
        out.append("key 'ancilla_db': must be a number <= 0 or null")
    for k in ("main_path_loss", "homodyne_efficiency", "visibility", "final_bs_R"):
        v = raw.get(k, CONFIG_DEFAULTS[k])
        if not _num(v) or not 0 <= v <= 1:
            out.append(f"key {k!r}: must be in [0, 1]")
    for k in ("shots", "scan_points", "seed"):
        v = raw.get(k, CONFIG_DEFAULTS[k])
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            out.append(f"key {k!r}: must be a non-negative integer")
    if isinstance(raw.get("shots", 1), int) and raw.get("shots", 100) < 2 * MC_BATCHES:
        out.append(f"key 'shots': need at least {2 * MC_BATCHES}")
    if raw.get("anti_excess_db", 0.0) is None or not _num(raw.get("anti_excess_db", 0.0)) \
            or raw.get("anti_excess_db", 0.0) < 0:
        out.append("key 'anti_excess_db': must be a number >= 0")
    exc = raw.get("excitations")
    if exc is not None:
        if not isinstance(exc, list):
            out.append("key 'excitations': must be a list")
        else:
            for i, e in enumerate(exc):
                if not isinstance(e, dict) or set(e) - {"mode", "axis", "amplitude"} \
                        or str(e.get("mode")) not in ("1", "2") or e.get("axis") not in ("x", "p"):
                    out.append(f"key 'excitations'[{i}]: need mode '1'|'2', axis 'x'|'p', amplitude")
    pairs = raw.get("kl_pairs", CONFIG_DEFAULTS["kl_pairs"])
    if not isinstance(pairs, list) or not all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(v, int) for v in p)
            and 1 <= p[0] < p[1] for p in pairs):
        out.append("key 'kl_pairs': need a list of [K, L] with 1 <= K < L")
    return out


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


# ---------------------------------------------------------------- reporting

@dataclass
class ReportRow:
    scenario: str
    case: str
    quantity: str
    unit: str = ""
    analytic: float | None = None
    gaussian: float | None = None
    montecarlo: float | None = None
    mc_stderr: float | None = None
    reference: float | None = None
    reference_tol: float | None = None
    experiment: str = ""

    @property
    def cross_engine_diff(self) -> float | None:
        if self.analytic is None or self.gaussian is None:
            return None
        return abs(self.analytic - self.gaussian)

    @property
    def mc_deviation(self) -> float | None:
        """|analytic - MC| in standard errors."""
        if self.analytic is None or self.montecarlo is None or not self.mc_stderr:
            return None
        return abs(self.analytic - self.montecarlo) / self.mc_stderr

    @property
    def passed(self) -> bool:
        ok = True
        d = self.cross_engine_diff
        if d is not None:
            ok &= d <= CROSS_ENGINE_TOL * max(1.0, abs(self.analytic))
        if self.analytic is not None and self.montecarlo is not None:
            se = self.mc_stderr or 0.0
            ok &= abs(self.analytic - self.montecarlo) <= MC_SIGMAS * se + 1e-12
        if self.reference is not None:
            val = self.analytic if self.analytic is not None else self.montecarlo
            tol = self.reference_tol or 0.0
            if self.analytic is None and self.mc_stderr:
                tol = max(tol, MC_SIGMAS * self.mc_stderr)
            ok &= abs(val - self.reference) <= tol
        return bool(ok)


CSV_COLUMNS = ["schema_version", "scenario", "case", "quantity", "unit", "analytic", "gaussian",
               "cross_engine_diff", "montecarlo", "mc_stderr", "mc_deviation_se", "reference",
               "reference_tol", "experiment", "pass"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in (
            SCHEMA_VERSION, r.scenario, r.case, r.quantity, r.unit, r.analytic, r.gaussian,
            r.cross_engine_diff, r.montecarlo, r.mc_stderr, r.mc_deviation, r.reference,
            r.reference_tol, r.experiment, r.passed)])
    return buf.getvalue()


@dataclass
class Report:
    config: ScenarioConfig
    rows: list = field(default_factory=list)
    scans: list = field(default_factory=list)    # (case, label, ScanDataset)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.config.scenario,
            "config": self.config.to_dict(),
            "rows": len(self.rows),
            "failed": [f"{r.case}/{r.quantity}" for r in self.rows if not r.passed],
            "passed": self.passed,
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(rows_to_csv(self.rows))
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        if self.scans:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["phase_rad", "outcome", "mode"])
            for case, label, ds in self.scans:
                for ph, q in zip(ds.phases, ds.outcomes):
                    w.writerow([repr(float(ph)), repr(float(q)), f"{case}:{label}"])
            (out / "scan.csv").write_text(buf.getvalue())
        return out


# ---------------------------------------------------------------- evaluation

Fn = Callable[[np.ndarray, np.ndarray], float]


@dataclass
class Quantity:
    name: str
    fn: Fn
    unit: str = ""
    reference: float | None = None
    reference_tol: float | None = None
    experiment: str = ""


def _analytic_moments(program):
    net, ens = cc.to_network(program)
    return qn.output_moments(net, ens)


def evaluate(scenario: str, case: str, program: cc.Program | None, quantities: list[Quantity],
             cfg: ScenarioConfig, rng: np.random.Generator) -> list[ReportRow]:
    """Compute every quantity on the requested engines."""
    rows = [ReportRow(scenario, case, q.name, q.unit, reference=q.reference, reference_tol=q.reference_tol,
                      experiment=q.experiment) for q in quantities]
    analytic = cfg.engine in ("analytic", "both")
    mc = cfg.engine in ("montecarlo", "both")
    finite = program is not None and all(
        math.isfinite(s.s_db) for s in program.inputs if s.kind == "squeezed")
    if analytic:
        m, c = _analytic_moments(program)
        for r, q in zip(rows, quantities):
            r.analytic = float(q.fn(m, c))
        if finite:
            st = cc.to_gaussian(program)
            for r, q in zip(rows, quantities):
                r.gaussian = float(q.fn(st.mean, st.cov))
    if mc and finite:
        res = sp.monte_carlo_circuit(program, cfg.shots, rng, return_samples=True)
        x = res.samples
        for r, q in zip(rows, quantities):
            r.montecarlo = float(q.fn(res.mean, res.cov))
            vals = [q.fn(b.mean(axis=0), np.cov(b, rowvar=False))
                    for b in np.array_split(x, MC_BATCHES)]
            r.mc_stderr = float(np.std(vals, ddof=1) / math.sqrt(MC_BATCHES))
    return rows


def formula_rows(scenario, case, items) -> list[ReportRow]:
    """Rows for closed-form values (no circuit): ``(name, value, reference, tol)``."""
    return [ReportRow(scenario, case, n, "", analytic=float(v), reference=p, reference_tol=t)
            for n, v, p, t in items]


def _var_db(i, ref=V0) -> Fn:
    return lambda m, c: an.variance_db(c[i, i], ref)


def _pia_program(cfg: ScenarioConfig) -> cc.Program:
    if cfg.ancilla_db is None:
        p = cfg.pia_params()
        return cc.build_ideal_pia_program(p.G, cfg.theta, cfg.imperfection_model)
    return cc.build_pia_program(cfg.pia_params())


def _cloner_program(cfg: ScenarioConfig) -> cc.Program:
    if cfg.ancilla_db is None:
        return cc.build_ideal_cloner_program(cfg.final_bs_R, cfg.imperfection_model)
    p = cfg.pia_params()
    return cc.build_cloner_program(cc.ClonerParams(p, cfg.final_bs_R))


def _ideal(cfg) -> bool:
    return cfg.ancilla_db is None and not cfg.imperfections


def _gain2(cfg) -> bool:
    return abs(cfg.pia_params().G - 2.0) < 1e-12 and cfg.theta == 0


DEFAULT_EXCITATIONS = (
    {"mode": "1", "axis": "x", "amplitude": 1.0},
    {"mode": "1", "axis": "p", "amplitude": 1.0},
    {"mode": "2", "axis": "x", "amplitude": 1.0},
    {"mode": "2", "axis": "p", "amplitude": 1.0},
)


def _excite(prog, e):
    amp = e["amplitude"]
    return prog.displaced(e["mode"], amp if e["axis"] == "x" else 0.0,
                          amp if e["axis"] == "p" else 0.0)


def _qi(mode: int, axis: str) -> int:
    return 2 * mode + (0 if axis == "x" else 1)


# ---------------------------------------------------------------- scenarios

def pia_output_vacuum(cfg, rng):
    prog = _pia_program(cfg)
    ideal, g2 = _ideal(cfg), _gain2(cfg)
    qs = [Quantity(f"var_{a}{m + 1}_db", _var_db(_qi(m, a)), "dB",
                   reference=an.variance_db(3 * V0) if ideal and g2 else None,
                   reference_tol=0.05 if ideal and g2 else None)
          for m in (0, 1) for a in ("x", "p")]
    return evaluate("pia-output-vacuum", "vacuum", prog, qs, cfg, rng)


def pia_output_coherent(cfg, rng):
    base = _pia_program(cfg)
    rows = []
    g2 = _gain2(cfg) and not cfg.imperfections
    for e in cfg.excitations or DEFAULT_EXCITATIONS:
        prog = _excite(base, e)
        src = int(e["mode"]) - 1
        sig, idl = _qi(src, e["axis"]), _qi(1 - src, e["axis"])
        qs = [Quantity(f"mean_{a}{m + 1}", (lambda i: lambda mu, c: mu[i])(_qi(m, a)))
              for m in (0, 1) for a in ("x", "p")]
        qs.append(Quantity("signal_idler_power_diff_db",
                           lambda mu, c, s=sig, i=idl: 10 * math.log10(mu[s] ** 2 / mu[i] ** 2),
                           "dB", reference=10 * math.log10(2) if g2 else None,
                           reference_tol=0.05 if g2 else None))
        rows += evaluate("pia-output-coherent", f"excite_{e['axis']}{e['mode']}", prog, qs, cfg, rng)
    return rows


def _epr_quantities(i, j, tag, ideal_ref=None):
    def ev(name):
        return lambda m, c: an.epr_variances(c, i, j).db()[name]
    qs = []
    for name in ("x_minus", "p_plus", "x_plus", "p_minus"):
        p = None if ideal_ref is None else ideal_ref.get(name)
        qs.append(Quantity(f"{tag}{name}_db", ev(name), "dB", reference=p,
                           reference_tol=None if p is None else 1e-6))
    qs.append(Quantity(f"{tag}duan_margin_db", lambda m, c: an.duan_witness(c, i, j).margin_dB, "dB"))
    return qs


def pia_epr(cfg, rng):
    prog = _pia_program(cfg)
    ref = None
    if _gain2(cfg) and not cfg.imperfections and cfg.ancilla_db == 0:
        # vacuum ancillas: squeezed pair sits exactly at the summed shot noise
        ref = {"x_minus": 0.0, "p_plus": 0.0}
    qs = _epr_quantities(0, 1, "", ref)
    qs.append(Quantity("simon_min_eig", lambda m, c: an.simon_ppt_min_eig(c, [0])))
    return evaluate("pia-epr", "vacuum", prog, qs, cfg, rng)


def _rec_quantities(mode, ideal, mean_in=None):
    tag = f"rec{mode + 1}_"
    p = 0.0 if ideal else None
    qs = [Quantity(tag + "x_db", lambda m, c: an.reconstruct_pia(m, c, mode).db_x, "dB",
                   reference=p, reference_tol=1e-9 if ideal else None),
          Quantity(tag + "p_db", lambda m, c: an.reconstruct_pia(m, c, mode).db_p, "dB",
                   reference=p, reference_tol=1e-9 if ideal else None)]
    if mean_in is not None:
        qs += [Quantity(tag + "mean_x", lambda m, c: an.reconstruct_pia(m, c, mode).mean_x,
                        reference=mean_in[0], reference_tol=1e-12),
               Quantity(tag + "mean_p", lambda m, c: an.reconstruct_pia(m, c, mode).mean_p,
                        reference=mean_in[1], reference_tol=1e-12)]
    return qs


def pia_reconstruct_vacuum(cfg, rng):
    if not _gain2(cfg):
        raise ConfigError("reconstruction scenarios need gain 2 and theta 0")
    prog = _pia_program(cfg)
    qs = _rec_quantities(0, _ideal(cfg)) + _rec_quantities(1, _ideal(cfg))
    return evaluate("pia-reconstruct-vacuum", "vacuum", prog, qs, cfg, rng)


def pia_reconstruct_coherent(cfg, rng):
    if not _gain2(cfg):
        raise ConfigError("reconstruction scenarios need gain 2 and theta 0")
    base = _pia_program(cfg)
    rows = []
    exact = not cfg.imperfections
    for e in cfg.excitations or DEFAULT_EXCITATIONS:
        prog = _excite(base, e)
        qs = []
        for mode in (0, 1):
            s = prog.input(str(mode + 1))
            qs += _rec_quantities(mode, _ideal(cfg), s.mean if exact else None)
        rows += evaluate("pia-reconstruct-coherent", f"excite_{e['axis']}{e['mode']}", prog, qs,
                         cfg, rng)
    return rows


def _scan_rows(scenario, prog, modes, cfg, rng, scans, case):
    """Sample phase scans of the outcome-averaged outputs and fit them."""
    rows = []
    if not all(math.isfinite(s.s_db) for s in prog.inputs if s.kind == "squeezed"):
        raise ConfigError("phase scans need finite ancilla squeezing")
    state = cc.to_gaussian(prog)
    m_an, c_an = _analytic_moments(prog)
    phases = sp.scan_phases(cfg.scan_points)
    for idx, label in modes:
        ds = sp.sample_scan(state, idx, phases, rng, label)
        scans.append((case, label, ds))
        fit = sp.fit_moments(ds)
        truth = [m_an[2 * idx], m_an[2 * idx + 1], c_an[2 * idx, 2 * idx],
                 c_an[2 * idx + 1, 2 * idx + 1], c_an[2 * idx, 2 * idx + 1]]
        for name, t, v, se in zip(("mean_x", "mean_p", "var_x", "var_p", "cov_xp"),
                                  truth, fit.params, fit.stderr):
            rows.append(ReportRow(scenario, case, f"{label}_{name}", analytic=float(t),
                                  montecarlo=float(v), mc_stderr=float(se)))
    return rows


def pia_phase_scan(cfg, rng, scans):
    exc = (cfg.excitations or ({"mode": "1", "axis": "x", "amplitude": 1.0},))[0]
    prog = _excite(_pia_program(cfg), exc)
    rows = _scan_rows("pia-phase-scan", prog, [(0, "out1"), (1, "out2")], cfg, rng, scans,
                      f"excite_{exc['axis']}{exc['mode']}")
    # the input itself, for the phase-flip comparison
    inp = prog.input(exc["mode"]).state()
    ds = sp.sample_scan(inp, 0, sp.scan_phases(cfg.scan_points), rng, "in")
    scans.append((f"excite_{exc['axis']}{exc['mode']}", "in", ds))
    return rows


def _fid(n):
    # plug-in estimator; sampled noise may dip slightly below zero
    return 1.0 / (1.0 + n)


def _clone_quantities(ideal):
    qs = []
    for k, lab in enumerate(("cln1", "cln2", "acln")):
        for a in ("x", "p"):
            p = None
            if ideal and lab != "acln":
                p = an.variance_db(2 * V0)
            elif ideal:
                p = an.variance_db(3 * V0)
            qs.append(Quantity(f"{lab}_var_{a}_db", _var_db(_qi(k, a)), "dB", reference=p,
                               reference_tol=None if p is None else 1e-9))
    for k, lab in enumerate(("cln1", "cln2")):
        qs.append(Quantity(f"{lab}_noise_n",
                           lambda m, c, k=k: an.clone_noise(c[2 * k, 2 * k], c[2 * k + 1, 2 * k + 1]),
                           reference=0.5 if ideal else None, reference_tol=1e-9 if ideal else None))
        qs.append(Quantity(f"{lab}_fidelity",
                           lambda m, c, k=k: _fid(an.clone_noise(c[2 * k, 2 * k],
                                                                  c[2 * k + 1, 2 * k + 1])),
                           reference=2 / 3 if ideal else None, reference_tol=1e-9 if ideal else None))
    return qs


def clone_output(cfg, rng):
    prog = _cloner_program(cfg)
    rows = evaluate("clone-output", "vacuum", prog, _clone_quantities(_ideal(cfg)), cfg, rng)
    # mean transfer of each clone, from a displaced original
    dprog = prog.displaced("1", 1.0, 0.5)
    qs = [Quantity(f"{lab}_mean_gain",
                   lambda m, c, k=k: an.mean_gain(m, k, (1.0, 0.5)),
                   reference=1.0 if not cfg.imperfections else None,
                   reference_tol=1e-9 if not cfg.imperfections else None)
          for k, lab in enumerate(("cln1", "cln2", "acln"))]
    # noise referred back to the input through the measured mean gain
    for k, lab in enumerate(("cln1", "cln2")):
        qs.append(Quantity(
            f"{lab}_fidelity_input_referred",
            lambda m, c, k=k: _fid(an.input_referred_noise(
                c[2 * k, 2 * k], c[2 * k + 1, 2 * k + 1], an.mean_gain(m, k, (1.0, 0.5)))),
            experiment="0.63+-0.01"))
    return rows + evaluate("clone-output", "displaced", dprog, qs, cfg, rng)


def clone_epr(cfg, rng):
    prog = _cloner_program(cfg)
    qs = []
    for k, lab in ((0, "cln1"), (1, "cln2")):
        qs += _epr_quantities(k, 2, f"{lab}_acln_")
    qs.append(Quantity("cln1_cln2_duan_margin_db", lambda m, c: an.duan_witness(c, 0, 1).margin_dB,
                       "dB"))
    for part, name in (([0], "cln1|cln2,acln"), ([1], "cln2|cln1,acln"), ([2], "acln|cln1,cln2")):
        qs.append(Quantity(f"simon_min_eig[{name}]",
                           lambda m, c, part=part: an.simon_ppt_min_eig(c, part)))
    return evaluate("clone-epr", "vacuum", prog, qs, cfg, rng)


def clone_reconstruct(cfg, rng):
    prog = _cloner_program(cfg)
    ideal = _ideal(cfg)
    qs = [Quantity("rec_x_db", lambda m, c: an.reconstruct_clone(m, c).db_x, "dB",
                   reference=0.0 if ideal else None, reference_tol=1e-9 if ideal else None),
          Quantity("rec_p_db", lambda m, c: an.reconstruct_clone(m, c).db_p, "dB",
                   reference=0.0 if ideal else None, reference_tol=1e-9 if ideal else None),
          Quantity("rec_fidelity", lambda m, c: _fid(an.reconstruct_clone(m, c).noise),
                   reference=1.0 if ideal else None, reference_tol=1e-9 if ideal else None,
                   experiment="0.74+-0.01")]
    rows = evaluate("clone-reconstruct", "vacuum", prog, qs, cfg, rng)
    if not cfg.imperfections:
        dprog = prog.displaced("1", 1.0, 0.5)
        qs = [Quantity("rec_mean_x", lambda m, c: an.reconstruct_clone(m, c).mean_x,
                       reference=1.0, reference_tol=1e-12),
              Quantity("rec_mean_p", lambda m, c: an.reconstruct_clone(m, c).mean_p,
                       reference=0.5, reference_tol=1e-12)]
        rows += evaluate("clone-reconstruct", "displaced", dprog, qs, cfg, rng)
    return rows


def clone_phase_scan(cfg, rng, scans):
    prog = _cloner_program(cfg).displaced("1", 1.0, 0.5)
    return _scan_rows("clone-phase-scan", prog, [(0, "cln1"), (1, "cln2"), (2, "acln")],
                      cfg, rng, scans, "displaced")


def kl_limits(cfg, rng):
    rows = []
    for K, L in cfg.kl_pairs:
        case = f"K{K}_L{L}"
        n = an.kl_symmetric_noise(K, L)
        rows += formula_rows("kl-limits", case, [
            ("symmetric_noise", n, 1 / K - 1 / L, 1e-12),
            ("limit_fidelity", an.fidelity(n), K * L / (K * L - K + L), 1e-12),
            ("classical_fidelity", an.kl_classical_fidelity(K), K / (K + 1), 1e-12),
            ("gain", an.asymmetric_gain([n] * L), L / K, 1e-12),
        ])
        # the bound is a property of the ideal circuit; ancilla settings do not apply here
        params = cc.KlClonerParams(K, L)
        prog = cc.build_kl_program(params)
        qs = [Quantity(f"cln{k + 1}_noise_n",
                       lambda m, c, k=k: an.clone_noise(c[2 * k, 2 * k], c[2 * k + 1, 2 * k + 1]),
                       reference=n, reference_tol=1e-9) for k in range(L)]
        qs.append(Quantity("noise_relation_residual",
                           lambda m, c, L=L, K=K: an.kl_noise_relation(
                               [max(an.clone_noise(c[2 * k, 2 * k], c[2 * k + 1, 2 * k + 1]), 0.0)
                                for k in range(L)], K, L),
                           reference=0.0, reference_tol=1e-10))
        rows += _analytic_only(evaluate("kl-limits", case, prog, qs, cfg, rng), cfg)
        dprog = cc.build_kl_program(params, original=(1.0, 0.5))
        qs = [Quantity(f"{lab}_mean_{a}", (lambda i: lambda m, c: m[i])(2 * k + (a == "p")),
                       reference=(1.0 if a == "x" else (0.5 if lab.startswith("cln") else -0.5)),
                       reference_tol=1e-9)
              for k, lab in enumerate(dprog.outputs) for a in ("x", "p")]
        rows += evaluate("kl-limits", case + "_displaced", dprog, qs, cfg, rng)
    return rows


def _analytic_only(rows, cfg):
    # the Monte Carlo noise relation residual is not an unbiased estimator of zero
    for r in rows:
        if r.quantity == "noise_relation_residual" and r.analytic is not None:
            r.montecarlo = r.mc_stderr = None
    return rows


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    runner: Callable
    scans: bool = False


CATALOG = {s.name: s for s in (
    Scenario("pia-output-vacuum", "amplifier output powers for vacuum inputs", pia_output_vacuum),
    Scenario("pia-output-coherent", "amplifier outputs for single-quadrature excitations",
             pia_output_coherent),
    Scenario("pia-epr", "two-mode squeezing between amplifier outputs", pia_epr),
    Scenario("pia-reconstruct-vacuum", "electrical inverse of the amplifier, vacuum inputs",
             pia_reconstruct_vacuum),
    Scenario("pia-reconstruct-coherent", "electrical inverse of the amplifier, excited inputs",
             pia_reconstruct_coherent),
    Scenario("pia-phase-scan", "phase-scanned homodyne tomography of amplifier outputs",
             pia_phase_scan, scans=True),
    Scenario("clone-output", "clone and anticlone powers, added noise and fidelity",
             clone_output),
    Scenario("clone-epr", "clone/anticlone correlations and entanglement witnesses", clone_epr),
    Scenario("clone-reconstruct", "reconstruction of the original from all three outputs",
             clone_reconstruct),
    Scenario("clone-phase-scan", "phase-scanned homodyne tomography of the cloner outputs",
             clone_phase_scan, scans=True),
    Scenario("kl-limits", "K -> L cloning limits and built-circuit noise", kl_limits),
)}


# Quoted reference values for the default build (gain 2, -5 dB ancillas, no
# imperfections).  They are rounded, so the tolerance is the rounding.
REFERENCE_M5 = {
    ("pia-epr", "x_minus_db"): (-3.629, 1e-3),
    ("pia-epr", "p_plus_db"): (-3.629, 1e-3),
    ("pia-reconstruct-vacuum", "rec1_x_db"): (2.464, 1e-3),
    ("pia-reconstruct-vacuum", "rec1_p_db"): (2.464, 1e-3),
    ("pia-reconstruct-vacuum", "rec2_x_db"): (2.464, 1e-3),
    ("pia-reconstruct-vacuum", "rec2_p_db"): (2.464, 1e-3),
    ("clone-output", "cln1_fidelity"): (0.6524, 1e-4),
    ("clone-output", "cln2_fidelity"): (0.6524, 1e-4),
    ("clone-reconstruct", "rec_fidelity"): (0.7237, 1e-4),
}


def is_default_build(cfg: ScenarioConfig) -> bool:
    return (_gain2(cfg) and cfg.ancilla_db == -5.0 and cfg.anti_excess_db == 0
            and not cfg.imperfections and cfg.final_bs_R == 0.5)


def run(cfg: ScenarioConfig) -> Report:
    sc = CATALOG.get(cfg.scenario)
    if sc is None:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}")
    rng = np.random.default_rng(cfg.seed)
    report = Report(cfg)
    report.rows = sc.runner(cfg, rng, report.scans) if sc.scans else sc.runner(cfg, rng)
    if is_default_build(cfg):
        for r in report.rows:
            ref = REFERENCE_M5.get((r.scenario, r.quantity))
            if ref is not None and r.reference is None and r.case == "vacuum":
                r.reference, r.reference_tol = ref
    return report


# ---------------------------------------------------------------- seed sweep

T975_19 = 2.093  # two-sided 95 % Student t quantile, 19 degrees of freedom


def seed_sweep(cfg: ScenarioConfig, seeds) -> tuple[list[dict], dict]:
    """Run the Monte Carlo engine for every seed and aggregate per quantity."""
    if cfg.engine == "analytic":
        raise ConfigError("seed-sweep needs the Monte Carlo engine")
    per = {}
    for s in seeds:
        rep = run(ScenarioConfig(**{**cfg.__dict__, "seed": int(s), "engine": "both"}))
        for r in rep.rows:
            if r.montecarlo is None:
                continue
            per.setdefault((r.case, r.quantity), []).append(r)
    agg = []
    for (case, q), rs in per.items():
        vals = [r.montecarlo for r in rs]
        covered = sum(
            abs(r.montecarlo - r.analytic) <= T975_19 * r.mc_stderr for r in rs
            if r.analytic is not None and r.mc_stderr)
        agg.append({
            "case": case, "quantity": q, "analytic": rs[0].analytic,
            "mc_median": statistics.median(vals),
            "mc_spread": statistics.stdev(vals) if len(vals) > 1 else 0.0,
            "ci_covered": covered, "runs": len(rs),
        })
    summary = {
        "schema_version": SCHEMA_VERSION,
        "scenario": cfg.scenario,
        "seeds": [int(s) for s in seeds],
        "quantities": len(agg),
        "min_coverage": min((a["ci_covered"] / a["runs"] for a in agg), default=1.0),
    }
    return agg, summary


def sweep_to_csv(agg: list[dict]) -> str:
    buf = io.StringIO()
    cols = ["schema_version", "case", "quantity", "analytic", "mc_median", "mc_spread",
            "ci_covered", "runs"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for a in agg:
        w.writerow([SCHEMA_VERSION] + [_fmt(a[c]) for c in cols[1:]])
    return buf.getvalue()
