"""Scenario registry: built-in systems and the ``.ini`` scenario format.

A scenario file is read with :mod:`configparser`.  Sections::

    [scenario]    name, mu (comma list), empty_from (optional, k = 1 only)
    [constants]   name = expression, evaluated top to bottom
    [chart]       coords = q1, p1, t
    [omega]       a ^ b = coefficient           (sum of coeff da^db)
    [eta]         a = coefficient               (sum of coeff da)
    [hamiltonian] H = expression
    [action]      k = 1, then  coord = expression in coords and s1..sk
    [momentum]    J1 = expression, ...
    [reeb_flow]   coord = expression in coords and tau
    [slice]       coords = ..., section = residuals, ambient coord = expression
    [excluded]    name = residual, residual, ...
    [sample]      lower, upper (scalar or per coordinate), points
    [connection]  Y1 = expression, ...           (evolution formalism)

Coordinates left out of ``[action]``, ``[reeb_flow]`` or ``[slice]`` are
mapped to themselves.
"""

import configparser
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import dual as D
from .errors import CosymError, ParseError, ValidationError
from .expressions import compile_expr, constant_value, split_top
from .fields import (
    CoordinateChart, ExcludedSet, OneFormField, ScalarField, TwoFormField, sample_points,
)
from .reduction import LevelSet, SliceChart
from .structures import CosymplecticStructure, HamiltonianSectionData
from .symmetry import AbelianAction, MomentumMap, compute_cocycle, modify_momentum, verify_momentum

LOAD_SAMPLES = 40


@dataclass
class Scenario:
    name: str
    chart: CoordinateChart
    structure: CosymplecticStructure
    hamiltonian: ScalarField
    action: AbelianAction | None = None
    momentum: MomentumMap | None = None
    reeb_flow: object = None
    slice_spec: dict | None = None
    mu_default: np.ndarray = field(default_factory=lambda: np.zeros(1))
    sample_box: tuple = (-2.0, 2.0)
    excluded_sets: list = field(default_factory=list)
    empty_from: float | None = None
    connection: list | None = None
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.chart.dim

    def samples(self, n=200, seed=0):
        return sample_points(self.chart, *self.sample_box, n=n, seed=seed)

    def evolution_field(self):
        return self.structure.evolution_field(self.hamiltonian)

    def modified(self):
        return self.structure.modify(self.hamiltonian)

    def mechanical(self):
        return self.modified().as_mechanical()

    def cocycle(self, points=None):
        points = self.samples(LOAD_SAMPLES) if points is None else points
        return compute_cocycle(self.action, self.structure, points)

    def modified_momentum(self, points=None):
        points = self.samples(LOAD_SAMPLES) if points is None else points
        c = self.cocycle(points)
        return modify_momentum(self.momentum, self.hamiltonian, c, self.action, points)

    def empty_hook(self, mu):
        if self.empty_from is not None and mu[0] >= self.empty_from:
            return f"mu >= {self.empty_from:g}"
        return ""

    def level_set(self, mu=None, mechanical=None, JH=None):
        mu = self.mu_default if mu is None else mu
        return LevelSet(mechanical or self.mechanical(), JH or self.modified_momentum(), mu,
                        self.empty_hook)

    def slice_chart(self):
        if self.slice_spec is None:
            raise ValidationError(f"scenario {self.name} has no slice", "slice")
        sp = self.slice_spec
        return SliceChart(sp["chart"], self.chart, sp["embed"], sp["section"], self.action)

    def section_data(self):
        """Hamiltonian section data for the formalism checks; the chart must
        be named ``q1..qn, p1..pn, t``."""
        n = (self.dim - 1) // 2
        want = [f"q{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)] + ["t"]
        if list(self.chart.names) != want:
            raise ValidationError("formalisms need a chart named q1..qn, p1..pn, t", "chart")
        return HamiltonianSectionData(n, self.hamiltonian.fn, self.connection, f"H[{self.name}]")


def _t_shift(chart):
    it = chart.index("t")

    def flow(tau, x):
        out = list(x)
        out[it] = out[it] + tau
        return out

    return flow


def _darboux_structure(chart):
    return CosymplecticStructure.darboux(chart)


def _slice_drop(chart, drop):
    """Section ``{drop = 0}`` with the remaining coordinates as slice chart."""
    i = chart.index(drop)
    names = [nm for nm in chart.names if nm != drop]
    sc = CoordinateChart(names)

    def embed(y):
        y = list(y)
        return y[:i] + [0.0] + y[i:]

    return {"chart": sc, "embed": embed, "section": lambda x: [x[i]], "drop": drop}


def _names(n):
    return [f"q{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)] + ["t"]


# ------------------------------------------------------------------ builtins

def oscillator_moving_observer(N=2, m=1.0, Omega=1.0, v=1.0):
    """Isotropic oscillator seen from an observer moving along ``q1``."""
    N = int(N)
    m, Omega, v = float(m), float(Omega), float(v)
    k2 = m * Omega ** 2

    def residuals(x):
        q, p, t = x[:N], x[N:2 * N], x[2 * N]
        return [q[0] + v * t] + list(q[1:]) + [p[0] + m * v] + list(p[1:])

    C = ExcludedSet("C", residuals)
    chart = CoordinateChart(_names(N), [C])

    def H(x):
        q, p, t = x[:N], x[N:2 * N], x[2 * N]
        kin = p[0] * p[0]
        pot = (q[0] + v * t) ** 2
        for a in range(1, N):
            kin = kin + p[a] * p[a]
            pot = pot + q[a] * q[a]
        return kin / (2 * m) + 0.5 * k2 * pot

    def act(s, x):
        out = list(x)
        out[0] = x[0] - v * s[0]
        out[2 * N] = x[2 * N] + s[0]
        return out

    action = AbelianAction(chart, 1, act, label="moving-observer")
    J = MomentumMap([ScalarField(chart, lambda x: -v * x[N], "J")])
    return Scenario(
        name="oscillator-moving-observer", chart=chart, structure=_darboux_structure(chart),
        hamiltonian=ScalarField(chart, H, "H"), action=action, momentum=J,
        reeb_flow=_t_shift(chart), slice_spec=_slice_drop(chart, "q1"),
        mu_default=np.zeros(1), sample_box=(-2.0, 2.0), excluded_sets=[C],
        empty_from=m * v * v / 2, connection=[(lambda x, i=i: x[i]) for i in range(N)],
        params={"N": N, "m": m, "Omega": Omega, "v": v})


def plane_wave(m=1.0, c=1.0, eA0=0.1):
    """Free charge in a linearly polarised plane wave (quadratic term dropped)."""
    m, c, eA0 = float(m), float(c), float(eA0)

    def phase(x):
        return x[0] - c * x[6]

    C1 = ExcludedSet("C1", lambda x: [D.cos(phase(x)), x[3] - m * c, x[4], x[5]])
    C2 = ExcludedSet("C2", lambda x: [D.sin(phase(x)), x[3] - m * c,
                                      x[4] - eA0 * D.cos(phase(x)), x[5]])
    chart = CoordinateChart(_names(3), [C1, C2])

    def H(x):
        p1, p2, p3 = x[3], x[4], x[5]
        return (p1 * p1 + p2 * p2 + p3 * p3) / (2 * m) - (eA0 / m) * p2 * D.cos(phase(x))

    def act(s, x):
        out = list(x)
        out[0] = x[0] + c * s[0]
        out[6] = x[6] + s[0]
        return out

    action = AbelianAction(chart, 1, act, label="wave-translation")
    J = MomentumMap([ScalarField(chart, lambda x: c * x[3], "J")])
    return Scenario(
        name="plane-wave", chart=chart, structure=_darboux_structure(chart),
        hamiltonian=ScalarField(chart, H, "H"), action=action, momentum=J,
        reeb_flow=_t_shift(chart), slice_spec=_slice_drop(chart, "q1"),
        mu_default=np.zeros(1), sample_box=(-2.0, 2.0), excluded_sets=[C1, C2],
        connection=[(lambda x, i=i: x[i]) for i in range(3)],
        params={"m": m, "c": c, "eA0": eA0})


def q_translation(m=1.0, Omega=1.0, eps=0.3):
    """Driven oscillator in ``q2`` with a free ``q1``; translations in ``q1``
    leave ``eta`` untouched, so the cocycle vanishes."""
    m, Omega, eps = float(m), float(Omega), float(eps)
    chart = CoordinateChart(_names(2))

    def H(x):
        q2, p1, p2, t = x[1], x[2], x[3], x[4]
        return (p1 * p1 + p2 * p2) / (2 * m) + 0.5 * m * Omega ** 2 * (1 + eps * D.sin(t)) * q2 * q2

    def act(s, x):
        out = list(x)
        out[0] = x[0] + s[0]
        return out

    action = AbelianAction(chart, 1, act, label="q-translation")
    J = MomentumMap([ScalarField(chart, lambda x: x[2], "J")])
    return Scenario(
        name="q-translation", chart=chart, structure=_darboux_structure(chart),
        hamiltonian=ScalarField(chart, H, "H"), action=action, momentum=J,
        reeb_flow=_t_shift(chart), slice_spec=_slice_drop(chart, "q1"),
        mu_default=np.array([0.5]), sample_box=(-2.0, 2.0),
        connection=[(lambda x, i=i: x[i]) for i in range(2)],
        params={"m": m, "Omega": Omega, "eps": eps})


def darboux(n=1, m=1.0):
    """Free particle on the standard structure with ``q1`` translations."""
    n, m = int(n), float(m)
    chart = CoordinateChart(_names(n))

    def H(x):
        out = x[n] * x[n]
        for a in range(1, n):
            out = out + x[n + a] * x[n + a]
        return out / (2 * m)

    def act(s, x):
        out = list(x)
        out[0] = x[0] + s[0]
        return out

    action = AbelianAction(chart, 1, act, label="q-translation")
    J = MomentumMap([ScalarField(chart, lambda x: x[n], "J")])
    return Scenario(
        name="darboux", chart=chart, structure=_darboux_structure(chart),
        hamiltonian=ScalarField(chart, H, "H"), action=action, momentum=J,
        reeb_flow=_t_shift(chart), slice_spec=_slice_drop(chart, "q1"),
        mu_default=np.array([0.5]), sample_box=(-2.0, 2.0),
        connection=[(lambda x, i=i: x[i]) for i in range(n)], params={"n": n, "m": m})


BUILTINS = {
    "oscillator-moving-observer": oscillator_moving_observer,
    "plane-wave": plane_wave,
    "q-translation": q_translation,
    "darboux": darboux,
}


# ------------------------------------------------------------------- parsing

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=#;\[][^=]*?)\s*=")


def _line_index(text):
    """``(section, key) -> line`` and ``section -> line`` for error messages."""
    index = {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        m = _SECTION_RE.match(raw)
        if m:
            section = m.group(1).strip()
            index[(section, None)] = no
            continue
        m = _KEY_RE.match(raw)
        if m and section is not None and not raw[:1].isspace():
            index.setdefault((section, m.group(1).strip()), no)
    return index


class _Reader:
    REQUIRED = ("chart", "omega", "eta", "hamiltonian")

    def __init__(self, text, source="<string>"):
        self.source = source
        self.lines = _line_index(text)
        cp = configparser.ConfigParser(delimiters=("=",), inline_comment_prefixes=("#",),
                                       interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text, source=source)
        except configparser.ParsingError as exc:
            line = exc.errors[0][0] if exc.errors else None
            raise ParseError(f"malformed line in {source}", line) from None
        except configparser.Error as exc:
            raise ParseError(f"{source}: {exc.message}", getattr(exc, "lineno", None)) from None
        self.cp = cp
        for sec in self.REQUIRED:
            if not cp.has_section(sec):
                raise ParseError(f"{source}: missing section [{sec}]", None, sec)

    def line(self, section, key=None):
        return self.lines.get((section, key))

    def items(self, section):
        if not self.cp.has_section(section):
            return []
        return [(k, v) for k, v in self.cp.items(section)]

    def get(self, section, key, default=None):
        if self.cp.has_section(section) and self.cp.has_option(section, key):
            return self.cp.get(section, key)
        return default

    def require(self, section, key):
        v = self.get(section, key)
        if v is None or not v.strip():
            raise ParseError(f"missing key in [{section}]", self.line(section), key)
        return v

    def expr(self, section, key, text, names, consts):
        return compile_expr(text, names, consts, key=f"{section}.{key}", line=self.line(section, key))


def _floats(text, consts, n, section, key, line):
    parts = split_top(text)
    vals = [constant_value(p, consts, f"{section}.{key}", line) for p in parts]
    if len(vals) == 1:
        return vals[0]
    if len(vals) != n:
        raise ParseError(f"expected 1 or {n} values", line, f"{section}.{key}")
    return np.array(vals)


def parse_scenario(text, source="<string>"):
    r = _Reader(text, source)
    consts = {}
    for k, v in r.items("constants"):
        consts[k] = constant_value(v, consts, f"constants.{k}", r.line("constants", k))

    names = [nm for nm in split_top(r.require("chart", "coords")) if nm]
    if len(set(names)) != len(names):
        raise ParseError("duplicate coordinate names", r.line("chart", "coords"), "chart.coords")
    clash = set(names) & set(consts)
    if clash:
        raise ParseError(f"constants shadow coordinates: {sorted(clash)}", r.line("constants"),
                         "constants")
    n = len(names)

    excluded = []
    for k, v in r.items("excluded"):
        exprs = [r.expr("excluded", k, p, names, consts).on(names) for p in split_top(v)]
        excluded.append(ExcludedSet(k, lambda x, ex=exprs: [e(x) for e in ex]))
    chart = CoordinateChart(names, excluded)

    def coord(section, key):
        if key not in names:
            raise ParseError(f"unknown coordinate {key!r}", r.line(section, key), f"{section}.{key}")
        return key

    terms = []
    for k, v in r.items("omega"):
        pair = [s.strip() for s in k.split("^")]
        if len(pair) != 2:
            raise ParseError("omega keys look like 'a ^ b'", r.line("omega", k), f"omega.{k}")
        a, b = coord("omega", pair[0]), coord("omega", pair[1])
        e = r.expr("omega", k, v, names, consts)
        terms.append((a, b, float(e({})) if not e.free else e.on(names)))
    if not terms:
        raise ParseError("[omega] has no terms", r.line("omega"), "omega")
    omega = TwoFormField.from_terms(chart, terms, "omega")

    eta_c = {}
    for k, v in r.items("eta"):
        eta_c[chart.index(coord("eta", k))] = r.expr("eta", k, v, names, consts).on(names)
    if not eta_c:
        raise ParseError("[eta] has no terms", r.line("eta"), "eta")

    def eta_fn(x):
        return [eta_c[i](x) if i in eta_c else 0.0 for i in range(n)]

    structure = CosymplecticStructure(omega, OneFormField(chart, eta_fn, "eta"),
                                      r.get("scenario", "name", source))
    H = ScalarField(chart, r.expr("hamiltonian", "H", r.require("hamiltonian", "H"), names,
                                  consts).on(names), "H")

    action = momentum = None
    if r.cp.has_section("action"):
        k = int(constant_value(r.require("action", "k"), consts, "action.k", r.line("action", "k")))
        snames = [f"s{a + 1}" for a in range(k)]
        maps = {}
        for key, v in r.items("action"):
            if key == "k":
                continue
            maps[chart.index(coord("action", key))] = r.expr("action", key, v, names + snames, consts)

        def act(s, x, maps=maps, snames=snames):
            env = dict(zip(names, x))
            env.update(zip(snames, s))
            return [maps[i](env) if i in maps else x[i] for i in range(n)]

        action = AbelianAction(chart, k, act, label=r.get("scenario", "name", "action"))
        comps = []
        for a in range(k):
            key = f"J{a + 1}"
            comps.append(ScalarField(chart, r.expr("momentum", key, r.require("momentum", key),
                                                   names, consts).on(names), key))
        momentum = MomentumMap(comps)

    reeb_flow = None
    if r.cp.has_section("reeb_flow"):
        fl = {chart.index(coord("reeb_flow", k)): r.expr("reeb_flow", k, v, names + ["tau"], consts)
              for k, v in r.items("reeb_flow")}

        def reeb_flow(tau, x, fl=fl):
            env = dict(zip(names, x))
            env["tau"] = tau
            return [fl[i](env) if i in fl else x[i] for i in range(n)]

    slice_spec = None
    if r.cp.has_section("slice"):
        snames = [nm for nm in split_top(r.require("slice", "coords")) if nm]
        for nm in snames:
            coord("slice", nm)
        sec = [r.expr("slice", "section", p, names, consts).on(names)
               for p in split_top(r.require("slice", "section"))]
        emb = {}
        for key, v in r.items("slice"):
            if key in ("coords", "section"):
                continue
            emb[chart.index(coord("slice", key))] = r.expr("slice", key, v, snames, consts).on(snames)
        missing = [nm for nm in names if nm not in snames and chart.index(nm) not in emb]
        if missing:
            raise ParseError(f"slice embedding misses {missing}", r.line("slice"), "slice")
        pos = {nm: j for j, nm in enumerate(snames)}

        def embed(y, emb=emb, pos=pos):
            return [emb[i](y) if i in emb else y[pos[nm]] for i, nm in enumerate(names)]

        slice_spec = {"chart": CoordinateChart(snames), "embed": embed,
                      "section": lambda x, sec=sec: [s(x) for s in sec]}

    k = action.k if action is not None else 1
    mu_text = r.get("scenario", "mu", "0")
    mu = np.atleast_1d(_floats(mu_text, consts, k, "scenario", "mu", r.line("scenario", "mu")))
    if mu.shape != (k,):
        mu = np.broadcast_to(mu, (k,)).copy()
    empty_from = r.get("scenario", "empty_from")
    if empty_from is not None:
        empty_from = constant_value(empty_from, consts, "scenario.empty_from",
                                    r.line("scenario", "empty_from"))
    lower = _floats(r.get("sample", "lower", "-2"), consts, n, "sample", "lower",
                    r.line("sample", "lower"))
    upper = _floats(r.get("sample", "upper", "2"), consts, n, "sample", "upper",
                    r.line("sample", "upper"))

    connection = None
    if r.cp.has_section("connection"):
        nq = (n - 1) // 2
        connection = [r.expr("connection", f"Y{i + 1}", r.require("connection", f"Y{i + 1}"),
                             names, consts).on(names) for i in range(nq)]

    return Scenario(
        name=r.get("scenario", "name", source), chart=chart, structure=structure, hamiltonian=H,
        action=action, momentum=momentum, reeb_flow=reeb_flow, slice_spec=slice_spec,
        mu_default=mu, sample_box=(lower, upper), excluded_sets=excluded, empty_from=empty_from,
        connection=connection, params=consts)


# ------------------------------------------------------------------- loading

def check_scenario(s, n=LOAD_SAMPLES, seed=0):
    """Load-time invariants: valid structure and a verified momentum map."""
    pts = s.samples(n, seed)
    rep = s.structure.validate(pts, seed)
    if not rep.passed:
        raise ValidationError(f"scenario {s.name}: structure is not cosymplectic "
                              f"({rep.to_text().splitlines()[0]})", "validate_cosymplectic")
    if s.action is not None:
        if s.momentum is None or s.momentum.k != s.action.k:
            raise ValidationError(f"scenario {s.name}: momentum map does not match the action",
                                  "momentum")
        rep = verify_momentum(s.action, s.structure, s.momentum, pts, seed)
        if not rep.passed:
            raise ValidationError(f"scenario {s.name}: momentum map fails i_xi omega = dJ "
                                  f"(residual {rep.metrics['max_abs_residual']:.3e})",
                                  "verify_momentum")
    if s.slice_spec is not None:
        sc = s.slice_spec["chart"]
        y = s.slice_spec["embed"](list(np.zeros(sc.dim)))
        if len(y) != s.dim:
            raise ValidationError(f"scenario {s.name}: slice embedding has wrong arity", "slice")
        if s.action is not None and sc.dim != s.dim - s.action.k:
            raise ValidationError(f"scenario {s.name}: slice chart must have dimension "
                                  f"{s.dim - s.action.k}", "slice")
    return s


def builtin_file(name):
    return resources.files("cosymred").joinpath("scenario_files", f"{name}.ini")


def _coerce(v):
    try:
        return int(v)
    except ValueError:
        return float(v)


def load_scenario(source, check=True, **params):
    """Built-in name (``params`` override its defaults) or path to an ``.ini`` file."""
    if source in BUILTINS:
        try:
            s = BUILTINS[source](**{k: _coerce(str(v)) for k, v in params.items()})
        except TypeError as exc:
            raise ParseError(f"bad parameter for {source}: {exc}") from None
    else:
        if params:
            raise ParseError("parameters only apply to built-in scenarios")
        try:
            with open(source) as fh:
                text = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read scenario {source!r}: {exc.strerror}") from None
        s = parse_scenario(text, source)
    if check:
        try:
            check_scenario(s)
        except CosymError:
            raise
        except (ArithmeticError, ValueError, KeyError) as exc:
            raise ValidationError(f"scenario {s.name}: evaluation failed: {exc}", "evaluate") from None
    return s


def parse_params(items):
    out = {}
    for it in items or []:
        if "=" not in it:
            raise ParseError(f"parameter {it!r} is not key=value")
        k, v = it.split("=", 1)
        out[k.strip()] = v.strip()
    return out


__all__ = [
    "Scenario", "BUILTINS", "load_scenario", "parse_scenario", "check_scenario",
    "oscillator_moving_observer", "plane_wave", "q_translation", "darboux", "builtin_file",
    "parse_params",
]
