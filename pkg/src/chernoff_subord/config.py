"""Experiment configs: YAML files with line-aware validation, and the builders
that turn a validated config into a space, a family, an initial function and
an oracle."""

import copy
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .bernstein import (DENSITY_PRESETS, BernsteinTriplet, CoefficientField,
                        LevyMeasure, atomic_measure)
from .circle import CircleCoefficients, CircleGrid, CircleStep, circle_heat_exact
from .engine import (GaussianBump, SubordinationConfig, bounded_levy_family,
                     m_const, m_default, step_family, subordinate_family,
                     subordinate_oracle_exact, subordinate_oracle_mc,
                     subordinated_fourier_oracle, variable_coeff_family)
from .errors import ChernoffError, ConfigError
from .euclidean import DiffusionCoefficients, DiffusionStep, EuclideanGrid
from .star_graph import BoundaryWeights, GraphCoefficients, StarGraphSpace, StarGraphStep
from .subordinators import make_law

SPACES = ("euclidean", "star_graph", "circle")
FAMILIES = ("subordinate", "bounded-levy", "base")
ORACLES = ("exact", "fourier", "poisson-series", "mc", "none")

DEFAULTS = {
    "coefficients": {"A": 1.0, "B": 0.0, "C": 0.0},
    "triplet": {"sigma": 0.0, "lambda": 0.0, "mu": None},
    "law": None,
    "family": "subordinate",
    "schedule": "floor-inverse",
    "t": 1.0,
    "n_list": [1],
    "quadrature": {"eta_nodes": 64, "tail_tol": 1e-10},
    "phi": {"preset": "gauss"},
    "oracle": "exact",
    "oracle_samples": 10000,
    "output": "run",
    "seed": 0,
    "threads": 1,
    "budget": 1e12,
    "allow_atomic": False,
    "fields": None,
}


def _line_map(node, prefix="", out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}{k.value}"
            out[key] = k.start_mark.line + 1
            _line_map(v, key + ".", out)
    return out


@dataclass
class ExperimentConfig:
    raw: dict
    lines: dict = field(default_factory=dict)
    source: Optional[str] = None

    def __getattr__(self, name):
        raw = self.__dict__.get("raw", {})
        if name in raw:
            return raw[name]
        raise AttributeError(name)

    def error(self, key, msg):
        return ConfigError(msg, field=key, line=self.lines.get(key))

    def resolved(self):
        return copy.deepcopy(self.raw)


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def apply_override(raw, assignment):
    """Apply one ``key.sub=value`` override; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = raw
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = yaml.safe_load(text)


def parse_config(text, overrides=(), source=None):
    try:
        tree = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}",
                          line=mark.line + 1 if mark else None) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level", line=1)
    lines = _line_map(tree) if tree is not None else {}
    raw = _merge(DEFAULTS, data)
    for o in overrides:
        apply_override(raw, o)
    cfg = ExperimentConfig(raw, lines, source)
    validate(cfg)
    return cfg


def load_config(path, overrides=()):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, overrides, source=str(path))


def validate(cfg):
    raw = cfg.raw
    known = set(DEFAULTS) | {"space"}
    for k in raw:
        if k not in known:
            raise cfg.error(k, f"unknown config key {k!r}")
    space = raw.get("space")
    if not isinstance(space, dict) or space.get("kind") not in SPACES:
        raise cfg.error("space.kind", f"space.kind must be one of {SPACES}")
    if raw["family"] not in FAMILIES:
        raise cfg.error("family", f"family must be one of {FAMILIES}")
    if raw["oracle"] not in ORACLES:
        raise cfg.error("oracle", f"oracle must be one of {ORACLES}")
    n_list = raw["n_list"]
    if (not isinstance(n_list, list) or not n_list
            or any(not isinstance(n, int) or n < 1 for n in n_list)
            or any(b <= a for a, b in zip(n_list, n_list[1:]))):
        raise cfg.error("n_list", "n_list must be a nonempty increasing list of "
                                  "positive integers")
    if not _num(raw["t"]) or raw["t"] <= 0:
        raise cfg.error("t", "t must be a positive number")
    if not isinstance(raw["threads"], int) or raw["threads"] < 1:
        raise cfg.error("threads", "threads must be a positive integer")
    schedule(cfg)
    # building exercises every remaining preset and constraint
    try:
        build(cfg)
    except ConfigError:
        raise
    except ChernoffError as exc:
        raise cfg.error(_blame(exc), str(exc)) from None
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def _blame(exc):
    msg = str(exc)
    for key, words in (("space.weights", ("a + c", "b_k", "vertex weights", "a = 1", "gamma")),
                       ("law", ("law", "Laplace")),
                       ("triplet", ("sigma", "lambda", "measure", "Levy")),
                       ("coefficients", ("A ", "A must", "C must", "B must"))):
        if any(w in msg for w in words):
            return key
    return None


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def schedule(cfg):
    s = cfg.raw["schedule"]
    if s == "floor-inverse":
        return m_default
    if s == "floor-inverse-raw":
        return lambda t: m_default(t, mode="unclamped")
    if isinstance(s, str) and s.startswith("const:"):
        try:
            k = int(s.split(":", 1)[1])
        except ValueError:
            k = 0
        if k >= 1:
            return m_const(k)
    raise cfg.error("schedule", "schedule must be 'floor-inverse', "
                                "'floor-inverse-raw' or 'const:k' with k >= 1")


# -- coefficient and initial-function catalogs ------------------------------

def scalar_field(spec, key, cfg, periodic=False):
    """A callable of a 1-d coordinate array for a catalog entry (or a number)."""
    if _num(spec):
        v = float(spec)
        return v, None
    if not isinstance(spec, dict):
        raise cfg.error(key, f"{key} must be a number or a preset mapping")
    p = dict(spec)
    name = p.pop("preset", None)
    try:
        if name == "const":
            return float(p.get("value", 0.0)), None
        if name == "trig":
            base, amp = float(p.get("base", 1.0)), float(p.get("amp", 0.0))
            k, ph = int(p.get("k", 1)), float(p.get("phase", 0.0))
            return None, lambda th: base + amp * np.cos(k * th + ph)
        if periodic:
            raise cfg.error(key, "on the circle use the 'const' or 'trig' presets")
        if name == "poly":
            coeffs = [float(c) for c in p.get("coeffs", [0.0])]
            lo, hi = p.get("clip", [-np.inf, np.inf])

            def fn(x):
                return np.clip(np.polynomial.polynomial.polyval(x, coeffs), lo, hi)
            return None, fn
        if name == "gauss":
            base, amp = float(p.get("base", 0.0)), float(p.get("amp", 1.0))
            c, w = float(p.get("center", 0.0)), float(p.get("width", 1.0))
            return None, lambda x: base + amp * np.exp(-(x - c) ** 2 / (2 * w * w))
    except (TypeError, ValueError) as exc:
        raise cfg.error(key, f"bad parameters for {key}: {exc}") from None
    raise cfg.error(key, f"unknown coefficient preset {name!r}")


def _coefficient(cfg, name, periodic=False):
    const, fn = scalar_field(cfg.raw["coefficients"].get(name, DEFAULTS["coefficients"][name]),
                             f"coefficients.{name}", cfg, periodic)
    return const if fn is None else fn


def phi_function(cfg):
    p = dict(cfg.raw["phi"])
    name = p.pop("preset", "gauss")
    if name == "gauss":
        return GaussianBump(float(p.get("amp", 1.0)), float(p.get("center", 0.0)),
                            float(p.get("var", 1.0)))
    if name == "bump":
        c, w = float(p.get("center", 0.0)), float(p.get("width", 1.0))

        def bump(x):
            r = (np.asarray(x) - c) / w
            out = np.zeros_like(r, dtype=float)
            inside = np.abs(r) < 1
            out[inside] = np.exp(1 - 1 / (1 - r[inside] ** 2))
            return out
        return bump
    if name == "cos":
        k = int(p.get("k", 1))
        return lambda th: np.cos(k * np.asarray(th))
    raise cfg.error("phi.preset", f"unknown phi preset {name!r}")


# -- builders ---------------------------------------------------------------

@dataclass
class Experiment:
    space: Any
    step: Any
    family: Any
    phi: np.ndarray
    phi_fn: Any
    sub: Optional[SubordinationConfig]
    oracle: Any
    coords: dict


def _levy_measure(cfg):
    spec = cfg.raw["triplet"].get("mu")
    if spec is None:
        return LevyMeasure()
    if not isinstance(spec, dict):
        raise cfg.error("triplet.mu", "triplet.mu must be a mapping or null")
    p = dict(spec)
    name = p.pop("preset", None)
    if name == "atoms":
        return atomic_measure([tuple(a) for a in p.get("atoms", [])])
    if name in DENSITY_PRESETS:
        return DENSITY_PRESETS[name](**p)
    raise cfg.error("triplet.mu.preset", f"unknown Levy measure preset {name!r}")


def _law(cfg):
    spec = cfg.raw["law"]
    if spec is None:
        return None
    if not isinstance(spec, dict) or "preset" not in spec:
        raise cfg.error("law", "law must be a mapping with a 'preset' key, or null")
    p = dict(spec)
    return make_law(p.pop("preset"), **p)


def _space_and_step(cfg):
    sp = cfg.raw["space"]
    kind = sp["kind"]
    try:
        if kind == "euclidean":
            dim = int(sp.get("dim", 1))
            grid = EuclideanGrid.from_spacing(dim, float(sp.get("R", 10.0)),
                                              float(sp.get("h", 0.1)))
            A, B, C = (_coefficient(cfg, k) for k in "ABC")
            if dim == 2:
                if callable(A):
                    a_fn = A
                    A = lambda p: a_fn(np.hypot(p[:, 0], p[:, 1]))[:, None, None] * np.eye(2)
                if callable(C):
                    c_fn = C
                    C = lambda p: c_fn(np.hypot(p[:, 0], p[:, 1]))
                if callable(B):
                    raise cfg.error("coefficients.B", "in d = 2 the drift B must be constant")
            step = DiffusionStep(grid, DiffusionCoefficients(A, B, C), warn=False)
            coords = {"x": grid.points[:, 0]} if dim == 1 else \
                {"x0": grid.points[:, 0], "x1": grid.points[:, 1]}
            return grid, step, coords
        if kind == "star_graph":
            wspec = sp.get("weights", {})
            weights = BoundaryWeights(float(wspec.get("a", 0.0)), float(wspec.get("c", 0.0)),
                                      tuple(wspec.get("b", [1.0])))
            R = float(sp.get("R", 10.0))
            Ne = int(sp["Ne"]) if "Ne" in sp else int(round(R / float(sp.get("h", 0.1))))
            space = StarGraphSpace(weights.d, R, Ne)
            fields = []
            for k in "ABC":
                f = _coefficient(cfg, k)
                fields.append((lambda g: (lambda e, x: g(x)))(f) if callable(f) else f)
            step = StarGraphStep(space, weights, GraphCoefficients(*fields), warn=False)
            return space, step, {"edge": space.edge_of, "x": space.x_of}
        grid = CircleGrid(int(sp.get("nodes", 256)))
        A, B, C = (_coefficient(cfg, k, periodic=True) for k in "ABC")
        step = CircleStep(grid, sp.get("kernel", "K1"), CircleCoefficients(A, B, C))
        return grid, step, {"theta": grid.theta}
    except ConfigError:
        raise
    except ChernoffError as exc:
        raise cfg.error(_blame(exc) or "space", str(exc)) from None


def _phi_values(space, phi_fn):
    if isinstance(space, StarGraphSpace):
        return space.evaluate(lambda e, x: phi_fn(x))
    if isinstance(space, EuclideanGrid) and space.dim == 2:
        return space.evaluate(lambda p: phi_fn(p[:, 0]) * phi_fn(p[:, 1]))
    return space.evaluate(phi_fn)


def build(cfg):
    raw = cfg.raw
    space, step, coords = _space_and_step(cfg)
    phi_fn = phi_function(cfg)
    phi = _phi_values(space, phi_fn)
    trip = raw["triplet"]
    for key in ("sigma", "lambda"):
        if not _num(trip.get(key, 0.0)):
            raise cfg.error(f"triplet.{key}", f"triplet.{key} must be a number")
    triplet = BernsteinTriplet(float(trip.get("sigma", 0.0)), float(trip.get("lambda", 0.0)),
                               _levy_measure(cfg))
    q = raw["quadrature"]
    sub = None
    if raw["family"] == "base":
        family = step_family(step)
    else:
        sub = SubordinationConfig(triplet, _law(cfg), schedule=schedule(cfg),
                                  eta_nodes=int(q.get("eta_nodes", 64)),
                                  tail_tol=float(q.get("tail_tol", 1e-10)),
                                  threads=int(raw["threads"]),
                                  allow_atomic=bool(raw["allow_atomic"]))
        if raw["fields"] is not None:
            family = variable_coeff_family(_fields(cfg, space), sub, step)
        elif raw["family"] == "bounded-levy":
            family = bounded_levy_family(sub, step)
        else:
            family = subordinate_family(sub, step)
    oracle = make_oracle(cfg, space, step, sub, phi_fn, phi, coords)
    return Experiment(space, step, family, phi, phi_fn, sub, oracle, coords)


def _fields(cfg, space):
    f = cfg.raw["fields"]
    periodic = isinstance(space, CircleGrid)
    sig = scalar_field(f.get("sigma", 0.0), "fields.sigma", cfg, periodic)
    lam = scalar_field(f.get("lambda", 1.0), "fields.lambda", cfg, periodic)

    def as_fn(pair):
        const, fn = pair
        fn = fn if fn is not None else (lambda x, c=const: np.full(np.shape(x), c))
        if isinstance(space, StarGraphSpace):
            return lambda e, x: fn(x)
        return fn
    return CoefficientField(as_fn(sig), as_fn(lam), float(f.get("lambda_min", 1e-3)),
                            float(f.get("lambda_max", 1e3)), float(f.get("sigma_min", 0.0)))


def make_oracle(cfg, space, step, sub, phi_fn, phi, coords):
    """A callable t -> oracle values on the nodes, or None."""
    name = cfg.raw["oracle"]
    if name == "none":
        return None
    if cfg.raw["fields"] is not None:
        raise cfg.error("oracle", "no oracle is available for variable-coefficient fields")
    if name == "mc":
        if sub is None or sub.law is None:
            raise cfg.error("oracle", "the mc oracle needs a law")
        n_samples, seed = int(cfg.raw["oracle_samples"]), int(cfg.raw["seed"])
        tr = sub.triplet

        def mc(t):
            mean, _ = subordinate_oracle_mc(sub.law, step, t, phi, n_samples, seed)
            return np.exp(-tr.sigma * t) * step.apply(tr.lam * t, mean)
        return mc
    coeffs = {k: _coefficient(cfg, k, periodic=isinstance(space, CircleGrid))
              for k in "ABC"}
    if any(callable(v) for v in coeffs.values()):
        raise cfg.error("oracle", f"the {name} oracle needs constant coefficients")
    A, B, C = coeffs["A"], coeffs["B"], coeffs["C"]
    if name == "fourier":
        if not (isinstance(space, EuclideanGrid) and space.dim == 1
                and isinstance(phi_fn, GaussianBump) and phi_fn.center == 0 and B == 0):
            raise cfg.error("oracle", "the fourier oracle needs d = 1, B = 0 and a "
                                      "centered gauss phi")
        triplet = sub.triplet if sub is not None else BernsteinTriplet(0.0, 1.0)
        return lambda t: subordinated_fourier_oracle(triplet, phi_fn.fourier, coords["x"], t,
                                                     A=A, C=C)
    exact = exact_semigroup(cfg, space, step, phi_fn, coords, A, B, C)
    if sub is None:
        return lambda t: exact(t, phi)
    tr = sub.triplet

    def oracle(t):
        if sub.law is None:
            return np.exp(-tr.sigma * t) * exact(tr.lam * t, phi)
        shifted = lambda s, v: exact(s + tr.lam * t, v)
        return np.exp(-tr.sigma * t) * subordinate_oracle_exact(sub.law, shifted, t, phi)
    return oracle


def exact_semigroup(cfg, space, step, phi_fn, coords, A, B, C):
    if isinstance(space, EuclideanGrid):
        if space.dim != 1 or not isinstance(phi_fn, GaussianBump):
            raise cfg.error("oracle", "the exact oracle on R^d needs d = 1 and a gauss phi")
        x = coords["x"]
        return lambda s, _v: phi_fn.heat(s, x, A, B, C)
    if isinstance(space, CircleGrid):
        return lambda s, v: circle_heat_exact(space, s, v, A, B, C)
    if step.weights.regime != "ac_zero" or B != 0:
        raise cfg.error("oracle", "the exact graph oracle needs a = c = 0 and B = 0")
    # with constant A and a = c = 0 the graph step is the exact semigroup
    return lambda s, v: step.apply(s, v)
