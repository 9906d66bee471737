"""Experiment configuration: one YAML file per run, validated with line-level diagnostics."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .asymptotics import MODES, EpsilonGrid
from .bodies import Ball, Ellipsoid, PolynomialFamily, SmoothStar, SphericalPolynomial
from .errors import ConfigError, UnsupportedCombination
from .measures import FUNCTIONAL_KINDS, FunctionalDescriptor

BODY_TYPES = ("ball", "ellipsoid", "smooth_star")
TOP_LEVEL = ("body", "family", "experiment", "epsilon", "tolerances", "symmetry", "sandwich",
             "functionals", "seed", "jobs", "n_rays", "output")


@dataclass(frozen=True)
class BodyConfig:
    type: str = "ball"
    dim: int = 2
    radius: float = 1.0
    semiaxes: tuple = ()
    r0: float = 1.0
    terms: tuple = ()


@dataclass(frozen=True)
class FamilyConfig:
    constant: float = 0.5
    terms: tuple = ()
    growth: float = 0.0
    second_order: tuple = None  # (constant, terms)


@dataclass(frozen=True)
class PencilConfig:
    fixed: tuple = ()
    rotations: int = 16
    per_subspace: int = 32


@dataclass(frozen=True)
class ExperimentSettings:
    mode: str = "sections"
    k: int = 1
    l: int = None
    functional: str = "intrinsic_volume"
    directions: int = 64
    pencil: PencilConfig = None


@dataclass(frozen=True)
class Tolerances:
    rms: float = 0.01
    symmetry: float = 1e-3
    functional: float = 0.03
    santalo: float = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    body: BodyConfig = field(default_factory=BodyConfig)
    family: FamilyConfig = field(default_factory=FamilyConfig)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    epsilon: EpsilonGrid = field(default_factory=EpsilonGrid)
    tolerances: Tolerances = field(default_factory=Tolerances)
    symmetry: tuple = None
    sandwich: tuple = (0.8, 1.25, 2.0 ** -8)
    functionals: tuple = ("mean_width_power",)
    seed: int = 0
    jobs: int = 1
    n_rays: int = None
    output: str = None

    @property
    def d(self):
        return self.body.dim

    @property
    def l(self):
        return self.experiment.l if self.experiment.l is not None else self.d - 1

    @property
    def k(self):
        return self.experiment.k

    # ---------------------------------------------------------- builders

    def build_body(self):
        b = self.body
        if b.type == "ball":
            return Ball(dim=b.dim, radius=b.radius)
        if b.type == "ellipsoid":
            return Ellipsoid(semiaxes=tuple(b.semiaxes))
        return SmoothStar(dim=b.dim, r0=b.r0, poly=SphericalPolynomial(0.0, b.terms))

    def build_family(self, body=None):
        body = body or self.build_body()
        f = self.family
        r = None
        if f.second_order is not None:
            r = SphericalPolynomial(f.second_order[0], f.second_order[1])
        return PolynomialFamily(body, SphericalPolynomial(f.constant, f.terms), growth=f.growth, r=r)

    def build_functional(self, kind=None):
        return FunctionalDescriptor(kind or self.experiment.functional, self.k)

    def with_seed(self, seed):
        from dataclasses import replace
        return replace(self, seed=int(seed))


# ------------------------------------------------------------------ loading

def _line_map(node, prefix=(), out=None):
    """Map key paths to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = prefix + (key.value,)
            out[path] = key.start_mark.line + 1
            _line_map(value, path, out)
    return out


class _Reader:
    def __init__(self, data, lines):
        self.data = data
        self.lines = lines

    def err(self, path, message):
        return ConfigError(message, field=".".join(path), line=self.lines.get(tuple(path)))

    def section(self, name, allowed):
        raw = self.data.get(name, {}) or {}
        if not isinstance(raw, dict):
            raise self.err((name,), "expected a mapping")
        for key in raw:
            if key not in allowed:
                raise self.err((name, key), f"unknown key; expected one of {sorted(allowed)}")
        return raw

    def number(self, path, value, kind=float, lo=None, hi=None, strict_lo=False):
        try:
            if kind is int:
                if isinstance(value, bool) or not float(value).is_integer():
                    raise ValueError
                v = int(value)
            else:
                v = float(value)
        except (TypeError, ValueError):
            raise self.err(path, f"expected {kind.__name__}, got {value!r}") from None
        if lo is not None and (v < lo or (strict_lo and v == lo)):
            raise self.err(path, f"must be {'>' if strict_lo else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            raise self.err(path, f"must be <= {hi}, got {v}")
        return v


def _terms(reader, path, raw, dim):
    """Spherical polynomial terms given as [[coef, [p_1, ..., p_d]], ...]."""
    out = []
    for i, item in enumerate(raw or ()):
        if not (isinstance(item, (list, tuple)) and len(item) == 2
                and isinstance(item[1], (list, tuple))):
            raise reader.err(path, f"term {i} must be [coefficient, [powers]]")
        powers = tuple(int(p) for p in item[1])
        if len(powers) != dim or min(powers) < 0:
            raise reader.err(path, f"term {i} needs {dim} nonnegative powers")
        out.append((float(item[0]), powers))
    return tuple(out)


def parse_config(text, base_dir=None):
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {exc}", line=None if mark is None else mark.line + 1)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", line=1)
    r = _Reader(data, _line_map(node))
    for key in data:
        if key not in TOP_LEVEL:
            raise r.err((key,), f"unknown section; expected one of {list(TOP_LEVEL)}")

    b = r.section("body", {"type", "dim", "radius", "semiaxes", "r0", "terms"})
    btype = b.get("type", "ball")
    if btype not in BODY_TYPES:
        raise r.err(("body", "type"), f"expected one of {BODY_TYPES}, got {btype!r}")
    if btype == "ellipsoid":
        if "semiaxes" not in b:
            raise r.err(("body",), "ellipsoid needs semiaxes")
        semi = tuple(r.number(("body", "semiaxes"), v, lo=0, strict_lo=True) for v in b["semiaxes"])
        dim = len(semi)
        if "dim" in b and int(b["dim"]) != dim:
            raise r.err(("body", "dim"), "dim disagrees with the number of semiaxes")
    else:
        semi = ()
        dim = r.number(("body", "dim"), b.get("dim", 2), int, lo=2)
    if dim < 2:
        raise r.err(("body", "dim"), "need d >= 2")
    body = BodyConfig(type=btype, dim=dim,
                      radius=r.number(("body", "radius"), b.get("radius", 1.0), lo=0, strict_lo=True),
                      semiaxes=semi,
                      r0=r.number(("body", "r0"), b.get("r0", 1.0), lo=0, strict_lo=True),
                      terms=_terms(r, ("body", "terms"), b.get("terms"), dim))

    f = r.section("family", {"constant", "terms", "growth", "second_order"})
    second = None
    if f.get("second_order") is not None:
        so = f["second_order"]
        if not isinstance(so, dict):
            raise r.err(("family", "second_order"), "expected a mapping with constant/terms")
        second = (r.number(("family", "second_order", "constant"), so.get("constant", 0.0)),
                  _terms(r, ("family", "second_order", "terms"), so.get("terms"), dim))
    family = FamilyConfig(constant=r.number(("family", "constant"), f.get("constant", 0.5)),
                          terms=_terms(r, ("family", "terms"), f.get("terms"), dim),
                          growth=r.number(("family", "growth"), f.get("growth", 0.0)),
                          second_order=second)

    e = r.section("experiment", {"mode", "k", "l", "functional", "directions", "pencil"})
    mode = e.get("mode", "sections")
    if mode not in MODES:
        raise r.err(("experiment", "mode"), f"expected one of {MODES}, got {mode!r}")
    k = r.number(("experiment", "k"), e.get("k", 1), int)
    l = r.number(("experiment", "l"), e.get("l", dim - 1), int)
    if mode == "sections":
        if not 1 <= l <= dim - 1:
            raise r.err(("experiment", "l"), f"sections need 1 <= l <= d-1 = {dim - 1}, got l={l}")
        if not 1 <= k <= l:
            raise r.err(("experiment", "k"), f"sections need 1 <= k <= l = {l}, got k={k}")
    else:
        if l != dim - 1:
            raise r.err(("experiment", "l"), f"caps need l = d-1 = {dim - 1}, got l={l}")
        if not 1 <= k <= dim:
            raise r.err(("experiment", "k"), f"caps need 1 <= k <= d = {dim}, got k={k}")
        if mode == "cap_volume" and k != dim:
            raise r.err(("experiment", "k"), f"cap_volume needs k = d = {dim}")
        if mode == "cap_intrinsic" and k == dim:
            raise r.err(("experiment", "k"), "cap_intrinsic needs k <= d-1 (use cap_volume)")
    fkind = e.get("functional", "intrinsic_volume")
    if fkind not in FUNCTIONAL_KINDS:
        raise r.err(("experiment", "functional"), f"expected one of {FUNCTIONAL_KINDS}")
    m = l if mode == "sections" else dim
    try:
        FunctionalDescriptor(fkind, k).validate(m)
    except (UnsupportedCombination, ValueError) as exc:
        raise r.err(("experiment", "functional"), str(exc)) from None
    pencil = None
    if e.get("pencil") is not None:
        p = e["pencil"]
        if not isinstance(p, dict) or "fixed" not in p:
            raise r.err(("experiment", "pencil"), "pencil needs a 'fixed' list of vectors")
        fixed = np.atleast_2d(np.asarray(p["fixed"], dtype=float))
        if fixed.shape != (l, dim) or np.linalg.matrix_rank(fixed) != l:
            raise r.err(("experiment", "pencil", "fixed"), f"need {l} independent vectors in R^{dim}")
        pencil = PencilConfig(fixed=tuple(map(tuple, fixed)),
                              rotations=r.number(("experiment", "pencil", "rotations"),
                                                 p.get("rotations", 16), int, lo=1),
                              per_subspace=r.number(("experiment", "pencil", "per_subspace"),
                                                    p.get("per_subspace", 32), int, lo=2))
    elif l < dim - 1:
        raise r.err(("experiment", "pencil"), "l < d-1 needs a pencil")
    experiment = ExperimentSettings(
        mode=mode, k=k, l=l, functional=fkind,
        directions=r.number(("experiment", "directions"), e.get("directions", 64), int, lo=2),
        pencil=pencil)

    g = r.section("epsilon", {"start", "ratio", "count"})
    grid = EpsilonGrid(
        start=r.number(("epsilon", "start"), g.get("start", 2.0 ** -6), lo=0, strict_lo=True),
        ratio=r.number(("epsilon", "ratio"), g.get("ratio", 0.5), lo=0, hi=0.999, strict_lo=True),
        count=r.number(("epsilon", "count"), g.get("count", 9), int, lo=5))

    t = r.section("tolerances", {"rms", "symmetry", "functional", "santalo"})
    tol = Tolerances(**{key: r.number(("tolerances", key), val, lo=0, strict_lo=True)
                        for key, val in t.items()})

    symmetry = None
    if data.get("symmetry") is not None:
        s = r.section("symmetry", {"transform"})
        T = s.get("transform", "antipodal")
        if T == "antipodal":
            T = -np.eye(dim)
        T = np.asarray(T, dtype=float)
        if T.shape != (dim, dim) or np.max(np.abs(T.T @ T - np.eye(dim))) > 1e-10:
            raise r.err(("symmetry", "transform"), f"need an orthogonal {dim}x{dim} matrix")
        symmetry = tuple(map(tuple, T))

    sw = r.section("sandwich", {"c1_factor", "c2_factor", "max_epsilon"})
    sandwich = (r.number(("sandwich", "c1_factor"), sw.get("c1_factor", 0.8), lo=0, strict_lo=True),
                r.number(("sandwich", "c2_factor"), sw.get("c2_factor", 1.25), lo=1),
                r.number(("sandwich", "max_epsilon"), sw.get("max_epsilon", 2.0 ** -8),
                         lo=0, strict_lo=True))
    if sandwich[0] >= 1:
        raise r.err(("sandwich", "c1_factor"), "c1_factor must be < 1")

    funcs = data.get("functionals", ["mean_width_power"])
    if isinstance(funcs, str):
        funcs = [funcs]
    for name in funcs:
        if name not in FUNCTIONAL_KINDS:
            raise r.err(("functionals",), f"unknown functional {name!r}")
    n_rays = data.get("n_rays")
    output = data.get("output")
    if output is not None and base_dir is not None:
        output = str(Path(base_dir) / output)
    return ExperimentConfig(
        body=body, family=family, experiment=experiment, epsilon=grid, tolerances=tol,
        symmetry=symmetry, sandwich=sandwich, functionals=tuple(funcs),
        seed=r.number(("seed",), data.get("seed", 0), int, lo=0),
        jobs=r.number(("jobs",), data.get("jobs", 1), int, lo=1),
        n_rays=None if n_rays is None else r.number(("n_rays",), n_rays, int, lo=8),
        output=output)


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", field="--config")
    return parse_config(path.read_text(), base_dir=path.parent)
