"""Problem registry: the model problem and the four built-in experiments.

A ProblemSpec bundles the rectangle, the interface (level-set or parametric,
or none), the one-sided coefficient and source fields, the jump data, and the
four boundary conditions.  All field callables must accept numpy arrays and
be evaluable on the domain box enlarged by a couple of mesh widths (the
one-sided derivative lattices reach outside by up to h); the built-ins use
their global analytic formulas, so this holds trivially.  Sides follow the
closed-minus convention: psi <= 0 belongs to the minus region.

The built-in problems are stored as configuration text and parsed by the same
loader used for user files, so a written-out config round-trips bit-exactly.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .expressions import compile_expression
from .geometry import LevelSetInterface, ParametricInterface
from .jets import Poly2
from .transmission import CurveJet


@dataclass
class BoundaryCondition:
    kind: str                    # "dirichlet" | "robin" (alpha == 0 is Neumann)
    data: object                 # callable (x, y) -> boundary data on the side
    alpha: object = None         # callable (x, y), Robin coefficient


@dataclass
class ProblemSpec:
    name: str
    domain: tuple                # (l1, l2, l3, l4)
    interface: object            # LevelSetInterface | ParametricInterface | None
    a_plus: object
    a_minus: object
    f_plus: object
    f_minus: object
    boundary: dict               # side id 1..4 -> BoundaryCondition
    exact_u_plus: object = None
    exact_u_minus: object = None
    config_text: str = ""

    @property
    def psi(self):
        if self.interface is None:
            return lambda x, y: np.ones_like(np.asarray(x, dtype=float))
        return self.interface.psi

    @property
    def has_exact(self) -> bool:
        return self.exact_u_plus is not None

    def exact_u(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.interface is None:
            return self.exact_u_plus(x, y)
        side = np.asarray(self.psi(x, y)) > 0.0
        return np.where(side, self.exact_u_plus(x, y), self.exact_u_minus(x, y))


def curvature(curve: CurveJet) -> float:
    """|r's'' - r''s'| / ((r')^2 + (s')^2)^(3/2) from the curve jets."""
    r1, r2 = curve.r[1], curve.r[2]
    s1, s2 = curve.s[1], curve.s[2]
    speed2 = r1 * r1 + s1 * s1
    if speed2 == 0.0:
        raise ConfigError("degenerate tangent in curvature evaluation")
    return abs(r1 * s2 - r2 * s1) / speed2**1.5


def curvature_jump(curve: CurveJet):
    """The (g, gGamma) pair of the curvature-driven experiment: (k - 1, k)."""
    k = curvature(curve)
    return k - 1.0, k


# ----------------------------------------------------------------------------
# configuration loader
# ----------------------------------------------------------------------------

def load_config(path) -> ProblemSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config_string(fh.read())


def load_config_string(text: str) -> ProblemSpec:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_file(io.StringIO(text))
    except configparser.Error as exc:
        raise ConfigError(f"malformed problem config: {exc}") from exc

    def need(section, key):
        if not cp.has_option(section, key):
            raise ConfigError(f"config is missing [{section}] {key}")
        return cp.get(section, key)

    name = cp.get("problem", "name", fallback="unnamed")
    const = lambda src: float(compile_expression(src, ())())
    domain = tuple(const(need("domain", k)) for k in ("l1", "l2", "l3", "l4"))

    kind = cp.get("interface", "kind", fallback="none").strip().lower()
    if kind == "none":
        interface = None
    elif kind == "levelset":
        psi = compile_expression(need("interface", "psi"), ("x", "y"))
        g = compile_expression(need("interface", "g"), ("x", "y"))
        gg = compile_expression(need("interface", "g_gamma"), ("x", "y"))
        interface = LevelSetInterface(psi, jump_g=g, jump_ggamma=gg)
    elif kind == "parametric":
        r = compile_expression(need("interface", "r"), ("theta",))
        s = compile_expression(need("interface", "s"), ("theta",))
        psi = compile_expression(need("interface", "psi"), ("x", "y"))
        g = compile_expression(need("interface", "g"), ("theta",))
        gg = compile_expression(need("interface", "g_gamma"), ("theta",))
        period = const(cp.get("interface", "period", fallback="2*pi"))
        interface = ParametricInterface(r, s, psi, jump_g=g, jump_ggamma=gg,
                                        period=period)
    else:
        raise ConfigError(f"unknown interface kind {kind!r}")

    def field_expr(key, default_key=None):
        if cp.has_option("fields", key):
            src = cp.get("fields", key)
        elif default_key is not None:
            src = need("fields", default_key)
        else:
            src = need("fields", key)
        return compile_expression(src, ("x", "y"))

    a_plus = field_expr("a_plus")
    f_plus = field_expr("f_plus")
    a_minus = field_expr("a_minus", "a_plus" if interface is None else None)
    f_minus = field_expr("f_minus", "f_plus" if interface is None else None)

    exact_p = exact_m = None
    if cp.has_section("exact"):
        exact_p = compile_expression(need("exact", "u_plus"), ("x", "y"))
        src_m = cp.get("exact", "u_minus", fallback=cp.get("exact", "u_plus"))
        exact_m = compile_expression(src_m, ("x", "y"))

    boundary = {}
    for side in (1, 2, 3, 4):
        sec = f"boundary.gamma{side}"
        if not cp.has_section(sec):
            raise ConfigError(f"config is missing section [{sec}]")
        bkind = need(sec, "kind").strip().lower()
        data = compile_expression(need(sec, "g"), ("x", "y"))
        if bkind == "dirichlet":
            boundary[side] = BoundaryCondition("dirichlet", data)
        elif bkind in ("robin", "neumann"):
            alpha_src = cp.get(sec, "alpha", fallback="0")
            alpha = compile_expression(alpha_src, ("x", "y"))
            boundary[side] = BoundaryCondition("robin", data, alpha)
        else:
            raise ConfigError(f"unknown boundary kind {bkind!r} in [{sec}]")

    return ProblemSpec(name=name, domain=domain, interface=interface,
                       a_plus=a_plus, a_minus=a_minus, f_plus=f_plus,
                       f_minus=f_minus, boundary=boundary,
                       exact_u_plus=exact_p, exact_u_minus=exact_m,
                       config_text=text)


# ----------------------------------------------------------------------------
# built-in experiments
# ----------------------------------------------------------------------------

_EX31_F = (
    "-( cos(x)*sin(y)*(2*cos(2*x)*sin(2*y)*(x^4+2*y^4-2)"
    " + 4*x^3*sin(2*x)*sin(2*y))"
    " + sin(x)*cos(y)*(2*sin(2*x)*cos(2*y)*(x^4+2*y^4-2)"
    " + 8*y^3*sin(2*x)*sin(2*y))"
    " + (2+sin(x)*sin(y))*( -8*sin(2*x)*sin(2*y)*(x^4+2*y^4-2)"
    " + 16*cos(2*x)*sin(2*y)*x^3 + 12*sin(2*x)*sin(2*y)*x^2"
    " + 32*sin(2*x)*cos(2*y)*y^3 + 24*sin(2*x)*sin(2*y)*y^2 ) )"
)

_EX31 = f"""
[problem]
name = ex31

[domain]
l1 = -2.5
l2 = 2.5
l3 = -2.5
l4 = 2.5

[interface]
kind = levelset
psi = x^4 + 2*y^4 - 2
g = -30
g_gamma = 0

[fields]
a_plus = 2 + sin(x)*sin(y)
a_minus = 1000*(2 + sin(x)*sin(y))
f_plus = {_EX31_F}
f_minus = {_EX31_F}

[exact]
u_plus = sin(2*x)*sin(2*y)*(x^4+2*y^4-2) + 1
u_minus = 0.001*sin(2*x)*sin(2*y)*(x^4+2*y^4-2) + 31

[boundary.gamma1]
kind = robin
alpha = cos(y) + 2
g = -(2*cos(2*x)*sin(2*y)*(x^4+2*y^4-2) + 4*x^3*sin(2*x)*sin(2*y))
    + (cos(y)+2)*(sin(2*x)*sin(2*y)*(x^4+2*y^4-2) + 1)

[boundary.gamma2]
kind = dirichlet
g = sin(2*x)*sin(2*y)*(x^4+2*y^4-2) + 1

[boundary.gamma3]
kind = robin
alpha = sin(x) + 2
g = -(2*sin(2*x)*cos(2*y)*(x^4+2*y^4-2) + 8*y^3*sin(2*x)*sin(2*y))
    + (sin(x)+2)*(sin(2*x)*sin(2*y)*(x^4+2*y^4-2) + 1)

[boundary.gamma4]
kind = dirichlet
g = sin(2*x)*sin(2*y)*(x^4+2*y^4-2) + 1
"""

_RHO8 = "(pi/3 + 0.4*sin(8*theta))"
_RP8 = "(3.2*cos(8*theta))"
_EX32_RP = f"({_RP8}*cos(theta) - {_RHO8}*sin(theta))"
_EX32_SP = f"({_RP8}*sin(theta) + {_RHO8}*cos(theta))"

_EX32 = f"""
[problem]
name = ex32

[domain]
l1 = -2
l2 = 2
l3 = -2
l4 = 2

[interface]
kind = parametric
r = {_RHO8}*cos(theta)
s = {_RHO8}*sin(theta)
psi = x^2 + y^2 - (pi/3 + 0.4*sin(8*atan2(y,x)))^2
g = cos({_RHO8}*cos(theta)) - 1000*sin(3*pi*{_RHO8}*sin(theta)) - 1500
g_gamma = (-sin({_RHO8}*cos(theta))*{_EX32_SP}
           + 3*pi*cos(3*pi*{_RHO8}*sin(theta))*{_EX32_RP})
          / sqrt({_EX32_RP}^2 + {_EX32_SP}^2)

[fields]
a_plus = 1
a_minus = 0.001
f_plus = cos(x)
f_minus = 9*pi^2*sin(3*pi*y)

[exact]
u_plus = cos(x)
u_minus = 1000*sin(3*pi*y) + 1500

[boundary.gamma1]
kind = dirichlet
g = cos(x)

[boundary.gamma2]
kind = dirichlet
g = cos(x)

[boundary.gamma3]
kind = dirichlet
g = cos(x)

[boundary.gamma4]
kind = dirichlet
g = cos(x)
"""

_EX33_KAPPA = "0.5/(sin(theta)^2 + 0.25*cos(theta)^2)^1.5"

_EX33 = f"""
[problem]
name = ex33

[domain]
l1 = -1.5
l2 = 1.5
l3 = -1.5
l4 = 1.5

[interface]
kind = parametric
r = cos(theta)
s = 0.5*sin(theta)
psi = x^2 + 4*y^2 - 1
g = {_EX33_KAPPA} - 1
g_gamma = {_EX33_KAPPA}

[fields]
a_plus = 2 + sin(x+y)
a_minus = 10000*(2 + sin(x+y))
f_plus = cos(pi*x)*cos(pi*y)
f_minus = sin(pi*(x-y))

[boundary.gamma1]
kind = robin
alpha = cos(y) + 2
g = sin(2*pi*y)

[boundary.gamma2]
kind = dirichlet
g = 0

[boundary.gamma3]
kind = robin
alpha = sin(x) + 2
g = cos(pi*x)

[boundary.gamma4]
kind = dirichlet
g = 0
"""

_RHO10 = "(pi/3 + 0.4*sin(10*theta))"

_EX34 = f"""
[problem]
name = ex34

[domain]
l1 = -2
l2 = 2
l3 = -2
l4 = 2

[interface]
kind = parametric
r = {_RHO10}*cos(theta)
s = {_RHO10}*sin(theta)
psi = x^2 + y^2 - (pi/3 + 0.4*sin(10*atan2(y,x)))^2
g = -sin(theta) - 1
g_gamma = cos(theta)

[fields]
a_plus = 1000*(2 + cos(x)*cos(y))
a_minus = 2 + cos(x)*cos(y)
f_plus = sin(pi*x)*sin(pi*y)
f_minus = cos(pi*x)*cos(pi*y)

[boundary.gamma1]
kind = dirichlet
g = 0

[boundary.gamma2]
kind = dirichlet
g = 0

[boundary.gamma3]
kind = dirichlet
g = 0

[boundary.gamma4]
kind = dirichlet
g = 0
"""

BUILTIN_CONFIGS = {"ex31": _EX31, "ex32": _EX32, "ex33": _EX33, "ex34": _EX34}


def builtin(name: str) -> ProblemSpec:
    if name not in BUILTIN_CONFIGS:
        raise ConfigError(
            f"unknown builtin {name!r}; choose from {sorted(BUILTIN_CONFIGS)}")
    return load_config_string(BUILTIN_CONFIGS[name])


# ----------------------------------------------------------------------------
# manufactured cases for property tests
# ----------------------------------------------------------------------------

@dataclass
class ManufacturedCase:
    problem: ProblemSpec
    u_plus: Poly2
    u_minus: Poly2

    def exact(self, x, y):
        return self.problem.exact_u(x, y)


def _random_poly(rng, degree, scale=1.0):
    c = np.zeros((degree + 1, degree + 1))
    for m in range(degree + 1):
        for n in range(degree + 1 - m):
            c[m, n] = scale * rng.uniform(-1, 1)
    return Poly2(c)


def _pde_source(a: Poly2, u: Poly2) -> Poly2:
    ux, uy = u.dx(), u.dy()
    return (a.dx() * ux + a.dy() * uy + a * (ux.dx() + uy.dy())).scaled(-1.0)


def manufacture(seed: int, degree: int = 5,
                interface_kind: str = "circle") -> ManufacturedCase:
    """A piecewise-polynomial problem whose data satisfy the interface and
    boundary conditions exactly by construction."""
    if degree > 7:
        raise ConfigError("manufactured degree must be at most 7")
    rng = np.random.default_rng(seed)
    u_p = _random_poly(rng, degree, scale=0.5)
    u_m = _random_poly(rng, degree, scale=0.5)
    a_p = _random_poly(rng, 3, scale=0.1)
    a_p.c[0, 0] = 2.0
    a_m = _random_poly(rng, 3, scale=0.1)
    a_m.c[0, 0] = 1.0
    f_p, f_m = _pde_source(a_p, u_p), _pde_source(a_m, u_m)

    if interface_kind == "none":
        interface = None
        u_m, a_m, f_m = u_p, a_p, f_p
    elif interface_kind in ("circle", "ellipse"):
        # radius^2 = 0.9 keeps the curve away from dyadic grid nodes and the boundary
        if interface_kind == "circle":
            def psi(x, y):
                return np.asarray(x) ** 2 + np.asarray(y) ** 2 - 0.9

            def grad_psi(x, y):
                return 2.0 * np.asarray(x), 2.0 * np.asarray(y)
        else:
            def psi(x, y):
                return np.asarray(x) ** 2 + 4.0 * np.asarray(y) ** 2 - 0.9

            def grad_psi(x, y):
                return 2.0 * np.asarray(x), 8.0 * np.asarray(y)

        def jump_g(x, y):
            return u_p.eval(x, y) - u_m.eval(x, y)

        def jump_gg(x, y):
            gx, gy = grad_psi(x, y)
            norm = np.hypot(gx, gy)
            nx, ny = gx / norm, gy / norm
            fp = a_p.eval(x, y) * (u_p.dx().eval(x, y) * nx
                                   + u_p.dy().eval(x, y) * ny)
            fm = a_m.eval(x, y) * (u_m.dx().eval(x, y) * nx
                                   + u_m.dy().eval(x, y) * ny)
            return fp - fm

        interface = LevelSetInterface(psi, jump_g=jump_g, jump_ggamma=jump_gg)
    else:
        raise ConfigError(f"unknown manufactured interface {interface_kind!r}")

    boundary = {side: BoundaryCondition("dirichlet", u_p.as_callable())
                for side in (1, 2, 3, 4)}
    problem = ProblemSpec(
        name=f"manufactured-{seed}", domain=(-2.0, 2.0, -2.0, 2.0),
        interface=interface, a_plus=a_p.as_callable(),
        a_minus=a_m.as_callable(), f_plus=f_p.as_callable(),
        f_minus=f_m.as_callable(), boundary=boundary,
        exact_u_plus=u_p.as_callable(), exact_u_minus=u_m.as_callable())
    return ManufacturedCase(problem=problem, u_plus=u_p, u_minus=u_m)
