"""Query-relevant objective DSL.

A small comprehension calculus replaces solver-specific code snippets as
the contract the language-model adapter must emit. Grammar (EBNF in
docs/dsl.md):

    objective = ("maximize" | "minimize") expression
    expression = term { ("+" | "-") term }
    term = factor { "*" factor }
    factor = ["-"] primary ["^" "2"]
    primary = NUMBER | ref | sumexpr | "(" expression ")"
    ref = IDENT "[" index {"," index} "]"
    sumexpr = "sum" "(" expression "for" binding {"," binding} ")"
    binding = IDENT "in" setexpr ["if" IDENT RELOP atom]
    setexpr = "I" | "K" | "{" atom {"," atom} "}"

Symbols: ``u``/``y``/``z`` are decision coordinates indexed by spot and SOC
level (``y`` has no k3 column), ``C`` is the capacity parameter. Validation
is the code safeguard: it returns machine-readable diagnoses (never raises)
covering symbols, index ranges, polynomial degree, and sense-compatible
convexity. Canonicalization expands comprehensions over the concrete
universe into a sorted monomial map -- two phrasings of the same polynomial
canonicalize identically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .mip import ModelError
from .model import SOC_LEVELS

# ---------------------------------------------------------------------------
# tokens


class ParseError(ValueError):
    def __init__(self, message, pos, line, col, expected=()):
        super().__init__(f"{line}:{col}: {message}"
                         + (f" (expected {', '.join(expected)})" if expected else ""))
        self.pos, self.line, self.col = pos, line, col
        self.expected = tuple(expected)


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+\.\d*|\.\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|==|!=|[-+*^(){}\[\],<>])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str     # num | ident | op | end
    text: str
    pos: int
    line: int
    col: int


def tokenize(text: str):
    tokens = []
    pos = 0
    line, col = 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, line, col)
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, m.group(), pos, line, col))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("end", "", pos, line, col))
    return tokens


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Lit:
    value: float


@dataclass(frozen=True)
class Ref:
    symbol: str
    indices: tuple   # of IndexName / IndexConst / IndexSoc


@dataclass(frozen=True)
class IndexName:
    name: str


@dataclass(frozen=True)
class IndexConst:
    value: int


@dataclass(frozen=True)
class IndexSoc:
    level: int       # 0..2


@dataclass(frozen=True)
class Add:
    left: object
    right: object


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    expr: object


@dataclass(frozen=True)
class Square:
    expr: object


@dataclass(frozen=True)
class SetRef:
    name: str        # "I" | "K"


@dataclass(frozen=True)
class SetLit:
    elements: tuple  # of IndexConst / IndexSoc


@dataclass(frozen=True)
class Condition:
    var: str
    op: str
    rhs: object      # IndexConst | IndexSoc


@dataclass(frozen=True)
class Binding:
    var: str
    over: object     # SetRef | SetLit
    cond: object = None


@dataclass(frozen=True)
class Sum:
    body: object
    bindings: tuple


@dataclass(frozen=True)
class ObjectiveAst:
    sense: str       # maximize | minimize
    expr: object


_SOC_NAMES = {name: k for k, name in enumerate(SOC_LEVELS)}


class _Parser:
    def __init__(self, text):
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, text=None, kind=None, expected=None):
        tok = self.tokens[self.i]
        if (text is not None and tok.text != text) or (kind is not None and tok.kind != kind):
            raise ParseError(f"unexpected {tok.text or 'end of input'!r}",
                             tok.pos, tok.line, tok.col,
                             expected=(expected or text or kind,))
        self.i += 1
        return tok

    def parse(self):
        tok = self.take(kind="ident", expected="maximize|minimize")
        if tok.text not in ("maximize", "minimize"):
            raise ParseError(f"objective must open with a sense, got {tok.text!r}",
                             tok.pos, tok.line, tok.col, expected=("maximize", "minimize"))
        expr = self.expression()
        end = self.peek()
        if end.kind != "end":
            raise ParseError(f"trailing input {end.text!r}", end.pos, end.line, end.col)
        return ObjectiveAst(tok.text, expr)

    def expression(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            right = self.term()
            node = Add(node, right) if op == "+" else Sub(node, right)
        return node

    def term(self):
        node = self.factor()
        while self.peek().text == "*":
            self.take()
            node = Mul(node, self.factor())
        return node

    def factor(self):
        if self.peek().text == "-":
            self.take()
            return Neg(self.factor())
        node = self.primary()
        if self.peek().text == "^":
            tok = self.take()
            exp = self.take(kind="num", expected="2")
            if exp.text != "2":
                raise ParseError(f"only squares are supported, got ^{exp.text}",
                                 tok.pos, tok.line, tok.col, expected=("2",))
            node = Square(node)
        return node

    def primary(self):
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            return Lit(float(tok.text))
        if tok.text == "(":
            self.take()
            node = self.expression()
            self.take(")", expected=")")
            return node
        if tok.kind == "ident" and tok.text == "sum":
            return self.sumexpr()
        if tok.kind == "ident":
            return self.ref()
        raise ParseError(f"unexpected {tok.text or 'end of input'!r}",
                         tok.pos, tok.line, tok.col,
                         expected=("number", "symbol", "sum", "("))

    def ref(self):
        name = self.take(kind="ident").text
        self.take("[", expected="[")
        indices = [self.index()]
        while self.peek().text == ",":
            self.take()
            indices.append(self.index())
        self.take("]", expected="]")
        return Ref(name, tuple(indices))

    def index(self):
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            if "." in tok.text:
                raise ParseError(f"index must be an integer, got {tok.text}",
                                 tok.pos, tok.line, tok.col)
            return IndexConst(int(tok.text))
        if tok.kind == "ident":
            self.take()
            if tok.text in _SOC_NAMES:
                return IndexSoc(_SOC_NAMES[tok.text])
            return IndexName(tok.text)
        raise ParseError(f"bad index {tok.text or 'end of input'!r}",
                         tok.pos, tok.line, tok.col,
                         expected=("integer", "index name", "SOC level"))

    def sumexpr(self):
        self.take("sum")
        self.take("(", expected="(")
        body = self.expression()
        self.take("for", expected="for")
        bindings = [self.binding()]
        while self.peek().text == ",":
            self.take()
            bindings.append(self.binding())
        self.take(")", expected=")")
        return Sum(body, tuple(bindings))

    def binding(self):
        var = self.take(kind="ident").text
        self.take("in", expected="in")
        over = self.setexpr()
        cond = None
        if self.peek().text == "if":
            self.take()
            cvar = self.take(kind="ident").text
            op_tok = self.take(kind="op", expected="comparison")
            if op_tok.text not in (">=", "<=", ">", "<", "==", "!="):
                raise ParseError(f"bad comparison {op_tok.text!r}", op_tok.pos,
                                 op_tok.line, op_tok.col)
            rhs = self.index()
            if isinstance(rhs, IndexName):
                raise ParseError("filter right side must be a literal",
                                 op_tok.pos, op_tok.line, op_tok.col)
            cond = Condition(cvar, op_tok.text, rhs)
        return Binding(var, over, cond)

    def setexpr(self):
        tok = self.peek()
        if tok.text in ("I", "K"):
            self.take()
            return SetRef(tok.text)
        if tok.text == "{":
            self.take()
            elems = [self.index()]
            while self.peek().text == ",":
                self.take()
                elems.append(self.index())
            self.take("}", expected="}")
            for e in elems:
                if isinstance(e, IndexName):
                    raise ParseError("set elements must be literals",
                                     tok.pos, tok.line, tok.col)
            return SetLit(tuple(elems))
        raise ParseError(f"bad index set {tok.text or 'end of input'!r}",
                         tok.pos, tok.line, tok.col, expected=("I", "K", "{"))


def parse(text: str) -> ObjectiveAst:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing (round-trips through parse)


def to_text(node) -> str:
    if isinstance(node, ObjectiveAst):
        return f"{node.sense} {to_text(node.expr)}"
    if isinstance(node, Lit):
        return repr(node.value) if node.value != int(node.value) else str(int(node.value))
    if isinstance(node, Ref):
        return f"{node.symbol}[{','.join(_index_text(i) for i in node.indices)}]"
    if isinstance(node, Add):
        return f"{to_text(node.left)} + {_wrap(node.right, (Add, Sub))}"
    if isinstance(node, Sub):
        return f"{to_text(node.left)} - {_wrap(node.right, (Add, Sub))}"
    if isinstance(node, Mul):
        return f"{_wrap(node.left, (Add, Sub))} * {_wrap(node.right, (Add, Sub, Mul))}"
    if isinstance(node, Neg):
        return f"-{_wrap(node.expr, (Add, Sub, Mul))}"
    if isinstance(node, Square):
        return f"{_wrap(node.expr, (Add, Sub, Mul, Neg))}^2"
    if isinstance(node, Sum):
        return (f"sum({to_text(node.body)} for "
                f"{', '.join(_binding_text(b) for b in node.bindings)})")
    raise TypeError(f"cannot print {node!r}")


def _wrap(node, grouping):
    text = to_text(node)
    return f"({text})" if isinstance(node, grouping) else text


def _index_text(idx):
    if isinstance(idx, IndexName):
        return idx.name
    if isinstance(idx, IndexConst):
        return str(idx.value)
    return SOC_LEVELS[idx.level]


def _binding_text(b):
    over = b.over.name if isinstance(b.over, SetRef) \
        else "{" + ",".join(_index_text(e) for e in b.over.elements) + "}"
    out = f"{b.var} in {over}"
    if b.cond:
        out += f" if {b.cond.var} {b.cond.op} {_index_text(b.cond.rhs)}"
    return out


# ---------------------------------------------------------------------------
# validation (the code safeguard)


@dataclass(frozen=True)
class Diagnosis:
    code: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.message}"


# symbol -> index domains; "soc12" excludes the full level (no k3 swaps)
MODEL_SYMBOLS = {
    "u": ("spot", "soc"),
    "y": ("spot", "soc12"),
    "z": ("spot", "soc"),
    "C": ("spot",),
}

PARAMETER_SYMBOLS = {"C"}


@dataclass(frozen=True)
class Universe:
    n_spots: int
    capacities: tuple = ()

    def spot_range(self):
        return range(self.n_spots)


def validate(ast: ObjectiveAst, symbols=None, universe: Universe | None = None) -> list:
    """Diagnoses for the repair loop; empty list means the objective is
    grammatical, well-scoped, at most quadratic, and sense-convex."""
    symbols = symbols or MODEL_SYMBOLS
    universe = universe or Universe(0)
    diags = []

    def index_ok(domain, idx, where):
        if isinstance(idx, IndexName):
            return  # scope handled separately
        if domain == "spot":
            if isinstance(idx, IndexSoc):
                diags.append(Diagnosis("index-range",
                                       f"{where}: SOC level used as a spot index"))
            elif not 0 <= idx.value < universe.n_spots:
                diags.append(Diagnosis(
                    "index-range",
                    f"{where}: spot {idx.value} outside the universe 0..{universe.n_spots - 1}"))
        else:
            if isinstance(idx, IndexConst):
                diags.append(Diagnosis("index-range",
                                       f"{where}: SOC index must be k1/k2/k3, got {idx.value}"))
            elif domain == "soc12" and idx.level > 1:
                diags.append(Diagnosis("index-range",
                                       f"{where}: k3 is not a valid level for this symbol"))

    def walk(node, scope):
        """Returns polynomial degree of the subtree."""
        if isinstance(node, Lit):
            return 0
        if isinstance(node, Ref):
            where = to_text(node)
            if node.symbol not in symbols:
                diags.append(Diagnosis("unknown-symbol",
                                       f"unknown symbol {node.symbol!r}"))
                return 1
            domains = symbols[node.symbol]
            if len(node.indices) != len(domains):
                diags.append(Diagnosis(
                    "index-arity",
                    f"{where}: {node.symbol} takes {len(domains)} indices"))
                return 1
            for domain, idx in zip(domains, node.indices):
                if isinstance(idx, IndexName):
                    if idx.name not in scope:
                        diags.append(Diagnosis("unbound-index",
                                               f"{where}: unbound index {idx.name!r}"))
                else:
                    index_ok(domain, idx, where)
            return 0 if node.symbol in PARAMETER_SYMBOLS else 1
        if isinstance(node, (Add, Sub)):
            return max(walk(node.left, scope), walk(node.right, scope))
        if isinstance(node, Neg):
            return walk(node.expr, scope)
        if isinstance(node, Mul):
            dl = walk(node.left, scope)
            dr = walk(node.right, scope)
            if dl > 0 and dr > 0:
                diags.append(Diagnosis(
                    "product",
                    "products of decision terms are not allowed; write squares as (...)^2"))
                return 2
            return dl + dr
        if isinstance(node, Square):
            inner = walk(node.expr, scope)
            if inner > 1:
                diags.append(Diagnosis("degree", "squares must wrap linear expressions"))
            return 2
        if isinstance(node, Sum):
            inner_scope = dict(scope)
            for b in node.bindings:
                if isinstance(b.over, SetLit):
                    for e in b.over.elements:
                        kind = "spot" if isinstance(e, IndexConst) else "soc"
                        if isinstance(e, IndexConst) and not 0 <= e.value < universe.n_spots:
                            diags.append(Diagnosis(
                                "index-range",
                                f"set element {e.value} outside the universe "
                                f"0..{universe.n_spots - 1}"))
                    kinds = {("spot" if isinstance(e, IndexConst) else "soc")
                             for e in b.over.elements}
                    inner_scope[b.var] = kinds.pop() if len(kinds) == 1 else "mixed"
                else:
                    inner_scope[b.var] = "spot" if b.over.name == "I" else "soc"
                if b.cond is not None and b.cond.var != b.var:
                    diags.append(Diagnosis(
                        "unbound-index",
                        f"filter variable {b.cond.var!r} is not the bound variable"))
            return walk(node.body, inner_scope)
        diags.append(Diagnosis("internal", f"unknown node {type(node).__name__}"))
        return 0

    degree = walk(ast.expr, {})
    if degree > 2:
        diags.append(Diagnosis("degree", "objective degree exceeds 2"))

    if not diags:
        try:
            form = canonicalize(ast, universe)
        except ModelError as exc:
            diags.append(Diagnosis("expansion", str(exc)))
            return diags
        for coef, _form, _const in form.squares:
            if ast.sense == "maximize" and coef > 0:
                diags.append(Diagnosis(
                    "convexity",
                    "maximizing a positively weighted square is non-concave"))
                break
            if ast.sense == "minimize" and coef < 0:
                diags.append(Diagnosis(
                    "convexity",
                    "minimizing a negatively weighted square is non-convex"))
                break
        if not form.monomials and not form.squares:
            # legal but worth surfacing: the repair loop treats it as fine
            pass
    return diags


# ---------------------------------------------------------------------------
# canonical form


@dataclass
class CanonicalForm:
    sense: str
    monomials: dict                 # tuple(sorted coord names) -> coefficient
    squares: list = field(default_factory=list)   # (coef, {coord: c}, const)

    def key(self) -> str:
        """Stable text rendering of the mathematical content."""
        parts = [self.sense]
        for mono in sorted(self.monomials):
            coef = self.monomials[mono]
            parts.append(f"{coef:+.12g}*{'*'.join(mono) if mono else '1'}")
        return " ".join(parts)

    def evaluate(self, point: dict) -> float:
        total = 0.0
        for mono, coef in self.monomials.items():
            term = coef
            for coord in mono:
                term *= point.get(coord, 0.0)
            total += term
        return total

    def __eq__(self, other):
        return (isinstance(other, CanonicalForm) and self.sense == other.sense
                and self.monomials == other.monomials)


class _Poly:
    __slots__ = ("monomials", "squares")

    def __init__(self, monomials=None, squares=None):
        self.monomials = monomials or {}
        self.squares = squares or []

    def scaled(self, factor):
        return _Poly({k: v * factor for k, v in self.monomials.items()},
                     [(c * factor, f, const) for c, f, const in self.squares])

    def plus(self, other):
        out = dict(self.monomials)
        for k, v in other.monomials.items():
            out[k] = out.get(k, 0.0) + v
        return _Poly(out, self.squares + other.squares)

    @property
    def degree(self):
        return max((len(k) for k in self.monomials), default=0)

    def constant(self):
        return self.monomials.get((), 0.0)


def _coord(symbol, spot, level):
    if symbol == "y" or symbol == "z" or symbol == "u":
        return f"{symbol}[{spot},{SOC_LEVELS[level]}]"
    raise ModelError(f"not a coordinate symbol: {symbol}")


def canonicalize(ast: ObjectiveAst, universe: Universe) -> CanonicalForm:
    """Expand comprehensions over the universe and merge like terms."""

    def resolve_index(idx, env):
        if isinstance(idx, IndexName):
            if idx.name not in env:
                raise ModelError(f"unbound index {idx.name!r}")
            return env[idx.name]
        if isinstance(idx, IndexConst):
            return ("spot", idx.value)
        return ("soc", idx.level)

    def set_values(over, env):
        if isinstance(over, SetRef):
            if over.name == "I":
                return [("spot", i) for i in universe.spot_range()]
            return [("soc", k) for k in range(len(SOC_LEVELS))]
        return [resolve_index(e, env) for e in over.elements]

    def cond_holds(cond, value):
        if cond is None:
            return True
        _kind, v = value
        rhs = cond.rhs.value if isinstance(cond.rhs, IndexConst) else cond.rhs.level
        return {
            ">=": v >= rhs, "<=": v <= rhs, ">": v > rhs,
            "<": v < rhs, "==": v == rhs, "!=": v != rhs,
        }[cond.op]

    def expand(node, env) -> _Poly:
        if isinstance(node, Lit):
            return _Poly({(): node.value})
        if isinstance(node, Ref):
            vals = [resolve_index(i, env) for i in node.indices]
            if node.symbol == "C":
                (_, spot), = vals
                if spot >= len(universe.capacities):
                    raise ModelError(f"capacity C[{spot}] unknown to the universe")
                return _Poly({(): float(universe.capacities[spot])})
            (_, spot), (_, level) = vals
            return _Poly({(_coord(node.symbol, spot, level),): 1.0})
        if isinstance(node, Add):
            return expand(node.left, env).plus(expand(node.right, env))
        if isinstance(node, Sub):
            return expand(node.left, env).plus(expand(node.right, env).scaled(-1.0))
        if isinstance(node, Neg):
            return expand(node.expr, env).scaled(-1.0)
        if isinstance(node, Mul):
            left = expand(node.left, env)
            right = expand(node.right, env)
            if left.degree == 0 and not left.squares:
                return right.scaled(left.constant())
            if right.degree == 0 and not right.squares:
                return left.scaled(right.constant())
            raise ModelError("non-scalar product survived validation")
        if isinstance(node, Square):
            inner = expand(node.expr, env)
            if inner.degree > 1 or inner.squares:
                raise ModelError("square of a nonlinear expression")
            const = inner.constant()
            form = {k[0]: v for k, v in inner.monomials.items() if k}
            monos = {(): const * const}
            for a, ca in form.items():
                monos[(a,)] = monos.get((a,), 0.0) + 2.0 * const * ca
                for b, cb in form.items():
                    key = tuple(sorted((a, b)))
                    monos[key] = monos.get(key, 0.0) + ca * cb
            return _Poly(monos, [(1.0, form, const)])
        if isinstance(node, Sum):
            total = _Poly()

            def loop(bindings, env2):
                nonlocal total
                if not bindings:
                    total = total.plus(expand(node.body, env2))
                    return
                b = bindings[0]
                for value in set_values(b.over, env2):
                    if cond_holds(b.cond, value):
                        env3 = dict(env2)
                        env3[b.var] = value
                        loop(bindings[1:], env3)

            loop(list(node.bindings), env)
            return total
        raise ModelError(f"cannot expand {type(node).__name__}")

    poly = expand(ast.expr, {})
    monomials = {k: v for k, v in poly.monomials.items() if v != 0.0}
    squares = [(c, f, const) for c, f, const in poly.squares if c != 0.0 and f]
    return CanonicalForm(ast.sense, monomials, squares)


# ---------------------------------------------------------------------------
# compilation into a problem objective


def coordinate_form(coord: str, problem) -> dict:
    """Map a coordinate name to a linear form over problem columns; net
    moves split into their sign parts."""
    if coord.startswith("z["):
        inner = coord[2:-1]
        return {problem.index_of(f"zp[{inner}]"): 1.0,
                problem.index_of(f"zm[{inner}]"): -1.0}
    return {problem.index_of(coord): 1.0}


def to_objective(form: CanonicalForm, problem, max_range=None):
    """(coeffs, constant, fragments) realizing the canonical form over the
    problem's columns; squares route through the exact PWL builder."""
    from .solver.pwl import linearize_separable_quadratic

    coeffs = {}
    constant = form.monomials.get((), 0.0)
    # subtract each square's own expansion from the monomials; what remains
    # must be purely linear
    residual = dict(form.monomials)
    residual.pop((), None)
    for coef, sq_form, const in form.squares:
        residual[()] = residual.get((), 0.0) - coef * const * const
        for a, ca in sq_form.items():
            residual[(a,)] = residual.get((a,), 0.0) - coef * 2.0 * const * ca
            for b, cb in sq_form.items():
                key = tuple(sorted((a, b)))
                residual[key] = residual.get(key, 0.0) - coef * ca * cb
    constant += residual.pop((), 0.0)
    for mono, coef in residual.items():
        if abs(coef) < 1e-12:
            continue
        if len(mono) != 1:
            raise ModelError(f"quadratic monomial {mono} outside any square term")
        for j, c in coordinate_form(mono[0], problem).items():
            coeffs[j] = coeffs.get(j, 0.0) + coef * c

    fragments = []
    if form.squares:
        terms = []
        for coef, sq_form, const in form.squares:
            flat = {}
            for coord, c in sq_form.items():
                for j, cc in coordinate_form(coord, problem).items():
                    flat[j] = flat.get(j, 0.0) + c * cc
            terms.append((coef, flat, const))
        fragments.append(linearize_separable_quadratic(terms, problem, max_range))
    return coeffs, constant, fragments
