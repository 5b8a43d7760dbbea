"""Explicit-state ground truth for bounded instances.

Three independent procedures live here:

* :func:`enumerate_system` builds the explicit transition relation of a
  system inside finite bounds.  Transitions that leave the bounds are sent to
  a designated sink that self-loops and is never bad.
* :func:`build_explicit_game` and :func:`solve_attractor` decide the
  verification game between falsifier and verifier by a backward attractor.
* :func:`scheme_sat_finite` and :func:`horn_sat_finite` decide
  satisfiability of a scheme system or Horn system over finite domains by
  grounding every formula into clauses over the unknown atoms and searching
  all interpretations.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from hyperhorn.formula import (
    BOOL,
    Op,
    OutOfBounds,
    Term,
    Var,
    all_vars,
    compile_formula,
    free_vars,
)
from hyperhorn.system import HyperSpec, TransitionSystem, expand_systems

SINK = -1


class OracleError(RuntimeError):
    pass


# ------------------------------------------------------------------- bounds


Bounds = Mapping[str, Sequence[object]]


def int_range(lo: int, hi: int) -> tuple[int, ...]:
    """Inclusive integer range."""
    return tuple(range(lo, hi + 1))


def array_values(size: int, elems: Sequence[object]) -> tuple[tuple, ...]:
    return tuple(itertools.product(elems, repeat=size))


def _domain_of(v: Var, bounds: Bounds) -> Sequence[object]:
    if v.name in bounds:
        return bounds[v.name]
    if v.sort == BOOL:
        return (False, True)
    raise OracleError(f"no bounds given for {v.name}")


def label_values(ts: TransitionSystem, bounds: Bounds) -> tuple[object, ...]:
    if ts.label.name in bounds:
        return tuple(bounds[ts.label.name])
    if ts.label_domain is not None:
        return ts.label_domain
    if ts.label not in free_vars(ts.tr):
        return (0,)
    if ts.label.sort == BOOL:
        return (False, True)
    raise OracleError(f"no bounds for the label {ts.label.name} of an infinite label domain")


# --------------------------------------------------------------- enumeration


@dataclass
class ExplicitSystem:
    ts: TransitionSystem
    states: list[tuple]
    index: dict[tuple, int]
    init: list[int]
    succ: list[list[tuple[object, int]]]  # (label, target or SINK)
    labels: tuple[object, ...]
    cut: bool
    approximate: bool  # some primed variable was enumerated rather than solved

    def env(self, s: int, copy: int | None = None, primed: bool = False) -> dict[Var, object]:
        return {
            Var(v.name, v.sort, copy, primed): x for v, x in zip(self.ts.vocab, self.states[s])
        }

    def targets(self, s: int) -> list[int]:
        seen: dict[int, None] = {}
        for _, t in self.succ[s]:
            seen.setdefault(t, None)
        return list(seen)


def _split_or(t: Term) -> list[Term]:
    if isinstance(t, Op) and t.op == "or":
        out: list[Term] = []
        for a in t.args:
            out.extend(_split_or(a))
        return out
    return [t]


def _split_and(t: Term) -> list[Term]:
    if isinstance(t, Op) and t.op == "and":
        out: list[Term] = []
        for a in t.args:
            out.extend(_split_and(a))
        return out
    return [t]


@dataclass
class _Branch:
    pre: Callable  # conjuncts without primed variables
    defs: list[tuple[Var, Callable]]
    free: list[Var]
    guard: Callable


def _branches(ts: TransitionSystem, domains: Callable[[Var], Iterable[object]]) -> list[_Branch]:
    primed = list(ts.primed_vocab)
    out = []
    for disjunct in _split_or(ts.tr):
        conj = _split_and(disjunct)
        solved: list[Var] = []
        defs: list[tuple[Var, Callable]] = []
        used: set[int] = set()
        progress = True
        while progress:
            progress = False
            for idx, c in enumerate(conj):
                if idx in used or not (isinstance(c, Op) and c.op == "=" and len(c.args) == 2):
                    continue
                for x, t in ((c.args[0], c.args[1]), (c.args[1], c.args[0])):
                    if (
                        isinstance(x, Var)
                        and x in primed
                        and x not in solved
                        and all((not u.primed) or u in solved for u in free_vars(t))
                        and x not in all_vars(t)
                    ):
                        defs.append((x, compile_formula(t, domains)))
                        solved.append(x)
                        used.add(idx)
                        progress = True
                        break
        free = [x for x in primed if x not in solved]
        rest = [c for i, c in enumerate(conj) if i not in used]
        pre = [c for c in rest if not any(u.primed for u in free_vars(c))]
        post = [c for c in rest if any(u.primed for u in free_vars(c))]
        out.append(_Branch(_conj(pre, domains), defs, free, _conj(post, domains)))
    return out


def _conj(fs: Sequence[Term], domains) -> Callable:
    if not fs:
        return lambda env: True
    return compile_formula(fs[0] if len(fs) == 1 else Op("and", tuple(fs)), domains)


def enumerate_system(ts: TransitionSystem, bounds: Bounds, cap: int = 200_000) -> ExplicitSystem:
    """Explicit states and successors of ``ts`` inside ``bounds``."""
    doms = [_domain_of(v, bounds) for v in ts.vocab]
    total = 1
    for d in doms:
        total *= len(d)
    if total > cap:
        raise OracleError(f"{total} states exceed the cap of {cap}")
    states = [tuple(x) for x in itertools.product(*doms)]
    index = {s: i for i, s in enumerate(states)}
    labels = label_values(ts, bounds)

    def domains(v: Var) -> Sequence[object]:
        if v.name == ts.label.name:
            return labels
        return _domain_of(v, bounds)

    init_f = compile_formula(ts.init, domains)
    branches = _branches(ts, domains)
    approximate = any(b.free for b in branches)
    init = []
    succ: list[list[tuple[object, int]]] = []
    cut = False
    for i, s in enumerate(states):
        base = {v: x for v, x in zip(ts.vocab, s)}
        try:
            if init_f(base):
                init.append(i)
        except OutOfBounds:
            pass
        edges: dict[tuple[object, int], None] = {}
        for lab in labels:
            env0 = dict(base)
            env0[ts.label] = lab
            for b in branches:
                env = dict(env0)
                try:
                    if not b.pre(env):
                        continue
                    for x, fn in b.defs:
                        env[x] = fn(env)
                except OutOfBounds:
                    edges[(lab, SINK)] = None
                    cut = True
                    continue
                for vals in itertools.product(*(_domain_of(x, bounds) for x in b.free)):
                    env.update(zip(b.free, vals))
                    try:
                        ok = b.guard(env)
                    except OutOfBounds:
                        edges[(lab, SINK)] = None
                        cut = True
                        continue
                    if not ok:
                        continue
                    target = tuple(env[v.prime()] for v in ts.vocab)
                    j = index.get(target)
                    if j is None:
                        edges[(lab, SINK)] = None
                        cut = True
                    else:
                        edges[(lab, j)] = None
        if not edges:
            # stuck state: self loop for every label
            edges = {(lab, i): None for lab in labels}
        succ.append(list(edges))
    return ExplicitSystem(ts, states, index, init, succ, labels, cut, approximate)


# ----------------------------------------------------------------- the game


@dataclass
class ExplicitGame:
    k: int
    l: int
    falsifier: list[tuple[int, ...]]  # composed states; SINK tuple is (SINK,)*k
    verifier: list[tuple[tuple[int, ...], tuple[int, ...]]]
    initial: list[int]
    bad: set[int]
    f_moves: list[list[int]]  # falsifier node -> verifier nodes
    v_moves: list[list[tuple[tuple[int, ...], tuple[int, ...], int]]]  # (M, exists-targets, falsifier node)
    cut: bool
    approximate: bool


def valid_schedules(observed: Sequence[bool]) -> list[tuple[int, ...]]:
    """Valid schedules of a composed state, following the barrier definition."""
    k = len(observed)
    out = []
    for n in range(1, 2**k):
        m = tuple(i + 1 for i in range(k) if n >> i & 1)
        if all(not observed[i - 1] for i in m):
            out.append(m)
        elif len(m) == k and all(observed):
            out.append(m)
    return out


def build_explicit_game(
    systems: Sequence[TransitionSystem],
    spec: HyperSpec,
    bounds: Bounds | Sequence[Bounds],
    cap: int = 2_000_000,
    explicit: Sequence[ExplicitSystem] | None = None,
) -> ExplicitGame:
    k, l = spec.k, spec.l
    per_copy = expand_systems(systems, k)
    if explicit is None:
        bl = list(bounds) if isinstance(bounds, (list, tuple)) else [bounds] * k
        cache: dict[int, ExplicitSystem] = {}
        explicit = []
        for i, ts in enumerate(per_copy):
            key = id(ts) if len(bl) == 1 or bl[i] is bl[0] else -1 - i
            if key not in cache:
                cache[key] = enumerate_system(ts, bl[i])
            explicit.append(cache[key])
    ex = list(explicit)
    obs = []
    for i, e in enumerate(ex, start=1):
        f = compile_formula(spec.obs[i - 1])
        obs.append([bool(f(e.env(s))) for s in range(len(e.states))])
    pre = compile_formula(spec.pre)
    phi = compile_formula(spec.phi)

    def composed_env(sbar: tuple[int, ...]) -> dict[Var, object]:
        env: dict[Var, object] = {}
        for i, s in enumerate(sbar, start=1):
            env.update(ex[i - 1].env(s, copy=i))
        return env

    sink = (SINK,) * k
    f_index: dict[tuple[int, ...], int] = {}
    falsifier: list[tuple[int, ...]] = []
    v_index: dict[tuple, int] = {}
    verifier: list = []
    f_moves: list[list[int]] = []
    v_moves: list[list] = []
    bad: set[int] = set()
    queue: deque[int] = deque()

    def f_node(sbar: tuple[int, ...]) -> int:
        if SINK in sbar:
            sbar = sink
        if sbar in f_index:
            return f_index[sbar]
        n = len(falsifier)
        if n > cap:
            raise OracleError(f"game exceeds {cap} falsifier states")
        f_index[sbar] = n
        falsifier.append(sbar)
        f_moves.append([])
        queue.append(n)
        return n

    initial = []
    for sbar in itertools.product(*(e.init for e in ex)):
        if pre(composed_env(sbar)):
            initial.append(f_node(tuple(sbar)))

    cut_seen = False
    while queue:
        n = queue.popleft()
        sbar = falsifier[n]
        if sbar == sink:
            key = (sink, ())
            if key not in v_index:
                v_index[key] = len(verifier)
                verifier.append(key)
                v_moves.append([((), (), n)])
            f_moves[n] = [v_index[key]]
            cut_seen = True
            continue
        observed = [obs[i][s] for i, s in enumerate(sbar)]
        if all(observed) and not phi(composed_env(sbar)):
            bad.add(n)
        choices_forall = [ex[i].targets(sbar[i]) for i in range(l)]
        moves = []
        for tf in itertools.product(*choices_forall):
            key = (sbar, tuple(tf))
            if key not in v_index:
                v_index[key] = len(verifier)
                verifier.append(key)
                v_moves.append(_verifier_moves(ex, sbar, tuple(tf), observed, l, f_node))
            moves.append(v_index[key])
        f_moves[n] = moves
    return ExplicitGame(
        k,
        l,
        falsifier,
        verifier,
        initial,
        bad,
        f_moves,
        v_moves,
        cut_seen,
        any(e.approximate for e in ex),
    )


def _verifier_moves(ex, sbar, tf, observed, l, f_node):
    out = []
    for m in valid_schedules(observed):
        ex_idx = [i for i in m if i > l]
        options = [ex[i - 1].targets(sbar[i - 1]) for i in ex_idx]
        for te in itertools.product(*options):
            nxt = list(sbar)
            for i in m:
                if i <= l:
                    nxt[i - 1] = tf[i - 1]
            for i, t in zip(ex_idx, te):
                nxt[i - 1] = t
            out.append((m, tuple(te), f_node(tuple(nxt))))
    return out


@dataclass
class GameResult:
    verifier_wins: bool
    cut: bool
    approximate: bool
    attractor_size: int
    falsifier_states: int
    strategy: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] = field(default_factory=dict)
    losing_initial: list[tuple[int, ...]] = field(default_factory=list)
    in_attractor: list[bool] = field(default_factory=list)  # falsifier nodes, then verifier nodes

    @property
    def trusted(self) -> bool:
        """Falsifier wins are always trusted; verifier wins only without cut transitions."""
        return (not self.verifier_wins) or not (self.cut or self.approximate)


def solve_attractor(game: ExplicitGame) -> GameResult:
    """Backward attractor of the falsifier towards the bad states."""
    nf, nv = len(game.falsifier), len(game.verifier)
    # node ids: falsifier i -> i, verifier j -> nf + j
    preds: list[list[int]] = [[] for _ in range(nf + nv)]
    count = [0] * (nf + nv)
    for i, mv in enumerate(game.f_moves):
        for j in mv:
            preds[nf + j].append(i)
    for j, mv in enumerate(game.v_moves):
        targets = {t for _, _, t in mv}
        count[nf + j] = len(targets)
        for t in targets:
            preds[t].append(nf + j)
    attr = [False] * (nf + nv)
    queue = deque()
    for b in game.bad:
        attr[b] = True
        queue.append(b)
    for j in range(nv):  # a verifier without moves ends the play finitely and loses
        if count[nf + j] == 0 and not attr[nf + j]:
            attr[nf + j] = True
            queue.append(nf + j)
    while queue:
        x = queue.popleft()
        for p in set(preds[x]):
            if attr[p]:
                continue
            if p < nf:  # falsifier picks any move into the attractor
                attr[p] = True
                queue.append(p)
            else:
                count[p] -= 1
                if count[p] == 0:
                    attr[p] = True
                    queue.append(p)
    losing = [game.falsifier[i] for i in game.initial if attr[i]]
    strategy = {}
    for j, mv in enumerate(game.v_moves):
        if attr[nf + j]:
            continue
        for m, te, t in mv:
            if not attr[t]:
                strategy[j] = (m, te)
                break
    return GameResult(
        not losing,
        game.cut,
        game.approximate,
        sum(attr),
        nf,
        strategy,
        losing,
        attr,
    )


def check_attractor_fixpoint(game: ExplicitGame, result: GameResult) -> bool:
    """The attractor is closed: bad states are in it, and outside it the verifier can always stay outside."""
    nf = len(game.falsifier)
    attr = result.in_attractor
    if any(not attr[b] for b in game.bad):
        return False
    for i, mv in enumerate(game.f_moves):
        if not attr[i] and any(attr[nf + j] for j in mv):
            return False
    for j, mv in enumerate(game.v_moves):
        outside = [t for _, _, t in mv if not attr[t]]
        if attr[nf + j] == bool(outside):
            return False
    return True


def play_game(
    systems: Sequence[TransitionSystem], spec: HyperSpec, bounds: Bounds | Sequence[Bounds]
) -> GameResult:
    return solve_attractor(build_explicit_game(systems, spec, bounds))


def ksafety_oracle(systems: Sequence[TransitionSystem], spec: HyperSpec, bounds: Bounds) -> GameResult:
    """k-safety as the degenerate game without existential traces."""
    if spec.l != spec.k:
        raise OracleError("ksafety_oracle expects a spec without existential traces")
    return play_game(systems, spec, bounds)


# ------------------------------------------------- finite-domain satisfiability


Domains = Callable[[Var], Sequence[object]]


def _assignments(vs: Sequence[Var], domains: Domains) -> list[dict[Var, object]]:
    return [dict(zip(vs, vals)) for vals in itertools.product(*(domains(v) for v in vs))]


def bool_domains(v: Var) -> Sequence[object]:
    if v.sort == BOOL:
        return (False, True)
    raise OracleError(f"{v} is not Boolean; pass explicit domains")


class _Atoms:
    """Numbering of ground unknown applications as propositional atoms."""

    def __init__(self) -> None:
        self.index: dict[tuple, int] = {}

    def __call__(self, name: str, args: tuple) -> int:
        key = (name, args)
        if key not in self.index:
            self.index[key] = len(self.index) + 1
        return self.index[key]


def dpll(clauses: Sequence[Sequence[int]], n_atoms: int) -> dict[int, bool] | None:
    """Complete search over interpretations with unit propagation; a model or None."""
    if any(len(c) == 0 for c in clauses):
        return None
    occurs: dict[int, list[int]] = {}
    for ci, c in enumerate(clauses):
        for lit in c:
            occurs.setdefault(-lit, []).append(ci)  # clauses touched when lit becomes false
    assign: dict[int, bool] = {}

    def value(lit: int) -> bool | None:
        v = assign.get(abs(lit))
        return None if v is None else (v if lit > 0 else not v)

    def propagate(queue: list[int], trail: list[int]) -> bool:
        while queue:
            lit = queue.pop()
            for ci in occurs.get(lit, ()):
                unassigned = None
                n_un = 0
                for x in clauses[ci]:
                    val = value(x)
                    if val is True:
                        break
                    if val is None:
                        n_un += 1
                        unassigned = x
                else:
                    if n_un == 0:
                        return False
                    if n_un == 1:
                        assign[abs(unassigned)] = unassigned > 0  # type: ignore[operator]
                        trail.append(abs(unassigned))  # type: ignore[arg-type]
                        queue.append(unassigned)  # type: ignore[arg-type]
        return True

    def set_lit(lit: int, trail: list[int]) -> bool:
        assign[abs(lit)] = lit > 0
        trail.append(abs(lit))
        return propagate([lit], trail)

    def undo(trail: list[int]) -> None:
        for a in trail:
            del assign[a]

    def search(next_atom: int) -> bool:
        while next_atom <= n_atoms and next_atom in assign:
            next_atom += 1
        if next_atom > n_atoms:
            return True
        for lit in (-next_atom, next_atom):
            trail: list[int] = []
            if set_lit(lit, trail) and search(next_atom + 1):
                return True
            undo(trail)
        return False

    trail0: list[int] = []
    for c in clauses:
        if len(c) == 1 and value(c[0]) is None:
            if not set_lit(c[0], trail0):
                return None
        elif len(c) == 1 and value(c[0]) is False:
            return None
    if not search(1):
        return None
    return dict(assign)


def ground_scheme(scheme, domains: Domains = bool_domains) -> tuple[list[list[int]], _Atoms]:
    """Clauses over Inv(v) and A_u(v, w) for every ground instance of the 2 + 2|U| + 1 formulas."""
    from hyperhorn.scheme import INV, arbiter_name

    v, w = scheme.v_vocab, scheme.w_vocab
    vp = tuple(x.prime() for x in v)
    atom = _Atoms()
    vs = [tuple(a[x] for x in v) for a in _assignments(v, domains)]
    ws = [tuple(a[x] for x in w) for a in _assignments(w, domains)]
    alpha = compile_formula(scheme.alpha, domains)
    beta = compile_formula(scheme.beta, domains)
    gamma = {t: compile_formula(scheme.gamma[t], domains) for t in scheme.tags}
    delta = {t: compile_formula(scheme.delta[t], domains) for t in scheme.tags}
    out: list[list[int]] = []
    for sv in vs:
        env_v = dict(zip(v, sv))
        inv = atom(INV, sv)
        if alpha(env_v):
            out.append([inv])
        if beta(env_v):
            out.append([-inv])
        for sw in ws:
            env = {**env_v, **dict(zip(w, sw))}
            out.append([-inv, *(atom(arbiter_name(t), sv + sw) for t in scheme.tags)])
            for t in scheme.tags:
                a = atom(arbiter_name(t), sv + sw)
                if gamma[t](env):
                    out.append([-inv, -a])
                for tv in vs:
                    if delta[t]({**env, **dict(zip(vp, tv))}):
                        out.append([-inv, -a, atom(INV, tv)])
    return out, atom


def ground_horn(horn, domains: Domains = bool_domains) -> tuple[list[list[int]], _Atoms]:
    """Clauses over D_u(v, w) for every ground instance of every Horn clause."""
    atom = _Atoms()
    out: list[list[int]] = []
    for c in horn.clauses:
        cons = compile_formula(c.constraint, domains)
        body = [(p.name, [compile_formula(x, domains) for x in p.args]) for p in c.body]
        head = None if c.head is None else (c.head.name, [compile_formula(x, domains) for x in c.head.args])
        for env in _assignments(c.universals, domains):
            if not cons(env):
                continue
            lits = [-atom(n, tuple(f(env) for f in fs)) for n, fs in body]
            if head is not None:
                lits.append(atom(head[0], tuple(f(env) for f in head[1])))
            out.append(lits)
    return out, atom


def scheme_sat_finite(scheme, domains: Domains = bool_domains) -> bool:
    """Satisfiability of a scheme system over finite domains."""
    clauses, atom = ground_scheme(scheme, domains)
    return dpll(clauses, len(atom.index)) is not None


def horn_sat_finite(horn, domains: Domains = bool_domains) -> bool:
    """Satisfiability of a Horn system over finite domains."""
    clauses, atom = ground_horn(horn, domains)
    return dpll(clauses, len(atom.index)) is not None


def naive_sat(
    formulas: Sequence[Term],
    signature: Mapping[str, Sequence[Var]],
    domains: Domains = bool_domains,
) -> bool:
    """Literal enumeration of every interpretation of the unknowns (tiny instances only)."""
    points = {n: [tuple(a[v] for v in ps) for a in _assignments(ps, domains)] for n, ps in signature.items()}
    names = list(signature)
    sizes = [len(points[n]) for n in names]
    if sum(sizes) > 22:
        raise OracleError(f"{sum(sizes)} ground atoms are too many for naive enumeration")
    tables: dict[str, dict] = {n: {} for n in names}
    preds = {n: (lambda *args, _t=tables[n]: _t[tuple(args)]) for n in names}
    compiled = [(compile_formula(f, domains, preds), _assignments(free_vars(f), domains)) for f in formulas]
    for bits in itertools.product((False, True), repeat=sum(sizes)):
        pos = 0
        for n, sz in zip(names, sizes):
            tables[n].update(zip(points[n], bits[pos : pos + sz]))
            pos += sz
        if all(fn(env) for fn, envs in compiled for env in envs):
            return True
    return False


__all__ = [
    "SINK",
    "ExplicitGame",
    "ExplicitSystem",
    "GameResult",
    "OracleError",
    "array_values",
    "build_explicit_game",
    "check_attractor_fixpoint",
    "enumerate_system",
    "label_values",
    "bool_domains",
    "dpll",
    "ground_horn",
    "ground_scheme",
    "horn_sat_finite",
    "int_range",
    "ksafety_oracle",
    "naive_sat",
    "play_game",
    "scheme_sat_finite",
    "solve_attractor",
    "valid_schedules",
]
