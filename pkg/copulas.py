"""Joint copula models on [0,1]^d: independence, empirical, single pair, and regular vines.

Vines are selected greedily tree by tree: each tree is the maximum spanning tree of |Kendall tau|
over the admissible edges (proximity condition), every edge gets the pair family with minimal AIC,
and the next tree's pseudo-observations come from h-functions (simplifying assumption).
The vine CDF is a common-random-numbers Monte-Carlo average over a cached sample.
"""
import json
import logging

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree

from config import (
    DEFAULT_FAMILY_SET,
    DEFAULT_MC_SAMPLES,
    MIN_VINE_OBSERVATIONS,
    MODEL_SCHEMA_VERSION,
)
from pair_copulas import (
    IndependencePair,
    kendall_tau,
    pair_from_dict,
    select_pair,
)

logger = logging.getLogger(__name__)


def _as_points(u, dim):
    points = np.asarray(u, dtype=np.float64)
    single = points.ndim <= 1
    points = points.reshape(-1, dim)
    return points, single


def dominated_fraction(sample, points):
    """For every point p, the share of sample rows with row <= p componentwise"""
    out = np.empty(len(points))
    for i, p in enumerate(points):
        out[i] = np.mean(np.all(sample <= p, axis=1))
    return out


class CopulaModel:
    """Common surface of every fitted copula"""
    kind = None

    def __init__(self, dim):
        self.dim = dim

    def cdf(self, u):
        points, single = _as_points(u, self.dim)
        values = self._cdf(np.clip(points, 0.0, 1.0))
        return float(values[0]) if single else values

    def logpdf(self, u):
        points, single = _as_points(u, self.dim)
        values = self._logpdf(points)
        return float(values[0]) if single else values

    def sample(self, count, seed):
        return self._sample(count, np.random.default_rng(seed))

    def _cdf(self, points):
        raise NotImplementedError

    def _logpdf(self, points):
        raise NotImplementedError(f"{self.kind} copula has no density")

    def _sample(self, count, rng):
        raise NotImplementedError

    def to_dict(self):
        return {"schema": MODEL_SCHEMA_VERSION, "kind": self.kind, "dim": self.dim}


class IndependenceCopula(CopulaModel):
    """Product copula; with dim=1 it is the identity CDF on [0,1]"""
    kind = "independence"

    def _cdf(self, points):
        return np.prod(points, axis=1)

    def _logpdf(self, points):
        return np.zeros(len(points))

    def _sample(self, count, rng):
        return rng.uniform(size=(count, self.dim))


class EmpiricalCopula(CopulaModel):
    """C(u) = (1/n) sum_i 1[U^(i) <= u] over the pseudo-observations"""
    kind = "empirical"

    def __init__(self, pseudo):
        pseudo = np.atleast_2d(np.asarray(pseudo, dtype=np.float64))
        super().__init__(pseudo.shape[1])
        self.pseudo = pseudo

    def _cdf(self, points):
        return dominated_fraction(self.pseudo, points)

    def _sample(self, count, rng):
        return self.pseudo[rng.integers(0, len(self.pseudo), size=count)]

    def to_dict(self):
        data = super().to_dict()
        data["pseudo"] = self.pseudo.tolist()
        return data


class PairCopulaModel(CopulaModel):
    """A single bivariate pair copula used as a two-dimensional model"""

    def __init__(self, pair):
        super().__init__(2)
        self.pair = pair

    @property
    def kind(self):
        return "bivariate-tkde" if self.pair.family == "tkde" else "bivariate-parametric"

    def _cdf(self, points):
        return np.atleast_1d(self.pair.cdf(points[:, 0], points[:, 1]))

    def _logpdf(self, points):
        return np.atleast_1d(self.pair.logpdf(points[:, 0], points[:, 1]))

    def _sample(self, count, rng):
        return self.pair.simulate(count, rng)

    def to_dict(self):
        data = super().to_dict()
        data["pair"] = self.pair.to_dict()
        return data


class VineEdge:
    """One pair copula of the vine: C_{a,b | D} joining two nodes of the previous tree"""

    def __init__(self, tree, nodes, conditioned, conditioning, pair):
        self.tree = tree
        self.nodes = tuple(nodes)
        self.conditioned = tuple(conditioned)
        self.conditioning = tuple(sorted(conditioning))
        self.pair = pair
        self._flipped = None

    @property
    def variables(self):
        return frozenset(self.conditioned) | frozenset(self.conditioning)

    def pair_for(self, var):
        """Pair copula oriented so its first argument is `var`"""
        if var == self.conditioned[0]:
            return self.pair
        if self._flipped is None:
            self._flipped = self.pair.flipped()
        return self._flipped

    def other(self, var):
        return self.conditioned[1] if var == self.conditioned[0] else self.conditioned[0]

    def to_dict(self):
        return {
            "nodes": list(self.nodes),
            "conditioned": list(self.conditioned),
            "conditioning": list(self.conditioning),
            "pair": self.pair.to_dict(),
        }

    def __repr__(self):
        given = ",".join(str(v) for v in self.conditioning)
        label = f"{self.conditioned[0]},{self.conditioned[1]}" + (f"|{given}" if given else "")
        return f"VineEdge(T{self.tree}: {label}, {self.pair.name})"


def _spans(node_count, pairs):
    """True when the node_count - 1 pairs connect every node, which rules out cycles"""
    rows, cols = zip(*pairs) if pairs else ((), ())
    adjacency = coo_matrix((np.ones(len(pairs)), (rows, cols)), shape=(node_count, node_count))
    count, _ = connected_components(adjacency, directed=False)
    return count == 1


class VineStructure:
    """Tree sequence T_1..T_{d-1}; nodes of T_j are the edges of T_{j-1}"""

    def __init__(self, dim, trees):
        self.dim = dim
        self.trees = trees

    @property
    def pair_count(self):
        return sum(len(tree) for tree in self.trees)

    def edges(self):
        for tree in self.trees:
            yield from tree

    def tree1_edges(self):
        return {frozenset(edge.conditioned) for edge in self.trees[0]}

    def validate(self):
        """Check spanning trees, the proximity condition and the set bookkeeping"""
        d = self.dim
        if len(self.trees) != d - 1:
            raise ValueError(f"vine on {d} variables needs {d - 1} trees, got {len(self.trees)}")
        for t, tree in enumerate(self.trees, start=1):
            node_count = d - t + 1
            if len(tree) != d - t:
                raise ValueError(f"tree {t} must have {d - t} edges, got {len(tree)}")
            if not _spans(node_count, [edge.nodes for edge in tree]):
                raise ValueError(f"tree {t} is not a spanning tree of its {node_count} nodes")
            for edge in tree:
                if t == 1:
                    if set(edge.conditioned) != set(edge.nodes) or edge.conditioning:
                        raise ValueError(f"first-tree edge {edge} is inconsistent")
                    continue
                left, right = (self.trees[t - 2][k] for k in edge.nodes)
                if not set(left.nodes) & set(right.nodes):
                    raise ValueError(f"proximity condition violated at {edge}")
                if left.variables | right.variables != edge.variables:
                    raise ValueError(f"edge {edge} does not merge its parents")
                if frozenset(edge.conditioning) != left.variables & right.variables:
                    raise ValueError(f"edge {edge} has a wrong conditioning set")
        if self.pair_count != d * (d - 1) // 2:
            raise ValueError("vine must hold d(d-1)/2 pair copulas")
        return self

    def input_key(self, edge, var):
        """Where the conditional pseudo-observation of `var` feeding `edge` lives"""
        if edge.tree == 1:
            return (0, var, var)
        for k in edge.nodes:
            parent = self.trees[edge.tree - 2][k]
            if var in parent.variables:
                return (edge.tree - 1, k, var)
        raise KeyError(f"variable {var} does not feed {edge}")

    def sampling_plan(self):
        """Variable order and, per variable, its edge chain from T_1 upward.

        Repeatedly take a conditioned variable of the single remaining top edge and peel the edges
        holding it in their conditioned set; what is left is again a regular vine.
        """
        d = self.dim
        remaining = [set(range(len(tree))) for tree in self.trees]
        reversed_order = []
        chains = {}
        for top in range(d - 1, 0, -1):
            (index,) = remaining[top - 1]
            var = self.trees[top - 1][index].conditioned[0]
            chain = []
            for t in range(top, 0, -1):
                edge = self.trees[t - 1][index]
                chain.append((t, index))
                remaining[t - 1].discard(index)
                if t > 1:
                    index = next(k for k in edge.nodes if var in self.trees[t - 2][k].variables)
            chains[var] = list(reversed(chain))
            reversed_order.append(var)
        leftover = set(range(d)) - set(reversed_order)
        reversed_order.append(leftover.pop())
        return list(reversed(reversed_order)), chains

    def to_dict(self):
        return [[edge.to_dict() for edge in tree] for tree in self.trees]

    @classmethod
    def from_dict(cls, dim, trees):
        built = []
        for t, tree in enumerate(trees, start=1):
            built.append([
                VineEdge(t, e["nodes"], e["conditioned"], e["conditioning"], pair_from_dict(e["pair"]))
                for e in tree
            ])
        return cls(dim, built).validate()


class VineCopula(CopulaModel):
    kind = "vine"

    def __init__(self, structure, mc_samples=DEFAULT_MC_SAMPLES, mc_seed=0):
        super().__init__(structure.dim)
        self.structure = structure
        self.mc_samples = int(mc_samples)
        self.mc_seed = int(mc_seed)
        self._mc_cache = {}
        self._plan = None

    @property
    def is_independent(self):
        return all(edge.pair.family == "independence" for edge in self.structure.edges())

    def with_mc(self, mc_samples=None, mc_seed=None):
        """Same fitted vine with different Monte-Carlo settings; the sample cache is shared"""
        twin = VineCopula(
            self.structure,
            self.mc_samples if mc_samples is None else mc_samples,
            self.mc_seed if mc_seed is None else mc_seed,
        )
        twin._mc_cache = self._mc_cache
        twin._plan = self._plan
        return twin

    def mc_sample(self, mc_samples=None, mc_seed=None):
        key = (self.mc_samples if mc_samples is None else int(mc_samples),
               self.mc_seed if mc_seed is None else int(mc_seed))
        if key not in self._mc_cache:
            self._mc_cache[key] = vine_sample(self, key[0], key[1])
        return self._mc_cache[key]

    def _cdf(self, points):
        if self.is_independent:
            return np.prod(points, axis=1)
        if self.dim == 2:
            (edge,) = self.structure.trees[0]
            oriented = edge.pair_for(0)
            return np.atleast_1d(oriented.cdf(points[:, 0], points[:, 1]))
        return dominated_fraction(self.mc_sample(), points)

    def _logpdf(self, points):
        total = np.zeros(len(points))
        values = {}
        for tree in self.structure.trees:
            for index, edge in enumerate(tree):
                a, b = edge.conditioned
                ua = self._lookup(values, points, edge, a)
                ub = self._lookup(values, points, edge, b)
                total += edge.pair.logpdf(ua, ub)
                values[(edge.tree, index, a)] = edge.pair_for(a).hfunc(ua, ub)
                values[(edge.tree, index, b)] = edge.pair_for(b).hfunc(ub, ua)
        return total

    def _lookup(self, values, points, edge, var):
        key = self.structure.input_key(edge, var)
        return points[:, var] if key[0] == 0 else values[key]

    def _sample(self, count, rng):
        return _simulate_vine(self, count, rng)

    def to_dict(self):
        data = super().to_dict()
        data["trees"] = self.structure.to_dict()
        data["mc_samples"] = self.mc_samples
        data["mc_seed"] = self.mc_seed
        return data


def fit_empirical(pseudo):
    """Empirical copula of the pseudo-observations"""
    pseudo = np.atleast_2d(np.asarray(pseudo, dtype=np.float64))
    if len(pseudo) < 1:
        raise ValueError("empirical copula needs at least one observation")
    return EmpiricalCopula(pseudo)


def _tau_weight(x, y):
    tau = kendall_tau(x, y)
    return 0.0 if not np.isfinite(tau) else abs(tau)


def _max_spanning_tree(node_count, candidates):
    """Edges (i, j) of the maximum |tau| spanning tree over the admissible candidate pairs"""
    weights = np.zeros((node_count, node_count))
    for (i, j), tau in candidates.items():
        # Shifted to [1, 2] so zero-dependence edges stay present for the sparse solver
        weights[min(i, j), max(i, j)] = 2.0 - tau
    tree = minimum_spanning_tree(weights).tocoo()
    edges = sorted((int(min(i, j)), int(max(i, j))) for i, j in zip(tree.row, tree.col))
    if len(edges) != node_count - 1:
        raise RuntimeError("admissible edge graph is disconnected")
    return edges


def fit_vine(pseudo, family_set=DEFAULT_FAMILY_SET, criterion="aic",
             mc_samples=DEFAULT_MC_SAMPLES, mc_seed=0):
    """Greedy R-vine selection with AIC pair-family choice"""
    if criterion != "aic":
        raise ValueError(f"unsupported selection criterion: {criterion}")
    pseudo = np.atleast_2d(np.asarray(pseudo, dtype=np.float64))
    n, d = pseudo.shape
    if d < 2:
        raise ValueError("vine requires d ≥ 2")
    if n < MIN_VINE_OBSERVATIONS:
        raise ValueError(f"vine fitting needs at least {MIN_VINE_OBSERVATIONS} observations, got {n}")

    degenerate = {j for j in range(d) if np.ptp(pseudo[:, j]) == 0.0}
    for j in sorted(degenerate):
        logger.warning("column %d is constant; pairs involving it use the independence copula", j)

    trees = []
    values = {}
    # Variable sets of the current tree's nodes
    nodes = [frozenset([j]) for j in range(d)]
    for j in range(d):
        values[(0, j, j)] = pseudo[:, j]

    for t in range(1, d):
        previous = trees[-1] if trees else None

        def node_data(k, var):
            if previous is None:
                return values[(0, var, var)]
            return values[(t - 1, k, var)]

        candidates = {}
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                if previous is not None and not set(previous[i].nodes) & set(previous[j].nodes):
                    continue
                a_var = next(iter(nodes[i] - nodes[j]))
                b_var = next(iter(nodes[j] - nodes[i]))
                candidates[(i, j)] = _tau_weight(node_data(i, a_var), node_data(j, b_var))

        tree = []
        for index, (i, j) in enumerate(_max_spanning_tree(len(nodes), candidates)):
            a_var = next(iter(nodes[i] - nodes[j]))
            b_var = next(iter(nodes[j] - nodes[i]))
            conditioning = nodes[i] & nodes[j]
            ua, ub = node_data(i, a_var), node_data(j, b_var)
            if {a_var, b_var} & degenerate:
                pair = IndependencePair()
                pair.nobs = n
            else:
                pair = select_pair(np.column_stack([ua, ub]), family_set)
            edge = VineEdge(t, (i, j), (a_var, b_var), conditioning, pair)
            values[(t, index, a_var)] = edge.pair_for(a_var).hfunc(ua, ub)
            values[(t, index, b_var)] = edge.pair_for(b_var).hfunc(ub, ua)
            tree.append(edge)
            logger.debug("tree %d: %r", t, edge)

        trees.append(tree)
        nodes = [edge.variables for edge in tree]

    vine = VineStructure(d, trees).validate()
    return VineCopula(vine, mc_samples=mc_samples, mc_seed=mc_seed)


def _simulate_vine(vine, count, rng):
    structure = vine.structure
    if vine._plan is None:
        vine._plan = structure.sampling_plan()
    order, chains = vine._plan

    w = rng.uniform(size=(count, vine.dim))
    u = np.empty((count, vine.dim))
    values = {}

    def lookup(edge, var):
        key = structure.input_key(edge, var)
        return u[:, var] if key[0] == 0 else values[key]

    u[:, order[0]] = w[:, 0]
    for position, var in enumerate(order[1:], start=1):
        chain = chains[var]
        current = w[:, position]
        inputs = {}
        # Walk down the chain: u_{var|D_t} = h^{-1}(u_{var|D_t + y_t} | u_{y_t|D_t})
        for t, index in reversed(chain):
            edge = structure.trees[t - 1][index]
            partner = edge.other(var)
            current = edge.pair_for(var).hinv(current, lookup(edge, partner))
            inputs[t] = current
        u[:, var] = current
        # Walk back up, recording both conditional outputs of every chain edge
        for t, index in chain:
            edge = structure.trees[t - 1][index]
            partner = edge.other(var)
            u_var, u_partner = inputs[t], lookup(edge, partner)
            values[(t, index, var)] = edge.pair_for(var).hfunc(u_var, u_partner)
            values[(t, index, partner)] = edge.pair_for(partner).hfunc(u_partner, u_var)
    return u


def vine_sample(vine, count, seed):
    """count x d draws from the vine by inverse Rosenblatt transform; deterministic in seed"""
    return _simulate_vine(vine, int(count), np.random.default_rng(seed))


def vine_cdf(vine, u, mc_samples=None, seed=None):
    """Monte-Carlo CDF over a fixed-seed vine sample (common random numbers across calls)"""
    points, single = _as_points(u, vine.dim)
    points = np.clip(points, 0.0, 1.0)
    values = dominated_fraction(vine.mc_sample(mc_samples, seed), points)
    return float(values[0]) if single else values


def fit_copula(pseudo, kind="vine", family_set=DEFAULT_FAMILY_SET,
               mc_samples=DEFAULT_MC_SAMPLES, seed=0):
    """Fit the copula kind requested by the calibration config"""
    pseudo = np.atleast_2d(np.asarray(pseudo, dtype=np.float64))
    d = pseudo.shape[1]
    if kind == "independence" or d == 1:
        return IndependenceCopula(d)
    if kind == "empirical":
        return fit_empirical(pseudo)
    if kind == "vine":
        return fit_vine(pseudo, family_set, mc_samples=mc_samples, mc_seed=seed)
    raise ValueError(f"unknown copula kind: {kind}")


def model_to_dict(model):
    return model.to_dict()


def model_from_dict(data):
    """Rebuild a fitted copula from its persisted form"""
    if data.get("schema") != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema: {data.get('schema')}")
    kind = data["kind"]
    if kind == "independence":
        return IndependenceCopula(data["dim"])
    if kind == "empirical":
        return EmpiricalCopula(np.asarray(data["pseudo"], dtype=np.float64))
    if kind in ("bivariate-parametric", "bivariate-tkde"):
        return PairCopulaModel(pair_from_dict(data["pair"]))
    if kind == "vine":
        structure = VineStructure.from_dict(data["dim"], data["trees"])
        return VineCopula(structure, data["mc_samples"], data["mc_seed"])
    raise ValueError(f"unknown model kind: {kind}")


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model_to_dict(model), handle)


def load_model(path):
    with open(path, "r", encoding="utf-8") as handle:
        return model_from_dict(json.load(handle))
