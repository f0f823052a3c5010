"""Discrete chemical reaction network model.

A CRN is a finite set of species together with unimolecular and bimolecular
reactions.  Configurations are integer molecular-count vectors, represented
throughout as plain tuples of ints indexed by dense species ids (hashable, so
they double as digraph node keys).  Every reactant pattern over the declared
species owns at least one reaction: patterns with no declared reaction are
completed with a synthesized void reaction, which makes the applicable set
non-empty in every non-empty configuration and gives the total propensity its
closed form ``n + C(n,2)/phi``.

Conventions baked in here:

- reactions consume one or two molecules and never decrease the molecular
  count (``|r| <= |p|``);
- all rate coefficients are 1; the only kinetic parameter is the volume
  ``phi``, fixed to the initial molecular count of the analyzed execution;
- propensities are exact ``Fraction`` values (Monte-Carlo code keeps its own
  float fast path).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

Config = tuple  # tuple[int, ...] indexed by species id

__all__ = [
    "CrnError",
    "InvalidReaction",
    "InapplicableReaction",
    "DensityExceeded",
    "StateBudgetExceeded",
    "StopNotReached",
    "Species",
    "Reaction",
    "Crn",
    "Interface",
    "CrdSpec",
    "VolumeConvention",
    "build_crn",
    "applicable",
    "apply_reaction",
    "propensity",
    "propensity_of_set",
    "total_propensity",
    "interface_vector",
    "valid_initial",
    "conf_total",
    "conf_from_counts",
    "pretty",
]


class CrnError(Exception):
    pass


class InvalidReaction(CrnError):
    pass


class InapplicableReaction(CrnError):
    pass


class DensityExceeded(CrnError):
    """Molecular count exceeded density_bound * ||c0||."""


class StateBudgetExceeded(CrnError):
    """Exploration exceeded the configured max_states."""


class StopNotReached(CrnError):
    """A simulation stop condition was not met within the step budget."""

    def __init__(self, msg, execution=None):
        super().__init__(msg)
        self.execution = execution


@dataclass(frozen=True)
class Species:
    id: int
    name: str


@dataclass(frozen=True)
class Reaction:
    """One reaction.  Reactants/products are canonical sorted (sid, count) pairs."""

    id: int
    reactants: tuple  # ((sid, count), ...), total count 1 or 2
    products: tuple
    is_void: bool
    declared: bool
    name: str | None = None

    def reactant_dict(self) -> dict:
        return dict(self.reactants)

    def product_dict(self) -> dict:
        return dict(self.products)

    @property
    def arity(self) -> int:
        return sum(k for _, k in self.reactants)


def _canon(ms: Mapping[int, int]) -> tuple:
    return tuple(sorted((s, k) for s, k in ms.items() if k > 0))


def _class_key(reactants: tuple) -> tuple:
    """Reactant pattern key: (sid,) or (sid, sid') with sid <= sid'."""
    key = []
    for sid, k in reactants:
        key.extend([sid] * k)
    return tuple(sorted(key))


class Crn:
    """Immutable reaction system with void-completed reactant classes."""

    def __init__(self, species, reactions, reactant_classes, density_bound, n_declared):
        self.species: list[Species] = species
        self.reactions: list[Reaction] = reactions
        self.reactant_classes: dict = reactant_classes  # class key -> tuple of rids
        self.density_bound = Fraction(density_bound)
        self.n_declared = n_declared
        self.sid: dict[str, int] = {sp.name: sp.id for sp in species}
        self.n_species = len(species)
        self.nv_ids: tuple = tuple(r.id for r in reactions if not r.is_void)
        self.class_size: list[int] = [
            len(reactant_classes[_class_key(r.reactants)]) for r in reactions
        ]
        self._build_arrays()

    def _build_arrays(self):
        R, S = len(self.reactions), self.n_species
        self.r1 = np.full(R, -1, dtype=np.int32)  # first reactant species
        self.r2 = np.full(R, -1, dtype=np.int32)  # second reactant species or -1
        self.delta = np.zeros((R, S), dtype=np.int16)  # products - reactants
        self.is_void_arr = np.zeros(R, dtype=np.bool_)
        self.inv_class = np.ones(R, dtype=np.float64)  # 1/|class|
        for r in self.reactions:
            key = _class_key(r.reactants)
            if len(key) == 1:
                self.r1[r.id] = key[0]
            else:
                self.r1[r.id], self.r2[r.id] = key
            for s, k in r.reactants:
                self.delta[r.id, s] -= k
            for s, k in r.products:
                self.delta[r.id, s] += k
            self.is_void_arr[r.id] = r.is_void
            self.inv_class[r.id] = 1.0 / self.class_size[r.id]
        self.nv_arr = np.array(self.nv_ids, dtype=np.int32)

    def reaction_named(self, name: str) -> Reaction:
        for r in self.reactions:
            if r.name == name:
                return r
        raise KeyError(name)

    def names(self, rids: Iterable[int]) -> list:
        return [self.reactions[i].name or f"r{i}" for i in sorted(rids)]

    def __repr__(self):
        return f"Crn({self.n_species} species, {self.n_declared} declared reactions)"


def build_crn(species_names: Sequence[str], declared, density_bound=4) -> Crn:
    """Build a Crn from declared reactions, synthesizing void completions.

    ``declared`` is a sequence of (reactants, products, name) with reactants and
    products given as {species name: count} mappings.  Raises InvalidReaction on
    arity violations, mass-decreasing reactions, duplicate species names, or a
    declared void sharing its class with other reactions.
    """
    names = list(species_names)
    if len(set(names)) != len(names):
        raise InvalidReaction("duplicate species names")
    species = [Species(i, nm) for i, nm in enumerate(names)]
    sid = {nm: i for i, nm in enumerate(names)}

    reactions: list[Reaction] = []
    seen = set()
    for entry in declared:
        reactants_m, products_m, rname = entry
        rmap = {sid[nm]: k for nm, k in reactants_m.items() if k > 0}
        pmap = {sid[nm]: k for nm, k in products_m.items() if k > 0}
        tot_r = sum(rmap.values())
        tot_p = sum(pmap.values())
        if tot_r not in (1, 2):
            raise InvalidReaction(f"reaction {rname!r}: reactant total {tot_r} not in {{1,2}}")
        if tot_r > tot_p:
            raise InvalidReaction(f"reaction {rname!r}: mass-decreasing ({tot_r} -> {tot_p})")
        r_c, p_c = _canon(rmap), _canon(pmap)
        if (r_c, p_c) in seen:
            raise InvalidReaction(f"reaction {rname!r}: duplicate of an earlier reaction")
        seen.add((r_c, p_c))
        reactions.append(
            Reaction(len(reactions), r_c, p_c, is_void=(r_c == p_c), declared=True, name=rname)
        )
    n_declared = len(reactions)

    classes: dict = {}
    for r in reactions:
        classes.setdefault(_class_key(r.reactants), []).append(r.id)
    for key, rids in classes.items():
        if any(reactions[i].is_void for i in rids) and len(rids) > 1:
            raise InvalidReaction(
                f"declared void reaction shares class {key} with other reactions"
            )

    # Void completion: every unimolecular and bimolecular pattern gets a class.
    n = len(species)
    all_keys = [(a,) for a in range(n)]
    all_keys += [(a, b) for a in range(n) for b in range(a, n)]
    for key in all_keys:
        if key not in classes:
            ms = {}
            for s in key:
                ms[s] = ms.get(s, 0) + 1
            rc = _canon(ms)
            r = Reaction(len(reactions), rc, rc, is_void=True, declared=False, name=None)
            reactions.append(r)
            classes[key] = [r.id]

    classes = {k: tuple(v) for k, v in classes.items()}
    return Crn(species, reactions, classes, density_bound, n_declared)


def conf_from_counts(crn: Crn, counts: Mapping[str, int]) -> Config:
    c = [0] * crn.n_species
    for nm, k in counts.items():
        c[crn.sid[nm]] += k
    return tuple(c)


def conf_total(c: Config) -> int:
    return sum(c)


def pretty(crn: Crn, c: Config) -> str:
    parts = [f"{k}{crn.species[i].name}" for i, k in enumerate(c) if k]
    return " + ".join(parts) if parts else "0"


def applicable(crn: Crn, c: Config) -> set:
    """Ids of all reactions applicable to c (never empty when ||c|| >= 1)."""
    out = set()
    for r in crn.reactions:
        ok = True
        for s, k in r.reactants:
            if c[s] < k:
                ok = False
                break
        if ok:
            out.add(r.id)
    return out


def is_applicable(crn: Crn, rid: int, c: Config) -> bool:
    return all(c[s] >= k for s, k in crn.reactions[rid].reactants)


def apply_reaction(crn: Crn, rid: int, c: Config) -> Config:
    """alpha(c) = c - r + p.  Raises InapplicableReaction if r > c anywhere."""
    r = crn.reactions[rid]
    out = list(c)
    for s, k in r.reactants:
        if out[s] < k:
            raise InapplicableReaction(f"reaction {rid} not applicable")
        out[s] -= k
    for s, k in r.products:
        out[s] += k
    return tuple(out)


def propensity(crn: Crn, rid: int, c: Config, phi) -> Fraction:
    """Exact propensity of one reaction in configuration c under volume phi."""
    r = crn.reactions[rid]
    k = crn.class_size[rid]
    phi = Fraction(phi)
    (s1, k1) = r.reactants[0]
    if r.arity == 1:
        return Fraction(c[s1], k)
    if k1 == 2:  # r = 2A
        a = c[s1]
        return Fraction(a * (a - 1), 2) / (phi * k)
    (s2, _) = r.reactants[1]
    return Fraction(c[s1] * c[s2]) / (phi * k)


def propensity_of_set(crn: Crn, rids: Iterable[int], c: Config, phi) -> Fraction:
    return sum((propensity(crn, i, c, phi) for i in rids), Fraction(0))


def total_propensity(c: Config, phi) -> Fraction:
    """pi_c = ||c|| + C(||c||,2)/phi, independent of the reaction set."""
    n = conf_total(c)
    return n + Fraction(n * (n - 1), 2) / Fraction(phi)


@dataclass(frozen=True)
class VolumeConvention:
    """phi equals the initial molecular count of the analyzed execution."""

    phi: Fraction

    @staticmethod
    def from_initial(c0: Config) -> "VolumeConvention":
        n = conf_total(c0)
        if n < 1:
            raise CrnError("initial configuration must have ||c0|| >= 1")
        return VolumeConvention(Fraction(n))


@dataclass(frozen=True)
class Interface:
    """Task interface: value set U, species -> value mapping, correctness relation.

    ``correctness(mu0, mu)`` decides whether interface vector ``mu`` is an
    acceptable outcome for an execution started at interface vector ``mu0``.
    """

    values: tuple
    mapping: tuple  # species id -> index into values
    correctness: Callable

    def value_index(self, v: Hashable) -> int:
        return self.values.index(v)


def interface_vector(interface: Interface, c: Config) -> tuple:
    out = [0] * len(interface.values)
    for s, k in enumerate(c):
        if k:
            out[interface.mapping[s]] += k
    return tuple(out)


@dataclass(frozen=True)
class CrdSpec:
    """Chemical reaction decider metadata attached to a Crn."""

    input_sids: tuple
    voters0: frozenset
    voters1: frozenset
    fuel: int
    context: tuple  # ((sid, count), ...) over S - (Sigma + {F})

    def __post_init__(self):
        if self.voters0 & self.voters1:
            raise CrnError("voter sets must be disjoint")
        if self.fuel in self.input_sids:
            raise CrnError("fuel species cannot be an input species")

    def context_dict(self) -> dict:
        return dict(self.context)


def valid_initial(crd: CrdSpec, c: Config) -> bool:
    """True iff c restricted to S - (Sigma + {F}) equals the context and c(F) >= 1."""
    if c[crd.fuel] < 1:
        return False
    ctx = crd.context_dict()
    special = set(crd.input_sids) | {crd.fuel}
    for s, k in enumerate(c):
        if s in special:
            continue
        if k != ctx.get(s, 0):
            return False
    return True


def crd_interface(crn: Crn, crd: CrdSpec, predicate: Callable) -> Interface:
    """The CRD interface: U = (Sigma + {bot}) x {0, 1, bot}.

    The correctness relation accepts exactly the configurations whose voter
    counts are positive on side ``predicate(x)`` and zero on the other side,
    where x is the input vector read off the initial interface vector.
    """
    inputs = list(crd.input_sids)
    values: list = [("in", s) for s in inputs] + ["v0", "v1", "none"]
    idx = {v: i for i, v in enumerate(values)}
    mapping = []
    for s in range(crn.n_species):
        if s in crd.input_sids:
            mapping.append(idx[("in", s)])
        elif s in crd.voters0:
            mapping.append(idx["v0"])
        elif s in crd.voters1:
            mapping.append(idx["v1"])
        else:
            mapping.append(idx["none"])
    n_in = len(inputs)

    def correct(mu0, mu):
        x = tuple(mu0[:n_in])
        v = predicate(x)
        pos, neg = (mu[n_in + 1], mu[n_in]) if v else (mu[n_in], mu[n_in + 1])
        return pos > 0 and neg == 0

    return Interface(tuple(values), tuple(mapping), correct)
