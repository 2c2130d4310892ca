"""V2000 molfile/SDF parsing and the structural keys computable from connectivity.

Only 17 of the 166 keys can be decided from atoms, bonds, and ring sizes
alone: the isotope flag, the element-class keys, the 3/4/7-membered ring
keys, and the S-S / N-O bond keys. Everything needing substructure pattern
matching stays unsupported; query fingerprints for full-fidelity searches
arrive as bitstrings from an external extraction pipeline instead.

Charges, stereo flags, and coordinates are parsed-and-ignored: no computed
key depends on them. Bond orders outside 1..3 (e.g. aromatic 4) are
normalized to 1, since keys only ever look at bond endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from fpscan.fingerprint import Fingerprint

SUPPORTED_KEYS = frozenset({1, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 14, 18, 19, 20, 22, 24})

ATOMIC_NUMBERS = {
    "H": 1, "He": 2, "Li": 3, "Be": 4, "B": 5, "C": 6, "N": 7, "O": 8, "F": 9,
    "Ne": 10, "Na": 11, "Mg": 12, "Al": 13, "Si": 14, "P": 15, "S": 16, "Cl": 17,
    "Ar": 18, "K": 19, "Ca": 20, "Sc": 21, "Ti": 22, "V": 23, "Cr": 24, "Mn": 25,
    "Fe": 26, "Co": 27, "Ni": 28, "Cu": 29, "Zn": 30, "Ga": 31, "Ge": 32, "As": 33,
    "Se": 34, "Br": 35, "Kr": 36, "Rb": 37, "Sr": 38, "Y": 39, "Zr": 40, "Nb": 41,
    "Mo": 42, "Tc": 43, "Ru": 44, "Rh": 45, "Pd": 46, "Ag": 47, "Cd": 48, "In": 49,
    "Sn": 50, "Sb": 51, "Te": 52, "I": 53, "Xe": 54, "Cs": 55, "Ba": 56, "La": 57,
    "Ce": 58, "Pr": 59, "Nd": 60, "Pm": 61, "Sm": 62, "Eu": 63, "Gd": 64, "Tb": 65,
    "Dy": 66, "Ho": 67, "Er": 68, "Tm": 69, "Yb": 70, "Lu": 71, "Hf": 72, "Ta": 73,
    "W": 74, "Re": 75, "Os": 76, "Ir": 77, "Pt": 78, "Au": 79, "Hg": 80, "Tl": 81,
    "Pb": 82, "Bi": 83, "Po": 84, "At": 85, "Rn": 86, "Fr": 87, "Ra": 88, "Ac": 89,
    "Th": 90, "Pa": 91, "U": 92, "Np": 93, "Pu": 94, "Am": 95, "Cm": 96, "Bk": 97,
    "Cf": 98, "Es": 99, "Fm": 100, "Md": 101, "No": 102, "Lr": 103, "Rf": 104,
    "Db": 105, "Sg": 106, "Bh": 107, "Hs": 108, "Mt": 109, "Ds": 110, "Rg": 111,
    "Cn": 112, "Nh": 113, "Fl": 114, "Mc": 115, "Lv": 116, "Ts": 117, "Og": 118,
}

# Element-class key sets, keyed by the structural key they set.
_ELEMENT_KEYS = {
    3: frozenset({"Ge", "As", "Se", "Sn", "Sb", "Te", "Pb", "Bi", "Po"}),
    5: frozenset({"Sc", "Y", "Ti", "Zr", "Hf"}),
    7: frozenset({"V", "Nb", "Ta", "Cr", "Mo", "W", "Mn", "Tc", "Re"}),
    9: frozenset({"Fe", "Co", "Ni", "Ru", "Rh", "Pd", "Os", "Ir", "Pt"}),
    10: frozenset({"Be", "Mg", "Ca", "Sr", "Ba", "Ra"}),
    12: frozenset({"Cu", "Ag", "Au", "Zn", "Cd", "Hg"}),
    18: frozenset({"B", "Al", "Ga", "In", "Tl"}),
}


class MolfileError(ValueError):
    """Base class for structure parsing failures; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(prefix + message)


class UnsupportedVersion(MolfileError):
    pass


class MalformedCountsLine(MolfileError):
    pass


class AtomIndexOutOfRange(MolfileError):
    pass


class TruncatedBlock(MolfileError):
    pass


class UnknownElement(MolfileError):
    pass


@dataclass(frozen=True)
class Atom:
    element: str
    atomic_number: int
    isotope_flag: bool = False


@dataclass(frozen=True)
class Bond:
    a1: int
    a2: int
    order: int


@dataclass(frozen=True)
class Molecule:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    name: str = ""


@dataclass(frozen=True)
class KeyCoverage:
    supported: frozenset[int]
    computed: Fingerprint


def _element(symbol: str, line_number: int) -> tuple[str, int, bool]:
    """Resolve a molfile symbol to (element, Z, isotope); D and T are heavy hydrogen."""
    if symbol in ("D", "T"):
        return "H", 1, True
    z = ATOMIC_NUMBERS.get(symbol)
    if z is None:
        raise UnknownElement(f"unknown element symbol {symbol!r}", line_number)
    return symbol, z, False


def parse_molfile(text: str) -> Molecule:
    """Parse a V2000 molfile, or the structure part of one SDF record.

    Reads up to "M  END"; anything after it (SDF data items) is ignored.
    All errors carry the offending 1-based line number.
    """
    lines = text.splitlines()
    if len(lines) < 4:
        raise TruncatedBlock(f"molfile has {len(lines)} lines, header needs 4", len(lines))
    name = lines[0].strip()
    counts = lines[3]
    if "V3000" in counts:
        raise UnsupportedVersion("V3000 molfiles are not supported", 4)
    if "V2000" not in counts:
        raise MalformedCountsLine("counts line lacks the V2000 tag", 4)
    try:
        natoms = int(counts[0:3])
        nbonds = int(counts[3:6])
    except ValueError as exc:
        raise MalformedCountsLine(f"bad counts line {counts!r}", 4) from exc
    if natoms < 0 or nbonds < 0:
        raise MalformedCountsLine("negative counts", 4)

    atom_first = 4  # 0-based index of the first atom line
    bond_first = atom_first + natoms
    if len(lines) < bond_first + nbonds:
        raise TruncatedBlock(
            f"counts declare {natoms} atoms and {nbonds} bonds but only "
            f"{len(lines) - atom_first} block lines are present",
            len(lines),
        )

    isotopes: set[int] = set()
    atoms: list[tuple[str, int, bool]] = []
    for i in range(natoms):
        lineno = atom_first + i + 1
        line = lines[atom_first + i]
        symbol = line[31:34].strip()
        if not symbol:
            raise TruncatedBlock(f"atom line too short: {line!r}", lineno)
        element, z, heavy_h = _element(symbol, lineno)
        mass_diff = line[34:36].strip()
        flagged = heavy_h or bool(mass_diff and mass_diff not in ("0", "+0", "-0"))
        atoms.append((element, z, flagged))
        if flagged:
            isotopes.add(i + 1)

    bonds: list[Bond] = []
    for i in range(nbonds):
        lineno = bond_first + i + 1
        line = lines[bond_first + i]
        try:
            a1 = int(line[0:3])
            a2 = int(line[3:6])
            raw_order = int(line[6:9]) if line[6:9].strip() else 1
        except ValueError as exc:
            raise MolfileError(f"bad bond line {line!r}", lineno) from exc
        if not (1 <= a1 <= natoms) or not (1 <= a2 <= natoms) or a1 == a2:
            raise AtomIndexOutOfRange(f"bond endpoints {a1}-{a2} invalid for {natoms} atoms", lineno)
        bonds.append(Bond(a1=a1, a2=a2, order=raw_order if 1 <= raw_order <= 3 else 1))

    # property block: only M  ISO matters; M  END terminates
    for off, line in enumerate(lines[bond_first + nbonds :], start=bond_first + nbonds + 1):
        if line.startswith("M  END") or line.startswith("$$$$"):
            break
        if line.startswith("M  ISO"):
            fields = line.split()
            # M  ISO  n  aaa vvv  aaa vvv ...
            for k in range(3, len(fields), 2):
                try:
                    idx = int(fields[k])
                except ValueError as exc:
                    raise MolfileError(f"bad M  ISO entry {line!r}", off) from exc
                if not 1 <= idx <= natoms:
                    raise AtomIndexOutOfRange(f"M  ISO names atom {idx} of {natoms}", off)
                isotopes.add(idx)

    final_atoms = tuple(
        Atom(element=e, atomic_number=z, isotope_flag=(i + 1) in isotopes or f)
        for i, (e, z, f) in enumerate(atoms)
    )
    return Molecule(atoms=final_atoms, bonds=tuple(bonds), name=name)


def split_sdf(text: str) -> Iterator[tuple[str, int]]:
    """Yield (record text, 1-based starting line) for each $$$$-delimited SDF record."""
    buf: list[str] = []
    start = 1
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip() == "$$$$":
            if any(l.strip() for l in buf):
                yield "\n".join(buf), start
            buf = []
            start = lineno + 1
        else:
            buf.append(line)
    if any(l.strip() for l in buf):
        yield "\n".join(buf), start


def sdf_properties(record_text: str) -> dict[str, str]:
    """Data items of one SDF record: `> <NAME>` headers mapped to their first value line."""
    props: dict[str, str] = {}
    lines = record_text.splitlines()
    i = 0
    while i < len(lines) and not lines[i].startswith("M  END"):
        i += 1
    while i < len(lines):
        line = lines[i]
        if line.startswith(">"):
            open_br = line.find("<")
            close_br = line.find(">", open_br)
            if open_br != -1 and close_br != -1:
                name = line[open_br + 1 : close_br]
                value = lines[i + 1].strip() if i + 1 < len(lines) else ""
                props[name] = value
                i += 1
        i += 1
    return props


def _shortest_paths(adj: dict[int, list[int]], source: int) -> tuple[dict[int, int], dict[int, int]]:
    """BFS distances and parents from source."""
    dist = {source: 0}
    parent = {source: source}
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    nxt.append(v)
        frontier = nxt
    return dist, parent


def _path_to_root(parent: dict[int, int], v: int) -> list[int]:
    path = [v]
    while parent[path[-1]] != path[-1]:
        path.append(parent[path[-1]])
    return path


def ring_sizes(mol: Molecule) -> set[int]:
    """Cycle lengths present in a minimum cycle basis of the bond graph.

    Horton-style: candidate cycles are built from shortest paths through every
    vertex across every edge, then a minimum basis is picked greedily by
    length under GF(2) independence over edge space. Acyclic molecules give
    the empty set.
    """
    n = len(mol.atoms)
    edges = sorted({(min(b.a1, b.a2), max(b.a1, b.a2)) for b in mol.bonds})
    edge_index = {e: i for i, e in enumerate(edges)}
    adj: dict[int, list[int]] = {v: [] for v in range(1, n + 1)}
    for x, y in edges:
        adj[x].append(y)
        adj[y].append(x)

    components = 0
    seen: set[int] = set()
    for v in range(1, n + 1):
        if v not in seen:
            components += 1
            seen.update(_shortest_paths(adj, v)[0])
    rank_needed = len(edges) - n + components
    if rank_needed <= 0:
        return set()

    # candidate cycles as edge-set bitmasks; a simple cycle has as many edges as atoms
    candidates: set[int] = set()
    for v in range(1, n + 1):
        dist, parent = _shortest_paths(adj, v)
        for x, y in edges:
            if x not in dist or y not in dist:
                continue
            if parent[x] == y or parent[y] == x:
                continue  # tree edge, no cycle through it
            px = _path_to_root(parent, x)
            py = _path_to_root(parent, y)
            if set(px) & set(py) != {v}:
                continue  # paths must meet only at v for a simple cycle
            mask = 1 << edge_index[(min(x, y), max(x, y))]
            for path in (px, py):
                for a, b in zip(path, path[1:]):
                    mask |= 1 << edge_index[(min(a, b), max(a, b))]
            candidates.add(mask)

    sizes: set[int] = set()
    basis: list[int] = []  # reduced masks, each with a unique highest set bit
    for length, mask in sorted((m.bit_count(), m) for m in candidates):
        reduced = mask
        for b in basis:
            if reduced ^ b < reduced:
                reduced ^= b
        if reduced:
            basis.append(reduced)
            basis.sort(reverse=True)
            sizes.add(length)
            if len(basis) == rank_needed:
                break
    return sizes


def compute_subset_keys(mol: Molecule) -> KeyCoverage:
    """Evaluate the 17 connectivity-decidable keys; all other keys stay zero."""
    keys: set[int] = set()
    for atom in mol.atoms:
        if atom.isotope_flag:
            keys.add(1)
        z = atom.atomic_number
        if 103 < z < 256:
            keys.add(2)
        if 89 <= z <= 103:
            keys.add(4)
        if 57 <= z <= 71:
            keys.add(6)
        if atom.element == "Si":
            keys.add(20)
        for key, elements in _ELEMENT_KEYS.items():
            if atom.element in elements:
                keys.add(key)
    for bond in mol.bonds:
        e1 = mol.atoms[bond.a1 - 1].element
        e2 = mol.atoms[bond.a2 - 1].element
        if e1 == "S" and e2 == "S":
            keys.add(14)
        if {e1, e2} == {"N", "O"}:
            keys.add(24)
    rings = ring_sizes(mol)
    if 4 in rings:
        keys.add(11)
    if 7 in rings:
        keys.add(19)
    if 3 in rings:
        keys.add(22)
    assert keys <= SUPPORTED_KEYS
    return KeyCoverage(supported=SUPPORTED_KEYS, computed=Fingerprint.from_keys(keys))
