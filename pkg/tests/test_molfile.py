import random

import pytest

from fpscan.molfile import (
    ATOMIC_NUMBERS,
    SUPPORTED_KEYS,
    AtomIndexOutOfRange,
    Bond,
    MalformedCountsLine,
    Molecule,
    TruncatedBlock,
    UnknownElement,
    UnsupportedVersion,
    compute_subset_keys,
    parse_molfile,
    ring_sizes,
    sdf_properties,
    split_sdf,
    _ELEMENT_KEYS,
)

import molfixtures as fx


class TestParseMolfile:
    def test_minimal_one_atom(self):
        mol = parse_molfile(fx.METHANE)
        assert len(mol.atoms) == 1
        assert mol.atoms[0].element == "C"
        assert mol.atoms[0].atomic_number == 6
        assert mol.bonds == ()
        assert mol.name == "methane"

    def test_cyclopropane_fixture(self):
        mol = parse_molfile(fx.CYCLOPROPANE)
        assert len(mol.atoms) == 3
        assert len(mol.bonds) == 3
        assert all(a.element == "C" for a in mol.atoms)

    def test_truncated_block(self):
        # counts claim 5 atoms, block contains 3
        text = fx.METHANE.replace("  1  0", "  5  0", 1)
        with pytest.raises(TruncatedBlock):
            parse_molfile(text)

    def test_v3000_rejected(self):
        text = fx.METHANE.replace("V2000", "V3000")
        with pytest.raises(UnsupportedVersion):
            parse_molfile(text)

    def test_missing_version_tag(self):
        text = fx.METHANE.replace(" V2000", "      ")
        with pytest.raises(MalformedCountsLine):
            parse_molfile(text)

    def test_garbage_counts(self):
        lines = fx.METHANE.splitlines()
        lines[3] = "  x  y  0  0  0  0  0  0  0  0999 V2000"
        with pytest.raises(MalformedCountsLine):
            parse_molfile("\n".join(lines))

    def test_bond_index_out_of_range(self):
        text = fx.mol_text("bad", ["C", "C"], [(1, 9)])
        with pytest.raises(AtomIndexOutOfRange) as exc:
            parse_molfile(text)
        assert exc.value.line_number == 7

    def test_self_bond_rejected(self):
        text = fx.mol_text("bad", ["C", "C"], [(2, 2)])
        with pytest.raises(AtomIndexOutOfRange):
            parse_molfile(text)

    def test_unknown_element(self):
        text = fx.mol_text("query atom", ["Xx"], [])
        with pytest.raises(UnknownElement) as exc:
            parse_molfile(text)
        assert exc.value.line_number == 5

    def test_mass_difference_sets_isotope(self):
        mol = parse_molfile(fx.ISOTOPE_CARBON)
        assert mol.atoms[0].isotope_flag

    def test_m_iso_sets_isotope(self):
        text = fx.mol_text("labeled", ["C", "C"], [(1, 2)], extra_props=["M  ISO  1   2  13"])
        mol = parse_molfile(text)
        assert not mol.atoms[0].isotope_flag
        assert mol.atoms[1].isotope_flag

    def test_deuterium_symbol_is_heavy_hydrogen(self):
        mol = parse_molfile(fx.mol_text("heavy water fragment", ["D", "O"], [(1, 2)]))
        assert mol.atoms[0].element == "H"
        assert mol.atoms[0].atomic_number == 1
        assert mol.atoms[0].isotope_flag

    def test_aromatic_bond_order_normalized(self):
        text = fx.mol_text("aromatic pair", ["C", "C"], [(1, 2, 4)])
        mol = parse_molfile(text)
        assert mol.bonds[0].order == 1

    def test_content_after_m_end_ignored(self):
        text = fx.METHANE + "> <SOME_PROP>\n42\n\n$$$$\n"
        mol = parse_molfile(text)
        assert len(mol.atoms) == 1


class TestSdf:
    def test_split_and_properties(self):
        sdf = fx.sdf_record(fx.METHANE, {"PUBCHEM_COMPOUND_CID": "297"}) + fx.sdf_record(
            fx.CYCLOPROPANE, {"PUBCHEM_COMPOUND_CID": "6351"}
        )
        records = list(split_sdf(sdf))
        assert len(records) == 2
        props = sdf_properties(records[0][0])
        assert props["PUBCHEM_COMPOUND_CID"] == "297"
        assert parse_molfile(records[1][0]).name == "cyclopropane"

    def test_empty_sdf(self):
        assert list(split_sdf("")) == []
        assert list(split_sdf("\n\n")) == []

    def test_final_record_without_delimiter(self):
        records = list(split_sdf(fx.METHANE))
        assert len(records) == 1


class TestRingSizes:
    def test_cyclopropane(self):
        assert ring_sizes(parse_molfile(fx.CYCLOPROPANE)) == {3}

    def test_acyclic(self):
        assert ring_sizes(parse_molfile(fx.PROPANE)) == set()
        assert ring_sizes(parse_molfile(fx.METHANE)) == set()

    def test_spiro_three_four(self):
        assert ring_sizes(parse_molfile(fx.SPIRO_3_4)) == {3, 4}

    def test_cyclobutane_and_cycloheptane(self):
        assert ring_sizes(parse_molfile(fx.CYCLOBUTANE)) == {4}
        assert ring_sizes(parse_molfile(fx.CYCLOHEPTANE)) == {7}

    def test_fused_rings_use_minimum_basis(self):
        # the 10-cycle of naphthalene is the sum of the two 6-rings
        assert ring_sizes(parse_molfile(fx.NAPHTHALENE_SKELETON)) == {6}

    def test_norbornane_prefers_small_rings(self):
        # 5+5 basis, not the dependent 6-ring
        assert ring_sizes(parse_molfile(fx.NORBORNANE)) == {5}

    def test_invariant_under_relabeling(self):
        rng = random.Random(42)
        base_bonds = [(1, 2), (2, 3), (1, 3), (3, 4), (4, 5), (5, 6), (6, 3)]
        base = Molecule(
            atoms=parse_molfile(fx.SPIRO_3_4).atoms,
            bonds=tuple(Bond(a1=a, a2=b, order=1) for a, b in base_bonds),
        )
        for _ in range(20):
            perm = list(range(1, 7))
            rng.shuffle(perm)
            relabeled = Molecule(
                atoms=base.atoms,
                bonds=tuple(Bond(a1=perm[a - 1], a2=perm[b - 1], order=1) for a, b in base_bonds),
            )
            assert ring_sizes(relabeled) == ring_sizes(base)

    def test_disconnected_components(self):
        # cyclopropane + cyclobutane as separate fragments in one molecule
        bonds = [(1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (6, 7), (7, 4)]
        mol = Molecule(
            atoms=parse_molfile(fx.CYCLOHEPTANE).atoms,  # 7 carbons
            bonds=tuple(Bond(a1=a, a2=b, order=1) for a, b in bonds),
        )
        assert ring_sizes(mol) == {3, 4}


class TestSubsetKeys:
    @pytest.mark.parametrize("moltext,key", list(fx.EXPECTED_SINGLE_KEYS.items()),
                             ids=[str(k) for k in fx.EXPECTED_SINGLE_KEYS.values()])
    def test_single_key_fixtures(self, moltext, key):
        cov = compute_subset_keys(parse_molfile(moltext))
        assert cov.computed.keys() == {key}

    def test_hydrogen_only_all_zero(self):
        cov = compute_subset_keys(parse_molfile(fx.HYDROGEN_ONLY))
        assert cov.computed.popcount() == 0

    def test_supported_set_is_exactly_17(self):
        cov = compute_subset_keys(parse_molfile(fx.METHANE))
        assert cov.supported == SUPPORTED_KEYS
        assert cov.supported == {1, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 14, 18, 19, 20, 22, 24}

    def test_computed_within_supported(self):
        rng = random.Random(77)
        symbols = list(ATOMIC_NUMBERS)
        for _ in range(100):
            atoms = [rng.choice(symbols) for _ in range(rng.randint(1, 8))]
            bonds = []
            for i in range(2, len(atoms) + 1):
                if rng.random() < 0.7:
                    bonds.append((rng.randint(1, i - 1), i))
            mol = parse_molfile(fx.mol_text("random", atoms, bonds))
            cov = compute_subset_keys(mol)
            assert cov.computed.keys() <= cov.supported

    def test_element_sets_mutually_exclusive(self):
        sets = list(_ELEMENT_KEYS.values())
        for i, a in enumerate(sets):
            for b in sets[i + 1 :]:
                assert not (a & b)

    def test_lanthanide_and_actinide_ranges(self):
        assert compute_subset_keys(parse_molfile(fx.mol_text("La", ["La"], []))).computed.keys() == {6}
        assert compute_subset_keys(parse_molfile(fx.mol_text("U", ["U"], []))).computed.keys() == {4}
        assert compute_subset_keys(parse_molfile(fx.mol_text("Rf", ["Rf"], []))).computed.keys() == {2}

    def test_monotone_under_disjoint_union(self):
        rng = random.Random(5)
        pieces = [fx.CYCLOPROPANE, fx.FE_COMPLEX, fx.DISULFIDE, fx.N_O_COMPOUND, fx.SI_COMPOUND]
        for _ in range(20):
            a = parse_molfile(rng.choice(pieces))
            b = parse_molfile(rng.choice(pieces))
            shift = len(a.atoms)
            union = Molecule(
                atoms=a.atoms + b.atoms,
                bonds=a.bonds
                + tuple(Bond(x.a1 + shift, x.a2 + shift, x.order) for x in b.bonds),
            )
            ka = compute_subset_keys(a).computed.keys()
            kb = compute_subset_keys(b).computed.keys()
            assert compute_subset_keys(union).computed.keys() == ka | kb
