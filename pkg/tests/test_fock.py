import io
import math
import unittest

import numpy as np

import fwmcat.fock as fock
from fwmcat.errors import ConfigurationError


def max_abs(op):
    """Largest absolute entry of a sparse operator (0 for empty operators)."""
    if op.nnz == 0:
        return 0.0
    return float(np.abs(op.matrix.data).max())


class TestFockSpace(unittest.TestCase):

    def test_dimension(self):
        """Test dimension of spaces with and without total cap."""
        self.assertEqual(fock.FockSpace([1, 1, 1]).dimension, 8)
        self.assertEqual(fock.FockSpace([2, 2, 2], total_cap=2).dimension, 10)
        space = fock.FockSpace([0])
        self.assertEqual(space.dimension, 1)
        self.assertEqual(space.tuple_of(0), (0,))
        # Binomial count of tuples with total <= 4 when caps do not bind
        self.assertEqual(fock.FockSpace([4, 4, 4], total_cap=4).dimension, 35)

    def test_dimension_limit(self):
        """Spaces above the dimension limit are rejected before enumeration."""
        with self.assertRaises(ConfigurationError):
            fock.FockSpace([10, 10, 10], dimension_limit=100)
        with self.assertRaises(ConfigurationError):
            fock.FockSpace([])
        with self.assertRaises(ConfigurationError):
            fock.FockSpace([2, -1])
        with self.assertRaises(ConfigurationError):
            fock.FockSpace([2, 2], total_cap=-1)
        with self.assertRaises(ConfigurationError):
            fock.build_space([10, 10, 10], dimension_limit=100)
        space = fock.build_space([2, 2, 2], total_cap=2)
        self.assertEqual(space, fock.FockSpace([2, 2, 2], total_cap=2))
        self.assertEqual(space.dimension, 10)

    def test_equality(self):
        """Spaces are equal if defined by the same truncation."""
        self.assertEqual(fock.FockSpace([1, 2]), fock.FockSpace([1, 2]))
        self.assertEqual(hash(fock.FockSpace([1, 2])), hash(fock.FockSpace([1, 2])))
        self.assertNotEqual(fock.FockSpace([1, 2]), fock.FockSpace([1, 2], total_cap=2))
        space = fock.FockSpace([3, 2, 4], total_cap=5)
        self.assertEqual(fock.FockSpace.from_dict(space.to_dict()), space)

    def test_index_bijection(self):
        """index_of and tuple_of are inverse to each other."""
        space = fock.FockSpace([3, 2, 4], total_cap=5)
        for i in range(space.dimension):
            self.assertEqual(space.index_of(space.tuple_of(i)), i)
        with self.assertRaises(ValueError):
            space.index_of((4, 0, 0))
        with self.assertRaises(ValueError):
            space.index_of((2, 2, 2))
        with self.assertRaises(ValueError):
            space.index_of((1, 1))
        with self.assertRaises(ValueError):
            space.tuple_of(space.dimension)
        indices = space.indices_of([[0, 0, 0], [9, 0, 0], [1, 1, 1]])
        self.assertEqual(indices[0], 0)
        self.assertEqual(indices[1], -1)
        self.assertEqual(space.tuple_of(indices[2]), (1, 1, 1))

    def test_sectors(self):
        """Basis states are ordered by total photon number."""
        space = fock.FockSpace([3, 2, 4], total_cap=5)
        self.assertTrue(np.all(np.diff(space.total_numbers) >= 0))
        self.assertEqual(space.max_total, 5)
        for total, start, stop in space.sectors:
            block = space.occupations[space.sector_slice(total)]
            self.assertEqual(block.shape[0], stop - start)
            self.assertTrue(np.all(block.sum(axis=1) == total))
        self.assertEqual(space.sector_slice(17), slice(0, 0))
        with self.assertRaises(ValueError):
            space.mode_numbers(3)


class TestOperators(unittest.TestCase):

    def setUp(self):
        """Space on which the total cap is the only binding truncation."""
        self.space = fock.FockSpace([4, 4, 4], total_cap=4)

    def test_ladder_operators(self):
        """Test annihilation, creation and number operators."""
        space = fock.FockSpace([2])
        a = fock.annihilation_op(space, 0).to_dense()
        self.assertAlmostEqual(a[space.index_of((1,)), space.index_of((2,))], math.sqrt(2))
        self.assertTrue(np.all(a[:, space.index_of((0,))] == 0))
        space = fock.FockSpace([3, 3])
        for mode in range(2):
            a = fock.annihilation_op(space, mode)
            n = fock.number_op(space, mode)
            diff = fock.creation_op(space, mode) @ a - n
            self.assertLess(max_abs(diff), 1e-12)
        with self.assertRaises(ValueError):
            fock.annihilation_op(space, 2)

    def test_number_operators(self):
        """Test number and total number operators."""
        space = fock.FockSpace([4, 4, 4])
        N = fock.total_number_op(space).diagonal()
        self.assertEqual(N[space.index_of((2, 3, 4))].real, 9)
        self.assertEqual(fock.number_op(space, 2).diagonal()[0].real, 0)
        space = fock.FockSpace([1, 1, 1])
        self.assertEqual(fock.number_op(space, 0).diagonal().real.sum(), 4)

    def test_fwm_hamiltonian(self):
        """Test matrix elements and symmetries of the FWM Hamiltonian."""
        g = 0.7
        H = fock.build_H_fwm(self.space, g)
        dense = H.to_dense()
        source = self.space.index_of((1, 1, 0))
        target = self.space.index_of((0, 0, 2))
        self.assertAlmostEqual(dense[target, source], g * math.sqrt(2))
        self.assertAlmostEqual(dense[source, target], g * math.sqrt(2))
        self.assertTrue(np.all(dense[:, 0] == 0))
        self.assertTrue(H.is_hermitian())
        self.assertLessEqual(H.max_asymmetry(), 1e-12)
        # At most two off-diagonal entries per row
        offdiag = dense - np.diag(np.diag(dense))
        self.assertLessEqual(int((offdiag != 0).sum(axis=1).max()), 2)
        with self.assertRaises(ValueError):
            fock.build_H_fwm(self.space, -1.0)

    def test_conservation_generators(self):
        """H commutes with N, n1 - n2 and 2 n1 + n3."""
        couplings = fock.CouplingSet(g=1.0, g1=0.3, g2=0.2, g3=0.4, g12=0.7, g13=0.1, g23=0.5)
        n = [fock.number_op(self.space, m) for m in range(3)]
        generators = [fock.total_number_op(self.space), n[0] - n[1], n[0] * 2.0 + n[2]]
        for H in [fock.build_H_int1(self.space, couplings), fock.build_H_int2(self.space, 1.0)]:
            for op in generators:
                self.assertLess(max_abs(H.commutator(op)), 1e-12)

    def test_kerr_hamiltonians(self):
        """Test diagonal SPM and XPM Hamiltonians."""
        spm = fock.build_H_spm(self.space, 0.5, 0.0, 0.0).diagonal().real
        xpm = fock.build_H_xpm(self.space, 1.0, 0.0, 0.0).diagonal().real
        self.assertAlmostEqual(spm[self.space.index_of((2, 0, 0))], 1.0)
        self.assertAlmostEqual(xpm[self.space.index_of((1, 1, 0))], 1.0)
        spm = fock.build_H_spm(self.space, 0.5, 0.7, 0.9).diagonal().real
        for occupation in [(1, 0, 0), (0, 1, 0), (1, 1, 1)]:
            self.assertEqual(spm[self.space.index_of(occupation)], 0.0)

    def test_interaction_hamiltonians(self):
        """Test composition of the interaction Hamiltonians."""
        H_fwm = fock.build_H_fwm(self.space, 1.0)
        H = fock.build_H_int1(self.space, fock.CouplingSet(g=1.0))
        self.assertEqual(H.label, 'H_int1')
        self.assertLess(max_abs(H - H_fwm), 1e-15)
        couplings = fock.CouplingSet(g=1.0, g1=0.3, g2=0.2, g3=0.4, g12=0.7, g13=0.1, g23=0.5)
        H = fock.build_H_int1(self.space, couplings)
        kerr = fock.build_H_spm(self.space, *couplings.spm) + fock.build_H_xpm(self.space, *couplings.xpm)
        self.assertTrue(np.allclose(H.diagonal(), kerr.diagonal(), atol=1e-14))
        # Decoupling identity H_int1 = H_fwm + N(N - 1) / 2
        H = fock.build_H_int1(self.space, fock.CouplingSet.decoupled(g=1.0))
        total = self.space.total_numbers.astype(float)
        phase = fock.diagonal_op(self.space, 0.5 * total * (total - 1))
        self.assertLess(max_abs(H - H_fwm - phase), 1e-12)
        self.assertLess(max_abs(H_fwm.commutator(phase)), 1e-12)
        # Decoupled Hamiltonian has the FWM matrix
        H2 = fock.build_H_int2(self.space, 0.8)
        self.assertEqual(H2.label, 'H_int2')
        self.assertLess(max_abs(H2 - fock.build_H_fwm(self.space, 0.8)), 1e-15)

    def test_omega_operators(self):
        """Test nonlinear frequency shift operators."""
        couplings = fock.CouplingSet(g=1.0, g1=0.5, g2=0.2, g3=0.4, g12=0.7, g13=0.1, g23=0.5)
        omega = fock.build_omega_op(self.space, couplings, 0).diagonal().real
        self.assertAlmostEqual(omega[self.space.index_of((1, 0, 0))], 1.0)
        self.assertAlmostEqual(omega[self.space.index_of((0, 1, 0))], 0.7)
        self.assertEqual(fock.build_omega_op(self.space, couplings, 2).diagonal()[0], 0)
        M = couplings.shift_matrix()
        self.assertTrue(np.array_equal(M, M.T))
        with self.assertRaises(ValueError):
            fock.build_omega_op(self.space, couplings, 3)

    def test_collapse_operators(self):
        """Collapse operators exist for damped modes only."""
        couplings = fock.CouplingSet(gamma1=0.2)
        ops = fock.build_collapse_ops(self.space, couplings)
        self.assertEqual(len(ops), 1)
        self.assertEqual(ops[0].label, 'C1')
        dense = ops[0].to_dense()
        self.assertAlmostEqual(
            dense[self.space.index_of((0, 0, 0)), self.space.index_of((1, 0, 0))],
            math.sqrt(0.2)
        )
        self.assertEqual(len(fock.build_collapse_ops(self.space, couplings, include_zero=True)), 3)


class TestCouplings(unittest.TestCase):

    def test_coupling_set(self):
        """Test validation and serialization of coupling sets."""
        with self.assertRaises(ValueError):
            fock.CouplingSet(g=-1)
        with self.assertRaises(ValueError):
            fock.CouplingSet(gamma2=-0.1)
        couplings = fock.CouplingSet.decoupled(g=2.0, gamma=0.2)
        self.assertTrue(couplings.is_dissipative)
        self.assertEqual(couplings.spm, (1.0, 1.0, 1.0))
        self.assertEqual(couplings.xpm, (2.0, 2.0, 2.0))
        copy = fock.CouplingSet.from_dict(couplings.to_dict())
        self.assertEqual(copy.to_dict(), couplings.to_dict())
        self.assertFalse(fock.CouplingSet().is_dissipative)

    def test_validate_decoupling(self):
        """Test classification of the decoupling conditions."""
        self.assertEqual(
            fock.validate_decoupling(fock.CouplingSet(g=1, g1=0.5, g2=0.5, g3=0.5, g12=1, g13=1, g23=1)),
            fock.DECOUPLING_EXACT
        )
        self.assertEqual(fock.validate_decoupling(fock.CouplingSet(g=1)), fock.DECOUPLING_RELATIONS)
        self.assertEqual(fock.validate_decoupling(fock.CouplingSet(g=1, g13=1)), fock.DECOUPLING_NONE)
        # Relations hold but the individual couplings differ from g / 2 and g
        couplings = fock.CouplingSet(g=1, g1=0.25, g2=0.25, g3=0.25, g12=0.5, g13=0.5, g23=0.5)
        self.assertEqual(fock.validate_decoupling(couplings), fock.DECOUPLING_RELATIONS)


class TestOperatorFiles(unittest.TestCase):

    def test_operator_file(self):
        """Write and read an operator in triplet format."""
        space = fock.FockSpace([2, 2, 2], total_cap=3)
        H = fock.build_H_int1(space, fock.CouplingSet.decoupled())
        buf = io.StringIO()
        fock.write_operator(H, buf)
        text = buf.getvalue()
        self.assertTrue(text.startswith(fock.OPERATOR_FILE_HEADER + '\n'))
        op = fock.read_operator(io.StringIO(text), space)
        self.assertLess(max_abs(op - H), 1e-15)
        with self.assertRaises(ValueError):
            fock.read_operator(io.StringIO('0 0 1 0\n'), space)
        with self.assertRaises(ValueError):
            fock.read_operator(io.StringIO(fock.OPERATOR_FILE_HEADER + '\n99 0 1 0\n'), space)


if __name__ == '__main__':
    unittest.main()
