import cmath
import math
import unittest

import numpy as np
from scipy.sparse.linalg import expm_multiply

import fwmcat.dynamics as dynamics
import fwmcat.fock as fock
import fwmcat.states as states
from fwmcat.errors import ConfigurationError, NumericalError


# Couplings that do not satisfy any of the decoupling conditions
COUPLINGS = fock.CouplingSet(g=1.0, g1=0.3, g2=0.2, g3=0.1, g12=0.4, g13=0.25, g23=0.15)

# Damped couplings for small dissipative runs
DAMPED = fock.CouplingSet(g=1.0, g1=0.5, g2=0.5, g3=0.5, g12=1.0, g13=1.0, g23=1.0, gamma1=0.2, gamma2=0.2, gamma3=0.4)


def small_coherent_state(space, amplitude=0.7):
    return states.coherent_product_state(space, [amplitude, amplitude], vacuum_modes=[2], max_loss=0.05)


class TestTimeGrid(unittest.TestCase):

    def test_invalid_grids(self):
        """Grids have to start at zero and increase strictly."""
        for grid in [[], [0.1, 0.2], [0.0, 0.5, 0.5], [0.0, 1.0, 0.5]]:
            with self.assertRaises(ValueError):
                dynamics.check_tau_grid(grid)
        self.assertEqual(list(dynamics.check_tau_grid([0, 1])), [0.0, 1.0])

    def test_result_length(self):
        """Evolution results hold one state per grid point."""
        with self.assertRaises(ValueError):
            dynamics.EvolutionResult([0.0, 1.0], [None])


class TestUnitaryEvolution(unittest.TestCase):

    def setUp(self):
        self.space = fock.FockSpace([4, 4, 6], total_cap=8)
        self.H = fock.build_H_int1(self.space, COUPLINGS)
        self.psi0 = states.coherent_product_state(self.space, [0.8, 0.6j], vacuum_modes=[2], max_loss=1e-3)

    def test_matrix_exponential(self):
        """Integrated states match the matrix exponential."""
        grid = [0.0, 0.5, 1.0]
        result = dynamics.evolve_unitary(self.H, self.psi0, grid, rtol=1e-10, atol=1e-12)
        self.assertEqual(len(result), 3)
        self.assertEqual(result.metadata['solver'], 'unitary')
        self.assertTrue(result.metadata['blocked'])
        self.assertGreater(result.metadata['blockCount'], 1)
        self.assertLess(result.metadata['normDrift'], 1e-6)
        for tau, state in zip(grid, result.states):
            expected = expm_multiply(-1j * tau * self.H.matrix, self.psi0.amplitudes)
            self.assertTrue(np.allclose(state.amplitudes, expected, rtol=1e-7, atol=1e-8))
            self.assertEqual(state.metadata['tau'], tau)

    def test_conservation(self):
        """Conserved combinations stay constant along the evolution."""
        result = dynamics.evolve_unitary(self.H, self.psi0, np.linspace(0, 2, 11))
        initial = dynamics.conserved_expectations(self.psi0)
        for state in result.states:
            values = dynamics.conserved_expectations(state)
            for key in ['N', 'n1-n2', '2n1+n3']:
                self.assertAlmostEqual(values[key], initial[key], places=6)
        # The signal mode gets populated
        n3 = result.series(lambda psi: psi.populations().dot(self.space.mode_numbers(2)))
        self.assertEqual(n3[0], 0.0)
        self.assertGreater(n3[-1], 1e-3)

    def test_norm_drift_limit(self):
        """Loose tolerances that let the norm drift raise a NumericalError
        instead of returning renormalized states.
        """
        grid = np.linspace(0, 5, 6)
        with self.assertRaises(NumericalError) as cm:
            dynamics.evolve_unitary(self.H, self.psi0, grid, rtol=1e-2, atol=1e-2)
        diagnostics = cm.exception.diagnostics
        self.assertGreater(diagnostics['normDrift'], dynamics.MAX_NORM_DRIFT)
        self.assertEqual(diagnostics['solver'], 'unitary')
        self.assertTrue(diagnostics['tau'] in grid)
        result = dynamics.evolve_unitary(self.H, self.psi0, grid, rtol=1e-10, atol=1e-12)
        self.assertLessEqual(result.metadata['normDrift'], dynamics.MAX_NORM_DRIFT)

    def test_invalid_arguments(self):
        """Non-Hermitian operators and states of other spaces are rejected."""
        with self.assertRaises(ValueError):
            dynamics.evolve_unitary(fock.annihilation_op(self.space, 0), self.psi0, [0, 1])
        other = states.coherent_product_state(fock.FockSpace([4, 4, 6]), [0.1, 0.1], vacuum_modes=[2])
        with self.assertRaises(ValueError):
            dynamics.evolve_unitary(self.H, other, [0, 1])

    def test_number_phase_pictures(self):
        """Under decoupled couplings the physical picture is the number phase
        transform of the decoupled picture.
        """
        couplings = fock.CouplingSet.decoupled(g=1.0)
        H1 = fock.build_H_int1(self.space, couplings)
        H2 = fock.build_H_int2(self.space, couplings.g)
        grid = [0.0, 0.4, 0.8]
        r1 = dynamics.evolve_unitary(H1, self.psi0, grid, rtol=1e-10, atol=1e-12)
        r2 = dynamics.evolve_unitary(H2, self.psi0, grid, rtol=1e-10, atol=1e-12)
        for tau, psi1, psi2 in zip(grid, r1.states, r2.states):
            mapped = dynamics.apply_number_phase(psi2, 1.0, tau)
            self.assertTrue(np.allclose(mapped.amplitudes, psi1.amplitudes, atol=1e-7))
            # Photon numbers do not depend on the picture
            self.assertTrue(np.allclose(psi1.populations(), psi2.populations(), atol=1e-7))


class TestNumberPhase(unittest.TestCase):

    def test_inverse(self):
        """Negative coupling inverts the transformation."""
        space = fock.FockSpace([3, 3, 3])
        psi = small_coherent_state(space)
        phased = dynamics.apply_number_phase(psi, 1.0, 0.37)
        self.assertFalse(np.allclose(phased.amplitudes, psi.amplitudes))
        restored = dynamics.apply_number_phase(phased, -1.0, 0.37)
        self.assertTrue(np.allclose(restored.amplitudes, psi.amplitudes, atol=1e-14))

    def test_density_matrix(self):
        """Pure states and density matrices transform consistently."""
        space = fock.FockSpace([2, 2, 3])
        psi = small_coherent_state(space, amplitude=0.5)
        rho = dynamics.apply_number_phase(states.to_density(psi), 1.0, 0.8)
        expected = states.to_density(dynamics.apply_number_phase(psi, 1.0, 0.8))
        self.assertTrue(np.allclose(rho.matrix, expected.matrix, atol=1e-14))
        reduced = states.partial_trace(psi, [2])
        with self.assertRaises(ValueError):
            dynamics.apply_number_phase(reduced, 1.0, 0.8)

    def test_phase_values(self):
        """Sectors with N = 0 and N = 1 are invariant."""
        space = fock.FockSpace([2, 2, 2])
        vector = dynamics.number_phase_vector(space, 1.0, 0.5)
        for index in range(space.dimension):
            N = int(space.total_numbers[index])
            self.assertAlmostEqual(vector[index], cmath.exp(-0.25j * N * (N - 1)))


class TestEhrenfest(unittest.TestCase):

    def test_random_state(self):
        """The residual of the Heisenberg equations scales with dtau^2."""
        space = fock.FockSpace([4, 4, 5])
        H = fock.build_H_int1(space, COUPLINGS)
        rng = np.random.default_rng(42)
        vector = np.zeros(space.dimension, dtype=np.complex128)
        for index in range(space.dimension):
            if max(space.tuple_of(index)) <= 1:
                vector[index] = rng.normal() + 1j * rng.normal()
        psi = states.PureState(space, vector, normalize=True)
        for mode in range(3):
            coarse = dynamics.ehrenfest_residual(H, psi, COUPLINGS, mode, 2e-3)
            fine = dynamics.ehrenfest_residual(H, psi, COUPLINGS, mode, 1e-3)
            self.assertLess(fine, 1e-4)
            self.assertTrue(3.0 < coarse / fine < 5.0)

    def test_coherent_initial_state(self):
        """Heisenberg equations hold for the coherent initial state."""
        space = fock.FockSpace([14, 14, 18], total_cap=20)
        couplings = fock.CouplingSet.decoupled(g=1.0)
        H = fock.build_H_int1(space, couplings)
        alpha = cmath.rect(1.0, math.pi / 4)
        psi = states.coherent_product_state(space, [alpha, alpha], vacuum_modes=[2])
        for mode in range(3):
            self.assertLess(dynamics.ehrenfest_residual(H, psi, couplings, mode, 1e-4), 1e-5)

    def test_invalid_arguments(self):
        space = fock.FockSpace([1, 1, 1])
        H = fock.build_H_int1(space, COUPLINGS)
        psi = states.coherent_product_state(space, [0, 0, 0])
        with self.assertRaises(ValueError):
            dynamics.ehrenfest_residual(H, psi, COUPLINGS, 3, 1e-3)
        with self.assertRaises(ValueError):
            dynamics.ehrenfest_residual(H, psi, COUPLINGS, 0, 0.0)


class TestLindbladEvolution(unittest.TestCase):

    def setUp(self):
        self.space = fock.FockSpace([3, 3, 3], total_cap=4)
        self.psi0 = small_coherent_state(self.space)

    def test_closed_system(self):
        """Without damping the dense solver agrees with the unitary solver."""
        H = fock.build_H_int1(self.space, COUPLINGS)
        grid = np.linspace(0, 1, 6)
        dense = dynamics.evolve_lindblad_dense(H, [], self.psi0, grid)
        unitary = dynamics.evolve_unitary(H, self.psi0, grid)
        self.assertEqual(dense.metadata['solver'], 'dense')
        for rho, psi in zip(dense.states, unitary.states):
            self.assertLess(states.trace_distance(rho, psi), 1e-6)

    def test_damped_system(self):
        """Damping reduces the total photon number monotonically."""
        H = fock.build_H_int1(self.space, DAMPED)
        collapse = fock.build_collapse_ops(self.space, DAMPED)
        result = dynamics.evolve_lindblad_dense(H, collapse, self.psi0, np.linspace(0, 2, 21))
        N = result.series(lambda rho: dynamics.conserved_expectations(rho)['N'])
        self.assertTrue(np.all(np.diff(N) < 1e-9))
        self.assertLess(N[-1], N[0])
        self.assertLess(result.metadata['traceDrift'], 1e-6)
        self.assertGreater(result.metadata['minEigenvalue'], -1e-8)
        for rho in result.states:
            rho.validate()

    def test_pure_loss(self):
        """Photon number of a damped Fock state decays exponentially."""
        space = fock.FockSpace([6])
        H = fock.diagonal_op(space, np.zeros(space.dimension))
        collapse = fock.build_collapse_ops(space, fock.CouplingSet(gamma1=0.5))
        vector = np.zeros(space.dimension)
        vector[3] = 1.0
        psi = states.PureState(space, vector)
        grid = np.linspace(0, 2, 5)
        result = dynamics.evolve_lindblad_dense(H, collapse, psi, grid)
        for tau, rho in zip(grid, result.states):
            n = rho.populations().dot(space.mode_numbers(0))
            self.assertAlmostEqual(n, 3.0 * math.exp(-0.5 * tau), places=6)

    def test_positivity_limit(self):
        """Loose tolerances that break positivity raise a NumericalError."""
        H = fock.build_H_int1(self.space, DAMPED)
        collapse = fock.build_collapse_ops(self.space, DAMPED)
        grid = np.linspace(0, 4, 9)
        with self.assertRaises(NumericalError) as cm:
            dynamics.evolve_lindblad_dense(H, collapse, self.psi0, grid, rtol=1e-2, atol=1e-2)
        diagnostics = cm.exception.diagnostics
        self.assertEqual(diagnostics['solver'], 'dense')
        self.assertTrue(
            diagnostics['traceDrift'] > dynamics.MAX_TRACE_DRIFT or
            diagnostics['minEigenvalue'] < dynamics.MIN_EIGENVALUE
        )

    def test_dimension_limit(self):
        H = fock.build_H_int1(self.space, DAMPED)
        with self.assertRaises(ConfigurationError):
            dynamics.evolve_lindblad_dense(H, [], self.psi0, [0, 1], dense_limit=10)


class TestTrajectories(unittest.TestCase):

    def setUp(self):
        self.space = fock.FockSpace([3, 3, 3], total_cap=4)
        self.psi0 = small_coherent_state(self.space)
        self.H = fock.build_H_int1(self.space, DAMPED)
        self.collapse = fock.build_collapse_ops(self.space, DAMPED)
        self.grid = np.linspace(0, 1, 11)

    def test_agreement_with_dense_solver(self):
        """Ensemble means agree with the master equation within their
        statistical errors.
        """
        dense = dynamics.evolve_lindblad_dense(self.H, self.collapse, self.psi0, self.grid)
        ensemble = dynamics.evolve_trajectories(
            self.H, self.collapse, self.psi0, self.grid, n_traj=1000,
            master_seed=7, n_workers=1
        )
        self.assertEqual(ensemble.metadata['solver'], 'trajectories')
        self.assertGreater(ensemble.metadata['jumpCount'], 0)
        for mode in range(3):
            expected = dense.series(lambda rho: rho.populations().dot(self.space.mode_numbers(mode)))
            mean = ensemble.mean_photon(mode)
            error = ensemble.mean_photon_stderr(mode)
            self.assertTrue(np.all(np.abs(mean - expected) <= 5 * error + 1e-3))
        self.assertAlmostEqual(ensemble.photon_distribution(10, 0).sum(), 1.0)
        N = ensemble.total_number()
        self.assertAlmostEqual(N[0], dynamics.conserved_expectations(self.psi0)['N'], places=8)
        self.assertLess(N[-1], N[0])

    def test_reproducibility(self):
        """Ensembles do not depend on the number of worker processes."""
        args = dict(n_traj=40, master_seed=2024, chunk_size=10)
        serial = dynamics.evolve_trajectories(self.H, self.collapse, self.psi0, self.grid, n_workers=1, **args)
        parallel = dynamics.evolve_trajectories(self.H, self.collapse, self.psi0, self.grid, n_workers=2, **args)
        self.assertTrue(np.array_equal(serial.mode_numbers, parallel.mode_numbers))
        self.assertTrue(np.array_equal(serial.mode_squares, parallel.mode_squares))
        self.assertEqual(serial.jumps, parallel.jumps)
        other = dynamics.evolve_trajectories(
            self.H, self.collapse, self.psi0, self.grid, n_traj=40, master_seed=2025,
            chunk_size=10, n_workers=1
        )
        self.assertFalse(np.array_equal(serial.mode_numbers, other.mode_numbers))

    def test_reduced_states(self):
        """Reduced matrices are accumulated at the requested grid points."""
        ensemble = dynamics.evolve_trajectories(
            self.H, self.collapse, self.psi0, self.grid, n_traj=20, master_seed=1,
            reduce_at=[5], store_states=True, n_workers=1
        )
        self.assertIsNone(ensemble.reduced_state(3, 2))
        for mode in range(3):
            rho = ensemble.reduced_state(5, mode)
            self.assertEqual(rho.modes, (mode,))
            self.assertAlmostEqual(np.trace(rho.matrix).real, 1.0)
            self.assertTrue(np.allclose(rho.populations(), ensemble.photon_distribution(5, mode), atol=1e-10))
        # Signal purity series is accumulated at every grid point
        purity = ensemble.purity_series()
        self.assertEqual(len(purity), len(self.grid))
        self.assertAlmostEqual(purity[0], 1.0, places=10)
        self.assertAlmostEqual(purity[5], states.purity(ensemble.reduced_state(5, 2)), places=10)
        rho = ensemble.average_density(5)
        n1 = rho.populations().dot(self.space.mode_numbers(0))
        self.assertAlmostEqual(n1, ensemble.mean_photon(0)[5], places=8)
        self.assertEqual(len(ensemble.fano(0)), len(self.grid))
        self.assertEqual(len(ensemble.fano_stderr(0)), len(self.grid))
        self.assertTrue(np.all(np.isnan(ensemble.fano(2)[:1])))

    def test_invalid_arguments(self):
        with self.assertRaises(ConfigurationError):
            dynamics.evolve_trajectories(self.H, [], self.psi0, self.grid, n_traj=10, master_seed=1)
        with self.assertRaises(ConfigurationError):
            dynamics.evolve_trajectories(self.H, self.collapse, self.psi0, self.grid, n_traj=0, master_seed=1)
        ensemble = dynamics.evolve_trajectories(
            self.H, self.collapse, self.psi0, self.grid, n_traj=2, master_seed=1, n_workers=1
        )
        with self.assertRaises(ValueError):
            ensemble.average_density(0)


class TestExtremalTime(unittest.TestCase):

    def test_sine(self):
        """First maximum and minimum of a sine series."""
        taus = np.arange(0, 601) * 0.01
        series = list(zip(taus, np.sin(taus)))
        self.assertAlmostEqual(dynamics.find_extremal_time(series), math.pi / 2, places=4)
        tau_min = dynamics.find_extremal_time(series, kind=dynamics.EXTREMUM_FIRST_MIN)
        self.assertAlmostEqual(tau_min, 3 * math.pi / 2, places=4)

    def test_invalid_series(self):
        with self.assertRaises(ValueError):
            dynamics.find_extremal_time([(0, 1), (1, 2)])
        with self.assertRaises(ValueError):
            dynamics.find_extremal_time([(0, 1), (1, 2), (3, 1)])
        with self.assertRaises(ValueError):
            dynamics.find_extremal_time([(0, 1), (1, 2), (2, 1)], kind='max')
        with self.assertRaises(NumericalError):
            dynamics.find_extremal_time([(0, 1), (1, 2), (2, 3), (3, 4)])


if __name__ == '__main__':
    unittest.main()
