"""Dynamics - Time evolution of states in dimensionless time tau.

Three solvers are available: unitary propagation of pure states (blocked by
total photon number sectors), dense integration of the Lindblad master
equation for small spaces, and Monte Carlo wave function trajectories for
large dissipative runs. In addition the module contains the number phase
transformation between the decoupled (b) and the physical (a) picture, the
Heisenberg equation residual used to test operator construction, and the
search for extremal times in observable series.

Hamiltonians passed to the solvers are expected to be rescaled by the FWM
coupling, i.e., H / g, so that the time argument is tau = g t.
"""

import logging
import multiprocessing
import os

import numpy as np
from scipy.integrate import RK45, solve_ivp
from scipy.sparse.linalg import expm_multiply

from fwmcat.errors import ConfigurationError, NumericalError
from fwmcat.fock import FWM_MODES, annihilation_op, build_omega_op, creation_op
from fwmcat.states import DensityMatrix, PureState, reduced_matrix, to_density


logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
#
# Constants
#
# ------------------------------------------------------------------------------

# Default tolerances of the adaptive Runge-Kutta integrator
DEFAULT_ATOL = 1e-10
DEFAULT_RTOL = 1e-8

# Largest accepted deviation of the state norm (unitary) or the trace (dense)
# from one, and most negative accepted eigenvalue of dense density matrices
MAX_NORM_DRIFT = 1e-7
MAX_TRACE_DRIFT = 1e-7
MIN_EIGENVALUE = -1e-8

# Largest dimension for dense Lindblad integration
DENSE_DIMENSION_LIMIT = 512

# Relative tolerance for locating the jump time |psi|^2 = r
JUMP_NORM_TOLERANCE = 1e-6

# Maximum number of bisection steps when locating a jump
JUMP_MAX_BISECTIONS = 200

# Number of trajectories per work unit. Fixed so that ensemble sums do not
# depend on the number of workers.
TRAJECTORY_CHUNK_SIZE = 25

# Number of batches for batch means standard errors
BATCH_COUNT = 20

# Kinds of extremal times
EXTREMUM_FIRST_MAX = 'first_max'
EXTREMUM_FIRST_MIN = 'first_min'

# Default picture name (no number phase transformation)
PICTURE_RAW = 'raw'
PICTURE_TRANSFORMED = 'transformed'


# ------------------------------------------------------------------------------
#
# Result objects
#
# ------------------------------------------------------------------------------

class EvolutionResult(object):
    """States at the points of a time grid together with solver diagnostics.

    Attributes
    ----------
    tau_grid : numpy.ndarray
        Strictly increasing dimensionless times starting at 0
    states : list(PureState) or list(DensityMatrix)
        State for each grid point
    metadata : dict
        Solver diagnostics, e.g., 'solver', 'rtol', 'atol', 'nfev',
        'normDrift' or 'traceDrift'
    """
    def __init__(self, tau_grid, states, metadata=None):
        """Initialize result. Raises ValueError if the number of states does
        not match the grid.
        """
        if len(states) != len(tau_grid):
            raise ValueError('expected one state per grid point')
        self.tau_grid = np.asarray(tau_grid, dtype=float)
        self.states = states
        self.metadata = metadata if not metadata is None else {}

    def __len__(self):
        return len(self.states)

    def final_state(self):
        """State at the last grid point."""
        return self.states[-1]

    def series(self, func):
        """Evaluate a function of the state at every grid point.

        Parameters
        ----------
        func : callable
            Function that takes a state and returns a float

        Returns
        -------
        numpy.ndarray
        """
        return np.array([func(state) for state in self.states])


class TrajectoryEnsemble(object):
    """Result of a Monte Carlo wave function run.

    Per-trajectory series of <n_j> and <n_j^2> are kept for error estimates.
    Linear observables (<a_j>, <a_j^2>, photon distributions and single mode
    reduced matrices) are kept as ensemble averages, for every picture. The
    picture is defined by the coupling of the number phase transformation that
    is applied to each trajectory state (0 for none).

    Attributes
    ----------
    master_seed : int
    n_traj : int
    tau_grid : numpy.ndarray
    space : FockSpace
    pictures : dict
        Mapping from picture name to number phase coupling
    mode_numbers : numpy.ndarray
        (n_traj x T x m) array of <n_j> per trajectory
    mode_squares : numpy.ndarray
        (n_traj x T x m) array of <n_j^2> per trajectory
    first_moments : dict
        Picture name to (T x m) complex array of ensemble averaged <a_j>
    second_moments : dict
        Picture name to (T x m) complex array of ensemble averaged <a_j^2>
    distributions : numpy.ndarray
        (T x m x d) ensemble averaged photon distributions
    reduced : dict
        Picture name to dictionary that maps grid indices to a list of
        averaged single mode reduced matrices (one per mode)
    jumps : list(list((float, int)))
        Jump times and channels for every trajectory
    signal_matrices : numpy.ndarray
        (T x d x d) ensemble averaged reduced matrix of the signal mode in
        the raw picture at every grid point
    states : list(numpy.ndarray)
        (T x dim) trajectory states if they were stored, None otherwise
    metadata : dict
    """
    def __init__(
        self, master_seed, n_traj, tau_grid, space, pictures, mode_numbers,
        mode_squares, first_moments, second_moments, distributions, reduced,
        jumps, signal_matrices=None, states=None, metadata=None):
        """Initialize the ensemble."""
        if mode_numbers.shape[0] != n_traj:
            raise ValueError('expected %d trajectories' % n_traj)
        self.master_seed = master_seed
        self.n_traj = n_traj
        self.tau_grid = np.asarray(tau_grid, dtype=float)
        self.space = space
        self.pictures = pictures
        self.mode_numbers = mode_numbers
        self.mode_squares = mode_squares
        self.first_moments = first_moments
        self.second_moments = second_moments
        self.distributions = distributions
        self.reduced = reduced
        self.jumps = jumps
        self.signal_matrices = signal_matrices
        self.states = states
        self.metadata = metadata if not metadata is None else {}

    def average_density(self, index):
        """Ensemble averaged full density matrix at a grid point. Requires
        stored trajectory states.

        Parameters
        ----------
        index : int

        Returns
        -------
        DensityMatrix
        """
        if self.states is None:
            raise ValueError('trajectory states were not stored')
        vectors = np.array([traj[index] for traj in self.states])
        matrix = vectors.T.dot(vectors.conj()) / self.n_traj
        matrix = 0.5 * (matrix + matrix.conj().T)
        return DensityMatrix(matrix / np.trace(matrix).real, space=self.space, metadata={'tau': float(self.tau_grid[index])})

    def fano(self, mode):
        """Fano factor series of the ensemble. Undefined values (vanishing
        mean photon number) are NaN.

        Returns
        -------
        numpy.ndarray
        """
        return fano_series(self.mode_numbers[:, :, mode], self.mode_squares[:, :, mode])

    def fano_stderr(self, mode, batches=BATCH_COUNT):
        """Batch means standard error of the Fano factor series.

        Parameters
        ----------
        mode : int
        batches : int, optional

        Returns
        -------
        numpy.ndarray
        """
        batches = min(batches, self.n_traj)
        if batches < 2:
            return np.full(len(self.tau_grid), np.nan)
        values = np.array([
            fano_series(self.mode_numbers[idx, :, mode], self.mode_squares[idx, :, mode])
            for idx in np.array_split(np.arange(self.n_traj), batches)
        ])
        return values.std(axis=0, ddof=1) / np.sqrt(batches)

    def mean_photon(self, mode):
        """Ensemble mean photon number series of a mode.

        Returns
        -------
        numpy.ndarray
        """
        return self.mode_numbers[:, :, mode].mean(axis=0)

    def mean_photon_stderr(self, mode):
        """Standard error of the mean photon number series of a mode.

        Returns
        -------
        numpy.ndarray
        """
        if self.n_traj < 2:
            return np.full(len(self.tau_grid), np.nan)
        return self.mode_numbers[:, :, mode].std(axis=0, ddof=1) / np.sqrt(self.n_traj)

    def photon_distribution(self, index, mode):
        """Ensemble averaged photon distribution of a mode at a grid point.

        Returns
        -------
        numpy.ndarray
        """
        return self.distributions[index, mode, :self.space.max_occ[mode] + 1].copy()

    def purity_series(self):
        """Purity Tr[rho^2] of the ensemble averaged signal mode reduced
        matrix at every grid point.

        Returns
        -------
        numpy.ndarray
        """
        if self.signal_matrices is None:
            raise ValueError('signal mode matrices were not accumulated')
        values = []
        for matrix in self.signal_matrices:
            trace = np.trace(matrix).real
            values.append(np.vdot(matrix, matrix).real / trace ** 2)
        return np.array(values)

    def quadrature_variances(self, mode, picture=PICTURE_RAW):
        """Series of (Var(x), Var(p)) for x = (a + a^dagger) / sqrt(2).

        Returns
        -------
        (numpy.ndarray, numpy.ndarray)
        """
        n = self.mean_photon(mode)
        a = self.first_moments[picture][:, mode]
        a2 = self.second_moments[picture][:, mode]
        var_x = a2.real + n + 0.5 - 2 * a.real ** 2
        var_p = -a2.real + n + 0.5 - 2 * a.imag ** 2
        return var_x, var_p

    def reduced_state(self, index, mode, picture=PICTURE_RAW):
        """Ensemble averaged reduced matrix of a mode at one of the grid
        indices listed in reduce_at. Returns None if the matrix was not
        accumulated.

        Returns
        -------
        DensityMatrix
        """
        matrices = self.reduced.get(picture, {}).get(index)
        if matrices is None:
            return None
        matrix = matrices[mode]
        return DensityMatrix(
            matrix / np.trace(matrix).real,
            space=self.space,
            modes=(mode,),
            label='rho' + str(mode + 1),
            metadata={'tau': float(self.tau_grid[index]), 'picture': picture}
        )

    def total_number(self):
        """Ensemble mean total photon number series."""
        return self.mode_numbers.sum(axis=2).mean(axis=0)


# ------------------------------------------------------------------------------
#
# Solvers
#
# ------------------------------------------------------------------------------

def check_tau_grid(tau_grid):
    """Raise ValueError unless the grid starts at 0 and is strictly
    increasing.

    Returns
    -------
    numpy.ndarray
    """
    tau_grid = np.asarray(tau_grid, dtype=float).reshape(-1)
    if len(tau_grid) == 0 or tau_grid[0] != 0.0:
        raise ValueError('time grid must start at 0')
    if np.any(np.diff(tau_grid) <= 0):
        raise ValueError('time grid must be strictly increasing')
    return tau_grid


def evolve_lindblad_dense(
        H, collapse_ops, rho0, tau_grid, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
        dense_limit=DENSE_DIMENSION_LIMIT):
    """Integrate d rho / d tau = -i [H, rho] + sum_j (C_j rho C_j^dagger -
    1/2 {C_j^dagger C_j, rho}) with dense matrices.

    Parameters
    ----------
    H : SparseOperator
    collapse_ops : list(SparseOperator)
    rho0 : DensityMatrix or PureState
    tau_grid : list(float)
    rtol : float, optional
    atol : float, optional
    dense_limit : int, optional

    Returns
    -------
    EvolutionResult
    """
    tau_grid = check_tau_grid(tau_grid)
    space = H.space
    if space.dimension > dense_limit:
        raise ConfigurationError(
            'dimension %d exceeds dense limit %d: use the trajectory solver' % (space.dimension, dense_limit)
        )
    if isinstance(rho0, PureState):
        rho0 = to_density(rho0)
    if rho0.space != space:
        raise ValueError('state and Hamiltonian act on different spaces')
    h_eff = H.to_dense()
    jumps = []
    for op in collapse_ops:
        c = op.to_dense()
        h_eff = h_eff - 0.5j * c.conj().T.dot(c)
        jumps.append(c)
    h_eff_dagger = h_eff.conj().T
    dim = space.dimension

    def rhs(t, y):
        rho = y.reshape(dim, dim)
        drho = -1j * (h_eff.dot(rho) - rho.dot(h_eff_dagger))
        for c in jumps:
            drho += c.dot(rho).dot(c.conj().T)
        return drho.reshape(-1)

    logger.info('dense Lindblad run with dimension %d and %d collapse operators', dim, len(jumps))
    y0 = np.array(rho0.matrix, dtype=np.complex128).reshape(-1)
    if len(tau_grid) > 1:
        sol = solve_ivp(
            rhs, (0.0, tau_grid[-1]), y0, method='RK45', t_eval=tau_grid,
            rtol=rtol, atol=atol
        )
        if not sol.success:
            raise NumericalError(
                'dense Lindblad integration failed: ' + str(sol.message),
                diagnostics={'nfev': int(sol.nfev), 'tau': float(sol.t[-1]) if len(sol.t) else 0.0}
            )
        values = sol.y.T
        nfev = int(sol.nfev)
    else:
        values = y0.reshape(1, -1)
        nfev = 0
    states = []
    trace_drift = 0.0
    min_eigenvalue = 1.0
    min_tau = 0.0
    for tau, y in zip(tau_grid, values):
        matrix = y.reshape(dim, dim)
        matrix = 0.5 * (matrix + matrix.conj().T)
        trace = np.trace(matrix).real
        trace_drift = max(trace_drift, abs(trace - 1.0))
        rho = DensityMatrix(matrix / trace, space=space, metadata={'tau': float(tau)})
        eigenvalue = rho.min_eigenvalue()
        if eigenvalue < min_eigenvalue:
            min_eigenvalue = eigenvalue
            min_tau = float(tau)
        states.append(rho)
    metadata = {
        'solver': 'dense',
        'rtol': rtol,
        'atol': atol,
        'nfev': nfev,
        'traceDrift': trace_drift,
        'minEigenvalue': min_eigenvalue
    }
    if trace_drift > MAX_TRACE_DRIFT:
        raise NumericalError(
            'trace drift %g exceeds %g: tighten the solver tolerances' % (trace_drift, MAX_TRACE_DRIFT),
            diagnostics=metadata
        )
    if min_eigenvalue < MIN_EIGENVALUE:
        raise NumericalError(
            'density matrix at tau=%g has eigenvalue %g: tighten the solver tolerances' % (min_tau, min_eigenvalue),
            diagnostics=dict(metadata, tau=min_tau)
        )
    logger.info('dense Lindblad run finished (trace drift %g)', trace_drift)
    return EvolutionResult(tau_grid, states, metadata=metadata)


def evolve_trajectories(
        H, collapse_ops, psi0, tau_grid, n_traj, master_seed, pictures=None,
        reduce_at=None, store_states=False, n_workers=None, rtol=DEFAULT_RTOL,
        atol=DEFAULT_ATOL, chunk_size=TRAJECTORY_CHUNK_SIZE):
    """Monte Carlo wave function unravelling of the Lindblad equation.

    Each trajectory integrates the non-Hermitian Hamiltonian
    H_eff = H - i/2 sum_j C_j^dagger C_j. A jump happens when the squared norm
    drops to a uniform random number r. Trajectory k draws its random numbers
    from a Philox generator seeded with (master_seed, k), so the ensemble does
    not depend on the order in which trajectories are executed.

    Parameters
    ----------
    H : SparseOperator
    collapse_ops : list(SparseOperator)
    psi0 : PureState
    tau_grid : list(float)
    n_traj : int
    master_seed : int
    pictures : dict, optional
        Mapping from picture name to number phase coupling. Defaults to a
        single raw picture.
    reduce_at : list(int), optional
        Grid indices at which single mode reduced matrices are accumulated
    store_states : Boolean, optional
        Keep all trajectory states
    n_workers : int, optional
        Number of worker processes. Defaults to the number of CPUs.
    rtol : float, optional
    atol : float, optional
    chunk_size : int, optional
        Number of trajectories per work unit

    Returns
    -------
    TrajectoryEnsemble
    """
    tau_grid = check_tau_grid(tau_grid)
    if len(collapse_ops) == 0:
        raise ConfigurationError('trajectory solver requires collapse operators: use the unitary solver')
    if n_traj < 1:
        raise ConfigurationError('number of trajectories must be positive')
    space = H.space
    if psi0.space != space:
        raise ValueError('state and Hamiltonian act on different spaces')
    if pictures is None:
        pictures = {PICTURE_RAW: 0.0}
    reduce_at = sorted(set(int(i) for i in reduce_at)) if reduce_at else []
    for index in reduce_at:
        if index < 0 or index >= len(tau_grid):
            raise ValueError('invalid reduce index: ' + str(index))
    h_eff = H.matrix.copy()
    for op in collapse_ops:
        h_eff = h_eff - 0.5j * op.matrix.conj().transpose().dot(op.matrix)
    total = space.total_numbers.astype(float)
    context = {
        'space': space,
        'h_eff': h_eff.tocsr(),
        'collapse': [op.matrix for op in collapse_ops],
        'psi0': np.array(psi0.amplitudes),
        'tau_grid': tau_grid,
        'master_seed': int(master_seed),
        'pictures': dict(pictures),
        'reduce_at': reduce_at,
        'store_states': store_states,
        'rtol': rtol,
        'atol': atol,
        'ladder': [annihilation_op(space, m).matrix for m in range(space.mode_count)],
        'nn1': total * (total - 1)
    }
    context['ladder2'] = [a.dot(a) for a in context['ladder']]
    chunks = [
        list(range(start, min(start + chunk_size, n_traj)))
        for start in range(0, n_traj, chunk_size)
    ]
    if n_workers is None:
        n_workers = os.cpu_count() or 1
    n_workers = max(1, min(n_workers, len(chunks)))
    logger.info(
        'running %d trajectories in %d chunks on %d workers (seed %d)',
        n_traj, len(chunks), n_workers, master_seed
    )
    results = []
    if n_workers == 1:
        for chunk in chunks:
            results.append(run_trajectory_chunk(context, chunk))
            logger.info('completed %d of %d trajectories', chunk[-1] + 1, n_traj)
    else:
        pool = multiprocessing.Pool(n_workers, initializer=init_worker, initargs=(context,))
        try:
            for chunk, result in zip(chunks, pool.imap(run_worker_chunk, chunks)):
                results.append(result)
                logger.info('completed %d of %d trajectories', chunk[-1] + 1, n_traj)
        finally:
            pool.close()
            pool.join()
    # Merge in chunk order
    T = len(tau_grid)
    m = space.mode_count
    first_moments = {name: np.zeros((T, m), dtype=np.complex128) for name in pictures}
    second_moments = {name: np.zeros((T, m), dtype=np.complex128) for name in pictures}
    distributions = np.zeros((T, m, max(space.max_occ) + 1))
    reduced = {name: {index: [np.zeros((d + 1, d + 1), dtype=np.complex128) for d in space.max_occ] for index in reduce_at} for name in pictures}
    signal_matrices = np.zeros(results[0]['signal'].shape, dtype=np.complex128)
    jumps = []
    states = [] if store_states else None
    steps = 0
    for result in results:
        signal_matrices += result['signal']
        for name in pictures:
            first_moments[name] += result['a'][name]
            second_moments[name] += result['a2'][name]
            for index in reduce_at:
                for mode in range(m):
                    reduced[name][index][mode] += result['reduced'][name][index][mode]
        distributions += result['dist']
        jumps.extend(result['jumps'])
        if store_states:
            states.extend(result['states'])
        steps += result['steps']
    for name in pictures:
        first_moments[name] /= n_traj
        second_moments[name] /= n_traj
    distributions /= n_traj
    signal_matrices /= n_traj
    metadata = {
        'solver': 'trajectories',
        'rtol': rtol,
        'atol': atol,
        'steps': steps,
        'jumpCount': sum(len(j) for j in jumps),
        'chunkSize': chunk_size
    }
    logger.info('trajectory run finished with %d jumps', metadata['jumpCount'])
    return TrajectoryEnsemble(
        master_seed=master_seed,
        n_traj=n_traj,
        tau_grid=tau_grid,
        space=space,
        pictures=dict(pictures),
        mode_numbers=np.concatenate([r['n'] for r in results], axis=0),
        mode_squares=np.concatenate([r['n2'] for r in results], axis=0),
        first_moments=first_moments,
        second_moments=second_moments,
        distributions=distributions,
        reduced=reduced,
        jumps=jumps,
        signal_matrices=signal_matrices,
        states=states,
        metadata=metadata
    )


def evolve_unitary(H, psi0, tau_grid, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Propagate a pure state under d psi / d tau = -i H psi.

    If the Hamiltonian does not couple different total photon number sectors
    each populated sector is integrated separately.

    Parameters
    ----------
    H : SparseOperator
        Hermitian operator
    psi0 : PureState
    tau_grid : list(float)
    rtol : float, optional
    atol : float, optional

    Returns
    -------
    EvolutionResult
    """
    tau_grid = check_tau_grid(tau_grid)
    space = H.space
    if psi0.space != space:
        raise ValueError('state and Hamiltonian act on different spaces')
    if not H.is_hermitian():
        raise ValueError('Hamiltonian is not Hermitian')
    coo = H.matrix.tocoo()
    blocked = bool(np.all(space.total_numbers[coo.row] == space.total_numbers[coo.col]))
    if blocked:
        blocks = [
            slice(start, stop) for _, start, stop in space.sectors
            if stop > start and np.any(psi0.amplitudes[start:stop] != 0)
        ]
    else:
        blocks = [slice(0, space.dimension)]
    logger.info('unitary run with dimension %d in %d blocks', space.dimension, len(blocks))
    values = np.zeros((len(tau_grid), space.dimension), dtype=np.complex128)
    nfev = 0
    for block in blocks:
        h_block = H.matrix[block, block].tocsr()
        y0 = np.array(psi0.amplitudes[block])
        if len(tau_grid) == 1 or h_block.nnz == 0:
            values[:, block] = y0
            continue
        sol = solve_ivp(
            lambda t, y, h=h_block: -1j * h.dot(y),
            (0.0, tau_grid[-1]), y0, method='RK45', t_eval=tau_grid,
            rtol=rtol, atol=atol
        )
        if not sol.success:
            raise NumericalError(
                'unitary integration failed: ' + str(sol.message),
                diagnostics={
                    'nfev': int(sol.nfev),
                    'block': [block.start, block.stop],
                    'tau': float(sol.t[-1]) if len(sol.t) else 0.0
                }
            )
        values[:, block] = sol.y.T
        nfev += int(sol.nfev)
    drift = np.abs(np.linalg.norm(values, axis=1) - psi0.norm)
    metadata = {
        'solver': 'unitary',
        'rtol': rtol,
        'atol': atol,
        'nfev': nfev,
        'blocked': blocked,
        'blockCount': len(blocks),
        'normDrift': float(np.max(drift))
    }
    if metadata['normDrift'] > MAX_NORM_DRIFT:
        index = int(np.argmax(drift))
        raise NumericalError(
            'norm drift %g exceeds %g: tighten the solver tolerances' % (metadata['normDrift'], MAX_NORM_DRIFT),
            diagnostics=dict(metadata, tau=float(tau_grid[index]))
        )
    states = [
        PureState(space, values[i], normalize=True, metadata={'tau': float(tau_grid[i])})
        for i in range(len(tau_grid))
    ]
    logger.info('unitary run finished (norm drift %g)', metadata['normDrift'])
    return EvolutionResult(tau_grid, states, metadata=metadata)


# ------------------------------------------------------------------------------
#
# Trajectory workers
#
# ------------------------------------------------------------------------------

# Context of trajectory runs in worker processes
WORKER_CONTEXT = None


def init_worker(context):
    """Initialize a worker process of the trajectory pool."""
    global WORKER_CONTEXT
    WORKER_CONTEXT = context


def run_worker_chunk(indices):
    """Run a chunk of trajectories in a worker process."""
    return run_trajectory_chunk(WORKER_CONTEXT, indices)


def run_trajectory_chunk(context, indices):
    """Run trajectories with the given indices and collect per-trajectory
    photon number series and chunk sums of the linear observables.

    Parameters
    ----------
    context : dict
    indices : list(int)

    Returns
    -------
    dict
    """
    space = context['space']
    tau_grid = context['tau_grid']
    pictures = context['pictures']
    reduce_at = context['reduce_at']
    T = len(tau_grid)
    m = space.mode_count
    occ = space.occupations
    occ_f = occ.astype(float)
    signal = FWM_MODES[2]
    d_signal = space.max_occ[signal] + 1
    result = {
        'n': np.zeros((len(indices), T, m)),
        'n2': np.zeros((len(indices), T, m)),
        'a': {name: np.zeros((T, m), dtype=np.complex128) for name in pictures},
        'a2': {name: np.zeros((T, m), dtype=np.complex128) for name in pictures},
        'dist': np.zeros((T, m, max(space.max_occ) + 1)),
        'reduced': {
            name: {index: [np.zeros((d + 1, d + 1), dtype=np.complex128) for d in space.max_occ] for index in reduce_at}
            for name in pictures
        },
        'signal': np.zeros((T, d_signal, d_signal), dtype=np.complex128),
        'jumps': [],
        'states': [] if context['store_states'] else None,
        'steps': 0
    }
    for row, k in enumerate(indices):
        trajectory, jumps, steps = run_trajectory(context, k)
        result['jumps'].append(jumps)
        result['steps'] += steps
        if context['store_states']:
            result['states'].append(trajectory)
        for i in range(T):
            psi = trajectory[i]
            prob = np.abs(psi) ** 2
            result['n'][row, i] = prob.dot(occ_f)
            result['n2'][row, i] = prob.dot(occ_f ** 2)
            for mode in range(m):
                result['dist'][i, mode, :space.max_occ[mode] + 1] += np.bincount(
                    occ[:, mode], weights=prob, minlength=space.max_occ[mode] + 1
                )
            result['signal'][i] += reduced_matrix(space, psi, (signal,))
            for name, g in pictures.items():
                phi = psi
                if g != 0:
                    phi = psi * np.exp(-0.5j * g * context['nn1'] * tau_grid[i])
                for mode in range(m):
                    result['a'][name][i, mode] += np.vdot(phi, context['ladder'][mode].dot(phi))
                    result['a2'][name][i, mode] += np.vdot(phi, context['ladder2'][mode].dot(phi))
                if i in result['reduced'][name]:
                    for mode in range(m):
                        result['reduced'][name][i][mode] += reduced_matrix(space, phi, (mode,))
    return result


def run_trajectory(context, k):
    """Integrate a single trajectory.

    Parameters
    ----------
    context : dict
    k : int
        Trajectory index

    Returns
    -------
    (numpy.ndarray, list((float, int)), int)
        (T x dim) array of normalized states at the grid points, list of
        jumps, and number of integrator steps
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([context['master_seed'], k])))
    h_eff = context['h_eff']
    collapse = context['collapse']
    tau_grid = context['tau_grid']
    T = len(tau_grid)
    fun = lambda t, y: -1j * h_eff.dot(y)
    states = np.zeros((T, len(context['psi0'])), dtype=np.complex128)
    states[0] = context['psi0']
    jumps = []
    steps = 0
    next_index = 1
    t = 0.0
    psi = np.array(context['psi0'])
    threshold = rng.random()
    while next_index < T:
        solver = RK45(fun, t, psi, tau_grid[-1], rtol=context['rtol'], atol=context['atol'])
        jumped = False
        while solver.status == 'running' and next_index < T:
            message = solver.step()
            steps += 1
            if solver.status == 'failed':
                raise NumericalError(
                    'trajectory integration failed: ' + str(message),
                    diagnostics={'trajectory': k, 'tau': float(solver.t)}
                )
            dense = solver.dense_output()
            t_end = solver.t
            if np.linalg.norm(solver.y) ** 2 <= threshold:
                t_jump = locate_jump(dense, solver.t_old, t_end, threshold, k)
                while next_index < T and tau_grid[next_index] <= t_jump:
                    states[next_index] = normalized(dense(tau_grid[next_index]))
                    next_index += 1
                psi_jump = dense(t_jump)
                weights = np.array([np.linalg.norm(c.dot(psi_jump)) ** 2 for c in collapse])
                if weights.sum() <= 0:
                    raise NumericalError(
                        'no jump channel available',
                        diagnostics={'trajectory': k, 'tau': float(t_jump)}
                    )
                channel = int(np.searchsorted(np.cumsum(weights) / weights.sum(), rng.random(), side='right'))
                channel = min(channel, len(collapse) - 1)
                psi = normalized(collapse[channel].dot(psi_jump))
                jumps.append((float(t_jump), channel))
                threshold = rng.random()
                t = t_jump
                jumped = True
                break
            while next_index < T and tau_grid[next_index] <= t_end:
                states[next_index] = normalized(dense(tau_grid[next_index]))
                next_index += 1
        if not jumped and next_index < T:
            # Integrator reached the end of the grid
            while next_index < T:
                states[next_index] = normalized(solver.y)
                next_index += 1
    return states, jumps, steps


def locate_jump(dense, t_lo, t_hi, threshold, k):
    """Bisection for the time at which the squared norm of the dense output
    reaches the threshold. Raises NumericalError if the crossing is not
    bracketed by the interval.

    Returns
    -------
    float
    """
    norm_lo = np.linalg.norm(dense(t_lo)) ** 2
    if norm_lo < threshold:
        raise NumericalError(
            'jump time not bracketed (non-monotone norm)',
            diagnostics={'trajectory': k, 'tau': float(t_lo), 'norm2': float(norm_lo), 'threshold': float(threshold)}
        )
    tolerance = JUMP_NORM_TOLERANCE * threshold
    for _ in range(JUMP_MAX_BISECTIONS):
        t_mid = 0.5 * (t_lo + t_hi)
        norm_mid = np.linalg.norm(dense(t_mid)) ** 2
        if abs(norm_mid - threshold) <= tolerance or t_hi - t_lo <= 1e-15 * max(1.0, t_hi):
            return t_mid
        if norm_mid > threshold:
            t_lo = t_mid
        else:
            t_hi = t_mid
    raise NumericalError(
        'jump time bisection did not converge',
        diagnostics={'trajectory': k, 'interval': [float(t_lo), float(t_hi)]}
    )


def normalized(vector):
    """Vector divided by its norm."""
    return vector / np.linalg.norm(vector)


# ------------------------------------------------------------------------------
#
# Number phase transformation
#
# ------------------------------------------------------------------------------

def apply_number_phase(state, g, tau):
    """Apply the diagonal unitary exp(-i (g/2) N (N - 1) tau) that maps the
    decoupled picture to the physical picture. Use -g for the inverse.

    Parameters
    ----------
    state : PureState or DensityMatrix
        Pure state or full-space density matrix
    g : float
    tau : float

    Returns
    -------
    PureState or DensityMatrix
    """
    if isinstance(state, PureState):
        vector = number_phase_vector(state.space, g, tau)
        return PureState(state.space, state.amplitudes * vector, normalize=True, metadata=dict(state.metadata))
    if state.is_reduced:
        raise ValueError('number phase is not defined for reduced matrices')
    vector = number_phase_vector(state.space, g, tau)
    matrix = vector[:, None] * state.matrix * vector.conj()[None, :]
    return DensityMatrix(matrix, space=state.space, label=state.label, metadata=dict(state.metadata))


def number_phase_vector(space, g, tau):
    """Diagonal of exp(-i (g/2) N (N - 1) tau).

    Returns
    -------
    numpy.ndarray
    """
    total = space.total_numbers.astype(float)
    return np.exp(-0.5j * g * tau * total * (total - 1))


# ------------------------------------------------------------------------------
#
# Diagnostics
#
# ------------------------------------------------------------------------------

def conserved_expectations(state):
    """Expectation values of the conserved combinations N, n1 - n2 and
    2 n1 + n3.

    Parameters
    ----------
    state : PureState or DensityMatrix
        Pure state or full-space density matrix

    Returns
    -------
    dict
    """
    prob = state.populations()
    occ = state.space.occupations.astype(float)
    n = prob.dot(occ)
    return {
        'N': float(n.sum()),
        'n1-n2': float(n[0] - n[1]),
        '2n1+n3': float(2 * n[0] + n[2])
    }


def ehrenfest_residual(H, psi, couplings, mode, dtau):
    """Difference between the centered finite difference of <a_mode> under H
    and the right hand side of its Heisenberg equation:

        d a1 / dt = -i (g a2^dagger a3^2 + Omega1 a1)
        d a2 / dt = -i (g a1^dagger a3^2 + Omega2 a2)
        d a3 / dt = -i (2 g a3^dagger a1 a2 + Omega3 a3)

    The Hamiltonian must be the full interaction Hamiltonian for the given
    couplings (not rescaled).

    Parameters
    ----------
    H : SparseOperator
    psi : PureState
    couplings : CouplingSet
    mode : int
    dtau : float

    Returns
    -------
    float
    """
    if dtau <= 0:
        raise ValueError('time step must be positive')
    space = psi.space
    if not mode in (0, 1, 2):
        raise ValueError('invalid mode index: ' + str(mode))
    a = [annihilation_op(space, m) for m in range(3)]
    vector = psi.amplitudes
    forward = expm_multiply(-1j * dtau * H.matrix, vector)
    backward = expm_multiply(1j * dtau * H.matrix, vector)
    derivative = (a[mode].expect(forward) - a[mode].expect(backward)) / (2 * dtau)
    omega = build_omega_op(space, couplings, mode)
    if mode == 2:
        source = 2 * couplings.g * creation_op(space, 2).apply(a[0].apply(a[1].apply(vector)))
    else:
        other = 1 - mode
        source = couplings.g * creation_op(space, other).apply(a[2].apply(a[2].apply(vector)))
    rhs = -1j * np.vdot(vector, source + omega.apply(a[mode].apply(vector)))
    return float(abs(derivative - rhs))


def fano_series(numbers, squares):
    """Fano factor series from per-trajectory <n> and <n^2> arrays
    (trajectories x time). NaN where the mean vanishes.
    """
    n = numbers.mean(axis=0)
    n2 = squares.mean(axis=0)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(n > 1e-12, (n2 - n ** 2) / n, np.nan)


def find_extremal_time(series, kind=EXTREMUM_FIRST_MAX):
    """Locate the first interior maximum or minimum of a uniformly sampled
    series and refine it by the vertex of the parabola through the bracketing
    samples.

    Parameters
    ----------
    series : list((float, float))
        Sequence of (tau, value) pairs
    kind : string, optional
        EXTREMUM_FIRST_MAX or EXTREMUM_FIRST_MIN

    Returns
    -------
    float
    """
    data = np.asarray(series, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError('expected a list of (tau, value) pairs')
    if data.shape[0] < 3:
        raise ValueError('at least three samples required')
    if not kind in [EXTREMUM_FIRST_MAX, EXTREMUM_FIRST_MIN]:
        raise ValueError('invalid extremum kind: ' + str(kind))
    taus = data[:, 0]
    values = data[:, 1] if kind == EXTREMUM_FIRST_MAX else -data[:, 1]
    steps = np.diff(taus)
    h = steps.mean()
    if np.any(steps <= 0) or np.max(np.abs(steps - h)) > 1e-6 * h:
        raise ValueError('samples must lie on a uniform grid')
    for i in range(1, len(values) - 1):
        if values[i] > values[i - 1] and values[i] >= values[i + 1]:
            v_prev, v, v_next = values[i - 1], values[i], values[i + 1]
            denominator = v_prev - 2 * v + v_next
            if denominator == 0:
                return float(taus[i])
            return float(taus[i] + h * (v_prev - v_next) / (2 * denominator))
    raise NumericalError('no interior extremum found', diagnostics={'kind': kind})
