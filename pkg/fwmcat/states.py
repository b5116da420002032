"""States - Pure states and density matrices over truncated Fock spaces.

Contains the construction of coherent product states, conversion of pure
states into density matrices, partial traces, purity, Uhlmann fidelity, trace
distance and the Json state file format that is used to hand states between
command line invocations.

Reduced density matrices are expressed in the product basis of the kept modes.
The first kept mode is the most significant digit of the basis index, i.e.,
for a single kept mode the basis index equals the photon number.
"""

import functools
import json
import logging

import numpy as np
from scipy.special import gammaln

from fwmcat.errors import ConfigurationError, NumericalError
from fwmcat.fock import FockSpace


logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
#
# Constants
#
# ------------------------------------------------------------------------------

# Maximum deviation of the norm of a pure state from one
NORM_TOLERANCE = 1e-8

# Maximum element of rho - rho^dagger and deviation of the trace from one
HERMITIAN_TOLERANCE = 1e-10
TRACE_TOLERANCE = 1e-8

# Smallest eigenvalue accepted for positive semi-definite matrices
PSD_TOLERANCE = 1e-8

# Eigenvalues of matrices in square roots are clamped at zero once they pass
# this check
EIGENVALUE_CLAMP = 1e-10

# Default maximum probability mass lost by truncating coherent states
DEFAULT_MAX_LOSS = 1e-4

# Largest space for which a full density matrix is created
DENSITY_DIMENSION_LIMIT = 4096

# Identifier of state kinds in state files
KIND_DENSITY = 'density'
KIND_PURE = 'pure'


# ------------------------------------------------------------------------------
#
# State classes
#
# ------------------------------------------------------------------------------

class PureState(object):
    """Normalized complex amplitude vector over the basis of a Fock space.

    Attributes
    ----------
    space : FockSpace
        Space the state lives in
    amplitudes : numpy.ndarray
        Read-only complex vector of length space.dimension
    metadata : dict
        Additional information, e.g., 'lostMass' for truncated coherent
        states or 'tau' for evolved states
    """
    def __init__(self, space, amplitudes, normalize=False, metadata=None):
        """Initialize the state. Raises ValueError if the vector length does
        not match the space dimension or if the vector is not normalized
        (unless normalize is True).

        Parameters
        ----------
        space : FockSpace
        amplitudes : numpy.ndarray
        normalize : Boolean, optional
            Divide amplitudes by their norm
        metadata : dict, optional
        """
        amplitudes = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.shape[0] != space.dimension:
            raise ValueError('expected %d amplitudes, got %d' % (space.dimension, amplitudes.shape[0]))
        norm = np.linalg.norm(amplitudes)
        if normalize:
            if norm == 0:
                raise ValueError('cannot normalize zero vector')
            amplitudes /= norm
        elif abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValueError('state not normalized: norm = ' + str(norm))
        amplitudes.setflags(write=False)
        self.space = space
        self.amplitudes = amplitudes
        self.metadata = metadata if not metadata is None else {}

    @property
    def dimension(self):
        """Dimension of the underlying space."""
        return self.space.dimension

    def expect(self, op):
        """Expectation value of a sparse operator.

        Parameters
        ----------
        op : fwmcat.fock.SparseOperator

        Returns
        -------
        complex
        """
        return op.expect(self.amplitudes)

    @property
    def norm(self):
        """Euclidean norm of the amplitude vector."""
        return float(np.linalg.norm(self.amplitudes))

    def populations(self):
        """Probabilities of the basis states.

        Returns
        -------
        numpy.ndarray
        """
        return np.abs(self.amplitudes) ** 2


class DensityMatrix(object):
    """Hermitian, unit trace matrix. The matrix either lives on the basis of a
    full Fock space or on the product basis of a subset of modes.

    Attributes
    ----------
    matrix : numpy.ndarray
        Dense complex square matrix
    space : FockSpace
        Space of the full system the state belongs to (may be None for
        matrices that are not derived from a Fock space)
    modes : tuple(int)
        Modes described by the matrix (0-based). None for full-space matrices.
    dims : tuple(int)
        Product basis dimension for each of the modes. None for full-space
        matrices.
    label : string
        Subsystem label, e.g., 'rho3'
    metadata : dict
        Additional information, e.g., 'tau'
    """
    def __init__(self, matrix, space=None, modes=None, dims=None, label=None, metadata=None):
        """Initialize the density matrix. Raises ValueError if the matrix is
        not square, not Hermitian or not of unit trace, or if its dimension
        does not match the space or the product of dims.

        Parameters
        ----------
        matrix : numpy.ndarray
        space : FockSpace, optional
        modes : list(int), optional
        dims : list(int), optional
        label : string, optional
        metadata : dict, optional
        """
        matrix = np.array(matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError('density matrix must be square')
        if not modes is None:
            modes = tuple(int(m) for m in modes)
            if dims is None:
                if space is None:
                    raise ValueError('missing mode dimensions')
                dims = tuple(space.max_occ[m] + 1 for m in modes)
            dims = tuple(int(d) for d in dims)
            if len(dims) != len(modes):
                raise ValueError('expected one dimension per mode')
            if int(np.prod(dims)) != matrix.shape[0]:
                raise ValueError('matrix dimension does not match mode dimensions')
        elif not space is None and space.dimension != matrix.shape[0]:
            raise ValueError('matrix dimension does not match space dimension')
        asymmetry = np.abs(matrix - matrix.conj().T).max() if matrix.size > 0 else 0.0
        if asymmetry > HERMITIAN_TOLERANCE:
            raise ValueError('density matrix not Hermitian: asymmetry ' + str(asymmetry))
        trace = np.trace(matrix).real
        if abs(trace - 1.0) > TRACE_TOLERANCE:
            raise ValueError('density matrix trace deviates from one: ' + str(trace))
        matrix.setflags(write=False)
        self.matrix = matrix
        self.space = space
        self.modes = modes
        self.dims = dims
        self.label = label
        self.metadata = metadata if not metadata is None else {}

    @property
    def dimension(self):
        """Number of rows of the matrix."""
        return self.matrix.shape[0]

    @property
    def is_reduced(self):
        """True if the matrix is expressed in a product basis of modes."""
        return not self.modes is None

    def min_eigenvalue(self):
        """Smallest eigenvalue of the matrix.

        Returns
        -------
        float
        """
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def populations(self):
        """Real diagonal of the matrix.

        Returns
        -------
        numpy.ndarray
        """
        return np.diag(self.matrix).real.copy()

    def validate(self):
        """Raise NumericalError if the matrix is not numerically positive
        semi-definite.
        """
        eig_min = self.min_eigenvalue()
        if eig_min < -PSD_TOLERANCE:
            raise NumericalError(
                'density matrix not positive semi-definite',
                diagnostics={'minEigenvalue': eig_min}
            )


# ------------------------------------------------------------------------------
#
# State construction
#
# ------------------------------------------------------------------------------

def coherent_amplitudes(alpha, max_n):
    """Fock amplitudes exp(-|a|^2/2) a^n / sqrt(n!) of a coherent state for
    n = 0, ..., max_n.

    Parameters
    ----------
    alpha : complex
    max_n : int

    Returns
    -------
    numpy.ndarray
    """
    n = np.arange(max_n + 1)
    if alpha == 0:
        values = np.zeros(max_n + 1, dtype=np.complex128)
        values[0] = 1.0
        return values
    log_abs = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_abs) * np.exp(1j * n * np.angle(alpha))


def coherent_product_state(space, alphas, vacuum_modes=None, max_loss=DEFAULT_MAX_LOSS):
    """Product of coherent states, truncated to the space and renormalized.

    Values in alphas are either given for every mode (modes in vacuum_modes
    are set to vacuum regardless of their value) or only for the modes that
    are not listed in vacuum_modes (in ascending mode order).

    Raises ConfigurationError if the probability mass lost by truncation
    exceeds max_loss.

    Parameters
    ----------
    space : FockSpace
    alphas : list(complex)
    vacuum_modes : list(int), optional
    max_loss : float, optional

    Returns
    -------
    PureState
    """
    vacuum_modes = set(vacuum_modes) if not vacuum_modes is None else set()
    for mode in vacuum_modes:
        space.check_mode(mode)
    alphas = [complex(a) for a in alphas]
    if len(alphas) == space.mode_count:
        per_mode = [0j if m in vacuum_modes else alphas[m] for m in range(space.mode_count)]
    elif len(alphas) + len(vacuum_modes) == space.mode_count:
        values = iter(alphas)
        per_mode = [0j if m in vacuum_modes else next(values) for m in range(space.mode_count)]
    else:
        raise ValueError('expected one amplitude per non-vacuum mode')
    amplitudes = np.ones(space.dimension, dtype=np.complex128)
    for mode, alpha in enumerate(per_mode):
        table = coherent_amplitudes(alpha, space.max_occ[mode])
        amplitudes *= table[space.occupations[:, mode]]
    weight = float(np.sum(np.abs(amplitudes) ** 2))
    lost_mass = max(0.0, 1.0 - weight)
    if lost_mass > max_loss:
        raise ConfigurationError(
            'coherent state truncation loses probability mass %g (limit %g)' % (lost_mass, max_loss)
        )
    if lost_mass > 1e-6:
        logger.warning('coherent state truncation loses probability mass %g', lost_mass)
    return PureState(
        space,
        amplitudes,
        normalize=True,
        metadata={
            'lostMass': lost_mass,
            'alphas': [[a.real, a.imag] for a in per_mode]
        }
    )


def to_density(psi):
    """Projector |psi><psi| as a full-space density matrix.

    Parameters
    ----------
    psi : PureState

    Returns
    -------
    DensityMatrix
    """
    if psi.dimension > DENSITY_DIMENSION_LIMIT:
        raise ConfigurationError(
            'space dimension %d too large for a full density matrix' % psi.dimension
        )
    a = psi.amplitudes
    matrix = np.outer(a, a.conj())
    # Remove rounding asymmetry of the outer product
    matrix = 0.5 * (matrix + matrix.conj().T)
    matrix /= np.trace(matrix).real
    return DensityMatrix(matrix, space=psi.space, metadata=dict(psi.metadata))


# ------------------------------------------------------------------------------
#
# Partial trace
#
# ------------------------------------------------------------------------------

@functools.lru_cache(maxsize=32)
def bipartition(space, keep):
    """Product basis keys of the kept and the traced modes for every basis
    state of a Fock space.

    Parameters
    ----------
    space : FockSpace
    keep : tuple(int)
        Sorted tuple of kept modes

    Returns
    -------
    (numpy.ndarray, numpy.ndarray, tuple(int), tuple(int))
        Keep keys, rest keys, dimensions of the kept modes, and dimensions of
        the traced modes
    """
    rest = tuple(m for m in range(space.mode_count) if not m in keep)
    keep_dims = tuple(space.max_occ[m] + 1 for m in keep)
    rest_dims = tuple(space.max_occ[m] + 1 for m in rest)
    keep_keys = product_keys(space.occupations[:, list(keep)], keep_dims)
    rest_keys = product_keys(space.occupations[:, list(rest)], rest_dims)
    return keep_keys, rest_keys, keep_dims, rest_dims


def check_subset(keep, mode_count):
    """Normalize a subset of modes to a sorted tuple. Raises
    ConfigurationError if the subset is empty, not proper, contains duplicates
    or invalid mode indices.

    Parameters
    ----------
    keep : list(int)
    mode_count : int

    Returns
    -------
    tuple(int)
    """
    keep = list(keep)
    if len(keep) == 0:
        raise ConfigurationError('empty mode subset')
    if len(set(keep)) != len(keep):
        raise ConfigurationError('duplicate modes in subset: ' + str(keep))
    for m in keep:
        if not isinstance(m, (int, np.integer)) or m < 0 or m >= mode_count:
            raise ConfigurationError('invalid mode in subset: ' + str(m))
    if len(keep) >= mode_count:
        raise ConfigurationError('mode subset must be a proper subset')
    return tuple(sorted(int(m) for m in keep))


def partial_trace(state, keep):
    """Reduced density matrix of the kept modes. Accepts pure states, full
    space density matrices and reduced density matrices (in which case keep
    refers to the global mode indices of the matrix modes).

    Parameters
    ----------
    state : PureState or DensityMatrix
    keep : list(int)
        Modes to keep (0-based)

    Returns
    -------
    DensityMatrix
    """
    if isinstance(state, DensityMatrix) and state.is_reduced:
        return partial_trace_product(state, keep)
    space = state.space
    keep = check_subset(keep, space.mode_count)
    keep_keys, rest_keys, keep_dims, rest_dims = bipartition(space, keep)
    k_dim = int(np.prod(keep_dims))
    if isinstance(state, PureState):
        matrix = reduced_matrix(space, state.amplitudes, keep)
    else:
        matrix = np.zeros((k_dim, k_dim), dtype=np.complex128)
        order = np.argsort(rest_keys, kind='stable')
        bounds = np.flatnonzero(np.diff(rest_keys[order])) + 1
        for group in np.split(order, bounds):
            kk = keep_keys[group]
            matrix[np.ix_(kk, kk)] += state.matrix[np.ix_(group, group)]
    matrix = 0.5 * (matrix + matrix.conj().T)
    return DensityMatrix(
        matrix,
        space=space,
        modes=keep,
        dims=keep_dims,
        label='rho' + ''.join(str(m + 1) for m in keep),
        metadata=dict(state.metadata)
    )


def partial_trace_product(rho, keep):
    """Partial trace of a density matrix given in a product basis.

    Parameters
    ----------
    rho : DensityMatrix
        Reduced density matrix with modes and dims
    keep : list(int)
        Global indices of the modes to keep

    Returns
    -------
    DensityMatrix
    """
    keep = list(keep)
    for m in keep:
        if not m in rho.modes:
            raise ConfigurationError('mode %s not described by matrix %s' % (str(m), str(rho.label)))
    positions = check_subset([rho.modes.index(m) for m in keep], len(rho.modes))
    n = len(rho.dims)
    tensor = rho.matrix.reshape(rho.dims + rho.dims)
    kept = list(positions)
    row_axes = list(range(n))
    col_axes = list(range(n, 2 * n))
    # Contract each traced mode's row axis with its column axis
    subscripts_in = [chr(97 + i) for i in range(2 * n)]
    for i in range(n):
        if not i in kept:
            subscripts_in[col_axes[i]] = subscripts_in[row_axes[i]]
    subscripts_out = [subscripts_in[i] for i in kept] + [subscripts_in[n + i] for i in kept]
    reduced = np.einsum(''.join(subscripts_in) + '->' + ''.join(subscripts_out), tensor)
    dims = tuple(rho.dims[i] for i in kept)
    k_dim = int(np.prod(dims))
    matrix = reduced.reshape(k_dim, k_dim)
    modes = tuple(rho.modes[i] for i in kept)
    return DensityMatrix(
        0.5 * (matrix + matrix.conj().T),
        space=rho.space,
        modes=modes,
        dims=dims,
        label='rho' + ''.join(str(m + 1) for m in modes),
        metadata=dict(rho.metadata)
    )


def reduced_matrix(space, vector, keep):
    """Reduced matrix Psi Psi^dagger of an amplitude vector, where
    Psi[k, r] holds the amplitude of the basis state with keep key k and rest
    key r. The vector does not need to be normalized.

    Parameters
    ----------
    space : FockSpace
    vector : numpy.ndarray
    keep : tuple(int)
        Sorted tuple of kept modes

    Returns
    -------
    numpy.ndarray
    """
    keep_keys, rest_keys, keep_dims, rest_dims = bipartition(space, tuple(keep))
    psi = np.zeros((int(np.prod(keep_dims)), int(np.prod(rest_dims))), dtype=np.complex128)
    psi[keep_keys, rest_keys] = vector
    return psi.dot(psi.conj().T)


def product_keys(occupations, dims):
    """Mixed-radix index of occupation tuples in a product basis with the
    first mode as most significant digit.

    Parameters
    ----------
    occupations : numpy.ndarray
        (k x m) integer array
    dims : tuple(int)

    Returns
    -------
    numpy.ndarray
    """
    keys = np.zeros(occupations.shape[0], dtype=np.int64)
    for j, d in enumerate(dims):
        keys = keys * d + occupations[:, j]
    return keys


# ------------------------------------------------------------------------------
#
# State measures
#
# ------------------------------------------------------------------------------

def fidelity(rho, sigma):
    """Uhlmann fidelity F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Parameters
    ----------
    rho : DensityMatrix or numpy.ndarray
    sigma : DensityMatrix or numpy.ndarray

    Returns
    -------
    float
    """
    a = matrix_of(rho)
    b = matrix_of(sigma)
    if a.shape != b.shape:
        raise ValueError('dimension mismatch: %s and %s' % (str(a.shape), str(b.shape)))
    sqrt_a = hermitian_sqrt(a)
    inner = sqrt_a.dot(b).dot(sqrt_a)
    inner = 0.5 * (inner + inner.conj().T)
    eigenvalues = clamped_eigenvalues(inner)
    return float(np.sum(np.sqrt(eigenvalues)) ** 2)


def fidelity_pure(psi, sigma):
    """Fidelity <psi|sigma|psi> between a pure state and a density matrix.

    Parameters
    ----------
    psi : PureState or numpy.ndarray
    sigma : DensityMatrix or numpy.ndarray

    Returns
    -------
    float
    """
    vector = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=np.complex128)
    b = matrix_of(sigma)
    if b.shape[0] != vector.shape[0]:
        raise ValueError('dimension mismatch: %d and %d' % (vector.shape[0], b.shape[0]))
    return float(np.vdot(vector, b.dot(vector)).real)


def clamped_eigenvalues(matrix):
    """Eigenvalues of a Hermitian matrix clamped at zero. Raises
    NumericalError if an eigenvalue is below -EIGENVALUE_CLAMP.

    Returns
    -------
    numpy.ndarray
    """
    eigenvalues = np.linalg.eigvalsh(matrix)
    if eigenvalues[0] < -EIGENVALUE_CLAMP:
        raise NumericalError(
            'matrix not positive semi-definite',
            diagnostics={'minEigenvalue': float(eigenvalues[0])}
        )
    return np.clip(eigenvalues, 0.0, None)


def hermitian_sqrt(matrix):
    """Square root of a positive semi-definite Hermitian matrix via its
    eigendecomposition.

    Returns
    -------
    numpy.ndarray
    """
    eigenvalues, vectors = np.linalg.eigh(matrix)
    if eigenvalues[0] < -EIGENVALUE_CLAMP:
        raise NumericalError(
            'matrix not positive semi-definite',
            diagnostics={'minEigenvalue': float(eigenvalues[0])}
        )
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return (vectors * roots).dot(vectors.conj().T)


def matrix_of(state):
    """Dense matrix of a density matrix object or array."""
    if isinstance(state, DensityMatrix):
        return state.matrix
    if isinstance(state, PureState):
        return to_density(state).matrix
    return np.asarray(state, dtype=np.complex128)


def purity(rho):
    """Purity Tr[rho^2].

    Parameters
    ----------
    rho : DensityMatrix, PureState or numpy.ndarray

    Returns
    -------
    float
    """
    if isinstance(rho, PureState):
        return rho.norm ** 4
    matrix = matrix_of(rho)
    # Tr[rho^2] = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(matrix) ** 2))


def trace_distance(rho, sigma):
    """Trace distance 1/2 ||rho - sigma||_1.

    Returns
    -------
    float
    """
    a = matrix_of(rho)
    b = matrix_of(sigma)
    if a.shape != b.shape:
        raise ValueError('dimension mismatch: %s and %s' % (str(a.shape), str(b.shape)))
    diff = a - b
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


# ------------------------------------------------------------------------------
#
# State files
#
# ------------------------------------------------------------------------------

def read_state(file):
    """Read a pure state or density matrix from a Json state file.

    Parameters
    ----------
    file : file-like object

    Returns
    -------
    PureState or DensityMatrix
    """
    try:
        doc = json.load(file)
    except ValueError as ex:
        raise ConfigurationError('invalid state file: ' + str(ex))
    kind = doc.get('kind')
    metadata = {}
    if not doc.get('tau') is None:
        metadata['tau'] = doc['tau']
    space = FockSpace.from_dict(doc['space']) if doc.get('space') else None
    if kind == KIND_PURE:
        if space is None:
            raise ConfigurationError('pure state file without space descriptor')
        amplitudes = np.zeros(space.dimension, dtype=np.complex128)
        for index, re, im in doc['amplitudes']:
            amplitudes[int(index)] = complex(re, im)
        return PureState(space, amplitudes, normalize=True, metadata=metadata)
    elif kind == KIND_DENSITY:
        modes = doc.get('modes')
        if modes is None:
            if space is None:
                raise ConfigurationError('density file without space or modes')
            dim = space.dimension
        else:
            dim = int(np.prod(doc['dims']))
        matrix = np.zeros((dim, dim), dtype=np.complex128)
        for row, col, re, im in doc['entries']:
            matrix[int(row), int(col)] = complex(re, im)
        return DensityMatrix(
            matrix,
            space=space,
            modes=modes,
            dims=doc.get('dims'),
            label=doc.get('label'),
            metadata=metadata
        )
    raise ConfigurationError('unknown state kind: ' + str(kind))


def write_state(state, file, tau=None, properties=None):
    """Write a pure state or density matrix as Json document. Only non-zero
    elements are written.

    Parameters
    ----------
    state : PureState or DensityMatrix
    file : file-like object
    tau : float, optional
        Evolution time of the state
    properties : dict, optional
        Additional top-level fields, e.g., the configuration hash of the run
        that produced the state
    """
    if tau is None:
        tau = state.metadata.get('tau')
    doc = dict(properties) if not properties is None else {}
    doc['space'] = state.space.to_dict() if not state.space is None else None
    doc['tau'] = tau
    if isinstance(state, PureState):
        doc['kind'] = KIND_PURE
        doc['label'] = state.metadata.get('label')
        nz = np.flatnonzero(state.amplitudes)
        doc['amplitudes'] = [
            [int(i), float(state.amplitudes[i].real), float(state.amplitudes[i].imag)] for i in nz
        ]
    else:
        doc['kind'] = KIND_DENSITY
        doc['label'] = state.label
        if state.is_reduced:
            doc['modes'] = list(state.modes)
            doc['dims'] = list(state.dims)
        rows, cols = np.nonzero(state.matrix)
        doc['entries'] = [
            [int(r), int(c), float(state.matrix[r, c].real), float(state.matrix[r, c].imag)]
            for r, c in zip(rows, cols)
        ]
    json.dump(doc, file, sort_keys=True)
    file.write('\n')
