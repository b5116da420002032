"""Fock Core - Truncated multimode Fock basis and the sparse operators acting
on it: ladder and number operators, the four-wave mixing (FWM), self-phase
modulation (SPM) and cross-phase modulation (XPM) Hamiltonians, the nonlinear
frequency shift operators and the collapse operators for cavity loss.

The basis contains every occupation tuple (n_1, ..., n_m) with
0 <= n_j <= max_occ[j] and, if a total cap is given, sum(n_j) <= total_cap.
Basis states are ordered by total photon number and lexicographically within
each total number sector. Sectors are therefore contiguous index ranges.

All operators use hard truncation: matrix elements whose target occupation
tuple is not part of the basis are dropped. Throughout the module hbar = 1.
"""

import logging

import numpy as np
from scipy import sparse

from fwmcat.errors import ConfigurationError


logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
#
# Constants
#
# ------------------------------------------------------------------------------

# Maximum number of basis states for a Fock space
DEFAULT_DIMENSION_LIMIT = 5000000

# Maximum absolute element of A - A^dagger for operators flagged as Hermitian
HERMITIAN_TOLERANCE = 1e-12

# Relative tolerance for the decoupling conditions on the coupling constants
DECOUPLING_TOLERANCE = 1e-12

# Results of validate_decoupling()
DECOUPLING_EXACT = 'exact'
DECOUPLING_NONE = 'none'
DECOUPLING_RELATIONS = 'relations_only'

# Pump modes and signal mode of the FWM interaction (0-based mode indices)
FWM_MODES = (0, 1, 2)

# Header line of the sparse operator text format
OPERATOR_FILE_HEADER = '%%sparse complex'


# ------------------------------------------------------------------------------
#
# Fock space
#
# ------------------------------------------------------------------------------

class FockSpace(object):
    """Indexed basis of multimode occupation tuples with per-mode caps and an
    optional cap on the total photon number.

    Instances are immutable. Two spaces are equal if they have the same
    per-mode caps and total cap.

    Attributes
    ----------
    max_occ : tuple(int)
        Maximum occupation (inclusive) for each mode
    total_cap : int
        Maximum total photon number (inclusive) or None
    occupations : numpy.ndarray
        Read-only (dimension x mode_count) integer array. Row i is the
        occupation tuple of basis state i.
    sectors : list((int, int, int))
        List of (N, start, stop) triples. Basis states with total photon
        number N occupy the index range [start, stop).
    """
    def __init__(self, max_occ, total_cap=None, dimension_limit=DEFAULT_DIMENSION_LIMIT):
        """Enumerate the admissible occupation tuples. Raises a
        ConfigurationError if the resulting dimension exceeds the given limit.

        Parameters
        ----------
        max_occ : list(int)
            Maximum occupation (inclusive) for each mode
        total_cap : int, optional
            Maximum total photon number (inclusive)
        dimension_limit : int, optional
            Maximum number of basis states
        """
        max_occ = tuple(int(n) for n in max_occ)
        if len(max_occ) == 0:
            raise ConfigurationError('Fock space requires at least one mode')
        for n in max_occ:
            if n < 0:
                raise ConfigurationError('invalid maximum occupation: ' + str(n))
        if not total_cap is None:
            total_cap = int(total_cap)
            if total_cap < 0:
                raise ConfigurationError('invalid total cap: ' + str(total_cap))
        # Sector sizes are the coefficients of the product of the per-mode
        # generating polynomials 1 + z + ... + z^max_occ[j]. Counting first
        # avoids enumerating spaces that exceed the limit.
        counts = np.ones(1)
        for n in max_occ:
            counts = np.convolve(counts, np.ones(n + 1))
        if not total_cap is None:
            counts = counts[:total_cap + 1]
        if counts.sum() > dimension_limit:
            raise ConfigurationError(
                'Fock space dimension %d exceeds limit %d' % (counts.sum(), dimension_limit)
            )
        self.max_occ = max_occ
        self.total_cap = total_cap
        tuples = []
        self.sectors = []
        for total in range(len(counts)):
            start = len(tuples)
            tuples.extend(sector_tuples(total, max_occ))
            self.sectors.append((total, start, len(tuples)))
        occupations = np.array(tuples, dtype=np.int64).reshape(len(tuples), len(max_occ))
        occupations.setflags(write=False)
        self.occupations = occupations
        total_numbers = occupations.sum(axis=1)
        total_numbers.setflags(write=False)
        self.total_numbers = total_numbers
        # Mixed-radix keys with radix max_occ[j] + 1 give a sorted lookup
        # table from occupation tuples to basis indices.
        radix = np.array(max_occ, dtype=np.int64) + 1
        self._strides = np.concatenate([np.cumprod(radix[::-1])[::-1][1:], [1]]).astype(np.int64)
        keys = occupations.dot(self._strides)
        self._key_order = np.argsort(keys, kind='stable')
        self._sorted_keys = keys[self._key_order]
        logger.debug('created Fock space %s with dimension %d', str(max_occ), len(tuples))

    def __eq__(self, other):
        """Spaces are equal if they are defined by the same truncation."""
        if not isinstance(other, FockSpace):
            return False
        return self.max_occ == other.max_occ and self.total_cap == other.total_cap

    def __hash__(self):
        return hash((self.max_occ, self.total_cap))

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return 'FockSpace(max_occ=%s, total_cap=%s)' % (list(self.max_occ), self.total_cap)

    def check_mode(self, mode):
        """Raise ValueError if the given mode index is invalid.

        Parameters
        ----------
        mode : int
            Mode index (0-based)
        """
        if not isinstance(mode, (int, np.integer)) or mode < 0 or mode >= self.mode_count:
            raise ValueError('invalid mode index: ' + str(mode))

    @property
    def dimension(self):
        """Number of basis states.

        Returns
        -------
        int
        """
        return self.occupations.shape[0]

    @staticmethod
    def from_dict(document):
        """Create Fock space from a Json-like descriptor.

        Parameters
        ----------
        document : dict
            Descriptor with keys 'maxOcc' and 'totalCap'

        Returns
        -------
        FockSpace
        """
        return FockSpace(document['maxOcc'], total_cap=document.get('totalCap'))

    def index_of(self, occupation):
        """Get basis index of an occupation tuple. Raises ValueError if the
        tuple is not part of the truncated basis.

        Parameters
        ----------
        occupation : tuple(int)
            Occupation numbers, one per mode

        Returns
        -------
        int
        """
        occupation = np.asarray(occupation, dtype=np.int64).reshape(1, -1)
        if occupation.shape[1] != self.mode_count:
            raise ValueError('expected %d occupation numbers' % self.mode_count)
        index = self.indices_of(occupation)[0]
        if index < 0:
            raise ValueError('inadmissible occupation tuple: ' + str(tuple(occupation[0])))
        return int(index)

    def indices_of(self, occupations):
        """Vectorized lookup of basis indices for an array of occupation
        tuples. Tuples outside the truncated basis map to -1.

        Parameters
        ----------
        occupations : numpy.ndarray
            (k x mode_count) integer array

        Returns
        -------
        numpy.ndarray
            Integer array of length k
        """
        occupations = np.asarray(occupations, dtype=np.int64)
        in_range = np.all((occupations >= 0) & (occupations <= np.array(self.max_occ)), axis=1)
        if not self.total_cap is None:
            in_range &= occupations.sum(axis=1) <= self.total_cap
        keys = occupations.dot(self._strides)
        pos = np.searchsorted(self._sorted_keys, keys)
        pos = np.minimum(pos, self.dimension - 1)
        found = in_range & (self._sorted_keys[pos] == keys)
        return np.where(found, self._key_order[pos], -1)

    @property
    def max_total(self):
        """Largest total photon number of any basis state.

        Returns
        -------
        int
        """
        return self.sectors[-1][0]

    @property
    def mode_count(self):
        """Number of modes.

        Returns
        -------
        int
        """
        return len(self.max_occ)

    def mode_numbers(self, mode):
        """Occupation number of the given mode for every basis state.

        Parameters
        ----------
        mode : int
            Mode index (0-based)

        Returns
        -------
        numpy.ndarray
        """
        self.check_mode(mode)
        return self.occupations[:, mode]

    def sector_slice(self, total):
        """Index range of the basis states with the given total photon number.
        The slice is empty if there are no such states.

        Parameters
        ----------
        total : int
            Total photon number N

        Returns
        -------
        slice
        """
        if total < 0 or total >= len(self.sectors):
            return slice(0, 0)
        _, start, stop = self.sectors[total]
        return slice(start, stop)

    def to_dict(self):
        """Json-like descriptor of the space.

        Returns
        -------
        dict
        """
        return {'maxOcc': list(self.max_occ), 'totalCap': self.total_cap}

    def tuple_of(self, index):
        """Occupation tuple of the basis state with the given index.

        Parameters
        ----------
        index : int

        Returns
        -------
        tuple(int)
        """
        if index < 0 or index >= self.dimension:
            raise ValueError('invalid basis index: ' + str(index))
        return tuple(int(n) for n in self.occupations[index])


# ------------------------------------------------------------------------------
#
# Sparse operators
#
# ------------------------------------------------------------------------------

class SparseOperator(object):
    """Complex sparse matrix over the basis of a Fock space.

    Attributes
    ----------
    space : FockSpace
        Space the operator acts on
    matrix : scipy.sparse.csr_matrix
        Complex matrix in compressed row format
    hermitian_hint : Boolean
        Operator is known to be Hermitian. Verified at construction.
    label : string
        Descriptive label, e.g., 'H_int1'
    """
    def __init__(self, space, matrix, hermitian_hint=False, label=None):
        """Initialize the operator. Raises ValueError if the matrix shape does
        not match the space dimension or if the operator is flagged as
        Hermitian but is not.

        Parameters
        ----------
        space : FockSpace
            Space the operator acts on
        matrix : scipy.sparse matrix or numpy.ndarray
            Operator matrix
        hermitian_hint : Boolean, optional
            Operator is expected to be Hermitian
        label : string, optional
            Descriptive label
        """
        matrix = sparse.csr_matrix(matrix, dtype=np.complex128)
        if matrix.shape != (space.dimension, space.dimension):
            raise ValueError('operator shape %s does not match dimension %d' % (str(matrix.shape), space.dimension))
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        matrix.sort_indices()
        self.space = space
        self.matrix = matrix
        self.hermitian_hint = hermitian_hint
        self.label = label
        if hermitian_hint:
            asymmetry = self.max_asymmetry()
            if asymmetry > HERMITIAN_TOLERANCE:
                raise ValueError('operator is not Hermitian: asymmetry ' + str(asymmetry))

    def __add__(self, other):
        self._check_space(other)
        return SparseOperator(
            self.space,
            self.matrix + other.matrix,
            hermitian_hint=self.hermitian_hint and other.hermitian_hint
        )

    def __matmul__(self, other):
        """Operator product self * other."""
        self._check_space(other)
        return SparseOperator(self.space, self.matrix.dot(other.matrix))

    def __mul__(self, scalar):
        """Multiplication with a scalar. Real scalars preserve hermiticity."""
        return SparseOperator(
            self.space,
            self.matrix * scalar,
            hermitian_hint=self.hermitian_hint and np.isreal(scalar),
            label=self.label
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        return self + (-other)

    def _check_space(self, other):
        if not isinstance(other, SparseOperator) or other.space != self.space:
            raise ValueError('operators act on different spaces')

    def apply(self, vector):
        """Apply the operator to an amplitude vector.

        Parameters
        ----------
        vector : numpy.ndarray

        Returns
        -------
        numpy.ndarray
        """
        return self.matrix.dot(vector)

    def commutator(self, other):
        """Commutator [self, other].

        Parameters
        ----------
        other : SparseOperator

        Returns
        -------
        SparseOperator
        """
        self._check_space(other)
        return SparseOperator(self.space, self.matrix.dot(other.matrix) - other.matrix.dot(self.matrix))

    def dagger(self):
        """Hermitian conjugate.

        Returns
        -------
        SparseOperator
        """
        label = None if self.label is None else self.label + '^dagger'
        return SparseOperator(
            self.space,
            self.matrix.conj().transpose(),
            hermitian_hint=self.hermitian_hint,
            label=label
        )

    def diagonal(self):
        """Diagonal of the operator matrix.

        Returns
        -------
        numpy.ndarray
        """
        return self.matrix.diagonal()

    @property
    def dim(self):
        """Dimension of the space the operator acts on."""
        return self.space.dimension

    @property
    def entries(self):
        """List of non-zero (row, column, value) triples in row-major order.

        Returns
        -------
        list((int, int, complex))
        """
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[i]), int(coo.col[i]), complex(coo.data[i])) for i in order]

    def expect(self, vector):
        """Expectation value <v|A|v> for an amplitude vector (not necessarily
        normalized).

        Parameters
        ----------
        vector : numpy.ndarray

        Returns
        -------
        complex
        """
        return np.vdot(vector, self.matrix.dot(vector))

    def is_hermitian(self, tolerance=HERMITIAN_TOLERANCE):
        """Test if the operator is Hermitian within the given tolerance.

        Returns
        -------
        Boolean
        """
        return self.max_asymmetry() <= tolerance

    def max_asymmetry(self):
        """Largest absolute element of A - A^dagger.

        Returns
        -------
        float
        """
        diff = self.matrix - self.matrix.conj().transpose()
        if diff.nnz == 0:
            return 0.0
        return float(np.abs(diff.data).max())

    @property
    def nnz(self):
        """Number of stored non-zero elements."""
        return self.matrix.nnz

    def to_dense(self):
        """Dense copy of the operator matrix.

        Returns
        -------
        numpy.ndarray
        """
        return self.matrix.toarray()


# ------------------------------------------------------------------------------
#
# Coupling constants
#
# ------------------------------------------------------------------------------

class CouplingSet(object):
    """Nonlinear coupling constants and damping rates of the three-mode model.

    Attributes
    ----------
    g : float
        FWM coupling (phase matched, time independent)
    g1, g2, g3 : float
        SPM couplings
    g12, g13, g23 : float
        XPM couplings
    gamma1, gamma2, gamma3 : float
        Dimensionless damping rates of the three modes
    """
    def __init__(
        self, g=1.0, g1=0.0, g2=0.0, g3=0.0, g12=0.0, g13=0.0, g23=0.0,
        gamma1=0.0, gamma2=0.0, gamma3=0.0):
        """Initialize coupling constants. Raises ValueError if g or any of the
        damping rates is negative.
        """
        self.g = float(g)
        self.g1 = float(g1)
        self.g2 = float(g2)
        self.g3 = float(g3)
        self.g12 = float(g12)
        self.g13 = float(g13)
        self.g23 = float(g23)
        self.gamma1 = float(gamma1)
        self.gamma2 = float(gamma2)
        self.gamma3 = float(gamma3)
        if self.g < 0:
            raise ValueError('FWM coupling must not be negative: ' + str(g))
        for gamma in self.gammas:
            if gamma < 0:
                raise ValueError('damping rate must not be negative: ' + str(gamma))

    @staticmethod
    def decoupled(g=1.0, gamma=0.0):
        """Coupling set satisfying the exact decoupling conditions
        g1 = g2 = g3 = g/2 and g12 = g13 = g23 = g, with the same damping rate
        for all modes.

        Parameters
        ----------
        g : float, optional
            FWM coupling
        gamma : float, optional
            Damping rate for all three modes

        Returns
        -------
        CouplingSet
        """
        return CouplingSet(
            g=g, g1=g / 2.0, g2=g / 2.0, g3=g / 2.0, g12=g, g13=g, g23=g,
            gamma1=gamma, gamma2=gamma, gamma3=gamma
        )

    @staticmethod
    def from_dict(document):
        """Create coupling set from a Json-like dictionary. Missing keys
        default to 0 (g defaults to 1).

        Parameters
        ----------
        document : dict

        Returns
        -------
        CouplingSet
        """
        return CouplingSet(**{key: document[key] for key in document})

    @property
    def gammas(self):
        """Damping rates (gamma1, gamma2, gamma3)."""
        return (self.gamma1, self.gamma2, self.gamma3)

    @property
    def is_dissipative(self):
        """True if any mode is damped."""
        return any(gamma > 0 for gamma in self.gammas)

    def shift_matrix(self):
        """Symmetric matrix M of the nonlinear frequency shifts with 2 g_j on
        the diagonal and g_ij off the diagonal.

        Returns
        -------
        numpy.ndarray
        """
        return np.array([
            [2 * self.g1, self.g12, self.g13],
            [self.g12, 2 * self.g2, self.g23],
            [self.g13, self.g23, 2 * self.g3]
        ])

    @property
    def spm(self):
        """SPM couplings (g1, g2, g3)."""
        return (self.g1, self.g2, self.g3)

    def to_dict(self):
        """Json-like dictionary of all coupling constants.

        Returns
        -------
        dict
        """
        return {
            'g': self.g,
            'g1': self.g1,
            'g2': self.g2,
            'g3': self.g3,
            'g12': self.g12,
            'g13': self.g13,
            'g23': self.g23,
            'gamma1': self.gamma1,
            'gamma2': self.gamma2,
            'gamma3': self.gamma3
        }

    @property
    def xpm(self):
        """XPM couplings (g12, g13, g23)."""
        return (self.g12, self.g13, self.g23)


def build_space(max_occ, total_cap=None, dimension_limit=DEFAULT_DIMENSION_LIMIT):
    """Truncated Fock space for the given per-mode caps and optional total
    cap. Raises ConfigurationError if the dimension exceeds the limit.

    Returns
    -------
    FockSpace
    """
    space = FockSpace(max_occ, total_cap=total_cap, dimension_limit=dimension_limit)
    logger.debug('Fock space %s with dimension %d', space, space.dimension)
    return space


# ------------------------------------------------------------------------------
#
# Operator builders
#
# ------------------------------------------------------------------------------

def annihilation_op(space, mode):
    """Annihilation operator of the given mode.

    Parameters
    ----------
    space : FockSpace
    mode : int
        Mode index (0-based)

    Returns
    -------
    SparseOperator
    """
    occ = space.occupations
    source = np.nonzero(space.mode_numbers(mode) > 0)[0]
    target_occ = occ[source].copy()
    target_occ[:, mode] -= 1
    target = space.indices_of(target_occ)
    keep = target >= 0
    values = np.sqrt(occ[source[keep], mode].astype(float))
    matrix = sparse.csr_matrix(
        (values, (target[keep], source[keep])),
        shape=(space.dimension, space.dimension),
        dtype=np.complex128
    )
    return SparseOperator(space, matrix, label='a' + str(mode + 1))


def build_collapse_ops(space, couplings, include_zero=False):
    """Collapse operators C_j = sqrt(gamma_j) a_j for cavity loss.

    Parameters
    ----------
    space : FockSpace
    couplings : CouplingSet
    include_zero : Boolean, optional
        Include operators of undamped modes (zero operators)

    Returns
    -------
    list(SparseOperator)
    """
    result = []
    for mode, gamma in enumerate(couplings.gammas[:space.mode_count]):
        if gamma > 0 or include_zero:
            op = annihilation_op(space, mode) * np.sqrt(gamma)
            op.label = 'C' + str(mode + 1)
            result.append(op)
    return result


def build_H_fwm(space, g, modes=FWM_MODES):
    """FWM Hamiltonian g (a1 a2 a3^dagger^2 + a1^dagger a2^dagger a3^2). Couples
    (n1, n2, n3) with (n1 - 1, n2 - 1, n3 + 2) with amplitude
    g sqrt(n1 n2 (n3 + 1) (n3 + 2)).

    Parameters
    ----------
    space : FockSpace
        Space with at least three modes
    g : float
        FWM coupling
    modes : (int, int, int), optional
        Indices of the two pump modes and the signal mode

    Returns
    -------
    SparseOperator
    """
    if g < 0:
        raise ValueError('FWM coupling must not be negative: ' + str(g))
    p1, p2, s = modes
    for mode in modes:
        space.check_mode(mode)
    occ = space.occupations
    source = np.nonzero((occ[:, p1] > 0) & (occ[:, p2] > 0))[0]
    target_occ = occ[source].copy()
    target_occ[:, p1] -= 1
    target_occ[:, p2] -= 1
    target_occ[:, s] += 2
    target = space.indices_of(target_occ)
    keep = target >= 0
    source = source[keep]
    target = target[keep]
    n1 = occ[source, p1].astype(float)
    n2 = occ[source, p2].astype(float)
    n3 = occ[source, s].astype(float)
    amplitude = g * np.sqrt(n1 * n2 * (n3 + 1) * (n3 + 2))
    matrix = sparse.csr_matrix(
        (
            np.concatenate([amplitude, amplitude]),
            (np.concatenate([target, source]), np.concatenate([source, target]))
        ),
        shape=(space.dimension, space.dimension),
        dtype=np.complex128
    )
    return SparseOperator(space, matrix, hermitian_hint=True, label='H_fwm')


def build_H_int1(space, couplings):
    """Full interaction Hamiltonian H_fwm + H_spm + H_xpm.

    Parameters
    ----------
    space : FockSpace
    couplings : CouplingSet

    Returns
    -------
    SparseOperator
    """
    op = build_H_fwm(space, couplings.g) + build_H_spm(space, *couplings.spm) + build_H_xpm(space, *couplings.xpm)
    op.label = 'H_int1'
    return op


def build_H_int2(space, g):
    """Decoupled interaction Hamiltonian g (b1 b2 b3^dagger^2 + h.c.). In the
    b-representation the matrix is the FWM matrix.

    Parameters
    ----------
    space : FockSpace
    g : float

    Returns
    -------
    SparseOperator
    """
    op = build_H_fwm(space, g)
    op.label = 'H_int2'
    return op


def build_H_spm(space, g1, g2, g3):
    """SPM Hamiltonian sum_j g_j a_j^dagger^2 a_j^2 with diagonal entries
    sum_j g_j n_j (n_j - 1).

    Returns
    -------
    SparseOperator
    """
    values = np.zeros(space.dimension)
    for mode, gj in enumerate((g1, g2, g3)):
        n = space.mode_numbers(mode).astype(float)
        values += gj * n * (n - 1)
    return diagonal_op(space, values, label='H_spm')


def build_H_xpm(space, g12, g13, g23):
    """XPM Hamiltonian sum_{i<j} g_ij n_i n_j.

    Returns
    -------
    SparseOperator
    """
    values = np.zeros(space.dimension)
    for (i, j), gij in zip(((0, 1), (0, 2), (1, 2)), (g12, g13, g23)):
        values += gij * space.mode_numbers(i).astype(float) * space.mode_numbers(j).astype(float)
    return diagonal_op(space, values, label='H_xpm')


def build_omega_op(space, couplings, mode):
    """Nonlinear frequency shift operator Omega_i = sum_j M_ij n_j.

    Parameters
    ----------
    space : FockSpace
    couplings : CouplingSet
    mode : int
        Row i of the shift matrix (0-based)

    Returns
    -------
    SparseOperator
    """
    space.check_mode(mode)
    if mode > 2:
        raise ValueError('invalid mode index: ' + str(mode))
    row = couplings.shift_matrix()[mode]
    values = np.zeros(space.dimension)
    for j in range(3):
        values += row[j] * space.mode_numbers(j)
    return diagonal_op(space, values, label='Omega' + str(mode + 1))


def creation_op(space, mode):
    """Creation operator of the given mode (hard truncation at the caps).

    Returns
    -------
    SparseOperator
    """
    return annihilation_op(space, mode).dagger()


def diagonal_op(space, values, label=None):
    """Hermitian diagonal operator with the given real diagonal.

    Parameters
    ----------
    space : FockSpace
    values : numpy.ndarray
    label : string, optional

    Returns
    -------
    SparseOperator
    """
    matrix = sparse.diags(np.asarray(values, dtype=np.complex128), format='csr')
    return SparseOperator(space, matrix, hermitian_hint=True, label=label)


def number_op(space, mode):
    """Number operator n_j.

    Returns
    -------
    SparseOperator
    """
    return diagonal_op(space, space.mode_numbers(mode), label='n' + str(mode + 1))


def sector_tuples(total, max_occ):
    """Generate all occupation tuples with the given total photon number
    within the per-mode caps in lexicographic order.

    Parameters
    ----------
    total : int
    max_occ : tuple(int)

    Returns
    -------
    generator(tuple(int))
    """
    if len(max_occ) == 1:
        if total <= max_occ[0]:
            yield (total,)
        return
    rest_cap = sum(max_occ[1:])
    for n in range(max(0, total - rest_cap), min(total, max_occ[0]) + 1):
        for tail in sector_tuples(total - n, max_occ[1:]):
            yield (n,) + tail


def total_number_op(space):
    """Total photon number operator N = sum_j n_j.

    Returns
    -------
    SparseOperator
    """
    return diagonal_op(space, space.total_numbers, label='N')


def validate_decoupling(couplings):
    """Check whether the couplings allow the exact removal of SPM and XPM by
    the number phase transformation.

    Returns DECOUPLING_EXACT if g1 = g2 = g3 = g/2 and g12 = g13 = g23 = g,
    DECOUPLING_RELATIONS if only the linear relations 2 g1 + g12 = 2 g13,
    2 g2 + g12 = 2 g23 and g13 + g23 = 4 g3 hold, and DECOUPLING_NONE
    otherwise.

    Parameters
    ----------
    couplings : CouplingSet

    Returns
    -------
    string
    """
    c = couplings
    scale = max([abs(v) for v in (c.g,) + c.spm + c.xpm] + [np.finfo(float).tiny])
    def close(a, b):
        return abs(a - b) <= DECOUPLING_TOLERANCE * scale
    relations = (
        close(2 * c.g1 + c.g12, 2 * c.g13)
        and close(2 * c.g2 + c.g12, 2 * c.g23)
        and close(c.g13 + c.g23, 4 * c.g3)
    )
    if not relations:
        return DECOUPLING_NONE
    exact = all(close(gj, c.g / 2.0) for gj in c.spm) and all(close(gij, c.g) for gij in c.xpm)
    return DECOUPLING_EXACT if exact else DECOUPLING_RELATIONS


# ------------------------------------------------------------------------------
#
# Operator files
#
# ------------------------------------------------------------------------------

def read_operator(file, space):
    """Read an operator in the sparse complex triplet format.

    Parameters
    ----------
    file : file-like object
    space : FockSpace
        Space the operator acts on

    Returns
    -------
    SparseOperator
    """
    lines = [line.strip() for line in file]
    if not lines or lines[0] != OPERATOR_FILE_HEADER:
        raise ValueError('missing header line: ' + OPERATOR_FILE_HEADER)
    rows, cols, values = [], [], []
    for line in lines[1:]:
        if line == '' or line.startswith('%'):
            continue
        tokens = line.split()
        if len(tokens) != 4:
            raise ValueError('invalid operator entry: ' + line)
        rows.append(int(tokens[0]))
        cols.append(int(tokens[1]))
        values.append(complex(float(tokens[2]), float(tokens[3])))
    if rows and max(max(rows), max(cols)) >= space.dimension:
        raise ValueError('operator entry outside of dimension %d' % space.dimension)
    matrix = sparse.csr_matrix(
        (np.array(values, dtype=np.complex128), (np.array(rows, dtype=int), np.array(cols, dtype=int))),
        shape=(space.dimension, space.dimension)
    )
    return SparseOperator(space, matrix)


def write_operator(op, file):
    """Write operator as header line followed by one 'row col re im' line per
    non-zero entry (0-based indices).

    Parameters
    ----------
    op : SparseOperator
    file : file-like object
    """
    file.write(OPERATOR_FILE_HEADER + '\n')
    file.write('%% dim %d\n' % op.dim)
    for row, col, value in op.entries:
        file.write('%d %d %.17g %.17g\n' % (row, col, value.real, value.imag))
