"""Observables - Measurement side diagnostics of single modes: mean photon
numbers, quadrature variances, Fano factors, photon number distributions,
the Schmidt number of the (12|3) bipartition, Wigner functions on grids and
their quadrature marginals.

Quadratures follow the convention x = (a + a^dagger) / sqrt(2) and
p = -i (a - a^dagger) / sqrt(2) with vacuum variance 1/2.
"""

import logging

import numpy as np
from scipy.integrate import quad
from scipy.special import eval_genlaguerre, eval_hermite, gammaln

from fwmcat.errors import ConfigurationError, NumericalError
from fwmcat.states import DensityMatrix, PureState, partial_trace, purity


logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
#
# Constants
#
# ------------------------------------------------------------------------------

# Mean photon numbers below this value leave the Fano factor undefined
FANO_MIN_PHOTONS = 1e-12

# Probabilities above -PROBABILITY_CLAMP are clamped to zero. More negative
# values signal a solver failure.
PROBABILITY_CLAMP = 1e-12

# Photon statistics classes
STATISTICS_POISSONIAN = 'Poissonian'
STATISTICS_SUB = 'sub-Poissonian'
STATISTICS_SUPER = 'super-Poissonian'

# Default phase space window
DEFAULT_GRID = (-8.0, 8.0, 201, -8.0, 8.0, 201)

# Largest single mode dimension for Wigner functions
WIGNER_DIMENSION_LIMIT = 256

# Deviation of the grid normalization that triggers a warning
WIGNER_NORMALIZATION_WARNING = 1e-2


# ------------------------------------------------------------------------------
#
# Single mode helpers
#
# ------------------------------------------------------------------------------

def mode_matrix(state, mode):
    """Single mode reduced matrix of a state.

    Parameters
    ----------
    state : PureState or DensityMatrix
    mode : int
        Mode index (0-based)

    Returns
    -------
    numpy.ndarray
    """
    if isinstance(state, DensityMatrix) and state.is_reduced:
        if state.modes == (mode,):
            return state.matrix
        return partial_trace(state, [mode]).matrix
    if state.space.mode_count == 1:
        state.space.check_mode(mode)
        if isinstance(state, PureState):
            return np.outer(state.amplitudes, state.amplitudes.conj())
        return state.matrix
    return partial_trace(state, [mode]).matrix


def ladder_matrix(dim):
    """Dense single mode annihilation operator."""
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(np.complex128)


def moments(state, mode):
    """Moments <n>, <n^2>, <a> and <a^2> of a mode.

    Returns
    -------
    (float, float, complex, complex)
    """
    rho = mode_matrix(state, mode)
    n = np.arange(rho.shape[0])
    prob = np.diag(rho).real
    a = ladder_matrix(rho.shape[0])
    return (
        float(prob.dot(n)),
        float(prob.dot(n ** 2)),
        complex(np.trace(rho.dot(a))),
        complex(np.trace(rho.dot(a).dot(a)))
    )


# ------------------------------------------------------------------------------
#
# Photon statistics
#
# ------------------------------------------------------------------------------

def classify_statistics(ff, tolerance=1e-3):
    """Classify photon statistics by the Fano factor: sub-Poissonian for
    FF < 1, Poissonian for FF = 1 and super-Poissonian for FF > 1.

    Parameters
    ----------
    ff : float
    tolerance : float, optional

    Returns
    -------
    string
    """
    if ff < 1.0 - tolerance:
        return STATISTICS_SUB
    elif ff > 1.0 + tolerance:
        return STATISTICS_SUPER
    return STATISTICS_POISSONIAN


def fano(state, mode):
    """Fano factor (<n^2> - <n>^2) / <n>. Raises ValueError if the mean photon
    number vanishes.

    Returns
    -------
    float
    """
    n, n2, _, _ = moments(state, mode)
    return fano_from_moments(n, n2)


def fano_from_moments(n, n2):
    """Fano factor from the first two moments of the photon number."""
    if n <= FANO_MIN_PHOTONS:
        raise ValueError('Fano factor undefined for mean photon number ' + str(n))
    return (n2 - n * n) / n


def mean_photon(state, mode):
    """Mean photon number Tr[n_j rho_j].

    Returns
    -------
    float
    """
    if isinstance(state, PureState):
        state.space.check_mode(mode)
        return float(state.populations().dot(state.space.mode_numbers(mode)))
    return moments(state, mode)[0]


def odd_photon_weight(distribution):
    """Total probability of odd photon numbers.

    Parameters
    ----------
    distribution : numpy.ndarray

    Returns
    -------
    float
    """
    return float(np.sum(np.asarray(distribution)[1::2]))


def photon_distribution(state, mode):
    """Photon number distribution P_j(n) = Tr[rho_j |n><n|]. Entries above
    -1e-12 are clamped to zero and the distribution is renormalized.

    Returns
    -------
    numpy.ndarray
    """
    if isinstance(state, PureState):
        state.space.check_mode(mode)
        dist = np.bincount(
            state.space.mode_numbers(mode),
            weights=state.populations(),
            minlength=state.space.max_occ[mode] + 1
        )
    else:
        dist = np.diag(mode_matrix(state, mode)).real.copy()
    return clamp_distribution(dist)


def clamp_distribution(dist):
    """Clamp small negative probabilities and renormalize. Raises
    NumericalError for larger negative values.
    """
    dist = np.array(dist, dtype=float)
    if dist.min() < -PROBABILITY_CLAMP:
        raise NumericalError(
            'negative photon number probability',
            diagnostics={'minProbability': float(dist.min())}
        )
    dist = np.clip(dist, 0.0, None)
    return dist / dist.sum()


def quadrature_variances(state, mode):
    """Variances of the quadratures x and p of a mode.

    Returns
    -------
    (float, float)
    """
    n, _, a, a2 = moments(state, mode)
    return variances_from_moments(n, a, a2)


def variances_from_moments(n, a, a2):
    """Quadrature variances from <n>, <a> and <a^2>:

        Var(x) = Re<a^2> + <n> + 1/2 - 2 (Re<a>)^2
        Var(p) = -Re<a^2> + <n> + 1/2 - 2 (Im<a>)^2
    """
    var_x = a2.real + n + 0.5 - 2 * a.real ** 2
    var_p = -a2.real + n + 0.5 - 2 * a.imag ** 2
    return float(var_x), float(var_p)


def schmidt_number(psi, keep=(2,)):
    """Schmidt number K = 1 / Tr[rho_keep^2] of a global pure state.

    Parameters
    ----------
    psi : PureState
    keep : tuple(int), optional
        Modes of one side of the bipartition. Defaults to mode 3.

    Returns
    -------
    float
    """
    if not isinstance(psi, PureState):
        raise ValueError('Schmidt number requires a pure global state')
    return 1.0 / purity(partial_trace(psi, keep))


# ------------------------------------------------------------------------------
#
# Wigner functions
#
# ------------------------------------------------------------------------------

class WignerGrid(object):
    """Wigner function values on a rectangular phase space grid.

    Attributes
    ----------
    xvec : numpy.ndarray
    pvec : numpy.ndarray
    values : numpy.ndarray
        (x_count x p_count) array with values[i, j] = W(x_i, p_j)
    label : string
        Mode label, e.g., 'mode3'
    metadata : dict
        Source state information
    """
    def __init__(self, xvec, pvec, values, label=None, metadata=None):
        """Initialize the grid. Raises ValueError if the value shape does not
        match the axes.
        """
        self.xvec = np.asarray(xvec, dtype=float)
        self.pvec = np.asarray(pvec, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (len(self.xvec), len(self.pvec)):
            raise ValueError('grid values do not match axes')
        self.label = label
        self.metadata = metadata if not metadata is None else {}

    @property
    def dp(self):
        """Spacing of the p axis."""
        return step_of(self.pvec)

    @property
    def dx(self):
        """Spacing of the x axis."""
        return step_of(self.xvec)

    def normalization(self):
        """Riemann sum of the grid values.

        Returns
        -------
        float
        """
        return float(self.values.sum() * self.dx * self.dp)

    def to_text(self, header=None):
        """Delimited text with header '# x p w', one row per grid point in
        row-major order and 9 significant digits.

        Parameters
        ----------
        header : list(string), optional
            Additional header lines (without leading '#')

        Returns
        -------
        string
        """
        lines = ['# ' + line for line in (header or [])]
        lines.append('# x p w')
        for i, x in enumerate(self.xvec):
            for j, p in enumerate(self.pvec):
                lines.append('%.9g\t%.9g\t%.9g' % (x, p, self.values[i, j]))
        return '\n'.join(lines) + '\n'

    def write(self, file, header=None):
        """Write the grid in text format to a file-like object."""
        file.write(self.to_text(header=header))


def grid_axes(x_min, x_max, x_count, p_min, p_max, p_count):
    """Axes of a phase space grid. Raises ConfigurationError for invalid
    specifications.
    """
    if x_count < 2 or p_count < 2 or x_max <= x_min or p_max <= p_min:
        raise ConfigurationError('invalid grid specification')
    return np.linspace(x_min, x_max, int(x_count)), np.linspace(p_min, p_max, int(p_count))


def single_mode_matrix(rho):
    """Matrix of a single mode state given as DensityMatrix or array."""
    if isinstance(rho, DensityMatrix):
        if rho.is_reduced and len(rho.modes) != 1:
            raise ConfigurationError('Wigner function requires a single mode state')
        if not rho.is_reduced and not rho.space is None and rho.space.mode_count != 1:
            raise ConfigurationError('Wigner function requires a single mode state')
        return rho.matrix
    return np.asarray(rho, dtype=np.complex128)


def step_of(vector):
    """Uniform spacing of an axis."""
    return float(vector[1] - vector[0]) if len(vector) > 1 else 1.0


def wigner(
        rho, x_min=DEFAULT_GRID[0], x_max=DEFAULT_GRID[1], x_count=DEFAULT_GRID[2],
        p_min=DEFAULT_GRID[3], p_max=DEFAULT_GRID[4], p_count=DEFAULT_GRID[5],
        label=None):
    """Wigner function of a single mode state on a grid, from the Fock basis
    expansion W = sum_{m,n} rho_mn W_{|m><n|} with, for m >= n,

        W_{|m><n|}(x, p) = (-1)^n / pi sqrt(n! / m!) (sqrt(2) (x - i p))^(m-n)
                           exp(-r^2) L_n^(m-n)(2 r^2)

    and W_{|n><m|} the complex conjugate. Weights are evaluated in log space.

    Parameters
    ----------
    rho : DensityMatrix or numpy.ndarray
    x_min, x_max : float, optional
    x_count : int, optional
    p_min, p_max : float, optional
    p_count : int, optional
    label : string, optional

    Returns
    -------
    WignerGrid
    """
    matrix = single_mode_matrix(rho)
    dim = matrix.shape[0]
    if dim > WIGNER_DIMENSION_LIMIT:
        raise ConfigurationError('single mode dimension %d exceeds Wigner limit %d' % (dim, WIGNER_DIMENSION_LIMIT))
    xvec, pvec = grid_axes(x_min, x_max, x_count, p_min, p_max, p_count)
    X, P = np.meshgrid(xvec, pvec, indexing='ij')
    r2 = X ** 2 + P ** 2
    # log |sqrt(2) (x - i p)|, -inf at the origin
    with np.errstate(divide='ignore'):
        log_z = 0.5 * np.log(2 * r2)
    theta = -np.arctan2(P, X)
    total = np.zeros(X.shape, dtype=np.complex128)
    for k in range(dim):
        partial = np.zeros(X.shape, dtype=np.complex128)
        for n in range(dim - k):
            coefficient = matrix[n + k, n]
            if coefficient == 0:
                continue
            log_weight = 0.5 * (gammaln(n + 1) - gammaln(n + k + 1)) - r2
            if k > 0:
                log_weight = log_weight + k * log_z
            term = (-1) ** n * np.exp(log_weight) * eval_genlaguerre(n, k, 2 * r2)
            partial += coefficient * term
        if k == 0:
            total += partial
        else:
            total += 2 * partial * np.exp(1j * k * theta)
    values = total.real / np.pi
    grid = WignerGrid(xvec, pvec, values, label=label)
    norm = grid.normalization()
    grid.metadata['normalization'] = norm
    if abs(norm - 1.0) > WIGNER_NORMALIZATION_WARNING:
        logger.warning('Wigner grid normalization %g deviates from one: grid too coarse or small', norm)
    return grid


def wigner_point(rho, x, p):
    """Wigner function at a single phase space point by direct quadrature of

        W(x, p) = 1 / (2 pi) int <x - y/2| rho |x + y/2> exp(i p y) dy

    using Hermite function wave functions. Intended as an oracle for small
    dimensions.

    Returns
    -------
    float
    """
    matrix = single_mode_matrix(rho)
    dim = matrix.shape[0]
    n = np.arange(dim)
    log_norm = -0.25 * np.log(np.pi) - 0.5 * (n * np.log(2.0) + gammaln(n + 1))

    def wave_functions(q):
        return np.exp(log_norm - 0.5 * q * q) * eval_hermite(n, q)

    def integrand(y):
        left = wave_functions(x - 0.5 * y)
        right = wave_functions(x + 0.5 * y)
        return (left.dot(matrix).dot(right) * np.exp(1j * p * y)).real

    limit = 2 * abs(x) + 24.0
    value, _ = quad(integrand, -limit, limit, limit=400, epsabs=1e-11, epsrel=1e-10)
    return value / (2 * np.pi)


# ------------------------------------------------------------------------------
#
# Grid diagnostics
#
# ------------------------------------------------------------------------------

def marginal_moments(values, density, step):
    """Mean and variance of a sampled marginal distribution.

    Parameters
    ----------
    values : numpy.ndarray
        Sample points
    density : numpy.ndarray
        Marginal density at the sample points
    step : float
        Sample spacing

    Returns
    -------
    (float, float)
    """
    values = np.asarray(values, dtype=float)
    density = np.asarray(density, dtype=float)
    norm = density.sum() * step
    mean = (values * density).sum() * step / norm
    variance = ((values - mean) ** 2 * density).sum() * step / norm
    return float(mean), float(variance)


def marginal_p(grid):
    """Marginal P(p) = int W(x, p) dx.

    Returns
    -------
    (numpy.ndarray, numpy.ndarray)
    """
    return grid.pvec, grid.values.sum(axis=0) * grid.dx


def marginal_x(grid):
    """Marginal P(x) = int W(x, p) dp.

    Returns
    -------
    (numpy.ndarray, numpy.ndarray)
    """
    return grid.xvec, grid.values.sum(axis=1) * grid.dp


def negativity_volume(grid):
    """Integral of |W| over the grid minus one."""
    return float(np.abs(grid.values).sum() * grid.dx * grid.dp - 1.0)


def wigner_min(grid):
    """Smallest value of the grid."""
    return float(grid.values.min())


# ------------------------------------------------------------------------------
#
# Statistics records
#
# ------------------------------------------------------------------------------

class StatisticsRecord(object):
    """Per-mode diagnostics of a state at a given time.

    Attributes
    ----------
    tau : float
    mean_photons : list(float)
    var_x : list(float)
    var_p : list(float)
    fano_factors : list(float)
        Fano factor per mode, None where undefined
    distributions : list(numpy.ndarray)
    schmidt : float
        Schmidt number of the (12|3) bipartition, None for mixed states
    purity3 : float
        Purity of the mode 3 reduced state
    """
    def __init__(
        self, tau, mean_photons, var_x, var_p, fano_factors, distributions,
        schmidt=None, purity3=None):
        """Initialize the record."""
        self.tau = tau
        self.mean_photons = mean_photons
        self.var_x = var_x
        self.var_p = var_p
        self.fano_factors = fano_factors
        self.distributions = distributions
        self.schmidt = schmidt
        self.purity3 = purity3

    @staticmethod
    def from_reduced(tau, reduced, schmidt=None):
        """Create record from single mode reduced states (one per mode).

        Parameters
        ----------
        tau : float
        reduced : list(DensityMatrix)
        schmidt : float, optional

        Returns
        -------
        StatisticsRecord
        """
        values = {'n': [], 'x': [], 'p': [], 'ff': [], 'dist': []}
        for rho in reduced:
            mode = rho.modes[0]
            n, n2, a, a2 = moments(rho, mode)
            var_x, var_p = variances_from_moments(n, a, a2)
            values['n'].append(n)
            values['x'].append(var_x)
            values['p'].append(var_p)
            values['ff'].append(fano_from_moments(n, n2) if n > FANO_MIN_PHOTONS else None)
            values['dist'].append(photon_distribution(rho, mode))
        purity3 = purity(reduced[2]) if len(reduced) > 2 else None
        return StatisticsRecord(
            tau, values['n'], values['x'], values['p'], values['ff'],
            values['dist'], schmidt=schmidt, purity3=purity3
        )

    @staticmethod
    def from_state(state, tau=None):
        """Create record from a pure state or a full-space density matrix.

        Returns
        -------
        StatisticsRecord
        """
        if tau is None:
            tau = state.metadata.get('tau', 0.0)
        reduced = [partial_trace(state, [mode]) for mode in range(state.space.mode_count)]
        schmidt = None
        if isinstance(state, PureState) and state.space.mode_count == 3:
            schmidt = 1.0 / purity(reduced[2])
        return StatisticsRecord.from_reduced(tau, reduced, schmidt=schmidt)

    @property
    def odd_weights(self):
        """Odd photon number weight per mode."""
        return [odd_photon_weight(dist) for dist in self.distributions]

    def to_dict(self):
        """Json-like dictionary of the record (without full distributions).

        Returns
        -------
        dict
        """
        modes = []
        for j in range(len(self.mean_photons)):
            ff = self.fano_factors[j]
            modes.append({
                'mode': j + 1,
                'n': self.mean_photons[j],
                'varX': self.var_x[j],
                'varP': self.var_p[j],
                'fano': ff if not ff is None else 'undefined',
                'statistics': classify_statistics(ff) if not ff is None else 'undefined',
                'oddWeight': odd_photon_weight(self.distributions[j])
            })
        return {
            'tau': self.tau,
            'modes': modes,
            'schmidtNumber': self.schmidt,
            'purity3': self.purity3
        }
