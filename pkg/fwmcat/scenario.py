"""Scenarios - Configuration, execution and reporting of simulation runs of the
three-mode FWM model.

A scenario configuration is a Json document with the top-level keys
hamiltonian, couplings, alpha1, alpha2, truncation, tau_max, tau_step, solver
and outputs. Running a scenario propagates the initial coherent state, locates
the extremal time tau* of the signal photon number, evaluates all diagnostics
at the artifact time (tau* unless fixed in the configuration) and writes the
requested output files together with a summary document.
"""

import hashlib
import json
import logging
import math
import os

import numpy as np

from fwmcat.attribute import (
    AttributeDefinition, ComplexType, DictType, EnumType, FloatType, IntType,
    ListType, StringType, load_json, set_value, validate_document
)
from fwmcat.dynamics import (
    DENSE_DIMENSION_LIMIT, EXTREMUM_FIRST_MAX, EXTREMUM_FIRST_MIN,
    PICTURE_RAW, PICTURE_TRANSFORMED, apply_number_phase,
    conserved_expectations, evolve_lindblad_dense, evolve_trajectories,
    evolve_unitary, find_extremal_time
)
from fwmcat.errors import ConfigurationError, NumericalError
from fwmcat.fock import (
    DECOUPLING_EXACT, CouplingSet, build_collapse_ops, build_space,
    build_H_int1, build_H_int2, validate_decoupling
)
from fwmcat.observables import (
    StatisticsRecord, marginal_moments, marginal_p,
    marginal_x, negativity_volume, wigner, wigner_min
)
from fwmcat.states import (
    PureState, coherent_product_state, fidelity, partial_trace, purity,
    read_state, write_state
)


logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
#
# Constants
#
# ------------------------------------------------------------------------------

# Output artifacts
ARTIFACT_DISTRIBUTIONS = 'distributions'
ARTIFACT_MARGINALS = 'marginals'
ARTIFACT_STATES = 'states'
ARTIFACT_TIMESERIES = 'timeseries'
ARTIFACT_WIGNER = 'wigner'
ARTIFACTS = [
    ARTIFACT_TIMESERIES,
    ARTIFACT_WIGNER,
    ARTIFACT_DISTRIBUTIONS,
    ARTIFACT_MARGINALS,
    ARTIFACT_STATES
]

# Interaction Hamiltonians
HAMILTONIAN_INT1 = 'int1'
HAMILTONIAN_INT2 = 'int2'

# Solver methods
METHOD_AUTO = 'auto'
METHOD_DENSE = 'dense'
METHOD_TRAJECTORIES = 'trajectories'
METHOD_UNITARY = 'unitary'

# Output file names
FILE_DISTRIBUTIONS = 'distributions.tsv'
FILE_SUMMARY = 'summary.json'
FILE_TIMESERIES = 'timeseries.tsv'

# Directory of bundled preset configurations
PRESET_DIRECTORY = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'presets')

# Grid points closer than this are treated as identical times
TAU_EPSILON = 1e-12

# Default amplitude of the pump modes: |alpha|^2 = 9, phase pi/4
DEFAULT_ALPHA = {'abs2': 9.0, 'phase': math.pi / 4}


# ------------------------------------------------------------------------------
#
# Configuration schema
#
# ------------------------------------------------------------------------------

COUPLING_DEFINITIONS = [
    AttributeDefinition('g', 'FWM coupling', 'Four-wave mixing coupling g', FloatType(min_value=0), default=1.0),
    AttributeDefinition('g1', 'SPM coupling 1', 'Self-phase modulation of mode 1', FloatType(), default=0.5),
    AttributeDefinition('g2', 'SPM coupling 2', 'Self-phase modulation of mode 2', FloatType(), default=0.5),
    AttributeDefinition('g3', 'SPM coupling 3', 'Self-phase modulation of mode 3', FloatType(), default=0.5),
    AttributeDefinition('g12', 'XPM coupling 12', 'Cross-phase modulation of modes 1 and 2', FloatType(), default=1.0),
    AttributeDefinition('g13', 'XPM coupling 13', 'Cross-phase modulation of modes 1 and 3', FloatType(), default=1.0),
    AttributeDefinition('g23', 'XPM coupling 23', 'Cross-phase modulation of modes 2 and 3', FloatType(), default=1.0),
    AttributeDefinition('gamma1', 'Damping 1', 'Dimensionless damping rate of mode 1', FloatType(min_value=0), default=0.0),
    AttributeDefinition('gamma2', 'Damping 2', 'Dimensionless damping rate of mode 2', FloatType(min_value=0), default=0.0),
    AttributeDefinition('gamma3', 'Damping 3', 'Dimensionless damping rate of mode 3', FloatType(min_value=0), default=0.0)
]

TRUNCATION_DEFINITIONS = [
    AttributeDefinition(
        'max_occ', 'Maximum occupations', 'Per-mode maximum occupation (inclusive)',
        ListType(IntType(min_value=0), length=3), default=[27, 27, 38]
    ),
    AttributeDefinition(
        'total_cap', 'Total cap', 'Maximum total photon number (inclusive)',
        IntType(min_value=0), default=42, nullable=True
    ),
    AttributeDefinition(
        'max_loss', 'Maximum loss', 'Probability mass the truncated initial state may lose',
        FloatType(min_value=0), default=1e-4
    )
]

SOLVER_DEFINITIONS = [
    AttributeDefinition(
        'method', 'Method', 'Solver method',
        EnumType([METHOD_AUTO, METHOD_DENSE, METHOD_TRAJECTORIES, METHOD_UNITARY]),
        default=METHOD_AUTO
    ),
    AttributeDefinition('n_traj', 'Trajectories', 'Number of trajectories', IntType(min_value=1), default=500),
    AttributeDefinition('master_seed', 'Seed', 'Master seed of the trajectory ensemble', IntType(min_value=0), default=20190802),
    AttributeDefinition('n_workers', 'Workers', 'Number of worker processes (null for all CPUs)', IntType(min_value=1), nullable=True),
    AttributeDefinition('rtol', 'Relative tolerance', 'Relative integrator tolerance', FloatType(min_value=0, exclusive=True), default=1e-8),
    AttributeDefinition('atol', 'Absolute tolerance', 'Absolute integrator tolerance', FloatType(min_value=0, exclusive=True), default=1e-10)
]

OUTPUT_DEFINITIONS = [
    AttributeDefinition('directory', 'Directory', 'Output directory', StringType(), nullable=True),
    AttributeDefinition(
        'artifacts', 'Artifacts', 'Output files to write',
        ListType(EnumType(ARTIFACTS)), default=list(ARTIFACTS)
    ),
    AttributeDefinition(
        'tau', 'Artifact time', 'Time of state artifacts (null for the extremal time)',
        FloatType(min_value=0), nullable=True
    ),
    AttributeDefinition(
        'pictures', 'Pictures', 'Pictures of state artifacts',
        ListType(EnumType([PICTURE_RAW, PICTURE_TRANSFORMED]), min_length=1),
        default=[PICTURE_RAW, PICTURE_TRANSFORMED]
    ),
    AttributeDefinition(
        'wigner_grid', 'Wigner grid', 'Phase space grid [xmin, xmax, nx, pmin, pmax, np]',
        ListType(FloatType(), length=6), default=[-8.0, 8.0, 201, -8.0, 8.0, 201]
    ),
    AttributeDefinition(
        'wigner_modes', 'Wigner modes', 'Modes (1-based) for Wigner grids and marginals',
        ListType(IntType(min_value=1)), default=[1, 3]
    )
]

CONFIG_DEFINITIONS = [
    AttributeDefinition(
        'hamiltonian', 'Hamiltonian', 'Full (int1) or decoupled (int2) interaction Hamiltonian',
        EnumType([HAMILTONIAN_INT1, HAMILTONIAN_INT2]), default=HAMILTONIAN_INT2
    ),
    AttributeDefinition('couplings', 'Couplings', 'Nonlinear couplings and damping rates', DictType(COUPLING_DEFINITIONS), default={}),
    AttributeDefinition('alpha1', 'Amplitude 1', 'Coherent amplitude of mode 1', ComplexType(), default=DEFAULT_ALPHA),
    AttributeDefinition('alpha2', 'Amplitude 2', 'Coherent amplitude of mode 2', ComplexType(), default=DEFAULT_ALPHA),
    AttributeDefinition('truncation', 'Truncation', 'Fock space truncation', DictType(TRUNCATION_DEFINITIONS), default={}),
    AttributeDefinition('tau_max', 'Final time', 'Final dimensionless time', FloatType(min_value=0, exclusive=True), default=0.25),
    AttributeDefinition('tau_step', 'Time step', 'Output step of the time grid', FloatType(min_value=0, exclusive=True), default=0.001),
    AttributeDefinition('solver', 'Solver', 'Solver settings', DictType(SOLVER_DEFINITIONS), default={}),
    AttributeDefinition('outputs', 'Outputs', 'Output settings', DictType(OUTPUT_DEFINITIONS), default={})
]


# ------------------------------------------------------------------------------
#
# Scenario configuration
#
# ------------------------------------------------------------------------------

class ScenarioConfig(object):
    """Validated scenario configuration.

    Attributes
    ----------
    document : dict
        Validated configuration with defaults filled in
    """
    def __init__(self, document):
        """Validate the document. Raises ConfigurationError for schema
        violations.

        Parameters
        ----------
        document : dict
        """
        doc = validate_document(document, CONFIG_DEFINITIONS)
        if doc['tau_max'] < doc['tau_step']:
            raise ConfigurationError('tau_max must not be smaller than tau_step')
        grid = doc['outputs']['wigner_grid']
        for count in (grid[2], grid[5]):
            if count != int(count) or count < 2:
                raise ConfigurationError('invalid wigner_grid point count: ' + str(count))
        if grid[1] <= grid[0] or grid[4] <= grid[3]:
            raise ConfigurationError('invalid wigner_grid bounds')
        for mode in doc['outputs']['wigner_modes']:
            if mode > 3:
                raise ConfigurationError('invalid mode: ' + str(mode))
        tau = doc['outputs']['tau']
        if not tau is None and tau > doc['tau_max'] + TAU_EPSILON:
            raise ConfigurationError('artifact time exceeds tau_max')
        try:
            CouplingSet.from_dict(doc['couplings'])
        except ValueError as ex:
            raise ConfigurationError(str(ex))
        self.document = doc

    @property
    def alphas(self):
        """Coherent amplitudes of modes 1 and 2 as complex numbers."""
        return [ComplexType.to_complex(self.document[key]) for key in ['alpha1', 'alpha2']]

    @property
    def couplings(self):
        """CouplingSet of the configuration."""
        return CouplingSet.from_dict(self.document['couplings'])

    @property
    def hamiltonian(self):
        return self.document['hamiltonian']

    @property
    def outputs(self):
        return self.document['outputs']

    @property
    def solver(self):
        return self.document['solver']

    def space(self):
        """Truncated Fock space of the configuration.

        Returns
        -------
        FockSpace
        """
        truncation = self.document['truncation']
        return build_space(truncation['max_occ'], truncation['total_cap'])

    def tau_grid(self):
        """Uniform output grid 0, tau_step, ..., tau_max (the last point is
        the largest multiple of tau_step not exceeding tau_max).

        Returns
        -------
        numpy.ndarray
        """
        step = self.document['tau_step']
        count = int(math.floor(self.document['tau_max'] / step + 1e-9))
        return np.arange(count + 1) * step

    def to_dict(self):
        """Copy of the validated configuration document."""
        return json.loads(json.dumps(self.document))


def config_hash(config):
    """Git blob SHA-1 of the canonical Json serialization of a configuration.
    The output directory is not part of the hash.

    Parameters
    ----------
    config : ScenarioConfig

    Returns
    -------
    string
    """
    data = json.dumps(canonical_document(config), sort_keys=True, separators=(',', ':')).encode('utf-8')
    sha = hashlib.sha1()
    sha.update(('blob %d\0' % len(data)).encode('utf-8'))
    sha.update(data)
    return sha.hexdigest()


def canonical_document(config):
    """Configuration document without the output directory."""
    doc = config.to_dict()
    del doc['outputs']['directory']
    return doc


def list_presets():
    """Names of the bundled preset configurations.

    Returns
    -------
    list(string)
    """
    if not os.path.isdir(PRESET_DIRECTORY):
        return []
    return sorted(
        name[:-len('.json')] for name in os.listdir(PRESET_DIRECTORY)
        if name.endswith('.json')
    )


def load_config(source, overrides=None):
    """Load a scenario configuration from a Json file or a preset name.

    Parameters
    ----------
    source : string
        Path to a Json file or name of a bundled preset, e.g., 'paper-s1'
    overrides : list(string), optional
        List of 'key=value' assignments with dotted keys, e.g.,
        'solver.n_traj=100'

    Returns
    -------
    ScenarioConfig
    """
    if os.path.isfile(source):
        filename = source
    else:
        name = source[:-len('.json')] if source.endswith('.json') else source
        filename = os.path.join(PRESET_DIRECTORY, name + '.json')
        if not os.path.isfile(filename):
            raise ConfigurationError('unknown configuration file or preset: ' + source)
    with open(filename, 'r') as f:
        document = load_json(f.read())
    for assignment in (overrides or []):
        if not '=' in assignment:
            raise ConfigurationError('expected key=value: ' + assignment)
        key, value = assignment.split('=', 1)
        set_value(document, key.strip(), value, CONFIG_DEFINITIONS)
    logger.debug('loaded configuration %s', filename)
    return ScenarioConfig(document)


# ------------------------------------------------------------------------------
#
# Problem set-up
#
# ------------------------------------------------------------------------------

class ScenarioProblem(object):
    """Operators and initial state of a configured scenario.

    Attributes
    ----------
    config : ScenarioConfig
    space : FockSpace
    hamiltonian : SparseOperator
        Interaction Hamiltonian rescaled by 1/g
    collapse_ops : list(SparseOperator)
    psi0 : PureState
    method : string
        Selected solver method
    pictures : dict
        Picture name to number phase coupling (in rescaled units)
    fields : dict
        Picture name to the field operators the picture describes ('a' for
        the physical fields, 'b' for the decoupled fields)
    """
    def __init__(self, config, space, hamiltonian, collapse_ops, psi0, method, pictures, fields):
        self.config = config
        self.space = space
        self.hamiltonian = hamiltonian
        self.collapse_ops = collapse_ops
        self.psi0 = psi0
        self.method = method
        self.pictures = pictures
        self.fields = fields


def build_problem(config):
    """Build space, Hamiltonian, collapse operators and initial state for a
    scenario and select the solver method.

    Parameters
    ----------
    config : ScenarioConfig

    Returns
    -------
    ScenarioProblem
    """
    space = config.space()
    couplings = config.couplings
    if config.hamiltonian == HAMILTONIAN_INT1:
        H = build_H_int1(space, couplings)
    else:
        H = build_H_int2(space, couplings.g)
    scale = 1.0 / couplings.g if couplings.g > 0 else 1.0
    H = H * scale
    H.label = 'H_' + config.hamiltonian
    collapse = build_collapse_ops(space, couplings)
    psi0 = coherent_product_state(
        space,
        config.alphas,
        vacuum_modes=[2],
        max_loss=config.document['truncation']['max_loss']
    )
    method = select_method(config.solver['method'], space, collapse)
    # Unit number phase coupling in rescaled time unless g vanishes
    phase = couplings.g * scale
    if config.hamiltonian == HAMILTONIAN_INT2:
        sign, raw_field, other_field = 1.0, 'b', 'a'
    else:
        sign, raw_field, other_field = -1.0, 'a', 'b'
    pictures = {}
    fields = {}
    for name in config.outputs['pictures']:
        if name == PICTURE_RAW:
            pictures[name] = 0.0
            fields[name] = raw_field
        else:
            pictures[name] = sign * phase
            fields[name] = other_field
    if config.hamiltonian == HAMILTONIAN_INT1 and PICTURE_TRANSFORMED in pictures:
        if validate_decoupling(couplings) != DECOUPLING_EXACT:
            logger.warning('couplings do not decouple exactly: transformed picture is not the decoupled picture')
    logger.info(
        'scenario %s on space %s (dimension %d) with %s solver',
        config.hamiltonian, str(space.max_occ), space.dimension, method
    )
    return ScenarioProblem(config, space, H, collapse, psi0, method, pictures, fields)


def select_method(method, space, collapse_ops):
    """Resolve the solver method. The automatic choice is unitary propagation
    without damping, dense Lindblad integration up to the dense limit and
    trajectories above it. Raises ConfigurationError for explicit choices
    that cannot be honored.

    Returns
    -------
    string
    """
    dissipative = len(collapse_ops) > 0
    if method == METHOD_AUTO:
        if not dissipative:
            return METHOD_UNITARY
        elif space.dimension <= DENSE_DIMENSION_LIMIT:
            return METHOD_DENSE
        return METHOD_TRAJECTORIES
    if method == METHOD_UNITARY and dissipative:
        raise ConfigurationError('unitary solver cannot propagate damped modes')
    if method == METHOD_DENSE and space.dimension > DENSE_DIMENSION_LIMIT:
        raise ConfigurationError(
            'dimension %d exceeds dense limit %d: use the trajectory solver' % (space.dimension, DENSE_DIMENSION_LIMIT)
        )
    if method == METHOD_TRAJECTORIES and not dissipative:
        raise ConfigurationError('trajectory solver requires damping: use the unitary solver')
    return method


# ------------------------------------------------------------------------------
#
# Time series
#
# ------------------------------------------------------------------------------

class TimeSeries(object):
    """Observable series of a scenario run (raw picture).

    Attributes
    ----------
    tau : numpy.ndarray
    n : numpy.ndarray
        (T x 3) mean photon numbers
    var_x : numpy.ndarray
        (T x 3) variances of x
    var_p : numpy.ndarray
        (T x 3) variances of p
    fano : numpy.ndarray
        (T x 3) Fano factors, NaN where undefined
    schmidt : numpy.ndarray
        Schmidt number series (pure runs only)
    purity3 : numpy.ndarray
        Purity of the mode 3 reduced state. Trajectory runs use the ensemble
        averaged reduced matrix.
    stderr : dict
        Standard error series of 'n1', 'n3', 'ff1' and 'ff3' (trajectory
        runs only)
    """
    def __init__(self, tau, n, var_x, var_p, fano, schmidt=None, purity3=None, stderr=None):
        self.tau = np.asarray(tau, dtype=float)
        self.n = n
        self.var_x = var_x
        self.var_p = var_p
        self.fano = fano
        self.schmidt = schmidt
        self.purity3 = purity3
        self.stderr = stderr

    @staticmethod
    def from_ensemble(ensemble):
        """Series of a trajectory ensemble."""
        m = ensemble.space.mode_count
        var_x = np.zeros((len(ensemble.tau_grid), m))
        var_p = np.zeros((len(ensemble.tau_grid), m))
        for mode in range(m):
            var_x[:, mode], var_p[:, mode] = ensemble.quadrature_variances(mode, PICTURE_RAW)
        return TimeSeries(
            ensemble.tau_grid,
            np.array([ensemble.mean_photon(mode) for mode in range(m)]).T,
            var_x,
            var_p,
            np.array([ensemble.fano(mode) for mode in range(m)]).T,
            purity3=ensemble.purity_series(),
            stderr={
                'n1': ensemble.mean_photon_stderr(0),
                'n3': ensemble.mean_photon_stderr(2),
                'ff1': ensemble.fano_stderr(0),
                'ff3': ensemble.fano_stderr(2)
            }
        )

    @staticmethod
    def from_records(records):
        """Series from a list of statistics records."""
        fano = np.array([
            [ff if not ff is None else np.nan for ff in record.fano_factors]
            for record in records
        ])
        schmidt = None
        if all(not record.schmidt is None for record in records):
            schmidt = np.array([record.schmidt for record in records])
        return TimeSeries(
            [record.tau for record in records],
            np.array([record.mean_photons for record in records]),
            np.array([record.var_x for record in records]),
            np.array([record.var_p for record in records]),
            fano,
            schmidt=schmidt,
            purity3=np.array([record.purity3 for record in records])
        )

    def columns(self):
        """Column names of the text representation."""
        names = ['tau', 'n1', 'n2', 'n3', 'varx1', 'varp1', 'varx3', 'varp3', 'ff1', 'ff3']
        if not self.schmidt is None:
            names.append('K')
        if not self.purity3 is None:
            names.append('purity3')
        if not self.stderr is None:
            names.extend(['n1_se', 'n3_se', 'ff1_se', 'ff3_se'])
        return names

    def extremal_time(self, mode, kind):
        """Extremal time of the photon number series of a mode."""
        return find_extremal_time(np.column_stack([self.tau, self.n[:, mode]]), kind)

    def to_text(self, header=None):
        """Tab separated text with '#'-prefixed header lines. Undefined values
        are written as 'undefined'.
        """
        lines = ['# ' + line for line in (header or [])]
        lines.append('# ' + ' '.join(self.columns()))
        for i, tau in enumerate(self.tau):
            row = [tau, self.n[i, 0], self.n[i, 1], self.n[i, 2]]
            row += [self.var_x[i, 0], self.var_p[i, 0], self.var_x[i, 2], self.var_p[i, 2]]
            row += [self.fano[i, 0], self.fano[i, 2]]
            if not self.schmidt is None:
                row.append(self.schmidt[i])
            if not self.purity3 is None:
                row.append(self.purity3[i])
            if not self.stderr is None:
                row += [self.stderr[key][i] for key in ['n1', 'n3', 'ff1', 'ff3']]
            lines.append('\t'.join(format_number(value) for value in row))
        return '\n'.join(lines) + '\n'


def evolve_scenario(problem, tau_grid=None):
    """Propagate the initial state of a scenario over the output grid and
    collect the raw picture time series.

    Parameters
    ----------
    problem : ScenarioProblem
    tau_grid : numpy.ndarray, optional
        Defaults to the configured grid

    Returns
    -------
    (TimeSeries, EvolutionResult or TrajectoryEnsemble)
    """
    config = problem.config
    if tau_grid is None:
        tau_grid = config.tau_grid()
    solver = config.solver
    if problem.method == METHOD_UNITARY:
        result = evolve_unitary(problem.hamiltonian, problem.psi0, tau_grid, rtol=solver['rtol'], atol=solver['atol'])
    elif problem.method == METHOD_DENSE:
        result = evolve_lindblad_dense(
            problem.hamiltonian, problem.collapse_ops, problem.psi0, tau_grid,
            rtol=solver['rtol'], atol=solver['atol']
        )
    else:
        result = evolve_trajectories(
            problem.hamiltonian, problem.collapse_ops, problem.psi0, tau_grid,
            solver['n_traj'], solver['master_seed'],
            pictures={PICTURE_RAW: 0.0},
            n_workers=solver['n_workers'],
            rtol=solver['rtol'],
            atol=solver['atol']
        )
        return TimeSeries.from_ensemble(result), result
    records = [
        StatisticsRecord.from_state(state, float(tau))
        for tau, state in zip(result.tau_grid, result.states)
    ]
    return TimeSeries.from_records(records), result


def extremal_times(series):
    """First maximum of n3 and first minimum of n1. Values are None if the
    series has no interior extremum.

    Returns
    -------
    dict
    """
    times = {}
    for key, mode, kind in [('n3Max', 2, EXTREMUM_FIRST_MAX), ('n1Min', 0, EXTREMUM_FIRST_MIN)]:
        try:
            times[key] = series.extremal_time(mode, kind)
        except NumericalError:
            times[key] = None
    return times


def scan_extremum(config):
    """Locate the extremal time from the first maximum of n3 and the first
    minimum of n1. Without damping both times are forced to coincide by the
    conservation of 2 n1 + n3 and must agree within one grid step.

    Raises NumericalError if either series has no interior extremum or if the
    two times disagree.

    Parameters
    ----------
    config : ScenarioConfig

    Returns
    -------
    dict
    """
    problem = build_problem(config)
    series, _ = evolve_scenario(problem)
    step = config.document['tau_step']
    tau_n3 = series.extremal_time(2, EXTREMUM_FIRST_MAX)
    tau_n1 = series.extremal_time(0, EXTREMUM_FIRST_MIN)
    agree = abs(tau_n3 - tau_n1) <= step
    if not agree and not config.couplings.is_dissipative:
        raise NumericalError(
            'extremal times of n3 and n1 disagree',
            diagnostics={'n3Max': tau_n3, 'n1Min': tau_n1, 'gridStep': step}
        )
    logger.info('extremal time %.6f (n3 maximum), %.6f (n1 minimum)', tau_n3, tau_n1)
    return {
        'configHash': config_hash(config),
        'n3Max': tau_n3,
        'n1Min': tau_n1,
        'gridStep': step,
        'agree': agree
    }


# ------------------------------------------------------------------------------
#
# Artifacts
#
# ------------------------------------------------------------------------------

class PictureArtifacts(object):
    """States and diagnostics of one picture at the artifact time.

    Attributes
    ----------
    name : string
    field : string
        'a' or 'b'
    state : PureState or DensityMatrix
        Full state (None for trajectory runs)
    reduced : list(DensityMatrix)
        Single mode reduced states
    record : StatisticsRecord
    """
    def __init__(self, name, field, state, reduced, record):
        self.name = name
        self.field = field
        self.state = state
        self.reduced = reduced
        self.record = record


def state_at(problem, result, tau):
    """Full state of a unitary or dense run at an arbitrary time, propagated
    from the nearest preceding grid point.

    Returns
    -------
    PureState or DensityMatrix
    """
    index = int(np.searchsorted(result.tau_grid, tau + TAU_EPSILON, side='right')) - 1
    index = max(0, min(index, len(result.tau_grid) - 1))
    base = result.states[index]
    dt = tau - result.tau_grid[index]
    if dt > TAU_EPSILON:
        solver = problem.config.solver
        if problem.method == METHOD_UNITARY:
            step = evolve_unitary(problem.hamiltonian, base, [0.0, dt], rtol=solver['rtol'], atol=solver['atol'])
        else:
            step = evolve_lindblad_dense(
                problem.hamiltonian, problem.collapse_ops, base, [0.0, dt],
                rtol=solver['rtol'], atol=solver['atol']
            )
        base = step.final_state()
    base.metadata['tau'] = float(tau)
    return base


def picture_artifacts(problem, result, tau):
    """Evaluate states and statistics of every configured picture at the
    artifact time. Trajectory runs are repeated (with the same seeds) up to
    the artifact time to accumulate reduced states.

    Returns
    -------
    (list(PictureArtifacts), dict)
        Artifacts per picture and trajectory standard errors (empty for
        other solvers)
    """
    artifacts = []
    stderr = {}
    if problem.method == METHOD_TRAJECTORIES:
        solver = problem.config.solver
        grid = [0.0, tau] if tau > TAU_EPSILON else [0.0]
        index = len(grid) - 1
        ensemble = evolve_trajectories(
            problem.hamiltonian, problem.collapse_ops, problem.psi0, grid,
            solver['n_traj'], solver['master_seed'],
            pictures=problem.pictures,
            reduce_at=[index],
            n_workers=solver['n_workers'],
            rtol=solver['rtol'],
            atol=solver['atol']
        )
        stderr = {
            'n': [float(ensemble.mean_photon_stderr(m)[index]) for m in range(3)],
            'fano': [float(ensemble.fano_stderr(m)[index]) for m in range(3)],
            'jumpCount': ensemble.metadata['jumpCount']
        }
        for name in sorted(problem.pictures):
            reduced = [ensemble.reduced_state(index, mode, name) for mode in range(3)]
            record = StatisticsRecord.from_reduced(tau, reduced)
            artifacts.append(PictureArtifacts(name, problem.fields[name], None, reduced, record))
        return artifacts, stderr
    base = state_at(problem, result, tau)
    for name in sorted(problem.pictures):
        coupling = problem.pictures[name]
        state = base if coupling == 0 else apply_number_phase(base, coupling, tau)
        state.metadata['tau'] = float(tau)
        reduced = [partial_trace(state, [mode]) for mode in range(3)]
        schmidt = None
        if isinstance(state, PureState):
            schmidt = 1.0 / purity(reduced[2])
        record = StatisticsRecord.from_reduced(tau, reduced, schmidt=schmidt)
        artifacts.append(PictureArtifacts(name, problem.fields[name], state, reduced, record))
    return artifacts, stderr


# ------------------------------------------------------------------------------
#
# Summary reports
#
# ------------------------------------------------------------------------------

class SummaryReport(object):
    """Result of a scenario run.

    Attributes
    ----------
    config_hash : string
    document : dict
        Json-like summary document
    series : TimeSeries
    pictures : list(PictureArtifacts)
    files : list(string)
        Paths of the files written by the run
    """
    def __init__(self, config_hash, document, series=None, pictures=None, files=None):
        self.config_hash = config_hash
        self.document = document
        self.series = series
        self.pictures = pictures if not pictures is None else []
        self.files = files if not files is None else []

    @property
    def artifact_tau(self):
        return self.document['artifactTau']

    def picture(self, name):
        """Artifacts of a picture (None if the picture was not evaluated)."""
        for artifacts in self.pictures:
            if artifacts.name == name:
                return artifacts
        return None

    def statistics(self, picture=PICTURE_RAW):
        """Statistics record of a picture at the artifact time."""
        artifacts = self.picture(picture)
        return artifacts.record if not artifacts is None else None

    @property
    def tau_star(self):
        """First maximum of n3 (None if there is none)."""
        return self.document['tauStar']['n3Max']

    def to_dict(self):
        return self.document

    def to_text(self):
        """Json text with sorted keys. Floats carry 9 significant digits."""
        return json.dumps(self.document, sort_keys=True, indent=2) + '\n'


def run_scenario(config, directory=None, reference=None):
    """Run a scenario and write the configured output files.

    Parameters
    ----------
    config : ScenarioConfig
    directory : string, optional
        Output directory. Overrides the directory in the configuration. No
        files are written if neither is given.
    reference : string, optional
        Output directory of another run. Fidelities between the reduced
        states of both runs are added to the summary.

    Returns
    -------
    SummaryReport
    """
    if directory is None:
        directory = config.outputs['directory']
    hash_value = config_hash(config)
    artifact_set = set(config.outputs['artifacts'])
    problem = build_problem(config)
    logger.info('running scenario %s', hash_value)
    # Trajectory runs with a fixed artifact time only need the time series
    # pass if it is written
    series = None
    result = None
    tau_star = {'n3Max': None, 'n1Min': None}
    fixed_tau = config.outputs['tau']
    need_series = problem.method != METHOD_TRAJECTORIES
    need_series = need_series or fixed_tau is None or ARTIFACT_TIMESERIES in artifact_set
    if need_series:
        series, result = evolve_scenario(problem)
        tau_star = extremal_times(series)
    if not fixed_tau is None:
        tau = fixed_tau
    elif not tau_star['n3Max'] is None:
        tau = tau_star['n3Max']
    else:
        tau = float(config.tau_grid()[-1])
        logger.warning('n3 has no interior maximum: using final time %g for artifacts', tau)
    logger.info('artifact time %.6f', tau)
    pictures, stderr = picture_artifacts(problem, result, tau)
    document = {
        'configHash': hash_value,
        'config': canonical_document(config),
        'hamiltonian': config.hamiltonian,
        'space': {
            'maxOcc': list(problem.space.max_occ),
            'totalCap': problem.space.total_cap,
            'dimension': problem.space.dimension
        },
        'decoupling': validate_decoupling(config.couplings),
        'initialState': {'lostMass': problem.psi0.metadata['lostMass']},
        'solver': solver_summary(problem, result),
        'tauStar': tau_star,
        'artifactTau': tau,
        'pictures': {
            artifacts.name: {
                'field': artifacts.field,
                'numberPhase': problem.pictures[artifacts.name]
            } for artifacts in pictures
        },
        'statistics': {artifacts.name: artifacts.record.to_dict() for artifacts in pictures}
    }
    if stderr:
        document['standardErrors'] = stderr
    if not result is None and problem.method != METHOD_TRAJECTORIES:
        document['conservation'] = conservation_drift(result)
    if ARTIFACT_WIGNER in artifact_set or ARTIFACT_MARGINALS in artifact_set:
        grids = wigner_grids(config, pictures)
        document['wigner'] = {
            name: [grid_summary(mode, grid) for mode, grid in entries]
            for name, entries in grids.items()
        }
    else:
        grids = {}
    if not reference is None:
        document['fidelities'] = fidelity_records(reference, pictures)
    report = SummaryReport(hash_value, clean_value(document), series=series, pictures=pictures)
    if not directory is None:
        report.files = write_outputs(report, config, grids, directory)
    logger.info('scenario %s finished', hash_value)
    return report


def solver_summary(problem, result):
    """Solver settings and diagnostics for the summary."""
    solver = problem.config.solver
    summary = {'method': problem.method, 'rtol': solver['rtol'], 'atol': solver['atol']}
    if problem.method == METHOD_TRAJECTORIES:
        summary['nTraj'] = solver['n_traj']
        summary['masterSeed'] = solver['master_seed']
    if not result is None:
        for key, value in result.metadata.items():
            if not key in summary:
                summary[key] = value
    return summary


def conservation_drift(result):
    """Largest deviation of the conserved combinations from their initial
    values over a unitary or dense run.

    Returns
    -------
    dict
    """
    values = [conserved_expectations(state) for state in result.states]
    return {
        key: max(abs(v[key] - values[0][key]) for v in values)
        for key in values[0]
    }


def wigner_grids(config, pictures):
    """Wigner grids of the configured modes for every picture.

    Returns
    -------
    dict
        Picture name to list of (mode, WignerGrid) pairs
    """
    x_min, x_max, x_count, p_min, p_max, p_count = config.outputs['wigner_grid']
    grids = {}
    for artifacts in pictures:
        entries = []
        for mode in config.outputs['wigner_modes']:
            grid = wigner(
                artifacts.reduced[mode - 1],
                x_min=x_min, x_max=x_max, x_count=int(x_count),
                p_min=p_min, p_max=p_max, p_count=int(p_count),
                label='mode' + str(mode)
            )
            entries.append((mode, grid))
        grids[artifacts.name] = entries
    return grids


def grid_summary(mode, grid):
    """Summary of a Wigner grid and its marginals."""
    xvec, px = marginal_x(grid)
    pvec, pp = marginal_p(grid)
    mean_x, var_x = marginal_moments(xvec, px, grid.dx)
    mean_p, var_p = marginal_moments(pvec, pp, grid.dp)
    return {
        'mode': mode,
        'min': wigner_min(grid),
        'negativityVolume': negativity_volume(grid),
        'normalization': grid.normalization(),
        'marginals': {'meanX': mean_x, 'varX': var_x, 'meanP': mean_p, 'varP': var_p}
    }


def fidelity_records(reference, pictures):
    """Fidelities between the reduced states of a run and those stored in the
    output directory of a reference run.

    Returns
    -------
    list(dict)
    """
    records = []
    for artifacts in pictures:
        for mode in range(3):
            filename = reduced_file(reference, mode + 1, artifacts.name)
            if not os.path.isfile(filename):
                continue
            with open(filename, 'r') as f:
                other = read_state(f)
            check_tau(other.metadata.get('tau'), artifacts.record.tau)
            records.append({
                'mode': mode + 1,
                'picture': artifacts.name,
                'fidelity': fidelity(artifacts.reduced[mode], other)
            })
    if not records:
        logger.warning('no reduced states found in reference directory %s', reference)
    return records


# ------------------------------------------------------------------------------
#
# Output files
#
# ------------------------------------------------------------------------------

def reduced_file(directory, mode, picture):
    """Path of a reduced state file (mode is 1-based)."""
    return os.path.join(directory, 'reduced-mode%d-%s.json' % (mode, picture))


def write_outputs(report, config, grids, directory):
    """Write the configured artifacts and the summary document.

    Returns
    -------
    list(string)
        Paths of the written files
    """
    if not os.path.isdir(directory):
        os.makedirs(directory)
    artifact_set = set(config.outputs['artifacts'])
    header = ['config-hash: ' + report.config_hash]
    files = []

    def write_text(name, text):
        filename = os.path.join(directory, name)
        with open(filename, 'w') as f:
            f.write(text)
        files.append(filename)

    if ARTIFACT_TIMESERIES in artifact_set and not report.series is None:
        write_text(
            FILE_TIMESERIES,
            report.series.to_text(header=header + ['picture: ' + PICTURE_RAW])
        )
    tau = report.artifact_tau
    if ARTIFACT_DISTRIBUTIONS in artifact_set:
        record = report.pictures[0].record
        write_text(FILE_DISTRIBUTIONS, distributions_text(record, header + ['tau: ' + format_number(tau)]))
    for name, entries in sorted(grids.items()):
        for mode, grid in entries:
            lines = header + ['mode: %d' % mode, 'picture: ' + name, 'tau: ' + format_number(tau)]
            if ARTIFACT_WIGNER in artifact_set:
                write_text('wigner-mode%d-%s.tsv' % (mode, name), grid.to_text(header=lines))
            if ARTIFACT_MARGINALS in artifact_set:
                write_text('marginals-mode%d-%s.tsv' % (mode, name), marginals_text(grid, lines))
    if ARTIFACT_STATES in artifact_set:
        properties = {'configHash': report.config_hash}
        for artifacts in report.pictures:
            properties['picture'] = artifacts.name
            if not artifacts.state is None and isinstance(artifacts.state, PureState):
                filename = os.path.join(directory, 'state-%s.json' % artifacts.name)
                with open(filename, 'w') as f:
                    write_state(artifacts.state, f, tau=tau, properties=properties)
                files.append(filename)
            for mode, rho in enumerate(artifacts.reduced):
                filename = reduced_file(directory, mode + 1, artifacts.name)
                with open(filename, 'w') as f:
                    write_state(rho, f, tau=tau, properties=properties)
                files.append(filename)
    write_text(FILE_SUMMARY, report.to_text())
    logger.info('wrote %d files to %s', len(files), directory)
    return files


def distributions_text(record, header):
    """Photon number distributions of all modes as text columns."""
    length = max(len(dist) for dist in record.distributions)
    lines = ['# ' + line for line in header]
    lines.append('# n ' + ' '.join('P%d' % (j + 1) for j in range(len(record.distributions))))
    for n in range(length):
        row = [str(n)] + [
            format_number(dist[n] if n < len(dist) else 0.0) for dist in record.distributions
        ]
        lines.append('\t'.join(row))
    return '\n'.join(lines) + '\n'


def marginals_text(grid, header):
    """Quadrature marginals of a Wigner grid as rows (axis, q, density)."""
    lines = ['# ' + line for line in header]
    lines.append('# axis q density')
    for axis, (values, density) in [('x', marginal_x(grid)), ('p', marginal_p(grid))]:
        for q, value in zip(values, density):
            lines.append('%s\t%s\t%s' % (axis, format_number(q), format_number(value)))
    return '\n'.join(lines) + '\n'


# ------------------------------------------------------------------------------
#
# Comparison of runs
#
# ------------------------------------------------------------------------------

def compare_states(source_a, source_b, modes=None, pictures=None):
    """Mode-wise Uhlmann fidelities between two runs. Sources are either run
    output directories (reduced state files are matched by mode and picture)
    or two state files.

    Parameters
    ----------
    source_a : string
    source_b : string
    modes : list(int), optional
        1-based modes. Defaults to all modes.
    pictures : list(string), optional
        Defaults to all pictures present in both directories

    Returns
    -------
    dict
    """
    if os.path.isfile(source_a) and os.path.isfile(source_b):
        return compare_state_files(source_a, source_b, modes)
    for source in [source_a, source_b]:
        if not os.path.isdir(source):
            raise ConfigurationError('not a run directory or state file: ' + source)
    if modes is None:
        modes = [1, 2, 3]
    if pictures is None:
        pictures = [PICTURE_RAW, PICTURE_TRANSFORMED]
    records = []
    tau_a = None
    tau_b = None
    for picture in pictures:
        for mode in modes:
            file_a = reduced_file(source_a, mode, picture)
            file_b = reduced_file(source_b, mode, picture)
            if not (os.path.isfile(file_a) and os.path.isfile(file_b)):
                continue
            with open(file_a, 'r') as f:
                rho_a = read_state(f)
            with open(file_b, 'r') as f:
                rho_b = read_state(f)
            tau_a = rho_a.metadata.get('tau')
            tau_b = rho_b.metadata.get('tau')
            check_tau(tau_a, tau_b)
            records.append({'mode': mode, 'picture': picture, 'fidelity': fidelity(rho_a, rho_b)})
    if not records:
        raise ConfigurationError('no matching reduced state files in %s and %s' % (source_a, source_b))
    return clean_value({
        'a': source_a,
        'b': source_b,
        'tauA': tau_a,
        'tauB': tau_b,
        'fidelities': records
    })


def compare_state_files(file_a, file_b, modes=None):
    """Fidelities between two state files. Full-space states are compared
    mode by mode, reduced states directly.
    """
    with open(file_a, 'r') as f:
        state_a = read_state(f)
    with open(file_b, 'r') as f:
        state_b = read_state(f)
    check_tau(state_a.metadata.get('tau'), state_b.metadata.get('tau'))
    records = []
    full_a = not getattr(state_a, 'is_reduced', False)
    full_b = not getattr(state_b, 'is_reduced', False)
    if full_a and full_b:
        if modes is None:
            modes = list(range(1, state_a.space.mode_count + 1))
        for mode in modes:
            records.append({
                'mode': mode,
                'fidelity': fidelity(partial_trace(state_a, [mode - 1]), partial_trace(state_b, [mode - 1]))
            })
    elif not full_a and not full_b:
        if state_a.modes != state_b.modes:
            raise ConfigurationError('state files describe different modes')
        records.append({
            'mode': [m + 1 for m in state_a.modes],
            'fidelity': fidelity(state_a, state_b)
        })
    else:
        raise ConfigurationError('cannot compare a full state with a reduced state')
    return clean_value({
        'a': file_a,
        'b': file_b,
        'tauA': state_a.metadata.get('tau'),
        'tauB': state_b.metadata.get('tau'),
        'fidelities': records
    })


def check_tau(tau_a, tau_b):
    """Warn if two states belong to different times."""
    if tau_a is None or tau_b is None:
        return
    if abs(tau_a - tau_b) > 1e-9:
        logger.warning('comparing states at different times: %.9g and %.9g', tau_a, tau_b)


# ------------------------------------------------------------------------------
#
# Helper methods
#
# ------------------------------------------------------------------------------

def clean_value(value):
    """Convert a Json-like value to plain Python types. Floats are rounded to
    9 significant digits and non-finite floats become None.
    """
    if isinstance(value, dict):
        return {str(key): clean_value(val) for key, val in value.items()}
    elif isinstance(value, (list, tuple, np.ndarray)):
        return [clean_value(val) for val in value]
    elif isinstance(value, (bool, np.bool_)):
        return bool(value)
    elif isinstance(value, (int, np.integer)):
        return int(value)
    elif isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return None
        return float('%.9g' % value)
    return value


def format_number(value):
    """Text representation with 9 significant digits ('undefined' for None
    and NaN).
    """
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return 'undefined'
    return '%.9g' % value
