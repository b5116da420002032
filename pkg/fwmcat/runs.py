"""Scenario Runs - Registry of simulation runs, their life cycle, and the
output files attached to them.
"""

import datetime
import os
import shutil
import uuid

from fwmcat import datastore


# ------------------------------------------------------------------------------
#
# Constants
#
# ------------------------------------------------------------------------------

# Timestamp of run creation
RUN_CREATED = 'createdAt'
# Timestamp of run start
RUN_STARTED = 'startedAt'
# Timestamp of run end
RUN_FINISHED = 'finishedAt'

# Run states
STATE_FAILED = 'FAILED'
STATE_IDLE = 'IDLE'
STATE_RUNNING = 'RUNNING'
STATE_SUCCESS = 'SUCCESS'

"""Unique scenario run resource type identifier."""
TYPE_SCENARIO_RUN = 'SCENARIO_RUN'

# Mime types of output files by suffix
MIME_TYPES = [
    ('.tsv', 'text/tab-separated-values'),
    ('.csv', 'text/csv'),
    ('.json', 'application/json'),
    ('.gz', 'application/x-gzip'),
    ('.png', 'image/png')
]


# ------------------------------------------------------------------------------
#
# Attachments
#
# ------------------------------------------------------------------------------

class Attachment(object):
    """Output file attached to a scenario run.

    Attributes
    ----------
    identifier : string
        File name inside the run's attachment directory
    mime_type : string
    filesize : int
    """
    def __init__(self, identifier, mime_type, filesize):
        self.identifier = identifier
        self.mime_type = mime_type
        self.filesize = filesize

    @classmethod
    def from_dict(cls, document):
        return cls(document['id'], document['mimeType'], document['filesize'])

    def to_dict(self):
        return {
            'id' : self.identifier,
            'mimeType' : self.mime_type,
            'filesize' : self.filesize
        }


def mime_type_of(filename):
    """Mime type derived from the file name suffix (default: text/plain)."""
    for suffix, mime_type in MIME_TYPES:
        if filename.endswith(suffix):
            return mime_type
    return 'text/plain'


# ------------------------------------------------------------------------------
#
# Run State Objects
#
# ------------------------------------------------------------------------------

class ScenarioRunState(object):
    """State of a scenario run. Failed runs carry a list of error messages and
    successful runs carry the run summary.
    """
    @staticmethod
    def from_dict(json_obj):
        if json_obj['type'] == STATE_FAILED:
            return ScenarioRunFailed(json_obj.get('errors', []))
        elif json_obj['type'] == STATE_SUCCESS:
            return ScenarioRunSuccess(json_obj.get('summary', {}))
        elif json_obj['type'] == STATE_IDLE:
            return ScenarioRunIdle()
        elif json_obj['type'] == STATE_RUNNING:
            return ScenarioRunActive()
        raise ValueError('unknown run state: ' + str(json_obj['type']))

    @property
    def is_failed(self):
        return False

    @property
    def is_idle(self):
        return False

    @property
    def is_running(self):
        return False

    @property
    def is_success(self):
        return False

    @staticmethod
    def to_dict(obj):
        """Json serialization of a run state object.

        Returns
        -------
        dict
        """
        json_obj = {'type' : repr(obj)}
        if obj.is_failed:
            json_obj['errors'] = obj.errors
        elif obj.is_success:
            json_obj['summary'] = obj.summary
        return json_obj


class ScenarioRunActive(ScenarioRunState):
    """Run that is currently being simulated."""
    def __repr__(self):
        return STATE_RUNNING

    @property
    def is_running(self):
        return True


class ScenarioRunFailed(ScenarioRunState):
    """Run that terminated with an error.

    Attributes
    ----------
    errors : list(string)
    """
    def __init__(self, errors=None):
        self.errors = errors if not errors is None else []

    def __repr__(self):
        return STATE_FAILED

    @property
    def is_failed(self):
        return True


class ScenarioRunIdle(ScenarioRunState):
    """Run that has been registered but not started."""
    def __repr__(self):
        return STATE_IDLE

    @property
    def is_idle(self):
        return True


class ScenarioRunSuccess(ScenarioRunState):
    """Run that finished successfully.

    Attributes
    ----------
    summary : dict
        Summary document of the run (extremal times, fidelities, etc.)
    """
    def __init__(self, summary):
        self.summary = summary

    def __repr__(self):
        return STATE_SUCCESS

    @property
    def is_success(self):
        return True


# ------------------------------------------------------------------------------
#
# Registry Objects
#
# ------------------------------------------------------------------------------

class ScenarioRunHandle(datastore.DataObjectHandle):
    """Handle for a registered scenario run. The run state is replicated into
    the properties to allow listing filters on state.

    Attributes
    ----------
    state : ScenarioRunState
    config : dict
        Validated scenario configuration
    config_hash : string
        Hash of the canonical configuration
    attachments : dict(Attachment)
        Output files attached to the run
    attachment_directory : string
    schedule : dict(string)
        Timestamps of state changes
    """
    def __init__(
        self,
        identifier,
        properties,
        directory,
        state,
        config,
        config_hash,
        attachments=None,
        schedule=None,
        timestamp=None,
        is_active=True):
        super(ScenarioRunHandle, self).__init__(
            identifier,
            timestamp,
            properties,
            directory,
            is_active=is_active
        )
        self.state = state
        self.config = config
        self.config_hash = config_hash
        self.attachments = attachments if not attachments is None else {}
        # Schedule may only be missing for newly created runs
        if schedule is None:
            if not timestamp is None:
                raise ValueError('missing schedule information')
            self.schedule = {RUN_CREATED : datastore.format_timestamp(self.timestamp)}
        else:
            self.schedule = schedule
        self.attachment_directory = os.path.join(self.directory, 'attachments')

    @property
    def type(self):
        return TYPE_SCENARIO_RUN


# ------------------------------------------------------------------------------
#
# Object Stores
#
# ------------------------------------------------------------------------------

class DefaultScenarioRunManager(datastore.DefaultObjectStore):
    """Manager for scenario runs and their output files. Uses MongoDB for run
    documents and a base directory on disk for attachments.
    """
    def __init__(self, mongo_collection, base_directory):
        super(DefaultScenarioRunManager, self).__init__(
            mongo_collection,
            base_directory,
            [
                datastore.PROPERTY_STATE,
                datastore.PROPERTY_HAMILTONIAN,
                datastore.PROPERTY_CONFIG_HASH
            ]
        )

    def create_data_file_attachment(self, identifier, resource_id, filename, mime_type=None):
        """Copy a file into the attachment directory of a successful run. An
        existing attachment with the same resource identifier is overwritten.

        Raises ValueError if the run is not in SUCCESS state or if the
        resource identifier is not a plain file name.

        Parameters
        ----------
        identifier : string
            Unique run identifier
        resource_id : string
            Attachment identifier (file name)
        filename : string
            Path to the file that is attached
        mime_type : string, optional
            Derived from the file suffix if not given

        Returns
        -------
        ScenarioRunHandle
            Modified run or None if the run does not exist
        """
        run = self.get_object(identifier)
        if run is None:
            return None
        if not run.state.is_success:
            raise ValueError('cannot attach file to run in state: ' + str(run.state))
        target = os.path.abspath(os.path.join(run.attachment_directory, resource_id))
        directory, _ = os.path.split(target)
        if directory != os.path.abspath(run.attachment_directory):
            raise ValueError('invalid resource identifier: ' + resource_id)
        if not os.path.exists(run.attachment_directory):
            os.makedirs(run.attachment_directory)
        shutil.copyfile(filename, target)
        if mime_type is None:
            mime_type = mime_type_of(filename)
        run.attachments[resource_id] = Attachment(
            resource_id,
            mime_type,
            os.path.getsize(target)
        )
        self.replace_object(run)
        return run

    def create_object(self, name, config, config_hash, properties=None):
        """Register a new run for a validated scenario configuration. The run
        is in IDLE state.

        Parameters
        ----------
        name : string
        config : dict
            Validated scenario configuration
        config_hash : string
        properties : dict, optional
            Additional run properties

        Returns
        -------
        ScenarioRunHandle
        """
        identifier = str(uuid.uuid4()).replace('-','')
        directory = os.path.join(self.directory, identifier)
        if not os.access(directory, os.F_OK):
            os.makedirs(directory)
        state = ScenarioRunIdle()
        run_properties = {
            datastore.PROPERTY_NAME: name,
            datastore.PROPERTY_STATE: str(state),
            datastore.PROPERTY_HAMILTONIAN: config['hamiltonian'],
            datastore.PROPERTY_CONFIG_HASH: config_hash
        }
        if not properties is None:
            for prop in properties:
                if not prop in run_properties:
                    run_properties[prop] = properties[prop]
        obj = ScenarioRunHandle(
            identifier,
            run_properties,
            directory,
            state,
            config,
            config_hash
        )
        self.insert_object(obj)
        return obj

    def delete_data_file_attachment(self, identifier, resource_id):
        """Delete an attached file.

        Returns
        -------
        Boolean
            False if the run or the attachment does not exist
        """
        run = self.get_object(identifier)
        if run is None:
            return False
        if not resource_id in run.attachments:
            return False
        os.remove(os.path.join(run.attachment_directory, resource_id))
        del run.attachments[resource_id]
        self.replace_object(run)
        return True

    def from_dict(self, document):
        """Create a run handle from a database document."""
        identifier = str(document['_id'])
        directory = os.path.join(self.directory, identifier)
        attachments = {}
        for obj in document['attachments']:
            attachment = Attachment.from_dict(obj)
            attachments[attachment.identifier] = attachment
        return ScenarioRunHandle(
            identifier,
            document['properties'],
            directory,
            ScenarioRunState.from_dict(document['state']),
            document['config'],
            document['configHash'],
            attachments=attachments,
            schedule=document['schedule'],
            timestamp=datastore.parse_timestamp(document['timestamp']),
            is_active=document['active']
        )

    def get_data_file_attachment(self, identifier, resource_id):
        """Path and Mime type of an attached file.

        Returns
        -------
        string, string
            (None, None) if the run or the attachment does not exist
        """
        run = self.get_object(identifier)
        if run is None:
            return None, None
        if not resource_id in run.attachments:
            return None, None
        attachment = run.attachments[resource_id]
        filename = os.path.join(run.attachment_directory, resource_id)
        return filename, attachment.mime_type

    def to_dict(self, run):
        """Extend the base document with state, schedule, configuration, and
        attachments.
        """
        json_obj = super(DefaultScenarioRunManager, self).to_dict(run)
        json_obj['state'] = ScenarioRunState.to_dict(run.state)
        json_obj['schedule'] = run.schedule
        json_obj['config'] = run.config
        json_obj['configHash'] = run.config_hash
        json_obj['attachments'] = [
            attachment.to_dict() for attachment in run.attachments.values()
        ]
        return json_obj

    def update_state(self, identifier, state):
        """Update the state of a run. Valid transitions are IDLE -> RUNNING,
        IDLE|RUNNING -> FAILED, and RUNNING -> SUCCESS. Raises ValueError for
        any other transition.

        Parameters
        ----------
        identifier : string
        state : ScenarioRunState

        Returns
        -------
        ScenarioRunHandle
            Modified run or None if the run does not exist
        """
        run = self.get_object(identifier)
        if run is None:
            return None
        timestamp = datastore.format_timestamp(datetime.datetime.utcnow())
        if state.is_idle:
            raise ValueError('invalid state change: run cannot become idle')
        elif state.is_running:
            if not run.state.is_idle:
                raise ValueError('invalid state change: finished run cannot start again')
            run.schedule[RUN_STARTED] = timestamp
        elif state.is_failed:
            if not (run.state.is_running or run.state.is_idle):
                raise ValueError('invalid state change: cannot fail finished run')
            run.schedule[RUN_FINISHED] = timestamp
        elif state.is_success:
            if not run.state.is_running:
                raise ValueError('invalid state change: cannot finish inactive run')
            run.schedule[RUN_FINISHED] = timestamp
        run.state = state
        run.properties[datastore.PROPERTY_STATE] = str(state)
        self.replace_object(run)
        return run
