"""FWM Cat Simulator - Truncated Fock space simulations of Schroedinger
cat-like state generation by four-wave mixing in a three-mode microring.

The package API brings together the run registry stores. Numerical building
blocks live in the modules fock, states, dynamics and observables; scenario
orchestration in scenario and the command line interface in cli.
"""

import os

from fwmcat import datastore
from fwmcat import runs


# ------------------------------------------------------------------------------
#
# File Information Objects
#
# ------------------------------------------------------------------------------

class FileInfo(object):
    """Information about downloadable files. This is a triple containing the
    path to the file, the file mime-type, and the file name.

    Attributes
    ----------
    file : string
        Path to file on disk
    mime_type : string
        The file's mime-type
    name: string
        File name
    """
    def __init__(self, file, mime_type, name):
        self.file = file
        self.mime_type = mime_type
        self.name = name


# ------------------------------------------------------------------------------
#
# API
#
# ------------------------------------------------------------------------------

class FWMCatStore(object):
    """Interface to the registry of scenario runs and their output files."""
    def __init__(self, mongo, base_dir):
        """Initialize the run manager.

        Parameters
        ----------
        mongo : mongo.MongoDBFactory
            MongoDB database object factory
        base_dir : string
            Directory for run files. It is created if it does not exist.
        """
        db = mongo.get_database()
        abs_base_dir = create_dir(base_dir)
        runs_dir = create_dir(os.path.join(abs_base_dir, 'runs'))
        self.runs = runs.DefaultScenarioRunManager(db.runs, runs_dir)

    def runs_attachments_create(self, run_id, resource_id, filename, mime_type=None):
        """Attach an output file to a successful run.

        Returns
        -------
        runs.ScenarioRunHandle
            Modified run or None if the run does not exist
        """
        return self.runs.create_data_file_attachment(run_id, resource_id, filename, mime_type=mime_type)

    def runs_attachments_delete(self, run_id, resource_id):
        """Delete an attached file.

        Returns
        -------
        Boolean
        """
        return self.runs.delete_data_file_attachment(run_id, resource_id)

    def runs_attachments_download(self, run_id, resource_id):
        """Information about an attached file.

        Returns
        -------
        FileInfo
            None if the run or attachment does not exist
        """
        filename, mime_type = self.runs.get_data_file_attachment(run_id, resource_id)
        if filename is None:
            return None
        return FileInfo(filename, mime_type, resource_id)

    def runs_create(self, name, config, config_hash, properties=None):
        """Register a run for a validated configuration document.

        Parameters
        ----------
        name : string
        config : dict
        config_hash : string
        properties : dict, optional

        Returns
        -------
        runs.ScenarioRunHandle
        """
        return self.runs.create_object(name, config, config_hash, properties=properties)

    def runs_delete(self, run_id, erase=False):
        """Delete a run.

        Returns
        -------
        runs.ScenarioRunHandle
            Handle of the deleted run or None if it did not exist
        """
        return self.runs.delete_object(run_id, erase=erase)

    def runs_get(self, run_id):
        """Retrieve a run (None if it does not exist)."""
        return self.runs.get_object(run_id)

    def runs_list(self, state=None, config_hash=None, limit=-1, offset=-1):
        """List registered runs, newest first.

        Parameters
        ----------
        state : string, optional
            Only runs in the given state
        config_hash : string, optional
            Only runs of the given configuration
        limit : int, optional
        offset : int, optional

        Returns
        -------
        datastore.ObjectListing
        """
        query = {}
        if not state is None:
            query['properties.' + datastore.PROPERTY_STATE] = state
        if not config_hash is None:
            query['properties.' + datastore.PROPERTY_CONFIG_HASH] = config_hash
        return self.runs.list_objects(query=query, limit=limit, offset=offset)

    def runs_update_state_active(self, run_id):
        """Mark a run as running."""
        return self.runs.update_state(run_id, runs.ScenarioRunActive())

    def runs_update_state_error(self, run_id, errors):
        """Mark a run as failed with the given error messages."""
        return self.runs.update_state(run_id, runs.ScenarioRunFailed(errors))

    def runs_update_state_success(self, run_id, summary):
        """Mark a run as successful with its summary document."""
        return self.runs.update_state(run_id, runs.ScenarioRunSuccess(summary))

    def runs_upsert_property(self, run_id, properties):
        """Insert, update or delete run properties.

        Returns
        -------
        runs.ScenarioRunHandle
            None if the run does not exist
        """
        return self.runs.upsert_object_property(run_id, properties)


# ------------------------------------------------------------------------------
#
# Helper methods
#
# ------------------------------------------------------------------------------

def create_dir(directory):
    """Create the given directory if it does not exist.

    Returns
    -------
    string
        Absolute path of the directory
    """
    abs_dir = os.path.abspath(directory)
    if not os.access(abs_dir, os.F_OK):
        os.makedirs(abs_dir)
    return abs_dir
