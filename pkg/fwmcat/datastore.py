"""Data Store - Base classes for registry objects and the stores that manage
them. A registry object is a Json document in MongoDB together with a directory
on local disk that holds the files that belong to the object.
"""

from abc import abstractmethod, abstractproperty
import datetime
import os

import pymongo


# ------------------------------------------------------------------------------
#
# Constants
#
# ------------------------------------------------------------------------------

""" Object properties: Definition of general properties that can be associated
with a registry object."""

# Hash of the canonical scenario configuration
PROPERTY_CONFIG_HASH = 'configHash'
# Interaction Hamiltonian of a scenario run
PROPERTY_HAMILTONIAN = 'hamiltonian'
# Descriptive name (mandatory for all registry objects)
PROPERTY_NAME = 'name'
# Objects are read-only and cannot be deleted
PROPERTY_READONLY = 'readOnly'
# Object state
PROPERTY_STATE = 'state'

# Format of serialized timestamps
TIMESTAMP_FORMAT = '%Y-%m-%dT%H:%M:%S.%f'


# ------------------------------------------------------------------------------
#
# Registry Objects
#
# ------------------------------------------------------------------------------

class ObjectHandle(object):
    """Base implementation of handles for registry objects. Each handle has an
    identifier, a creation timestamp, and a dictionary of object properties.

    Attributes
    ----------
    identifier : string
        Unique object identifier
    timestamp : datetime
        Time stamp of object creation (UTC time)
    properties : dict
        Object specific properties. The NAME property is mandatory.
    is_active : Boolean
        False if the object has been deleted
    """
    def __init__(self, identifier, timestamp, properties, is_active=True):
        """Initialize the handle. Raises ValueError if the mandatory property
        NAME is missing.

        Parameters
        ----------
        identifier : string
        timestamp : datetime
            If None, the current date and time is used
        properties : dict
        is_active : Boolean, optional
        """
        if not PROPERTY_NAME in properties:
            raise ValueError('missing property: ' + PROPERTY_NAME)
        self.identifier = identifier
        self.timestamp = timestamp or datetime.datetime.utcnow()
        self.properties = properties
        self.is_active = is_active

    @property
    def name(self):
        """Value of the mandatory NAME property.

        Returns
        -------
        string
        """
        return self.properties[PROPERTY_NAME]

    @abstractproperty
    def type(self):
        """Unique type identifier of the handle class.

        Returns
        -------
        string
        """
        pass


class DataObjectHandle(ObjectHandle):
    """Registry object with a directory on local disk. The directory is not
    kept as an object property so that data can be moved without updating
    the database.

    Attributes
    ----------
    directory : string
        Path to the object's data directory
    """
    def __init__(self, identifier, timestamp, properties, directory, is_active=True):
        super(DataObjectHandle, self).__init__(identifier, timestamp, properties, is_active=is_active)
        self.directory = directory


class ObjectListing(object):
    """Result of a list_objects operation.

    Attributes
    ----------
    items : list(ObjectHandle)
        Objects in the requested page of the listing
    offset : int
        Offset in the listing
    limit : int
        Maximum page size (or -1 for all)
    total_count : int
        Total number of objects that match the query
    """
    def __init__(self, items, offset, limit, total_count):
        self.items = items
        self.offset = offset
        self.limit = limit
        self.total_count = total_count


# ------------------------------------------------------------------------------
#
# Object Stores
#
# ------------------------------------------------------------------------------

class ObjectStore(object):
    """Base implementation of a storage manager for registry objects.

    Attributes
    ----------
    immutable_properties : set(string)
        Names of properties that cannot be updated
    mandatory_properties : set(string)
        Names of properties that cannot be deleted
    """
    def __init__(self, properties=None):
        """Initialize the sets of immutable and manadatory properties.

        Parameters
        ----------
        properties : list(string), optional
            Additional properties that are both mandatory and immutable
        """
        self.immutable_properties = set([PROPERTY_READONLY])
        self.mandatory_properties = set([PROPERTY_NAME])
        for prop in (properties or []):
            self.immutable_properties.add(prop)
            self.mandatory_properties.add(prop)

    @abstractmethod
    def delete_object(self, identifier, erase=False):
        pass

    @abstractmethod
    def exists_object(self, identifier):
        pass

    @abstractmethod
    def get_object(self, identifier, include_inactive=False):
        pass

    @abstractmethod
    def list_objects(self, query=None, limit=-1, offset=-1):
        pass

    @abstractmethod
    def replace_object(self, db_object):
        pass

    def upsert_object_property(self, identifier, properties, ignore_constraints=False):
        """Insert or update the given object properties. A value of None
        deletes the property. Properties that are not in the given dictionary
        remain unaffected.

        Updating immutable properties or deleting mandatory properties raises
        a ValueError unless ignore_constraints is True.

        Parameters
        ----------
        identifier : string
            Unique object identifier
        properties : dict
            Property names and their new values
        ignore_constraints : Boolean, optional

        Returns
        -------
        ObjectHandle
            Updated object or None if the object does not exist
        """
        obj = self.get_object(identifier)
        if obj is None:
            return None
        for key in properties:
            value = properties[key]
            if not ignore_constraints and key in self.immutable_properties:
                raise ValueError('update to immutable property: ' + key)
            if not value is None:
                obj.properties[key] = value
            elif not ignore_constraints and key in self.mandatory_properties:
                raise ValueError('delete mandatory property: ' + key)
            elif key in obj.properties:
                del obj.properties[key]
        self.replace_object(obj)
        return obj


class MongoDBStore(ObjectStore):
    """Object store that keeps object documents in a MongoDB collection.
    Implementations only need to provide from_dict() and may extend to_dict().

    Attributes
    ----------
    collection : pymongo.collection.Collection
    """
    def __init__(self, mongo_collection, properties=None):
        super(MongoDBStore, self).__init__(properties)
        self.collection = mongo_collection

    def clear_collection(self):
        """Remove all objects from the collection."""
        self.collection.drop()

    def delete_object(self, identifier, erase=False):
        """Delete the object with the given identifier. By default the active
        flag is set to False and the document is kept. Raises ValueError for
        read-only objects.

        Parameters
        ----------
        identifier : string
        erase : Boolean, optional
            Remove the document from the database

        Returns
        -------
        ObjectHandle
            Handle of the deleted object or None if it did not exist
        """
        db_object = self.get_object(identifier)
        if db_object is None:
            return None
        if db_object.properties.get(PROPERTY_READONLY, False):
            raise ValueError('cannot delete read-only resource')
        if erase:
            self.collection.delete_many({'_id': identifier})
        else:
            self.collection.update_one({'_id': identifier}, {'$set' : {'active' : False}})
        return db_object

    def exists_object(self, identifier):
        """True if an active object with the given identifier exists."""
        return self.collection.count_documents({'_id': identifier, 'active' : True}) > 0

    @abstractmethod
    def from_dict(self, document):
        """Create a handle from a database document."""
        pass

    def get_object(self, identifier, include_inactive=False):
        """Retrieve the object with the given identifier.

        Parameters
        ----------
        identifier : string
        include_inactive : Boolean, optional
            Also return deleted objects

        Returns
        -------
        ObjectHandle
            None if no matching object exists
        """
        query = {'_id': identifier}
        if not include_inactive:
            query['active'] = True
        document = self.collection.find_one(query)
        if document is None:
            return None
        return self.from_dict(document)

    def insert_object(self, db_object):
        """Create a new document for the given object."""
        obj = self.to_dict(db_object)
        obj['active'] = True
        self.collection.insert_one(obj)

    def list_objects(self, query=None, limit=-1, offset=-1):
        """List active objects, newest first. The optional query is a
        dictionary of additional document conditions, e.g.,
        {'properties.state': 'SUCCESS'}.

        Parameters
        ----------
        query : dict, optional
        limit : int, optional
        offset : int, optional

        Returns
        -------
        ObjectListing
        """
        doc = {'active' : True}
        if not query is None:
            doc.update(query)
        cursor = self.collection.find(doc).sort([('timestamp', pymongo.DESCENDING)])
        if offset > 0:
            cursor = cursor.skip(offset)
        if limit >= 0:
            # A limit of zero means no limit for pymongo
            cursor = cursor.limit(limit) if limit > 0 else []
        result = [self.from_dict(document) for document in cursor]
        return ObjectListing(result, offset, limit, self.collection.count_documents(doc))

    def replace_object(self, db_object):
        """Replace the document of an existing active object."""
        obj = self.to_dict(db_object)
        obj['active'] = True
        self.collection.replace_one({'_id' : db_object.identifier, 'active' : True}, obj)

    def to_dict(self, db_obj):
        """Base Json serialization of registry objects.

        Returns
        -------
        dict
        """
        return {
            '_id' : db_obj.identifier,
            'timestamp' : format_timestamp(db_obj.timestamp),
            'properties' : db_obj.properties
        }


class DefaultObjectStore(MongoDBStore):
    """MongoDB store with a base directory on local disk for object files.

    Attributes
    ----------
    directory : string
        Base directory for object files
    """
    def __init__(self, mongo_collection, base_directory, properties=None):
        """Raises ValueError if the base directory does not exist."""
        super(DefaultObjectStore, self).__init__(mongo_collection, properties)
        if not os.access(base_directory, os.F_OK):
            raise ValueError('directory does not exist: ' + base_directory)
        if not os.path.isdir(base_directory):
            raise ValueError('not a directory: ' + base_directory)
        self.directory = base_directory


def format_timestamp(timestamp):
    """Timestamp string with a fixed number of digits, so that the string
    order of stored timestamps is their time order.

    Parameters
    ----------
    timestamp : datetime.datetime

    Returns
    -------
    string
    """
    return timestamp.strftime(TIMESTAMP_FORMAT)


def parse_timestamp(text):
    """Parse a timestamp written by format_timestamp(). Strings without a
    microseconds part (isoformat() of a timestamp with zero microseconds) are
    accepted as well.
    """
    if '.' in text:
        return datetime.datetime.strptime(text, TIMESTAMP_FORMAT)
    return datetime.datetime.strptime(text, '%Y-%m-%dT%H:%M:%S')
