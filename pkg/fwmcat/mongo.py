"""MongoDB client factory - Trajectory ensembles are simulated by worker
processes. Each process that needs the run registry should therefore create its
own client instance. The MongoDBFactory is the central place to establish the
connection to the database that holds scenario run records.
"""

from pymongo import MongoClient


class MongoDBFactory(object):
    """Factory to establish connection to the mongo database that holds the
    scenario run registry.

    Attributes
    ----------
    db_name : string
        Name of the database
    client_class : class
        Client implementation (pymongo.MongoClient or a drop-in replacement,
        e.g., mongomock.MongoClient in test cases)
    """
    def __init__(self, db_name='fwmcat', client_class=MongoClient):
        """Initialize the database name and client class.

        Parameters
        ----------
        db_name : string, optional
            Name of the database (default: fwmcat)
        client_class : class, optional
            Client implementation
        """
        self.db_name = db_name
        self.client_class = client_class
        self._client = None

    @property
    def client(self):
        """Lazily created client instance."""
        if self._client is None:
            self._client = self.client_class()
        return self._client

    def drop_database(self):
        """Drop the database the factory connects to."""
        self.client.drop_database(self.db_name)

    def get_database(self):
        """Get the mongo database object.

        Returns
        -------
        pymongo.database.Database
        """
        return self.client[self.db_name]
