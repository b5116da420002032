"""Attributes - Typed definitions of configuration keys and helper methods to
validate Json-like configuration documents against them.

Scenario configurations are nested dictionaries. Each key of a dictionary is
declared by an attribute definition that names its data type and an optional
default value. Validation fills in defaults, rejects unknown keys and values of
the wrong type, and raises a ConfigurationError that names the offending key.
"""

from abc import abstractmethod
import cmath
import json

from fwmcat.errors import ConfigurationError


# ------------------------------------------------------------------------------
#
# Global Variables
#
# ------------------------------------------------------------------------------

ATTR_TYPE_COMPLEX = 'complex'
ATTR_TYPE_DICT = 'dict'
ATTR_TYPE_ENUM = 'enum'
ATTR_TYPE_FLOAT = 'float'
ATTR_TYPE_INT = 'int'
ATTR_TYPE_LIST = 'array'
ATTR_TYPE_STRING = 'string'


# ------------------------------------------------------------------------------
#
# Attribute definitions
#
# ------------------------------------------------------------------------------

class AttributeDefinition(object):
    """Definition of a typed configuration key. Each attribute has an
    identifier, name, description, and a type definition. The type definition
    determines the values that are valid for the attribute.

    Attributes
    ----------
    identifier : string
        Key of the attribute in configuration documents
    name : string
        Short attribute name
    description : string
        Detailed attribute description
    data_type : AttributeType
        Type defining valid attribute values
    default: any, optional
        Default value for missing keys. A missing key without default is an
        error unless the attribute is nullable.
    nullable : Boolean, optional
        Accept None as value
    """
    def __init__(self, identifier, name, description, data_type, default=None, nullable=False):
        self.identifier = identifier
        self.name = name
        self.description = description
        self.data_type = data_type
        self.default = default
        self.nullable = nullable


class AttributeType(object):
    """Abstract attribute data type. Defines abstract methods to parse and
    validate attribute values. Each type has a unique identifier.

    Attributes
    ----------
    identifier : string
        Unique data type identifier
    """
    def __init__(self, identifier):
        """Initialize the type identifier.

        Parameters
        ----------
        identifier : string
            Unique data type identifier
        """
        self.identifier = identifier

    @abstractmethod
    def from_string(self, value):
        """Method to convert given string into a value of this data type.

        Will throw a ValueError if the given value is not a valid representation
        of a value of this type.

        Parameters
        ----------
        value : string
            String representation of a value of this data type

        Returns
        -------
        any
        """
        pass

    def normalize(self, value):
        """Validate the value and return it in canonical form. The default
        implementation returns the value unchanged.
        """
        self.test_value(value)
        return value

    @abstractmethod
    def test_value(self, value):
        """Test if a given value is of type that matches the given data type.
        Raises ValueError if value is not of valid type.

        Parameters
        ----------
        value : any
        """
        pass


class ComplexType(AttributeType):
    """Complex amplitude given as squared magnitude and phase, i.e.,
    {"abs2": 9, "phase": 0.785398}.
    """
    def __init__(self):
        """Initialize the type identifier in the super class."""
        super(ComplexType, self).__init__(ATTR_TYPE_COMPLEX)

    def from_string(self, value):
        """Convert string '<abs2>,<phase>' or a Json object to amplitude."""
        text = value.strip()
        if text.startswith('{'):
            return self.normalize(json.loads(text))
        tokens = text.split(',')
        if len(tokens) != 2:
            raise ValueError('expected <abs2>,<phase>: ' + value)
        return self.normalize({'abs2': float(tokens[0]), 'phase': float(tokens[1])})

    def normalize(self, value):
        """Convert components to float."""
        self.test_value(value)
        return {'abs2': float(value['abs2']), 'phase': float(value['phase'])}

    def test_value(self, value):
        """Test that value is a dictionary with numeric abs2 >= 0 and phase."""
        if not isinstance(value, dict) or set(value.keys()) != set(['abs2', 'phase']):
            raise ValueError('expected {"abs2": ..., "phase": ...}: ' + str(value))
        for key in ['abs2', 'phase']:
            if not is_number(value[key]):
                raise ValueError('expected numeric ' + key + ': ' + str(value[key]))
        if value['abs2'] < 0:
            raise ValueError('abs2 must not be negative: ' + str(value['abs2']))

    @staticmethod
    def to_complex(value):
        """Complex number sqrt(abs2) exp(i phase) for a normalized value.

        Returns
        -------
        complex
        """
        return cmath.rect(value['abs2'] ** 0.5, value['phase'])


class DictType(AttributeType):
    """Nested dictionary whose keys are declared by attribute definitions."""
    def __init__(self, definitions):
        """Initialize the type identifier in the super class and the
        definitions of the dictionary keys.

        Parameters
        ----------
        definitions : list(AttributeDefinition)
        """
        super(DictType, self).__init__(ATTR_TYPE_DICT)
        self.definitions = definitions

    def from_string(self, value):
        """Convert Json string to dictionary."""
        return self.normalize(json.loads(value))

    def normalize(self, value):
        """Validate the nested document and fill in defaults."""
        return validate_document(value, self.definitions)

    def test_value(self, value):
        """Test if value is a valid nested document."""
        self.normalize(value)


class EnumType(AttributeType):
    """Enumeration attribute data type."""
    def __init__(self, values):
        """Initialize the type identifier in the super class and list of values
        in the enumeration.

        Parameters
        ----------
        values : list(string)
            List of values in the enumeration
        """
        super(EnumType, self).__init__(ATTR_TYPE_ENUM)
        self.values = values

    def from_string(self, value):
        """Convert string to enum value."""
        value = value.strip()
        self.test_value(value)
        return value

    def test_value(self, value):
        """Test if value is an instance of enum."""
        if not value in self.values:
            raise ValueError('unknown enumeration value: ' + str(value))


class FloatType(AttributeType):
    """Float attribute data type. Integer values are accepted and converted.

    Attributes
    ----------
    min_value : float
        Lower bound or None
    exclusive : Boolean
        Lower bound is exclusive
    """
    def __init__(self, min_value=None, exclusive=False):
        """Initialize the type identifier in the super class."""
        super(FloatType, self).__init__(ATTR_TYPE_FLOAT)
        self.min_value = min_value
        self.exclusive = exclusive

    def from_string(self, value):
        """Convert string to float."""
        return self.normalize(float(value))

    def normalize(self, value):
        self.test_value(value)
        return float(value)

    def test_value(self, value):
        """Test if value is a number within bounds."""
        if not is_number(value):
            raise ValueError('expected float value: ' + str(type(value)))
        if not self.min_value is None:
            if value < self.min_value or (self.exclusive and value == self.min_value):
                relation = '>' if self.exclusive else '>='
                raise ValueError('expected value %s %s: %s' % (relation, str(self.min_value), str(value)))


class IntType(AttributeType):
    """Integer attribute data type.

    Attributes
    ----------
    min_value : int
        Inclusive lower bound or None
    """
    def __init__(self, min_value=None):
        """Initialize the type identifier in the super class."""
        super(IntType, self).__init__(ATTR_TYPE_INT)
        self.min_value = min_value

    def from_string(self, value):
        """Convert string to int."""
        return self.normalize(int(value))

    def test_value(self, value):
        """Test if value is an instance of int."""
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError('expected int value: ' + str(type(value)))
        if not self.min_value is None and value < self.min_value:
            raise ValueError('expected value >= %d: %d' % (self.min_value, value))


class ListType(AttributeType):
    """List attribute data type with typed elements.

    Attributes
    ----------
    element_type : AttributeType
    length : int
        Required number of elements or None
    min_length : int
        Minimum number of elements
    """
    def __init__(self, element_type, length=None, min_length=0):
        """Initialize the type identifier in the super class."""
        super(ListType, self).__init__(ATTR_TYPE_LIST)
        self.element_type = element_type
        self.length = length
        self.min_length = min_length

    def from_string(self, value):
        """Convert comma separated string (with optional brackets) to list."""
        text = value.strip()
        if text.startswith('[') and text.endswith(']'):
            text = text[1:-1].strip()
        result = []
        if text != '':
            for val in text.split(','):
                result.append(self.element_type.from_string(val.strip()))
        return self.normalize(result)

    def normalize(self, value):
        if not isinstance(value, list):
            raise ValueError('expected list value: ' + str(type(value)))
        result = [self.element_type.normalize(val) for val in value]
        self.test_length(result)
        return result

    def test_length(self, value):
        if not self.length is None and len(value) != self.length:
            raise ValueError('expected %d elements: %d' % (self.length, len(value)))
        if len(value) < self.min_length:
            raise ValueError('expected at least %d elements: %d' % (self.min_length, len(value)))

    def test_value(self, value):
        """Test if value is a list of valid elements."""
        self.normalize(value)


class StringType(AttributeType):
    """String attribute data type."""
    def __init__(self):
        """Initialize the type identifier in the super class."""
        super(StringType, self).__init__(ATTR_TYPE_STRING)

    def from_string(self, value):
        return value

    def test_value(self, value):
        if not isinstance(value, str):
            raise ValueError('expected string value: ' + str(type(value)))


# ------------------------------------------------------------------------------
#
# Helper methods
#
# ------------------------------------------------------------------------------

def is_number(value):
    """True for int and float values (but not Boolean)."""
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def load_json(text):
    """Parse a Json document. Raises ConfigurationError for syntax errors and
    duplicate keys within an object.

    Parameters
    ----------
    text : string

    Returns
    -------
    dict
    """
    def unique_keys(pairs):
        result = {}
        for key, value in pairs:
            if key in result:
                raise ConfigurationError('duplicate key: ' + key)
            result[key] = value
        return result
    try:
        return json.loads(text, object_pairs_hook=unique_keys)
    except ValueError as ex:
        if isinstance(ex, ConfigurationError):
            raise
        raise ConfigurationError('invalid Json document: ' + str(ex))


def set_value(document, path, text, definitions):
    """Set the value of a (dotted) key in a configuration document from its
    string representation, e.g., set_value(doc, 'solver.n_traj', '100', defs).
    Intermediate dictionaries are created if missing.

    Parameters
    ----------
    document : dict
    path : string
    text : string
    definitions : list(AttributeDefinition)
    """
    keys = path.split('.')
    target = document
    for depth, key in enumerate(keys):
        valid_names = {para.identifier: para for para in definitions}
        if not key in valid_names:
            raise ConfigurationError('invalid parameter name: ' + '.'.join(keys[:depth + 1]))
        para = valid_names[key]
        if depth == len(keys) - 1:
            try:
                if para.nullable and text.strip().lower() in ['null', 'none']:
                    target[key] = None
                else:
                    target[key] = para.data_type.from_string(text)
            except ValueError as ex:
                raise ConfigurationError(path + ': ' + str(ex))
        else:
            if not isinstance(para.data_type, DictType):
                raise ConfigurationError('not a dictionary: ' + '.'.join(keys[:depth + 1]))
            if not isinstance(target.get(key), dict):
                target[key] = {}
            target = target[key]
            definitions = para.data_type.definitions


def validate_document(document, definitions, path=None):
    """Validate a configuration dictionary against a list of attribute
    definitions. Returns a new dictionary that contains every defined key with
    values in canonical form and defaults for missing keys.

    Raises ConfigurationError for keys that are not defined, missing keys
    without default, and values of invalid type.

    Parameters
    ----------
    document : dict
    definitions : list(AttributeDefinition)
    path : string, optional
        Key path of the document for error messages

    Returns
    -------
    dict
    """
    prefix = path + '.' if path else ''
    if not isinstance(document, dict):
        raise ConfigurationError('expected object for ' + (path or 'document'))
    valid_names = {}
    for para in definitions:
        valid_names[para.identifier] = para
    for key in document:
        if not key in valid_names:
            raise ConfigurationError('invalid parameter name: ' + prefix + key)
    result = {}
    for para in definitions:
        key = para.identifier
        if key in document:
            value = document[key]
        elif not para.default is None:
            value = json.loads(json.dumps(para.default))
        elif para.nullable:
            value = None
        else:
            raise ConfigurationError('missing parameter: ' + prefix + key)
        if value is None:
            if not para.nullable:
                raise ConfigurationError('parameter must not be null: ' + prefix + key)
            result[key] = None
            continue
        try:
            if isinstance(para.data_type, DictType):
                result[key] = validate_document(value, para.data_type.definitions, path=prefix + key)
            else:
                result[key] = para.data_type.normalize(value)
        except ConfigurationError:
            raise
        except (ValueError, TypeError) as ex:
            raise ConfigurationError(prefix + key + ': ' + str(ex))
    return result
