import unittest

import fwmcat.attribute as attributes
from fwmcat.errors import ConfigurationError


DEFINITIONS = [
    attributes.AttributeDefinition('name', 'Name', 'Scenario name', attributes.StringType(), default='test'),
    attributes.AttributeDefinition(
        'space', 'Space', 'Truncation', attributes.DictType([
            attributes.AttributeDefinition(
                'max_occ', 'Max. occupation', 'Per-mode caps',
                attributes.ListType(attributes.IntType(min_value=0), length=3)
            ),
            attributes.AttributeDefinition(
                'total_cap', 'Total cap', 'Cap on the total photon number',
                attributes.IntType(min_value=0), nullable=True
            )
        ])
    ),
    attributes.AttributeDefinition(
        'step', 'Step', 'Time step', attributes.FloatType(min_value=0, exclusive=True), default=0.01
    ),
    attributes.AttributeDefinition(
        'method', 'Method', 'Solver', attributes.EnumType(['auto', 'unitary']), default='auto'
    )
]


class TestAttributes(unittest.TestCase):

    def setUp(self):
        """Create list of attribute data types."""
        self.data_types = [
            attributes.IntType(),
            attributes.IntType(min_value=1),
            attributes.FloatType(),
            attributes.FloatType(min_value=0, exclusive=True),
            attributes.ComplexType(),
            attributes.StringType(),
            attributes.ListType(attributes.FloatType(), length=3),
            attributes.EnumType(['A', 'B'])
        ]

    def test_type_identifiers(self):
        """Every data type carries its identifier and validates the values
        that it parses from strings.
        """
        samples = ['3', '3', '0.5', '0.5', '9,0.78', 'x', '1,2,3', 'A']
        identifiers = [
            attributes.ATTR_TYPE_INT,
            attributes.ATTR_TYPE_INT,
            attributes.ATTR_TYPE_FLOAT,
            attributes.ATTR_TYPE_FLOAT,
            attributes.ATTR_TYPE_COMPLEX,
            attributes.ATTR_TYPE_STRING,
            attributes.ATTR_TYPE_LIST,
            attributes.ATTR_TYPE_ENUM
        ]
        for datatype, sample, identifier in zip(self.data_types, samples, identifiers):
            self.assertEqual(datatype.identifier, identifier)
            datatype.test_value(datatype.from_string(sample))

    def test_parse_value(self):
        """Check from_string methods for data types."""
        # Float
        t = attributes.FloatType()
        self.assertEqual(t.from_string('0.1'), 0.1)
        with self.assertRaises(ValueError):
            t.from_string('abc')
        with self.assertRaises(ValueError):
            attributes.FloatType(min_value=0, exclusive=True).from_string('0')
        # Int
        t = attributes.IntType()
        self.assertEqual(t.from_string('1'), 1)
        with self.assertRaises(ValueError):
            t.from_string('0.45')
        # Enum
        t = attributes.EnumType(['A', 'B'])
        self.assertEqual(t.from_string(' A'), 'A')
        with self.assertRaises(ValueError):
            t.from_string('0.45')
        # Complex
        t = attributes.ComplexType()
        self.assertEqual(t.from_string('9,0.5'), {'abs2': 9.0, 'phase': 0.5})
        self.assertEqual(t.from_string('{"abs2": 1, "phase": 0}'), {'abs2': 1.0, 'phase': 0.0})
        with self.assertRaises(ValueError):
            t.from_string('9')
        with self.assertRaises(ValueError):
            t.from_string('-1,0')
        # List
        t = attributes.ListType(attributes.IntType())
        self.assertEqual(t.from_string('[1, 2, 3]'), [1, 2, 3])
        self.assertEqual(t.from_string('4,5'), [4, 5])
        self.assertEqual(t.from_string('[]'), [])
        with self.assertRaises(ValueError):
            t.from_string('abc')
        with self.assertRaises(ValueError):
            attributes.ListType(attributes.IntType(), length=2).from_string('1,2,3')

    def test_type_check(self):
        """Check test_value methods for data types."""
        # Float
        t = attributes.FloatType()
        t.test_value(0.1)
        t.test_value(1)
        with self.assertRaises(ValueError):
            t.test_value('abc')
        with self.assertRaises(ValueError):
            t.test_value(True)
        # Int
        t = attributes.IntType(min_value=0)
        t.test_value(1)
        with self.assertRaises(ValueError):
            t.test_value(0.45)
        with self.assertRaises(ValueError):
            t.test_value(-1)
        # Enum
        t = attributes.EnumType(['A', 'B'])
        t.test_value('A')
        with self.assertRaises(ValueError):
            t.test_value('0.45')
        # Complex
        t = attributes.ComplexType()
        t.test_value({'abs2': 9, 'phase': 0.785398})
        with self.assertRaises(ValueError):
            t.test_value({'abs2': 9})
        with self.assertRaises(ValueError):
            t.test_value({'abs2': 9, 'phase': 0, 'x': 1})
        # List
        t = attributes.ListType(attributes.FloatType(), min_length=1)
        t.test_value([1, 2, 3])
        with self.assertRaises(ValueError):
            t.test_value('abc')
        with self.assertRaises(ValueError):
            t.test_value([])

    def test_complex_value(self):
        """Amplitudes are given by squared magnitude and phase."""
        value = attributes.ComplexType.to_complex({'abs2': 9.0, 'phase': 0.0})
        self.assertAlmostEqual(value, 3.0)
        value = attributes.ComplexType.to_complex({'abs2': 4.0, 'phase': 1.5707963267948966})
        self.assertAlmostEqual(value, 2j)


class TestDocuments(unittest.TestCase):

    def test_validate_document(self):
        """Defaults are filled in and values normalized."""
        doc = attributes.validate_document({'space': {'max_occ': [1, 2, 3]}, 'step': 1}, DEFINITIONS)
        self.assertEqual(doc['name'], 'test')
        self.assertEqual(doc['space'], {'max_occ': [1, 2, 3], 'total_cap': None})
        self.assertIsInstance(doc['step'], float)
        self.assertEqual(doc['method'], 'auto')

    def test_invalid_documents(self):
        """Unknown keys, missing keys and invalid values name the key."""
        invalid = [
            ({'space': {'max_occ': [1, 2, 3]}, 'unknown': 1}, 'unknown'),
            ({'space': {'max_occ': [1, 2, 3], 'cap': 1}}, 'space.cap'),
            ({}, 'space'),
            ({'space': {}}, 'space.max_occ'),
            ({'space': {'max_occ': [1, 2]}}, 'space.max_occ'),
            ({'space': {'max_occ': [1, 2, 3]}, 'step': 0}, 'step'),
            ({'space': {'max_occ': [1, 2, 3]}, 'method': 'dense'}, 'method'),
            ({'space': {'max_occ': [1, 2, 3]}, 'name': None}, 'name'),
            ({'space': 'abc'}, 'space')
        ]
        for doc, key in invalid:
            with self.assertRaises(ConfigurationError) as cm:
                attributes.validate_document(doc, DEFINITIONS)
            self.assertIn(key, str(cm.exception))

    def test_load_json(self):
        """Duplicate keys and syntax errors are configuration errors."""
        self.assertEqual(attributes.load_json('{"a": {"b": 1}}'), {'a': {'b': 1}})
        with self.assertRaises(ConfigurationError):
            attributes.load_json('{"a": 1, "a": 2}')
        with self.assertRaises(ConfigurationError):
            attributes.load_json('{"a": {"b": 1, "b": 1}}')
        with self.assertRaises(ConfigurationError):
            attributes.load_json('{"a": ')

    def test_set_value(self):
        """Dotted keys override nested values."""
        doc = {}
        attributes.set_value(doc, 'space.max_occ', '4,4,6', DEFINITIONS)
        attributes.set_value(doc, 'space.total_cap', 'null', DEFINITIONS)
        attributes.set_value(doc, 'step', '0.05', DEFINITIONS)
        self.assertEqual(doc, {'space': {'max_occ': [4, 4, 6], 'total_cap': None}, 'step': 0.05})
        with self.assertRaises(ConfigurationError):
            attributes.set_value(doc, 'space.unknown', '1', DEFINITIONS)
        with self.assertRaises(ConfigurationError):
            attributes.set_value(doc, 'step.value', '1', DEFINITIONS)
        with self.assertRaises(ConfigurationError):
            attributes.set_value(doc, 'step', 'abc', DEFINITIONS)


if __name__ == '__main__':
    unittest.main()
