import unittest

from app.collector import DatabaseException, MemoryDatabaseCollector


class MemoryDatabaseCollectorTest(unittest.TestCase):
    def test_nominal_start(self):
        c = MemoryDatabaseCollector()
        c.start()
        self.assertEqual(c.entity_manager_factory, "jdbc")

    def test_recovers_after_start(self):
        c = MemoryDatabaseCollector(fail_after_start=True)
        c.start()
        self.assertEqual(c.entity_manager_factory, "in-memory")

    def test_fails_before_start(self):
        c = MemoryDatabaseCollector(fail_before_start=True)
        with self.assertRaises(DatabaseException):
            c.start()
