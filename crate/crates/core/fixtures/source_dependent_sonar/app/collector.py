class DatabaseException(Exception):
    pass


class AbstractDatabaseCollector:
    def __init__(self, fail_before_start=False, fail_after_start=False):
        self.started = False
        self.fail_before_start = fail_before_start
        self.fail_after_start = fail_after_start
        self.entity_manager_factory = None

    def start(self):
        if self.fail_before_start:
            raise DatabaseException("cannot connect")
        self.started = True
        if self.fail_after_start:
            raise DatabaseException("schema mismatch")
        self.entity_manager_factory = "jdbc"


class MemoryDatabaseCollector(AbstractDatabaseCollector):
    def start(self):
        try:
            super().start()
        except DatabaseException:
            if not self.started:
                raise
            self.set_entity_manager_factory()

    def set_entity_manager_factory(self):
        self.entity_manager_factory = "in-memory"
