class MissingPropertyException(Exception):
    pass


class PropertyStore:
    def __init__(self, file_values, cached=()):
        self.file_values = dict(file_values)
        self.cache = {k: self.file_values[k] for k in cached}

    def get_property_from_cache(self, key):
        if key not in self.cache:
            raise MissingPropertyException(key)
        return self.cache[key]

    def get_property_from_file(self, key):
        return self.file_values.get(key, "")

    def get_property(self, key):
        try:
            return self.get_property_from_cache(key)
        except MissingPropertyException:
            return self.get_property_from_file(key)
