class MissingPropertyException(Exception):
    pass


class CacheDisabledException(Exception):
    pass


class Config:
    def __init__(self, cache_available, values):
        self.cache_available = cache_available
        self.values = dict(values)

    def get_cache_availability(self):
        return self.cache_available

    def get_property(self, key, cached):
        if key not in self.values:
            raise MissingPropertyException(key)
        return self.values[key]


def read_property(config, key):
    is_cache_activated = False
    try:
        is_cache_activated = config.get_cache_availability()
        return config.get_property(key, is_cache_activated)
    except MissingPropertyException:
        if is_cache_activated:
            return "missing property"
        raise CacheDisabledException(key)
