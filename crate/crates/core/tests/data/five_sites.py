import json


def load(path):
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError:
        return {}
    except (ValueError, UnicodeDecodeError):
        try:
            return {"raw": open(path).read()}
        except OSError:
            return None


class Cache:
    def get(self, key):
        try:
            return self._data[key]
        except KeyError:
            pass
        finally:
            self.hits += 1

    def close(self):
        try: self._data.clear()
        except: pass
