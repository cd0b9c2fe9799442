"""Type skeleton of a JSON document: keys and value kinds, lists collapsed to their first element."""


def skeleton(obj):
    if isinstance(obj, dict):
        return {k: skeleton(v) for k, v in sorted(obj.items())}
    if isinstance(obj, list):
        return [skeleton(obj[0])] if obj else []
    if isinstance(obj, bool):
        return "bool"
    if isinstance(obj, (int, float)):
        return "number"
    if obj is None:
        return "null"
    return "string"
