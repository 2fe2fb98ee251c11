"""JSON sidecar formats: external detections, embeddings, ground truth.

Externally produced boxes and feature vectors enter the pipeline through
these files so that learned models stay out of process.
"""

import json

DETECTION_KINDS = ("table", "symbol")
OUTLIER_LABEL = "outlier"


class SidecarError(ValueError):
    """Malformed sidecar document; the message names the offending record."""


def _as_document(doc):
    if isinstance(doc, (str, bytes)):
        try:
            return json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SidecarError(f"invalid JSON: {exc}") from exc
    return doc


def _require(cond, where, msg):
    if not cond:
        raise SidecarError(f"{where}: {msg}")


def _int_field(rec, key, where):
    value = rec.get(key)
    _require(isinstance(value, int) and not isinstance(value, bool), where, f"field '{key}' must be an integer")
    return value


def parse_detection_sidecar(doc):
    """Validate a detection sidecar and return {image_id: [detection dict]}.

    Each detection dict carries kind, x, y, w, h, confidence. Unknown
    fields are ignored; unknown kinds are rejected.
    """
    doc = _as_document(doc)
    _require(isinstance(doc, dict), "document", "top level must be an object")
    images = doc.get("images")
    _require(isinstance(images, list), "document", "'images' must be a list")
    out = {}
    for i, entry in enumerate(images):
        where = f"images[{i}]"
        _require(isinstance(entry, dict), where, "must be an object")
        image_id = entry.get("id")
        _require(isinstance(image_id, str) and image_id, where, "'id' must be a non-empty string")
        _require(image_id not in out, where, f"duplicate image id '{image_id}'")
        dets = entry.get("detections")
        _require(isinstance(dets, list), where, "'detections' must be a list")
        parsed = []
        for j, rec in enumerate(dets):
            rwhere = f"images[{i}].detections[{j}] (image '{image_id}')"
            _require(isinstance(rec, dict), rwhere, "must be an object")
            kind = rec.get("kind")
            _require(kind in DETECTION_KINDS, rwhere, f"unknown kind {kind!r}")
            x = _int_field(rec, "x", rwhere)
            y = _int_field(rec, "y", rwhere)
            w = _int_field(rec, "w", rwhere)
            h = _int_field(rec, "h", rwhere)
            _require(w > 0 and h > 0, rwhere, "width and height must be positive")
            _require(x >= 0 and y >= 0, rwhere, "x and y must be non-negative")
            conf = rec.get("confidence")
            _require(isinstance(conf, (int, float)) and not isinstance(conf, bool), rwhere, "'confidence' must be a number")
            _require(0.0 <= conf <= 1.0, rwhere, f"confidence {conf} outside [0, 1]")
            parsed.append({"kind": kind, "x": x, "y": y, "w": w, "h": h, "confidence": float(conf)})
        out[image_id] = parsed
    return out


def serialize_detection_sidecar(mapping) -> str:
    doc = {
        "images": [
            {"id": image_id, "detections": list(dets)}
            for image_id, dets in mapping.items()
        ]
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def parse_embedding_sidecar(doc):
    """Validate an embedding sidecar, returning (dim, {id: vector})."""
    doc = _as_document(doc)
    _require(isinstance(doc, dict), "document", "top level must be an object")
    dim = doc.get("dim")
    _require(isinstance(dim, int) and not isinstance(dim, bool) and dim > 0, "document", "'dim' must be a positive integer")
    entries = doc.get("entries")
    _require(isinstance(entries, list), "document", "'entries' must be a list")
    out = {}
    for i, rec in enumerate(entries):
        where = f"entries[{i}]"
        _require(isinstance(rec, dict), where, "must be an object")
        eid = rec.get("id")
        _require(isinstance(eid, str) and eid, where, "'id' must be a non-empty string")
        _require(eid not in out, where, f"duplicate id '{eid}'")
        values = rec.get("values")
        _require(isinstance(values, list), f"{where} ('{eid}')", "'values' must be a list")
        _require(len(values) == dim, f"{where} ('{eid}')", f"expected {dim} values, got {len(values)}")
        floats = []
        for v in values:
            _require(isinstance(v, (int, float)) and not isinstance(v, bool), f"{where} ('{eid}')", "values must be numbers")
            v = float(v)
            _require(v == v and abs(v) != float("inf"), f"{where} ('{eid}')", "values must be finite")
            floats.append(v)
        out[eid] = floats
    return dim, out


def serialize_embedding_sidecar(dim, entries) -> str:
    doc = {
        "dim": dim,
        "entries": [{"id": eid, "values": list(values)} for eid, values in entries.items()],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def embedding_ref(eid: str):
    """Split an embedding id into its role: 'det:3' -> ('det', 3), 'tpl:1' -> ('tpl', 1)."""
    for prefix in ("det", "tpl"):
        head = prefix + ":"
        if eid.startswith(head):
            try:
                return prefix, int(eid[len(head):])
            except ValueError:
                break
    raise SidecarError(f"embedding id '{eid}' is not det:<i> or tpl:<c>")


def parse_ground_truth(doc):
    """Validate ground truth, returning {image_id: [annotation dict]}.

    Annotation labels are either a non-negative class id or the string
    'outlier'.
    """
    doc = _as_document(doc)
    _require(isinstance(doc, dict), "document", "top level must be an object")
    images = doc.get("images")
    _require(isinstance(images, list), "document", "'images' must be a list")
    out = {}
    for i, entry in enumerate(images):
        where = f"images[{i}]"
        _require(isinstance(entry, dict), where, "must be an object")
        image_id = entry.get("id")
        _require(isinstance(image_id, str) and image_id, where, "'id' must be a non-empty string")
        _require(image_id not in out, where, f"duplicate image id '{image_id}'")
        anns = entry.get("annotations")
        _require(isinstance(anns, list), where, "'annotations' must be a list")
        parsed = []
        for j, rec in enumerate(anns):
            rwhere = f"images[{i}].annotations[{j}] (image '{image_id}')"
            _require(isinstance(rec, dict), rwhere, "must be an object")
            x = _int_field(rec, "x", rwhere)
            y = _int_field(rec, "y", rwhere)
            w = _int_field(rec, "w", rwhere)
            h = _int_field(rec, "h", rwhere)
            _require(w > 0 and h > 0, rwhere, "width and height must be positive")
            _require(x >= 0 and y >= 0, rwhere, "x and y must be non-negative")
            label = rec.get("label")
            if label != OUTLIER_LABEL:
                _require(
                    isinstance(label, int) and not isinstance(label, bool) and label >= 0,
                    rwhere,
                    f"label must be a non-negative integer or '{OUTLIER_LABEL}', got {label!r}",
                )
            parsed.append({"x": x, "y": y, "w": w, "h": h, "label": label})
        out[image_id] = parsed
    return out


def serialize_ground_truth(mapping) -> str:
    doc = {
        "images": [
            {"id": image_id, "annotations": list(anns)}
            for image_id, anns in mapping.items()
        ]
    }
    return json.dumps(doc, indent=2, sort_keys=True)
