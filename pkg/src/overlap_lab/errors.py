"""Error types raised across the toolkit.

Every malformed input maps to one of these named errors; loaders never
crash with bare built-in exceptions and never silently accept bad data.
"""

from __future__ import annotations


class OverlapLabError(Exception):
    """Base class for all toolkit errors."""


class MalformedJson(OverlapLabError):
    """A JSON document failed to parse or does not match its schema."""


class DuplicateImageId(OverlapLabError):
    def __init__(self, image_id: str, where: str = "") -> None:
        self.image_id = image_id
        suffix = f" in {where}" if where else ""
        super().__init__(f"duplicate image id {image_id!r}{suffix}")


class LabelOutOfRange(OverlapLabError):
    def __init__(self, image_id: str, label_index: int, num_classes: int) -> None:
        self.image_id = image_id
        self.label_index = label_index
        super().__init__(
            f"image {image_id!r} has label_index {label_index}, "
            f"valid range is 0..{num_classes - 1}"
        )


class SizeMismatch(OverlapLabError):
    """A prediction-set file disagrees with the shape its meta declares."""


class UnknownImageId(OverlapLabError):
    def __init__(self, image_id: str, where: str = "") -> None:
        self.image_id = image_id
        suffix = f" ({where})" if where else ""
        super().__init__(f"unknown image id {image_id!r}{suffix}")


class NonFiniteScore(OverlapLabError):
    def __init__(self, run: str, row: int, column: int) -> None:
        self.run = run
        self.row = row
        self.column = column
        super().__init__(f"non-finite score in run {run!r} at row {row}, column {column}")


class DatasetIdMismatch(OverlapLabError):
    def __init__(self, found: str, expected: str) -> None:
        self.found = found
        self.expected = expected
        super().__init__(f"prediction set is for dataset {found!r}, manifest is {expected!r}")


class InvalidErrorClass(OverlapLabError):
    def __init__(self, value: str) -> None:
        self.value = value
        super().__init__(f"invalid error class {value!r}")


class MissingImageCoverage(OverlapLabError):
    def __init__(self, run: str, image_id: str) -> None:
        self.run = run
        self.image_id = image_id
        super().__init__(f"run {run!r} has no prediction for image {image_id!r}")


class TooManyMethods(OverlapLabError):
    def __init__(self, count: int, limit: int = 16) -> None:
        self.count = count
        super().__init__(f"{count} methods exceed the subset-enumeration limit of {limit}")


class EmptyImageSet(OverlapLabError):
    """An accuracy-style statistic was requested over zero images."""


class ReplicateCountMismatch(OverlapLabError):
    def __init__(self, method_id: str, expected: int, found: int) -> None:
        self.method_id = method_id
        super().__init__(
            f"method {method_id!r} supplies {found} replicates, expected {expected}"
        )


class IoFailure(OverlapLabError):
    """An underlying filesystem operation failed."""


class PortInUse(OverlapLabError):
    def __init__(self, port: int) -> None:
        self.port = port
        super().__init__(f"port {port} is already in use")


class MissingImagesRoot(OverlapLabError):
    def __init__(self, path: str) -> None:
        self.path = path
        super().__init__(f"images root {path!r} does not exist or is not a directory")
