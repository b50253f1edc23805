"""Exception hierarchy shared by all eodistort modules."""


class EoDistortError(Exception):
    """Base class for all errors raised by this package."""


class MissingFile(EoDistortError):
    """A required input file does not exist."""


class MalformedRaster(EoDistortError):
    """A raster file is not a supported 8-bit PNG of the expected kind."""


class IoFailure(EoDistortError):
    """Writing an output file failed."""


class MalformedManifest(EoDistortError):
    """A dataset manifest is syntactically or structurally invalid."""


class EmptySplit(EoDistortError):
    """A dataset operation was asked to run over a split with no entries."""


class DimensionMismatch(EoDistortError):
    """Two rasters that must share dimensions do not."""


class IntensityOutOfRange(EoDistortError):
    """A distortion intensity lies outside [0, 1]."""


class UnknownClass(EoDistortError):
    """A label value is absent from the class table in use."""


class NoDefinedClasses(EoDistortError):
    """No class has a defined IoU, so a mean cannot be formed."""


class ExternalCommandFailed(EoDistortError):
    """An external predictor command exited nonzero."""


class ExternalTimeout(EoDistortError):
    """An external predictor command exceeded its time budget."""


class MissingPrediction(EoDistortError):
    """One or more expected prediction files were not produced.

    ``ids`` holds the exact list of absent ids.
    """

    def __init__(self, ids: list[str], where: str = ""):
        self.ids = list(ids)
        suffix = f" in {where}" if where else ""
        super().__init__(f"missing predictions{suffix}: {', '.join(self.ids)}")


class SweepCellError(EoDistortError):
    """An error inside one sweep cell, tagged with its coordinates.

    ``partial_records`` carries every record completed before the failure so
    callers can flush partial results.
    """

    def __init__(self, transform: str, class_id: int, intensity: float,
                 replicate: int, image_id: str | None, cause: Exception,
                 partial_records: list | None = None):
        self.transform = transform
        self.class_id = class_id
        self.intensity = intensity
        self.replicate = replicate
        self.image_id = image_id
        self.cause = cause
        self.partial_records = partial_records or []
        tag = f"(transform={transform}, class={class_id}, intensity={intensity}, replicate={replicate}"
        tag += f", image={image_id})" if image_id else ")"
        super().__init__(f"sweep cell failed {tag}: {cause}")
