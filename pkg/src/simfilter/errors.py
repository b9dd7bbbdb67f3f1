"""Exception types shared across the toolkit."""


class DataError(ValueError):
    """Input data violates a contract (bad manifest, empty class, ...)."""


class ManifestError(DataError):
    pass


class ZeroNormError(DataError):
    """One or more vectors have zero norm, so cosine similarity is undefined."""

    def __init__(self, image_ids):
        self.image_ids = list(image_ids)
        shown = ", ".join(self.image_ids[:10])
        more = "" if len(self.image_ids) <= 10 else f" (+{len(self.image_ids) - 10} more)"
        super().__init__(f"zero-norm vector(s), cosine similarity undefined: {shown}{more}")


class PlanMismatchError(DataError):
    pass


class StageOrderError(DataError):
    """A pipeline stage was run before the stage producing its input."""
