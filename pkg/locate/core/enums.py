"""Core enums used across modules."""

from enum import StrEnum


class BackboneKindEnum(StrEnum):
    """Dense feature extractor implementation."""

    SYNTHETIC = "synthetic"
    VIT_ADAPTER = "vit-adapter"


class TransferModeEnum(StrEnum):
    """Knowledge transfer granularity between the two views."""

    GKT = "GKT"
    RKT = "RKT"


class SettingEnum(StrEnum):
    """Evaluation setting of the dataset."""

    SEEN = "seen"
    UNSEEN = "unseen"


class SplitEnum(StrEnum):
    """Dataset split."""

    TRAIN = "train"
    TEST = "test"


class ViewEnum(StrEnum):
    """Camera view of an image."""

    EGOCENTRIC = "egocentric"
    EXOCENTRIC = "exocentric"


class PatchRoleEnum(StrEnum):
    """Semantic role of a planted patch in synthetic scenes."""

    BACKGROUND = "background"
    HUMAN = "human"
    OBJECT_PART = "object_part"
    OBJECT_OTHER = "object_other"


class SelectionOutcomeEnum(StrEnum):
    """Outcome of the object-part prototype selection for one sample."""

    SELECTED = "selected"
    GATED = "gated"
    TOO_FEW_EMBEDDINGS = "too_few_embeddings"
    EMPTY_BAG = "empty_bag"
    NOT_REQUESTED = "not_requested"
