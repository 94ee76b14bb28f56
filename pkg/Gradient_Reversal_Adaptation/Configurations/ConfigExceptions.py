class IDNotAvailableError(NotImplementedError):
    """
    Raised if a given ID does not exist in the preset configurations.
    """

    pass


class MissingFieldError(KeyError):
    """
    Raised if a configuration lacks a required field; the message names the field.
    """

    pass


class UnknownFieldError(KeyError):
    """
    Raised if a configuration or an override names a field that does not exist.
    """

    pass
