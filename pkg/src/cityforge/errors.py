"""Error taxonomy shared by every service module.

Each exception maps to one HTTP status so the API layer can translate
uniformly; core modules raise these directly and never import HTTP code.
"""


class CityForgeError(Exception):
    """Base class for all service errors."""

    http_status = 500


class ValidationError(CityForgeError):
    """Malformed or semantically invalid input."""

    http_status = 400


class ProtocolError(CityForgeError):
    """Request body does not match the documented wire format."""

    http_status = 400


class NotFoundError(CityForgeError):
    http_status = 404


class ConflictError(CityForgeError):
    """Duplicate key or refused delete while referenced."""

    http_status = 409


class StateError(CityForgeError):
    """Operation not permitted in the object's current lifecycle state."""

    http_status = 409


class AuthorizationError(CityForgeError):
    """Bad or missing ingest token."""

    http_status = 401
