"""Exception hierarchy shared across the pipeline.

Every error carries a stable ``code`` string so the RPC layer can map
exceptions to JSON-RPC application error codes without string matching.
"""
from __future__ import annotations


class FediffError(Exception):
    """Base class for all pipeline errors."""

    code = "internal"


class InvalidArgument(FediffError):
    code = "invalid_argument"


# --- model gateway ---------------------------------------------------------

class ProviderUnavailable(FediffError):
    code = "provider_unavailable"


class AuthError(FediffError):
    code = "auth_error"


class OutputTooLarge(FediffError):
    code = "output_too_large"


class EmptyResponse(FediffError):
    code = "empty_response"


class DuplicateProvider(FediffError):
    code = "duplicate_provider"


class UnknownProvider(FediffError):
    code = "unknown_provider"


# --- design agent ----------------------------------------------------------

class MalformedSvg(FediffError):
    code = "malformed_svg"


class UnsupportedRasterFormat(FediffError):
    code = "unsupported_raster_format"


class ZeroAreaSketch(FediffError):
    code = "zero_area_sketch"


class PrdEmpty(FediffError):
    code = "prd_empty"


class StaleSpans(FediffError):
    code = "stale_spans"


# --- image client ----------------------------------------------------------

class SearchUnavailable(FediffError):
    code = "search_unavailable"


class NoResults(FediffError):
    code = "no_results"


class CacheCorrupt(FediffError):
    code = "cache_corrupt"


# --- code / critic agents --------------------------------------------------

class GenerationInvalid(FediffError):
    code = "generation_invalid"


# --- session store ---------------------------------------------------------

class KeyNotFound(FediffError):
    code = "key_not_found"


class NamespaceViolation(FediffError):
    code = "namespace_violation"


class UnknownParent(FediffError):
    code = "unknown_parent"


class RootAlreadyExists(FediffError):
    code = "root_already_exists"


class UnknownVersion(FediffError):
    code = "unknown_version"


class UnknownSession(FediffError):
    code = "unknown_session"


class BranchBusy(FediffError):
    code = "branch_busy"


class InvalidStateTransition(FediffError):
    code = "invalid_state_transition"
