"""Exception hierarchy shared by the ledger, chaincode and network layers."""


class LedgerError(Exception):
    """Base class for domain errors raised by this package."""


class ChainError(LedgerError):
    """A block does not extend the chain (wrong number or previous hash)."""


class ChainGapError(ChainError):
    pass


class NotFoundError(LedgerError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class DuplicateRecordError(LedgerError):
    pass


class AccessDeniedError(LedgerError):
    pass


class PurgedError(LedgerError):
    """The public anchor exists but the private plaintext has been erased."""


class IntegrityError(LedgerError):
    pass


class UnauthenticatedError(LedgerError):
    pass


class CredentialError(LedgerError):
    pass


class ProofInvalidError(CredentialError):
    pass


class NonceMismatchError(CredentialError):
    pass


class MalformedPresentationError(CredentialError):
    pass
