from .credential import (
    DEFAULT_ATTRIBUTES,
    AnonCredential,
    IssuerKey,
    IssuerPublicKey,
    Presentation,
    VerifierKey,
    credential_from_json,
    credential_to_json,
    issue_credential,
    issuer_setup,
    present,
    verify_credential,
    verify_presentation,
)
from .msp import (
    OrgCA,
    Role,
    Signer,
    StandardIdentity,
    enroll_member,
    enroll_signer,
    setup_org_ca,
    verify_member,
    verify_signature,
)

__all__ = [
    "DEFAULT_ATTRIBUTES", "AnonCredential", "IssuerKey", "IssuerPublicKey",
    "Presentation", "VerifierKey", "credential_from_json", "credential_to_json",
    "issue_credential", "issuer_setup", "present", "verify_credential",
    "verify_presentation", "OrgCA", "Role", "Signer", "StandardIdentity",
    "enroll_member", "enroll_signer", "setup_org_ca", "verify_member",
    "verify_signature",
]
