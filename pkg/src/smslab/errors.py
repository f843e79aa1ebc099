"""Exception types shared across the package."""


class SmsLabError(Exception):
    """Base class for all smslab errors."""


class InvalidInput(SmsLabError, ValueError):
    """Raised when array data violates an operation's preconditions."""


class InvalidConfig(SmsLabError, ValueError):
    """Raised when a configuration value is out of range or inconsistent."""


class CorruptFile(SmsLabError):
    """Raised when a volume file fails a structural check; the message
    names the failing field and its byte offset."""
