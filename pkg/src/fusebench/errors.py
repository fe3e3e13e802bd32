"""Error types shared across the toolkit."""


class ContractError(ValueError):
    """An input violated a documented precondition (bad file, bad shape,
    bad label, bad manifest). The CLI maps this to exit code 1."""
