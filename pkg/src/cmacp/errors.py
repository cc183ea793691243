class FitError(RuntimeError):
    """A least-squares fit was refused or failed.

    ``diagnostics`` carries whatever the caller needs to see why (per-column
    amplitudes, per-depth fidelities, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
