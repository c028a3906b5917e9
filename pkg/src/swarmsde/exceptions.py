class DivergenceError(FloatingPointError):
    """Raised when the swarm state leaves the finite range (explosion)."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"swarm diverged at step {step}")
