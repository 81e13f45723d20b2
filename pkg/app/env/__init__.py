# Relay-selection environment (threshold heuristic as the step function)
