# Beam sweeping, alignment durations and rate computation
