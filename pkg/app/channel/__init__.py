# Channel synthesis: arrays, geometric paths, blockage, mobility
