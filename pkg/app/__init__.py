# RelayBeam - joint relay selection and beam management simulator
__version__ = "0.1.0"
