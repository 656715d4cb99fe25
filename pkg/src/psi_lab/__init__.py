"""Point-source atom interferometer IMU toolkit."""
__version__ = "0.1.0"
