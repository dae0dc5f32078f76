# GENERATED VERSION FILE
# TIME: Sat Oct 17 03:10:27 2026

__version__ = '0.1.0+unknown'
short_version = '0.1.0'
