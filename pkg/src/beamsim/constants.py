"""Physical constants shared across the simulator (SI unless noted)."""

EARTH_RADIUS_KM = 6371.0
GEO_ALTITUDE_KM = 35_786.0
BOLTZMANN = 1.380649e-23      # J/K
SPEED_OF_LIGHT = 299_792_458.0  # m/s
