"""Band-model reduction of line-by-line radiative transfer."""
