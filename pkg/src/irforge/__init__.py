"""irforge: compile incident-response tabletop exercises from an issue and
trigger-event catalog, then run them live and debrief."""

__version__ = "0.1.0"
