"""Pseudomode quantum electrodynamics of an emitter coupled to a dielectric microsphere."""
from .mie import ResonatorSpec
from .poles import Pole, PoleSet, enumerate_poles
from .pseudomodes import CALIBRATED_R_EMIT, EmitterSpec, PseudomodeSet, build_pseudomodes
from .dynamics import assemble_generator, evolve, lamb_shift, tune_omega0, two_mode_approx

__all__ = ["ResonatorSpec", "Pole", "PoleSet", "enumerate_poles", "CALIBRATED_R_EMIT", "EmitterSpec",
           "PseudomodeSet", "build_pseudomodes", "assemble_generator", "evolve", "lamb_shift", "tune_omega0",
           "two_mode_approx"]
__version__ = "0.1.0"
