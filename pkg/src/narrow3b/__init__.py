"""Three-body loss rates near narrow Feshbach resonances.

Two-body model potentials and their effective-range parameters, the
zero-range hyperspherical channel at finite effective range, closed-form
narrow- and broad-resonance rates, and an independent numeric oracle for
the three-region hyperradial model behind the closed forms.
"""

__version__ = "0.1.0"
