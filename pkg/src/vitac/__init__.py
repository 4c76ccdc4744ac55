"""Desk-scale visual-tactile pushing laboratory.

Subpackages cover a numpy autodiff substrate (:mod:`vitac.tensor`,
:mod:`vitac.nn`, :mod:`vitac.optim`), simulated contact-depth touch
(:mod:`vitac.tactile`), a planar pushing world (:mod:`vitac.world`),
vision-to-touch generation (:mod:`vitac.vtgen`), contrastive visual-tactile
reinforcement learning (:mod:`vitac.vtcon`), and the experiment harness
(:mod:`vitac.dataset`, :mod:`vitac.experiments`, :mod:`vitac.cli`).
"""

__version__ = "0.1.0"
