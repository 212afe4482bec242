"""Comparison scheme: every node gets an equal share of the server CPU.

With ``f_mec,k = f_mec_max / M`` fixed, the single remote-time equality
splits into one inequality per node,

    r_mec_k * C * M / f_mec_max <= T - tau_r - sum_j t_off_j,

each with its own multiplier ``zeta_k``. The switching values change only
through the coupling: offload and relay times see ``sum_j zeta_j`` and the
offloaded bits of node k see ``zeta_k * C * M / f_mec_max``. The dual and
recovery machinery is otherwise shared with the main solver.
"""

from __future__ import annotations

from typing import Optional

from .dual import EQUAL
from .recovery import SolverSettings, SolveReport, solve_instance


def solve_equal_allocation(instance, settings: Optional[SolverSettings] = None) -> SolveReport:
    """Optimal times, energies and bits under the equal processor split.

    The returned report has ``method == "equal"`` and ``f_mec`` set to
    ``f_mec_max / M`` for every node.
    """
    return solve_instance(instance, settings, coupling=EQUAL)
