from typing import Optional

import numpy as np

from surfrig.appearance.asg import reflect
from surfrig.appearance.sh import eval_sh
from surfrig.appearance.specular import specular_or_zero
from surfrig.models.appearance import SpecularHead
from surfrig.rig.skinning import rotate_view_dir


def total_color(sh, head: Optional[SpecularHead], d, U_b, n) -> np.ndarray:
    """
    c = c_d + c_s with d_rot = U_bᵀ d; unclamped (clamping happens at render).

    ``n`` is the normal in the same frame as d_rot.
    """
    d_rot = rotate_view_dir(d, U_b)
    c_d = eval_sh(sh, d_rot)
    c_s = specular_or_zero(head, reflect(d_rot, n), d_rot, n)
    return c_d + c_s
