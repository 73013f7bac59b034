"""
Reduce Controller - standalone reduction + stiffness bounding of a ContactSet document
"""

import json
import logging
from pathlib import Path
from typing import Dict, Optional

from ..lib.contacts import contact_set_json, load_contact_set, net_stiffness_diagonal
from ..lib.errors import InvalidParameterError
from ..lib.reducer import reduce_contacts
from ..lib.stiffness_qp import scale_contacts
from ..models.schema import ReductionConfig, StiffnessBound
from ..utils.artifacts import atomic_write_text

logger = logging.getLogger(__name__)


def diagnostics_path(output: Path) -> Path:
    return output.with_name(output.stem + ".diagnostics.json")


def reduce_file(input_path: str, output_path: str, k: int = 10, c: Optional[float] = None,
                k_max: Optional[float] = None, factor: Optional[float] = None) -> Dict:
    """
    Controller to reduce and bound one contact set file

    Args:
        input_path: ContactSet JSON document
        output_path: where the reduced and scaled ContactSet document goes
        k: cluster count
        c: metric weight; None derives it from the bounding box
        k_max / factor: stiffness bound, at most one of them; neither means factor 2

    Returns:
        Diagnostics dictionary (also written next to the output)
    """
    if k_max is not None and factor is not None:
        raise InvalidParameterError("give either k_max or factor, not both")
    bound = StiffnessBound(k_max=k_max) if k_max is not None else StiffnessBound(factor=factor or 2.0)
    contacts = load_contact_set(input_path)
    result = reduce_contacts(contacts, ReductionConfig(k=k, c=c))
    limit = bound.resolve(contacts.stiffness)
    scaled, solution = scale_contacts(result.contacts, limit)

    output = Path(output_path)
    atomic_write_text(output, contact_set_json(scaled, indent=2))
    diagnostics = {
        "input": str(input_path),
        "output": str(output),
        "count_before": len(contacts),
        "count_after": len(scaled),
        "net_stiffness_before": net_stiffness_diagonal(contacts).tolist(),
        "net_stiffness_after": net_stiffness_diagonal(scaled).tolist(),
        "k_max": limit,
        "qp_objective": solution.objective,
        "active_axes": sorted(solution.active_axes),
        "kmeans_iterations": None if result.assignment is None else result.assignment.iterations,
        "passed_through": result.passed_through,
    }
    atomic_write_text(diagnostics_path(output), json.dumps(diagnostics, indent=2))
    logger.info("reduced %d -> %d contacts, objective %.4g", len(contacts), len(scaled), solution.objective)
    return diagnostics
