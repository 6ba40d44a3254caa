"""Router/agent incidence matrices and their partition into cells and families."""

from .formation import CellFormation, ClusterConfig, check_formation, cluster_matrix, formation_from_partition
from .matrix import IncidenceMatrix, build_incidence_matrix, format_matrix_csv, parse_matrix_csv, read_matrix_csv
from .scoring import (
    Cluster,
    Partition,
    duplicated_agents,
    exceptional_elements,
    grouping_efficacy,
    majority_families,
    void_count,
)

__all__ = [
    "CellFormation",
    "Cluster",
    "ClusterConfig",
    "IncidenceMatrix",
    "Partition",
    "build_incidence_matrix",
    "check_formation",
    "cluster_matrix",
    "duplicated_agents",
    "exceptional_elements",
    "format_matrix_csv",
    "formation_from_partition",
    "grouping_efficacy",
    "majority_families",
    "parse_matrix_csv",
    "read_matrix_csv",
    "void_count",
]
