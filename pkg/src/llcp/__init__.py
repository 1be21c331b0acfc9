"""llcp: modeling and solving log-log convex programs.

Build expression trees over positive variables, verify them against the
disciplined composition rules, canonicalize verified problems to a smooth
convex program in log space, and solve that program with a barrier
interior-point method.
"""

from .analysis import (
    CurvatureJudgment,
    DgpReport,
    ProbeOutcome,
    ProbeResult,
    curvature,
    explain,
    is_dgp,
    numeric_curvature_probe,
)
from .atoms import (
    AtomDescriptor,
    Curvature,
    Monotonicity,
    atom_info,
    eval_atom,
    list_atoms,
)
from .barrier import (
    Phase1Result,
    SolverResult,
    SolverSettings,
    constraint_value_grad_hess,
    kkt_residual,
    phase1,
    solve,
)
from .canonicalize import (
    RetrievalMap,
    graph_eye_minus_inv,
    graph_pf_eigenvalue,
    lower,
    retrieve,
    tight_embedding,
)
from .cli import main, parse_problem_file, serialize_problem
from .errors import (
    DgpError,
    DomainError,
    LlcpError,
    ParseError,
    ProblemError,
    ShapeError,
    UnknownAtomError,
)
from .expressions import (
    AtomApplication,
    Constant,
    Constraint,
    Expression,
    Problem,
    Sense,
    Solution,
    Status,
    Variable,
    apply,
    constant,
    evaluate,
    variable,
)
from .shapes import Shape
from .standard_form import (
    AffineForm,
    ExpSumConstraint,
    ExpSumProgram,
    ProgramBuilder,
)

__version__ = "0.1.0"

__all__ = [
    "AffineForm",
    "AtomApplication",
    "AtomDescriptor",
    "Constant",
    "Constraint",
    "Curvature",
    "CurvatureJudgment",
    "DgpError",
    "DgpReport",
    "DomainError",
    "ExpSumConstraint",
    "ExpSumProgram",
    "Expression",
    "LlcpError",
    "Monotonicity",
    "ParseError",
    "Phase1Result",
    "ProbeOutcome",
    "ProbeResult",
    "Problem",
    "ProblemError",
    "ProgramBuilder",
    "RetrievalMap",
    "Sense",
    "Shape",
    "ShapeError",
    "Solution",
    "SolverResult",
    "SolverSettings",
    "Status",
    "UnknownAtomError",
    "Variable",
    "apply",
    "atom_info",
    "constant",
    "constraint_value_grad_hess",
    "curvature",
    "eval_atom",
    "evaluate",
    "explain",
    "graph_eye_minus_inv",
    "graph_pf_eigenvalue",
    "is_dgp",
    "kkt_residual",
    "list_atoms",
    "lower",
    "main",
    "numeric_curvature_probe",
    "parse_problem_file",
    "phase1",
    "retrieve",
    "serialize_problem",
    "solve",
    "tight_embedding",
    "variable",
]
