//! Evaluation of functional aggregate queries with additive inequalities
//! over commutative semirings, the width parameters that govern their
//! cost, and the machine-learning and probabilistic-inference applications
//! built on top of the engine.

pub mod dominance;
pub mod engine;
pub mod error;
pub mod gen;
pub mod heavylight;
pub mod hypergraph;
pub mod join;
pub mod ml;
pub mod oracle;
pub mod prob;
pub mod query;
pub mod relation;
pub mod semiring;
pub mod simplex;
pub mod td;
pub mod value;
pub mod widths;

pub use dominance::{scan_oracle, DominanceIndex, Strictness, WeightedPoint};
pub use engine::{
    bag_factor, evaluate, evaluate_planned, evaluate_with_mode, plan, plan_with_mode,
    two_bag_eliminate, ElimStep, EvalPlan, PlanMode,
};
pub use error::{Error, Result};
pub use heavylight::{count_4cycle, count_path_ineq, cycle4_branches, degree_split, CycleBranches, DegreeSplit, PathIneqStats};
pub use hypergraph::{Hypergraph, SkeletonEdge, VarSet};
pub use join::{multiway_join, EvalCounters};
pub use ml::{bgd_train, cutting_plane_train, cutting_plane_train_report, kmeans_fit, loss_eval, wolfe_dual_solve, Feature, FeatureQuery, CuttingPlaneReport, KmeansResult, Loss, ModelParams, TrainConfig};
pub use oracle::{materialize_features, oracle_eval, oracle_worlds, reference_kmeans_objective, reference_lloyd_step, reference_objective};
pub use prob::{
    iq_probability, reduce_to_unary, transitive_reduce, InequalityGraph, IqFactor, IqQuery,
};
pub use query::{FactorBinding, FaqAiQuery, Ligament, TermExpr, UnaryTerm, ValueFactor};
pub use relation::{AnnotatedRelation, Database, Schema};
pub use semiring::{fold_add, fold_mul, SemiringId, SemiringValue};
pub use simplex::{rat, rat_display, rat_frac, Rat};
pub use td::{
    enumerate_tds, make_non_redundant, validate_relaxed, CoverageReport, LigamentWitness,
    TreeDecomposition,
};
pub use value::Value;
pub use widths::{faqw, max_h_over_bag, rho_star, smfw, ConeSpace, WidthKind, WidthReport};
