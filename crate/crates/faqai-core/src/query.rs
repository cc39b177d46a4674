//! The query model: skeleton factor bindings, additive-inequality
//! ligaments with per-variable θ terms, optional per-variable value
//! weights, and the JSON file format the CLI reads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, SkeletonEdge, VarSet};
use crate::relation::Database;
use crate::semiring::SemiringId;
use crate::value::Value;

/// A univariate θ term. Affine is a·x + b; square is a·(x + b)²; negsquare
/// is −a·(x + b)²; table looks x up in a binary key→value relation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TermExpr {
    Affine { a: f64, b: f64 },
    Square { a: f64, b: f64 },
    Negsquare { a: f64, b: f64 },
    Table { table: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnaryTerm {
    pub var: String,
    pub expr: TermExpr,
}

impl UnaryTerm {
    /// Evaluate θ(x). Table lookups must be defined for every value that
    /// reaches them.
    pub fn eval(&self, x: &Value, db: &Database) -> Result<f64> {
        match &self.expr {
            TermExpr::Affine { a, b } => Ok(a * x.as_f64()? + b),
            TermExpr::Square { a, b } => {
                let v = x.as_f64()? + b;
                Ok(a * v * v)
            }
            TermExpr::Negsquare { a, b } => {
                let v = x.as_f64()? + b;
                Ok(-(a * v * v))
            }
            TermExpr::Table { table } => {
                let rel = db.get(table)?;
                if rel.schema().len() != 2 {
                    return Err(Error::Data(format!(
                        "θ table {table:?} must be binary (key, value)"
                    )));
                }
                let hit = rel
                    .rows()
                    .iter()
                    .filter(|(t, _)| &t[0] == x)
                    .collect::<Vec<_>>();
                match hit.as_slice() {
                    [] => Err(Error::Data(format!(
                        "θ table {table:?} has no entry for key {x}"
                    ))),
                    [(t, _)] => t[1].as_f64(),
                    _ => Err(Error::Data(format!(
                        "θ table {table:?} has duplicate keys at {x}"
                    ))),
                }
            }
        }
    }
}

/// One additive inequality Σ_v θ_v(x_v) ≤ 0 (or < 0 when strict).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ligament {
    pub terms: Vec<UnaryTerm>,
    #[serde(default)]
    pub strict: bool,
}

impl Ligament {
    pub fn var_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.var.clone()).collect()
    }
}

/// A per-variable multiplier on the aggregate: the identity-factor device
/// for sums like Σ y·x_j over the join.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueFactor {
    pub var: String,
    pub expr: TermExpr,
}

/// A skeleton factor binding: the hyperedge variables and the relation
/// holding the factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorBinding {
    pub vars: Vec<String>,
    pub relation: String,
    #[serde(default = "default_true")]
    pub finite: bool,
}

fn default_true() -> bool {
    true
}

/// A full query: hypergraph, factor bindings, ligaments, free variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaqAiQuery {
    pub semiring: SemiringId,
    pub variables: Vec<String>,
    pub factors: Vec<FactorBinding>,
    #[serde(default)]
    pub free: Vec<String>,
    #[serde(default)]
    pub ligaments: Vec<Ligament>,
    /// Optional identity-factor multipliers on the aggregate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<ValueFactor>,
}

impl FaqAiQuery {
    pub fn from_json(text: &str) -> Result<FaqAiQuery> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("bad query JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("query serializes")
    }

    /// Build the hypergraph: factor edges form the skeleton, ligament
    /// variable sets the ligament edges.
    pub fn hypergraph(&self) -> Result<Hypergraph> {
        let skeleton = self
            .factors
            .iter()
            .map(|f| {
                Ok(SkeletonEdge {
                    vars: set_of(&self.variables, &f.vars)?,
                    finite: f.finite,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ligaments = self
            .ligaments
            .iter()
            .map(|l| {
                let names = l.var_names();
                for (i, v) in names.iter().enumerate() {
                    if names[..i].contains(v) {
                        return Err(Error::Schema(format!(
                            "ligament repeats variable {v:?}"
                        )));
                    }
                }
                set_of(&self.variables, &names)
            })
            .collect::<Result<Vec<_>>>()?;
        Hypergraph::new(self.variables.clone(), skeleton, ligaments)
    }

    pub fn free_set(&self, h: &Hypergraph) -> Result<VarSet> {
        h.set_of(&self.free)
    }

    /// Check factor bindings against the database: every finite factor must
    /// be bound to a relation whose schema matches its variable set.
    pub fn check_bindings(&self, db: &Database) -> Result<()> {
        if db.semiring() != self.semiring {
            return Err(Error::Semiring(format!(
                "query uses {} but the database uses {}",
                self.semiring.name(),
                db.semiring().name()
            )));
        }
        for f in &self.factors {
            if !f.finite {
                return Err(Error::Data(format!(
                    "factor {:?} is marked infinite; only ligaments may be infinite here",
                    f.relation
                )));
            }
            let rel = db.get(&f.relation)?;
            let mut want = f.vars.clone();
            want.sort();
            let mut have: Vec<String> = rel.schema().vars().to_vec();
            have.sort();
            if want != have {
                return Err(Error::Schema(format!(
                    "factor {:?} binds variables {:?} but relation has schema {:?}",
                    f.relation,
                    f.vars,
                    rel.schema().vars()
                )));
            }
        }
        Ok(())
    }
}

fn set_of(universe: &[String], names: &[String]) -> Result<VarSet> {
    let mut s = VarSet::EMPTY;
    for n in names {
        let i = universe
            .iter()
            .position(|v| v == n)
            .ok_or_else(|| Error::Schema(format!("unknown variable {n:?}")))?;
        s = s.insert(i);
    }
    Ok(s)
}
