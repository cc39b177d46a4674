//! Exact inference for inequality-join queries over tuple-independent
//! probabilistic databases.
//!
//! Each factor is reduced to a unary distribution over its inequality
//! variable; the inequalities form a forest after transitive reduction,
//! and one bottom-up pass per tree computes the query probability through
//! the recursion
//!   Q_p(x) = S_p(x)·Π_i Q_{c_i}(lub_i(x)) + (1 − S_p(x))·Q_p(lsub(x)),
//! conditioning on the smallest present value of the parent factor. The
//! two branches are mutually exclusive, so every intermediate value stays
//! a probability without any clamping.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::Database;
#[cfg(test)]
use crate::relation::AnnotatedRelation;
use crate::semiring::SemiringValue;
use crate::value::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IqFactor {
    pub relation: String,
    /// The factor's variable that participates in inequalities (at most
    /// one per factor).
    #[serde(default)]
    pub ineq_var: Option<String>,
}

/// An inequality-join query: pairwise-disjoint factors and directed edges
/// (x, y) meaning x ≤ y.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IqQuery {
    pub factors: Vec<IqFactor>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

impl IqQuery {
    pub fn from_json(text: &str) -> Result<IqQuery> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("bad IQ query JSON: {e}")))
    }
}

/// A unary probabilistic factor: sorted values with marginal probabilities.
#[derive(Debug, Clone)]
pub struct UnaryProbFactor {
    pub var: String,
    pub entries: Vec<(Value, f64)>,
}

/// Validate probabilities are in [0,1]; the tuple-independent reading
/// requires genuine marginals.
fn tuple_probability(w: &SemiringValue) -> Result<f64> {
    match w {
        SemiringValue::Real(p) if (0.0..=1.0).contains(p) => Ok(*p),
        SemiringValue::Real(p) => Err(Error::Data(format!("probability {p} outside [0,1]"))),
        other => Err(Error::Data(format!(
            "probabilistic relations need real annotations, got {}",
            other.tag_name()
        ))),
    }
}

/// Reduce every factor to a unary factor over its inequality variable
/// (S_i(x) = 1 − Π (1 − p) over the rows sharing x), and fold the
/// inequality-free factors into the nullary S_∅.
pub fn reduce_to_unary(db: &Database, q: &IqQuery) -> Result<(Vec<UnaryProbFactor>, f64)> {
    // Well-formedness: pairwise-disjoint factor schemas.
    let mut seen_vars: BTreeSet<String> = BTreeSet::new();
    for f in &q.factors {
        let rel = db.get(&f.relation)?;
        for v in rel.schema().vars() {
            if !seen_vars.insert(v.clone()) {
                return Err(Error::Shape(format!(
                    "factors share variable {v:?}; skeleton edges must be pairwise disjoint"
                )));
            }
        }
        if let Some(iv) = &f.ineq_var {
            if !rel.schema().contains(iv) {
                return Err(Error::Shape(format!(
                    "inequality variable {iv:?} is not in relation {:?}",
                    f.relation
                )));
            }
        }
    }
    let mut unary = Vec::new();
    let mut nullary = 1.0;
    for f in &q.factors {
        let rel = db.get(&f.relation)?;
        match &f.ineq_var {
            Some(iv) => {
                let col = rel.schema().position(iv).unwrap();
                let mut groups: BTreeMap<Value, f64> = BTreeMap::new();
                for (t, w) in rel.rows() {
                    let p = tuple_probability(w)?;
                    let miss = groups.entry(t[col].clone()).or_insert(1.0);
                    *miss *= 1.0 - p;
                }
                let entries = groups
                    .into_iter()
                    .map(|(v, miss)| (v, 1.0 - miss))
                    .collect();
                unary.push(UnaryProbFactor {
                    var: iv.clone(),
                    entries,
                });
            }
            None => {
                let mut miss = 1.0;
                for (_, w) in rel.rows() {
                    miss *= 1.0 - tuple_probability(w)?;
                }
                nullary *= 1.0 - miss;
            }
        }
    }
    Ok((unary, nullary))
}

/// The inequality graph: one node per inequality variable, an edge x → y
/// for x ≤ y.
#[derive(Debug, Clone)]
pub struct InequalityGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl InequalityGraph {
    pub fn from_query(q: &IqQuery) -> Result<InequalityGraph> {
        let nodes: Vec<String> = q
            .factors
            .iter()
            .filter_map(|f| f.ineq_var.clone())
            .collect();
        let index = |v: &str| {
            nodes
                .iter()
                .position(|n| n == v)
                .ok_or_else(|| Error::Shape(format!("inequality on unknown variable {v:?}")))
        };
        let edges = q
            .edges
            .iter()
            .map(|(a, b)| Ok((index(a)?, index(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(InequalityGraph { nodes, edges })
    }

    fn reachable_avoiding(&self, from: usize, to: usize, skip: (usize, usize)) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for &(a, b) in &self.edges {
                if (a, b) == skip {
                    continue;
                }
                if a == u && !seen[b] {
                    if b == to {
                        return true;
                    }
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        false
    }

    fn is_dag(&self) -> bool {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        let mut edges = self.edges.clone();
        while let Some(u) = queue.pop() {
            seen += 1;
            edges.retain(|&(a, b)| {
                if a == u {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        queue.push(b);
                    }
                    false
                } else {
                    true
                }
            });
        }
        seen == n
    }
}

/// Remove edges implied by other paths; error if the reduction is not a
/// forest (each node at most one parent).
pub fn transitive_reduce(g: &InequalityGraph) -> Result<InequalityGraph> {
    if !g.is_dag() {
        return Err(Error::Shape("inequality graph has a cycle".into()));
    }
    let mut kept = Vec::new();
    for &(a, b) in &g.edges {
        if kept.contains(&(a, b)) {
            continue; // duplicate edge is redundant
        }
        if !g.reachable_avoiding(a, b, (a, b)) {
            kept.push((a, b));
        }
    }
    let reduced = InequalityGraph {
        nodes: g.nodes.clone(),
        edges: kept,
    };
    let mut indeg = vec![0usize; reduced.nodes.len()];
    for &(_, b) in &reduced.edges {
        indeg[b] += 1;
    }
    if indeg.iter().any(|&d| d > 1) {
        return Err(Error::Shape(
            "reduced inequality graph is not a forest; graph-shaped inequalities \
             are unsupported (reducible by variable elimination, not implemented)"
                .into(),
        ));
    }
    Ok(reduced)
}

/// Exact query probability for a forest-shaped IQ query.
pub fn iq_probability(db: &Database, q: &IqQuery) -> Result<f64> {
    let (unary, nullary) = reduce_to_unary(db, q)?;
    let graph = transitive_reduce(&InequalityGraph::from_query(q)?)?;

    let factor_of = |node: usize| -> Result<&UnaryProbFactor> {
        let var = &graph.nodes[node];
        unary
            .iter()
            .find(|f| &f.var == var)
            .ok_or_else(|| Error::Shape(format!("no factor bound to variable {var:?}")))
    };

    // Roots have no parent.
    let mut indeg = vec![0usize; graph.nodes.len()];
    for &(_, b) in &graph.edges {
        indeg[b] += 1;
    }
    let mut prob = nullary;
    for root in (0..graph.nodes.len()).filter(|&i| indeg[i] == 0) {
        let table = q_table(root, &graph, &factor_of)?;
        prob *= table.first().map(|(_, p)| *p).unwrap_or(0.0);
    }
    Ok(prob)
}

/// Bottom-up table for one node: Q_p over the node's sorted values.
fn q_table<'a, F>(
    node: usize,
    graph: &InequalityGraph,
    factor_of: &F,
) -> Result<Vec<(Value, f64)>>
where
    F: Fn(usize) -> Result<&'a UnaryProbFactor>,
{
    let children: Vec<usize> = graph
        .edges
        .iter()
        .filter(|&&(a, _)| a == node)
        .map(|&(_, b)| b)
        .collect();
    let child_tables: Vec<Vec<(Value, f64)>> = children
        .iter()
        .map(|&c| q_table(c, graph, factor_of))
        .collect::<Result<Vec<_>>>()?;
    let own = factor_of(node)?;
    let m = own.entries.len();
    let mut q = vec![0.0; m + 1];
    for j in (0..m).rev() {
        let (x, s) = &own.entries[j];
        // Π over children of the child's table at the least child value ≥ x.
        let mut hit = 1.0;
        for table in &child_tables {
            let idx = table.partition_point(|(v, _)| v < x);
            hit *= table.get(idx).map(|(_, p)| *p).unwrap_or(0.0);
        }
        q[j] = s * hit + (1.0 - s) * q[j + 1];
        debug_assert!((0.0..=1.0 + 1e-12).contains(&q[j]));
    }
    Ok(own
        .entries
        .iter()
        .zip(q.iter())
        .map(|((v, _), p)| (v.clone(), *p))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::Schema;
    use crate::semiring::SemiringId;

    fn prob_rel(var: &str, entries: &[(i64, f64)]) -> AnnotatedRelation {
        let rows = entries
            .iter()
            .map(|&(v, p)| (vec![Value::Int(v)], SemiringValue::Real(p)))
            .collect();
        AnnotatedRelation::from_rows(
            Schema::new(vec![var.to_string()]).unwrap(),
            SemiringId::RealSumProd,
            rows,
        )
        .unwrap()
    }

    /// The worked data set: R{1,2,3}, S{2,3,4}, T{3,4,5}.
    pub fn example_db(p: f64) -> Database {
        let mut db = Database::new(SemiringId::RealSumProd);
        db.insert("R", prob_rel("A", &[(1, p), (2, p), (3, p)]))
            .unwrap();
        db.insert("S", prob_rel("B", &[(2, p), (3, p), (4, p)]))
            .unwrap();
        db.insert("T", prob_rel("C", &[(3, p), (4, p), (5, p)]))
            .unwrap();
        db
    }

    pub fn path_query() -> IqQuery {
        IqQuery {
            factors: vec![
                IqFactor {
                    relation: "R".into(),
                    ineq_var: Some("A".into()),
                },
                IqFactor {
                    relation: "S".into(),
                    ineq_var: Some("B".into()),
                },
                IqFactor {
                    relation: "T".into(),
                    ineq_var: Some("C".into()),
                },
            ],
            edges: vec![("A".into(), "B".into()), ("B".into(), "C".into())],
        }
    }

    pub fn tree_query() -> IqQuery {
        IqQuery {
            factors: path_query().factors,
            edges: vec![("A".into(), "B".into()), ("A".into(), "C".into())],
        }
    }

    #[test]
    fn unary_factor_reduction() {
        let mut db = Database::new(SemiringId::RealSumProd);
        let rows = vec![
            (
                vec![Value::Int(1), Value::Int(1)],
                SemiringValue::Real(0.5),
            ),
            (
                vec![Value::Int(1), Value::Int(2)],
                SemiringValue::Real(0.5),
            ),
        ];
        db.insert(
            "R",
            AnnotatedRelation::from_rows(Schema::from(["a", "b"]), SemiringId::RealSumProd, rows)
                .unwrap(),
        )
        .unwrap();
        let q = IqQuery {
            factors: vec![IqFactor {
                relation: "R".into(),
                ineq_var: Some("a".into()),
            }],
            edges: vec![],
        };
        let (unary, nullary) = reduce_to_unary(&db, &q).unwrap();
        assert_eq!(nullary, 1.0);
        assert_eq!(unary.len(), 1);
        assert_eq!(unary[0].entries, vec![(Value::Int(1), 0.75)]);
    }

    #[test]
    fn unary_passthrough() {
        let db = example_db(0.5);
        let q = path_query();
        let (unary, _) = reduce_to_unary(&db, &q).unwrap();
        assert_eq!(unary[0].entries.len(), 3);
        assert!(unary[0].entries.iter().all(|(_, p)| *p == 0.5));
    }

    #[test]
    fn transitive_reduction_removes_shortcut() {
        let g = InequalityGraph {
            nodes: vec!["a".into(), "b".into(), "c".into()],
            edges: vec![(0, 1), (1, 2), (0, 2)],
        };
        let r = transitive_reduce(&g).unwrap();
        assert_eq!(r.edges, vec![(0, 1), (1, 2)]);

        // already a path: unchanged
        let g = InequalityGraph {
            nodes: vec!["a".into(), "b".into()],
            edges: vec![(0, 1)],
        };
        assert_eq!(transitive_reduce(&g).unwrap().edges, vec![(0, 1)]);
    }

    #[test]
    fn diamond_rejected() {
        let g = InequalityGraph {
            nodes: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            edges: vec![(0, 1), (0, 2), (1, 3), (2, 3)],
        };
        assert!(matches!(transitive_reduce(&g), Err(Error::Shape(_))));
    }

    #[test]
    fn certain_tuples_give_probability_one() {
        let mut db = Database::new(SemiringId::RealSumProd);
        db.insert("R", prob_rel("A", &[(1, 1.0)])).unwrap();
        db.insert("S", prob_rel("B", &[(2, 1.0)])).unwrap();
        db.insert("T", prob_rel("C", &[(3, 1.0)])).unwrap();
        let p = iq_probability(&db, &path_query()).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_world_enumeration_on_worked_example() {
        let db = example_db(0.5);
        for q in [path_query(), tree_query()] {
            let fast = iq_probability(&db, &q).unwrap();
            let slow = crate::oracle::oracle_worlds(&db, &q).unwrap();
            assert!(
                (fast - slow).abs() < 1e-12,
                "fast {fast} vs worlds {slow}"
            );
        }
    }

    /// Raising any single tuple probability never lowers the query
    /// probability.
    #[test]
    fn monotone_in_tuple_probabilities() {
        let base = iq_probability(&example_db(0.5), &path_query()).unwrap();
        // bump each tuple in R one at a time
        for bumped in 0..3 {
            let mut db = Database::new(SemiringId::RealSumProd);
            let entries: Vec<(i64, f64)> = (0..3)
                .map(|i| (i + 1, if i == bumped { 0.9 } else { 0.5 }))
                .collect();
            db.insert("R", prob_rel("A", &entries)).unwrap();
            db.insert("S", prob_rel("B", &[(2, 0.5), (3, 0.5), (4, 0.5)]))
                .unwrap();
            db.insert("T", prob_rel("C", &[(3, 0.5), (4, 0.5), (5, 0.5)]))
                .unwrap();
            let raised = iq_probability(&db, &path_query()).unwrap();
            assert!(
                raised >= base - 1e-12,
                "raising tuple {bumped} lowered the probability"
            );
        }
    }
}
