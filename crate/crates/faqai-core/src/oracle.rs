//! Brute-force reference implementations backing the acceptance tests:
//! nested-loop query evaluation, possible-world enumeration, materialized
//! loss loops, and a reference Lloyd step. Budgets fail loudly; an oracle
//! must never silently truncate.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::join::{multiway_join, EvalCounters};
use crate::ml::{Feature, FeatureQuery, Loss, TrainConfig};
use crate::prob::IqQuery;
use crate::query::{FaqAiQuery, UnaryTerm};
use crate::relation::{AnnotatedRelation, Database, Schema};
use crate::semiring::SemiringValue;
use crate::value::Value;

const ASSIGNMENT_BUDGET: u128 = 1_000_000;
const WORLD_TUPLE_BUDGET: usize = 20;

/// Evaluate a query by enumerating every assignment consistent with the
/// finite factor supports.
pub fn oracle_eval(db: &Database, q: &FaqAiQuery) -> Result<AnnotatedRelation> {
    q.check_bindings(db)?;
    let h = q.hypergraph()?;
    let semiring = q.semiring;

    // Per-variable candidate domains: the intersection over the factors
    // containing the variable of their projected value sets. Assignments
    // outside any factor's projection annotate to zero anyway.
    let mut domains: Vec<Vec<Value>> = Vec::with_capacity(h.n_vars());
    for v in 0..h.n_vars() {
        let name = &h.vars()[v];
        let mut dom: Option<BTreeSet<Value>> = None;
        for f in &q.factors {
            if !f.vars.contains(name) {
                continue;
            }
            let rel = db.get(&f.relation)?;
            let col = rel.schema().position(name).unwrap();
            let vals: BTreeSet<Value> =
                rel.rows().iter().map(|(t, _)| t[col].clone()).collect();
            dom = Some(match dom {
                None => vals,
                Some(d) => d.intersection(&vals).cloned().collect(),
            });
        }
        domains.push(dom.map(|d| d.into_iter().collect()).unwrap_or_default());
    }
    let size: u128 = domains.iter().map(|d| d.len() as u128).product();
    if size > ASSIGNMENT_BUDGET {
        return Err(Error::Budget(format!(
            "oracle would enumerate {size} assignments (budget {ASSIGNMENT_BUDGET})"
        )));
    }

    let free_names: Vec<String> = q
        .variables
        .iter()
        .filter(|v| q.free.contains(v))
        .cloned()
        .collect();
    let free_pos: Vec<usize> = free_names
        .iter()
        .map(|v| q.variables.iter().position(|x| x == v).unwrap())
        .collect();

    let mut rows: Vec<(Vec<Value>, SemiringValue)> = Vec::new();
    let mut assignment: Vec<Value> = Vec::new();
    enumerate(
        db,
        q,
        &domains,
        &mut assignment,
        &free_pos,
        semiring,
        &mut rows,
    )?;
    AnnotatedRelation::from_rows(Schema::new(free_names)?, semiring, rows)
}

fn enumerate(
    db: &Database,
    q: &FaqAiQuery,
    domains: &[Vec<Value>],
    assignment: &mut Vec<Value>,
    free_pos: &[usize],
    semiring: crate::semiring::SemiringId,
    out: &mut Vec<(Vec<Value>, SemiringValue)>,
) -> Result<()> {
    if assignment.len() == domains.len() {
        let mut weight = semiring.one();
        for f in &q.factors {
            let rel = db.get(&f.relation)?;
            let tuple: Vec<Value> = rel
                .schema()
                .vars()
                .iter()
                .map(|v| {
                    let i = q.variables.iter().position(|x| x == v).unwrap();
                    assignment[i].clone()
                })
                .collect();
            let w = rel.get(&tuple);
            if w.is_zero() {
                return Ok(());
            }
            weight = semiring.mul(&weight, &w)?;
        }
        for lig in &q.ligaments {
            let mut sum = 0.0;
            for t in &lig.terms {
                let i = q.variables.iter().position(|x| x == &t.var).unwrap();
                sum += t.eval(&assignment[i], db)?;
            }
            let holds = if lig.strict { sum < 0.0 } else { sum <= 0.0 };
            if !holds {
                return Ok(());
            }
        }
        for w in &q.weights {
            let i = q.variables.iter().position(|x| x == &w.var).unwrap();
            let term = UnaryTerm {
                var: w.var.clone(),
                expr: w.expr.clone(),
            };
            let factor = term.eval(&assignment[i], db)?;
            weight = semiring.mul(&weight, &SemiringValue::Real(factor))?;
        }
        if !weight.is_zero() {
            let key: Vec<Value> = free_pos.iter().map(|&i| assignment[i].clone()).collect();
            out.push((key, weight));
        }
        return Ok(());
    }
    let d = assignment.len();
    for v in &domains[d] {
        assignment.push(v.clone());
        enumerate(db, q, domains, assignment, free_pos, semiring, out)?;
        assignment.pop();
    }
    Ok(())
}

/// Query probability by full possible-world enumeration: Σ over tuple
/// subsets of world probability × truth.
pub fn oracle_worlds(db: &Database, q: &IqQuery) -> Result<f64> {
    // Gather every tuple with its probability, tagged by factor.
    let mut tuples: Vec<(usize, Vec<Value>, f64)> = Vec::new();
    for (fi, f) in q.factors.iter().enumerate() {
        let rel = db.get(&f.relation)?;
        for (t, w) in rel.rows() {
            let p = match w {
                SemiringValue::Real(p) => *p,
                _ => return Err(Error::Data("probabilities must be real".into())),
            };
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Data(format!("probability {p} outside [0,1]")));
            }
            tuples.push((fi, t.clone(), p));
        }
    }
    if tuples.len() > WORLD_TUPLE_BUDGET {
        return Err(Error::Budget(format!(
            "{} tuples exceed the world-enumeration budget {WORLD_TUPLE_BUDGET}",
            tuples.len()
        )));
    }
    let m = tuples.len();
    let mut total = 0.0;
    for world in 0..(1u64 << m) {
        let mut p_world = 1.0;
        for (i, (_, _, p)) in tuples.iter().enumerate() {
            if world & (1 << i) != 0 {
                p_world *= p;
            } else {
                p_world *= 1.0 - p;
            }
        }
        if p_world == 0.0 {
            continue;
        }
        if world_satisfies(q, db, &tuples, world)? {
            total += p_world;
        }
    }
    Ok(total)
}

/// Materialize the feature-extraction join: one (features, label) row per
/// join tuple, repeated per its multiplicity under the join annotations
/// (merged duplicate source tuples carry integer annotations).
pub fn materialize_features(
    db: &Database,
    fq: &FeatureQuery,
) -> Result<Vec<(Vec<f64>, Option<f64>)>> {
    let rels: Vec<&AnnotatedRelation> = fq
        .factors
        .iter()
        .map(|f| db.get(&f.relation))
        .collect::<Result<Vec<_>>>()?;
    let mut counters = EvalCounters::default();
    let join = multiway_join(&rels, &mut counters)?;
    let feat_pos: Vec<Option<usize>> = fq
        .features
        .iter()
        .map(|f| match f {
            Feature::Intercept => None,
            Feature::Var(v) => join.schema().position(v),
        })
        .collect();
    let label_pos = fq.label.as_ref().and_then(|l| join.schema().position(l));
    let mut out = Vec::with_capacity(join.len());
    for (t, w) in join.rows() {
        let multiplicity = match w {
            SemiringValue::Real(r) if *r >= 0.0 && (r - r.round()).abs() < 1e-9 => {
                r.round() as usize
            }
            other => {
                return Err(Error::Data(format!(
                    "join multiplicity {other} has no integer reading"
                )))
            }
        };
        let feats = feat_pos
            .iter()
            .map(|p| match p {
                None => Ok(1.0),
                Some(i) => t[*i].as_f64(),
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = match label_pos {
            None => None,
            Some(i) => Some(t[i].as_f64()?),
        };
        for _ in 0..multiplicity {
            out.push((feats.clone(), label));
        }
    }
    Ok(out)
}

/// Direct per-row loss loop over a materialized join, including the ℓ2
/// term: the objective the query decomposition must reproduce.
pub fn reference_objective(
    rows: &[(Vec<f64>, Option<f64>)],
    beta: &[f64],
    loss: Loss,
    cfg: &TrainConfig,
) -> f64 {
    let mut total = 0.0;
    for (x, y) in rows {
        let f: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
        let y = y.unwrap_or(0.0);
        total += match loss {
            Loss::Huber => {
                let r = y - f;
                if r.abs() <= 1.0 {
                    0.5 * r * r
                } else {
                    0.5 * r.abs() - 0.5
                }
            }
            Loss::Hinge => (1.0 - y * f).max(0.0),
            Loss::EpsInsensitive => ((y - f).abs() - cfg.eps_insensitive).max(0.0),
            Loss::OrdinalHinge => {
                let a = y as i64;
                let mut l = 0.0;
                for t in 1..a {
                    l += (1.0 - f + t as f64).max(0.0);
                }
                for t in (a + 1)..=(cfg.ordinal_d as i64) {
                    l += (1.0 + f - t as f64).max(0.0);
                }
                l
            }
            Loss::Scalene => {
                cfg.alpha_scalene * (y - f).max(0.0)
                    + (1.0 - cfg.alpha_scalene) * (f - y).max(0.0)
            }
        };
    }
    let reg: f64 = beta.iter().map(|b| b * b).sum::<f64>();
    total + 0.5 * cfg.lambda * reg
}

/// One Lloyd iteration on materialized points with the lowest-index tie
/// rule: a point joins the smallest-indexed nearest mean.
pub fn reference_lloyd_step(points: &[Vec<f64>], means: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = means.len();
    let dim = means.first().map(|m| m.len()).unwrap_or(0);
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for p in points {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, m) in means.iter().enumerate() {
            let d: f64 = p.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        counts[best] += 1;
        for (s, v) in sums[best].iter_mut().zip(p) {
            *s += v;
        }
    }
    (0..k)
        .map(|i| {
            if counts[i] == 0 {
                means[i].clone()
            } else {
                sums[i].iter().map(|s| s / counts[i] as f64).collect()
            }
        })
        .collect()
}

/// The clustering objective Σ_i Σ_{x ∈ G_i} ‖x − μ_i‖² on materialized
/// points under the same tie rule.
pub fn reference_kmeans_objective(points: &[Vec<f64>], means: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|p| {
            means
                .iter()
                .map(|m| p.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Does a world (a subset of present tuples) satisfy the query: one tuple
/// per factor, jointly meeting every inequality?
fn world_satisfies(
    q: &IqQuery,
    db: &Database,
    tuples: &[(usize, Vec<Value>, f64)],
    world: u64,
) -> Result<bool> {
    let n_factors = q.factors.len();
    let mut present: Vec<Vec<&Vec<Value>>> = vec![Vec::new(); n_factors];
    for (i, (fi, t, _)) in tuples.iter().enumerate() {
        if world & (1 << i) != 0 {
            present[*fi].push(t);
        }
    }
    if present.iter().any(|p| p.is_empty()) {
        return Ok(false);
    }
    // The ineq value of a factor's choice, if the factor has one.
    let ineq_col: Vec<Option<usize>> = q
        .factors
        .iter()
        .map(|f| -> Result<Option<usize>> {
            match &f.ineq_var {
                None => Ok(None),
                Some(v) => {
                    let rel = db.get(&f.relation)?;
                    Ok(rel.schema().position(v))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let var_factor: std::collections::BTreeMap<&str, usize> = q
        .factors
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.ineq_var.as_deref().map(|v| (v, i)))
        .collect();

    let mut choice = vec![0usize; n_factors];
    loop {
        let ok = q.edges.iter().all(|(lo, hi)| {
            let (fl, fh) = (var_factor[lo.as_str()], var_factor[hi.as_str()]);
            let vl = &present[fl][choice[fl]][ineq_col[fl].unwrap()];
            let vh = &present[fh][choice[fh]][ineq_col[fh].unwrap()];
            vl <= vh
        });
        if ok {
            return Ok(true);
        }
        // next combination
        let mut d = 0;
        loop {
            if d == n_factors {
                return Ok(false);
            }
            choice[d] += 1;
            if choice[d] < present[d].len() {
                break;
            }
            choice[d] = 0;
            d += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{FactorBinding, Ligament, TermExpr};
    use crate::semiring::SemiringId;

    /// The boolean oracle answer is (count > 0) on the same instance.
    #[test]
    fn boolean_agrees_with_count_positivity() {
        let tuples: &[(i64, i64)] = &[(1, 2), (2, 2), (3, 5)];
        let mut db_count = Database::new(SemiringId::CountInt);
        let mut db_bool = Database::new(SemiringId::Boolean);
        for (db, w) in [
            (&mut db_count, SemiringValue::Int(1.into())),
            (&mut db_bool, SemiringValue::Bool(true)),
        ] {
            let rows = tuples
                .iter()
                .map(|&(a, b)| (vec![Value::Int(a), Value::Int(b)], w.clone()))
                .collect();
            let rel = AnnotatedRelation::from_rows(
                Schema::from(["a", "b"]),
                db.semiring(),
                rows,
            )
            .unwrap();
            db.insert("R", rel).unwrap();
        }
        let mk_query = |semiring| FaqAiQuery {
            semiring,
            variables: vec!["a".into(), "b".into()],
            factors: vec![FactorBinding {
                vars: vec!["a".into(), "b".into()],
                relation: "R".into(),
                finite: true,
            }],
            free: vec!["b".into()],
            ligaments: vec![Ligament {
                terms: vec![UnaryTerm {
                    var: "a".into(),
                    expr: TermExpr::Affine { a: 1.0, b: -2.0 },
                }],
                strict: false,
            }],
            weights: vec![],
        };
        let counts = oracle_eval(&db_count, &mk_query(SemiringId::CountInt)).unwrap();
        let bools = oracle_eval(&db_bool, &mk_query(SemiringId::Boolean)).unwrap();
        assert_eq!(counts.len(), bools.len());
        for ((t1, w1), (t2, w2)) in counts.rows().iter().zip(bools.rows()) {
            assert_eq!(t1, t2);
            assert_eq!(!w1.is_zero(), *w2 == SemiringValue::Bool(true));
        }
    }

    #[test]
    fn world_enumeration_pins() {
        // single tuple with p = 0.3 satisfying the query alone
        let mut db = Database::new(SemiringId::RealSumProd);
        db.insert(
            "R",
            AnnotatedRelation::from_rows(
                Schema::from(["a"]),
                SemiringId::RealSumProd,
                vec![(vec![Value::Int(1)], SemiringValue::Real(0.3))],
            )
            .unwrap(),
        )
        .unwrap();
        let q = IqQuery {
            factors: vec![crate::prob::IqFactor {
                relation: "R".into(),
                ineq_var: Some("a".into()),
            }],
            edges: vec![],
        };
        assert!((oracle_worlds(&db, &q).unwrap() - 0.3).abs() < 1e-12);

        // two independent required tuples at p = 0.5 each
        let mut db = Database::new(SemiringId::RealSumProd);
        for (rel, var) in [("R", "a"), ("S", "b")] {
            db.insert(
                rel,
                AnnotatedRelation::from_rows(
                    Schema::new(vec![var.to_string()]).unwrap(),
                    SemiringId::RealSumProd,
                    vec![(vec![Value::Int(1)], SemiringValue::Real(0.5))],
                )
                .unwrap(),
            )
            .unwrap();
        }
        let q = IqQuery {
            factors: vec![
                crate::prob::IqFactor {
                    relation: "R".into(),
                    ineq_var: Some("a".into()),
                },
                crate::prob::IqFactor {
                    relation: "S".into(),
                    ineq_var: Some("b".into()),
                },
            ],
            edges: vec![("a".into(), "b".into())],
        };
        assert!((oracle_worlds(&db, &q).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn world_budget_fails_loudly() {
        let mut db = Database::new(SemiringId::RealSumProd);
        let rows = (0..25)
            .map(|i| (vec![Value::Int(i)], SemiringValue::Real(0.5)))
            .collect();
        db.insert(
            "R",
            AnnotatedRelation::from_rows(Schema::from(["a"]), SemiringId::RealSumProd, rows)
                .unwrap(),
        )
        .unwrap();
        let q = IqQuery {
            factors: vec![crate::prob::IqFactor {
                relation: "R".into(),
                ineq_var: Some("a".into()),
            }],
            edges: vec![],
        };
        assert!(matches!(oracle_worlds(&db, &q), Err(Error::Budget(_))));
    }
}
