//! Degree-partitioned plans for the two demonstrated query shapes: the
//! 4-cycle aggregate and the path-with-inequality count.
//!
//! Relations split at threshold ⌈√N⌉ into light groups (degree ≤ threshold)
//! and heavy groups. The 4-cycle runs over two decomposition branches,
//! {123, 341} and {234, 412}; the first uses the union form
//! S_ijk = (R_ij ⋈ R^ℓ_jk) ∪ (R^h_ij ⋈ R_jk), and the second is refined
//! into three pieces whose degree filters make the two branch supports a
//! genuine partition of the join — summing the branches then needs no
//! inclusion–exclusion, which no semiring could offer anyway.

use crate::engine::two_bag_eliminate;
use crate::error::{Error, Result};
use crate::join::{multiway_join, EvalCounters};
use crate::query::Ligament;
use crate::relation::{AnnotatedRelation, Database};
use crate::semiring::SemiringValue;
use crate::value::Value;

/// A relation partitioned by group degree on a variable set.
#[derive(Debug, Clone)]
pub struct DegreeSplit {
    pub threshold: usize,
    /// Rows whose x-group has at most `threshold` rows.
    pub light: AnnotatedRelation,
    /// Rows whose x-group has more.
    pub heavy: AnnotatedRelation,
}

/// Partition `r` by the number of rows sharing each projection onto
/// `x_vars`. Annotations are untouched; light ∪ heavy = r disjointly.
pub fn degree_split(
    r: &AnnotatedRelation,
    x_vars: &[String],
    threshold: usize,
) -> Result<DegreeSplit> {
    let pos: Vec<usize> = x_vars
        .iter()
        .map(|v| {
            r.schema()
                .position(v)
                .ok_or_else(|| Error::Schema(format!("split variable {v:?} not in schema")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts: std::collections::BTreeMap<Vec<Value>, usize> = Default::default();
    for (t, _) in r.rows() {
        let key: Vec<Value> = pos.iter().map(|&i| t[i].clone()).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    let is_light = |t: &[Value]| {
        let key: Vec<Value> = pos.iter().map(|&i| t[i].clone()).collect();
        counts[&key] <= threshold
    };
    Ok(DegreeSplit {
        threshold,
        light: r.filter_rows(|t| is_light(t)),
        heavy: r.filter_rows(|t| !is_light(t)),
    })
}

fn first_var(r: &AnnotatedRelation) -> Vec<String> {
    vec![r.schema().vars()[0].clone()]
}

/// Σ over the join of two three-variable pieces sharing two variables.
fn aggregate_pair(
    s1: &AnnotatedRelation,
    s2: &AnnotatedRelation,
    db: &Database,
    counters: &mut EvalCounters,
) -> Result<SemiringValue> {
    let merged = two_bag_eliminate(s1, s2, &[], db, counters)?;
    Ok(merged.group_aggregate(&[])?.scalar())
}

/// The two branch supports of the 4-cycle plan. Branch one is the pair
/// (S123, S341); branch two is a list of disjoint filter pieces, each a
/// pair over bags {234} and {412}.
pub struct CycleBranches {
    pub td1: (AnnotatedRelation, AnnotatedRelation),
    pub td2_pieces: Vec<(AnnotatedRelation, AnnotatedRelation)>,
}

/// Build the branch relations for r12 ⋈ r23 ⋈ r34 ⋈ r41 split at ⌈√N⌉.
pub fn cycle4_branches(
    db: &Database,
    names: &[&str; 4],
    counters: &mut EvalCounters,
) -> Result<CycleBranches> {
    let r12 = db.get(names[0])?;
    let r23 = db.get(names[1])?;
    let r34 = db.get(names[2])?;
    let r41 = db.get(names[3])?;
    for (a, b) in [(r12, r23), (r23, r34), (r34, r41), (r41, r12)] {
        let shared = a.schema().vars()[1].clone();
        if b.schema().vars()[0] != shared {
            return Err(Error::Schema(format!(
                "relations do not chain into a 4-cycle: {:?} then {:?}",
                a.schema().vars(),
                b.schema().vars()
            )));
        }
    }
    let n = [r12, r23, r34, r41].iter().map(|r| r.len()).max().unwrap_or(0);
    let threshold = (n as f64).sqrt().ceil() as usize;

    let split12 = degree_split(r12, &first_var(r12), threshold)?;
    let split23 = degree_split(r23, &first_var(r23), threshold)?;
    let split34 = degree_split(r34, &first_var(r34), threshold)?;
    let split41 = degree_split(r41, &first_var(r41), threshold)?;

    let join = |a: &AnnotatedRelation, b: &AnnotatedRelation, c: &mut EvalCounters| {
        multiway_join(&[a, b], c)
    };

    // Branch one: S123 covers tuples where x1 is heavy or x2 is light,
    // S341 where x3 is heavy or x4 is light.
    let s123 = join(r12, &split23.light, counters)?
        .union_support(&join(&split12.heavy, r23, counters)?)?;
    let s341 = join(r34, &split41.light, counters)?
        .union_support(&join(&split34.heavy, r41, counters)?)?;

    // Branch two: the complement, as three disjoint degree-filter pieces
    // (x1 light ∧ x2 heavy) ∪ (x1 heavy ∧ x3 light ∧ x4 heavy)
    // ∪ (x1 light ∧ x2 light ∧ x3 light ∧ x4 heavy).
    let piece_a = (
        join(&split23.heavy, r34, counters)?,
        join(r41, &split12.light, counters)?,
    );
    let piece_b = (
        join(r23, &split34.light, counters)?,
        join(&split41.heavy, &split12.heavy, counters)?,
    );
    let piece_c = (
        join(&split23.light, &split34.light, counters)?,
        join(&split41.heavy, &split12.light, counters)?,
    );
    Ok(CycleBranches {
        td1: (s123, s341),
        td2_pieces: vec![piece_a, piece_b, piece_c],
    })
}

/// Aggregate the 4-cycle join r12 ⋈ r23 ⋈ r34 ⋈ r41 in Õ(N^1.5): the sum
/// of the two branch aggregates, whose supports partition the join.
pub fn count_4cycle(
    db: &Database,
    names: &[&str; 4],
    counters: &mut EvalCounters,
) -> Result<SemiringValue> {
    let semiring = db.semiring();
    let branches = cycle4_branches(db, names, counters)?;
    let mut total = aggregate_pair(&branches.td1.0, &branches.td1.1, db, counters)?;
    for (s234, s412) in &branches.td2_pieces {
        let piece = aggregate_pair(s234, s412, db, counters)?;
        total = semiring.add(&total, &piece)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Default)]
pub struct PathIneqStats {
    /// Size of the materialized light branch join R ⋈ S^ℓ.
    pub u_size: usize,
    /// Size of the materialized heavy branch join S^h ⋈ T.
    pub w_size: usize,
}

/// Aggregate R(a,b) ⋈ S(b,c) ⋈ T(c,d) under one additive inequality over
/// {a,b,c,d} in Õ(N^1.5): split S on b, answer the light part over bags
/// {abc | cd} and the heavy part over {ab | bcd}, and add.
pub fn count_path_ineq(
    db: &Database,
    names: &[&str; 3],
    ligament: &Ligament,
    counters: &mut EvalCounters,
) -> Result<(SemiringValue, PathIneqStats)> {
    let semiring = db.semiring();
    let r = db.get(names[0])?;
    let s = db.get(names[1])?;
    let t = db.get(names[2])?;
    if r.schema().vars()[1] != s.schema().vars()[0]
        || s.schema().vars()[1] != t.schema().vars()[0]
    {
        return Err(Error::Schema(
            "relations do not chain into a path".into(),
        ));
    }
    let n = [r, s, t].iter().map(|x| x.len()).max().unwrap_or(0);
    let threshold = (n as f64).sqrt().ceil() as usize;
    let split = degree_split(s, &first_var(s), threshold)?;

    // Light branch: U = R ⋈ S^ℓ over {a,b,c}, eliminate T.
    let u = multiway_join(&[r, &split.light], counters)?;
    let u_size = u.len();
    let light = two_bag_eliminate(&u, t, &[ligament], db, counters)?
        .group_aggregate(&[])?
        .scalar();

    // Heavy branch: W = S^h ⋈ T over {b,c,d}, eliminate it into R.
    let w = multiway_join(&[&split.heavy, t], counters)?;
    let w_size = w.len();
    let heavy = two_bag_eliminate(r, &w, &[ligament], db, counters)?
        .group_aggregate(&[])?
        .scalar();

    let total = semiring.add(&light, &heavy)?;
    Ok((total, PathIneqStats { u_size, w_size }))
}
