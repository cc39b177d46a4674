//! Seeded instance generators for the bench subcommand and the scaling
//! tests. Adversarial variants concentrate degree on hub values so that
//! single-decomposition plans materialize quadratic intermediates while
//! degree-partitioned plans stay subquadratic.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::query::{Ligament, TermExpr, UnaryTerm};
use crate::relation::{AnnotatedRelation, Database, Schema};
use crate::semiring::SemiringId;
use crate::value::Value;

fn binary_rel(
    vars: [&str; 2],
    tuples: impl IntoIterator<Item = (i64, i64)>,
    semiring: SemiringId,
) -> AnnotatedRelation {
    let rows = tuples
        .into_iter()
        .map(|(a, b)| (vec![Value::Int(a), Value::Int(b)], semiring.one()))
        .collect();
    AnnotatedRelation::from_rows(Schema::from(vars), semiring, rows).unwrap()
}

fn random_pairs(rng: &mut StdRng, n: usize, range: i64) -> Vec<(i64, i64)> {
    (0..n)
        .map(|_| (rng.gen_range(0..range), rng.gen_range(0..range)))
        .collect()
}

/// Random 4-cycle instance: r12(x1,x2), r23(x2,x3), r34(x3,x4), r41(x4,x1).
pub fn cycle4_db(n: usize, seed: u64, adversarial: bool) -> Database {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut db = Database::new(SemiringId::CountInt);
    let range = (n.max(2) as i64) / 2 + 1;
    let mk = |rng: &mut StdRng, hub: bool| -> Vec<(i64, i64)> {
        if hub {
            // hub on the first coordinate: one value with full degree
            (0..n).map(|j| (0, j as i64)).collect()
        } else {
            random_pairs(rng, n, range)
        }
    };
    db.insert("r12", binary_rel(["x1", "x2"], mk(&mut rng, adversarial), db.semiring()))
        .unwrap();
    db.insert("r23", binary_rel(["x2", "x3"], mk(&mut rng, false), db.semiring()))
        .unwrap();
    db.insert("r34", binary_rel(["x3", "x4"], mk(&mut rng, adversarial), db.semiring()))
        .unwrap();
    db.insert("r41", binary_rel(["x4", "x1"], mk(&mut rng, false), db.semiring()))
        .unwrap();
    db
}

/// Random path instance R(a,b), S(b,c), T(c,d). The adversarial variant
/// funnels S through a single b-hub, which forces quadratic intermediates
/// on any single two-bag plan but keeps the degree-split branches linear.
pub fn path4_db(n: usize, seed: u64, adversarial: bool) -> Database {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut db = Database::new(SemiringId::CountInt);
    if adversarial {
        db.insert(
            "R",
            binary_rel(["a", "b"], (0..n).map(|i| (i as i64, 0)), db.semiring()),
        )
        .unwrap();
        db.insert(
            "S",
            binary_rel(["b", "c"], (0..n).map(|j| (0, j as i64)), db.semiring()),
        )
        .unwrap();
        db.insert(
            "T",
            binary_rel(["c", "d"], (0..n).map(|j| (j as i64, j as i64)), db.semiring()),
        )
        .unwrap();
    } else {
        let range = (n.max(2) as i64) / 2 + 1;
        db.insert(
            "R",
            binary_rel(["a", "b"], random_pairs(&mut rng, n, range), db.semiring()),
        )
        .unwrap();
        db.insert(
            "S",
            binary_rel(["b", "c"], random_pairs(&mut rng, n, range), db.semiring()),
        )
        .unwrap();
        db.insert(
            "T",
            binary_rel(["c", "d"], random_pairs(&mut rng, n, range), db.semiring()),
        )
        .unwrap();
    }
    db
}

/// A skewed path instance that genuinely stresses the N^1.5 intermediate
/// bound: half of S sits on one heavy hub, the other half spreads over
/// just-light b-values with ~√N partners each.
pub fn path4_skew_db(n: usize, seed: u64) -> Database {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut db = Database::new(SemiringId::CountInt);
    let root = (n as f64).sqrt().ceil() as i64;
    let mut s = Vec::with_capacity(n);
    for j in 0..(n / 2) {
        s.push((0i64, j as i64)); // heavy hub b = 0
    }
    let mut j = 0i64;
    while s.len() < n {
        // light b-values 1.. with just under √N partners each
        let b = 1 + j / (root - 1).max(1);
        s.push((b, j % (root - 1).max(1)));
        j += 1;
    }
    let r: Vec<(i64, i64)> = (0..n)
        .map(|i| (i as i64, 1 + rng.gen_range(0..((n as i64) / root.max(1)).max(1))))
        .collect();
    let t: Vec<(i64, i64)> = (0..n).map(|k| (k as i64 % root, k as i64)).collect();
    db.insert("R", binary_rel(["a", "b"], r, db.semiring())).unwrap();
    db.insert("S", binary_rel(["b", "c"], s, db.semiring())).unwrap();
    db.insert("T", binary_rel(["c", "d"], t, db.semiring())).unwrap();
    db
}

/// The ligament a ≤ d written over all four path variables with zero
/// coefficients on b and c.
pub fn path4_ligament() -> Ligament {
    Ligament {
        terms: vec![
            UnaryTerm {
                var: "a".into(),
                expr: TermExpr::Affine { a: 1.0, b: 0.0 },
            },
            UnaryTerm {
                var: "b".into(),
                expr: TermExpr::Affine { a: 0.0, b: 0.0 },
            },
            UnaryTerm {
                var: "c".into(),
                expr: TermExpr::Affine { a: 0.0, b: 0.0 },
            },
            UnaryTerm {
                var: "d".into(),
                expr: TermExpr::Affine { a: -1.0, b: 0.0 },
            },
        ],
        strict: false,
    }
}

/// Scaled instance of the three-inequality chain query: R(a,b), S(b,c),
/// T(c,d) with a ≤ c, c ≤ b, d ≤ b. The adversarial variant shares one
/// b-value between R and S so the non-relaxed width-2 plan materializes a
/// quadratic bag.
pub fn three_ineq_db(n: usize, seed: u64, adversarial: bool) -> Database {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut db = Database::new(SemiringId::CountInt);
    if adversarial {
        db.insert(
            "R",
            binary_rel(["a", "b"], (0..n).map(|i| (i as i64, 0)), db.semiring()),
        )
        .unwrap();
        db.insert(
            "S",
            binary_rel(["b", "c"], (0..n).map(|j| (0, -(j as i64))), db.semiring()),
        )
        .unwrap();
        db.insert(
            "T",
            binary_rel(
                ["c", "d"],
                (0..n).map(|j| (-(j as i64), -(j as i64))),
                db.semiring(),
            ),
        )
        .unwrap();
    } else {
        let range = n.max(2) as i64;
        db.insert(
            "R",
            binary_rel(["a", "b"], random_pairs(&mut rng, n, range), db.semiring()),
        )
        .unwrap();
        db.insert(
            "S",
            binary_rel(["b", "c"], random_pairs(&mut rng, n, range), db.semiring()),
        )
        .unwrap();
        db.insert(
            "T",
            binary_rel(["c", "d"], random_pairs(&mut rng, n, range), db.semiring()),
        )
        .unwrap();
    }
    db
}

/// The three-inequality chain query over the relations of `three_ineq_db`.
pub fn three_ineq_query(semiring: SemiringId) -> crate::query::FaqAiQuery {
    let affine = |var: &str, a: f64| UnaryTerm {
        var: var.into(),
        expr: TermExpr::Affine { a, b: 0.0 },
    };
    crate::query::FaqAiQuery {
        semiring,
        variables: vec!["a".into(), "b".into(), "c".into(), "d".into()],
        factors: vec![
            crate::query::FactorBinding {
                vars: vec!["a".into(), "b".into()],
                relation: "R".into(),
                finite: true,
            },
            crate::query::FactorBinding {
                vars: vec!["b".into(), "c".into()],
                relation: "S".into(),
                finite: true,
            },
            crate::query::FactorBinding {
                vars: vec!["c".into(), "d".into()],
                relation: "T".into(),
                finite: true,
            },
        ],
        free: vec![],
        ligaments: vec![
            Ligament {
                terms: vec![affine("a", 1.0), affine("c", -1.0)],
                strict: false,
            },
            Ligament {
                terms: vec![affine("c", 1.0), affine("b", -1.0)],
                strict: false,
            },
            Ligament {
                terms: vec![affine("d", 1.0), affine("b", -1.0)],
                strict: false,
            },
        ],
        weights: vec![],
    }
}
