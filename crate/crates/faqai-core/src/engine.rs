//! Leaf-elimination evaluation over a relaxed tree decomposition.
//!
//! Bag factors are worst-case-optimal joins of the assigned relations with
//! indicator projections of every overlapping finite factor. Eliminating a
//! leaf into its parent aggregates away the leaf-only variables; additive
//! inequalities routed to that step are answered by dominance queries over
//! an index of the leaf rows, bucketed by the shared variables. Free
//! variables live in the F-connex core, whose bags are joined (never
//! aggregated) at the end.

use std::collections::BTreeMap;

use crate::dominance::{DominanceIndex, Strictness, WeightedPoint};
use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, VarSet};
use crate::join::{multiway_join, EvalCounters};
use crate::query::{FaqAiQuery, Ligament};
use crate::relation::{AnnotatedRelation, Database};
use crate::semiring::{SemiringId, SemiringValue};
use crate::simplex::{rat_display, Rat};
use crate::td::{enumerate_tds, TreeDecomposition};
use crate::value::Value;
use crate::widths::rho_star;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    /// Ligaments may be covered by adjacent bag pairs (the default).
    Relaxed,
    /// Classic evaluation: every ligament must sit inside a bag.
    NonRelaxed,
}

/// One leaf elimination: aggregate the leaf's private variables away into
/// the parent, applying the ligaments routed here through dominance
/// queries.
#[derive(Debug, Clone)]
pub struct ElimStep {
    pub leaf: usize,
    pub parent: usize,
    pub ligaments: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct EvalPlan {
    pub td: TreeDecomposition,
    pub root: usize,
    /// Assigned bag per skeleton edge index.
    pub alpha: Vec<usize>,
    pub steps: Vec<ElimStep>,
    /// Ligaments fully inside one bag, absorbed there as filters.
    pub absorbed: Vec<(usize, usize)>,
    /// Ligaments whose variables are all free: applied on the final join.
    pub residual: Vec<usize>,
    pub width: Rat,
    pub notes: Vec<String>,
}

impl EvalPlan {
    pub fn describe(&self, h: &Hypergraph) -> String {
        let mut s = String::new();
        s.push_str(&format!("width: {}\n", rat_display(&self.width)));
        s.push_str("bags:\n");
        for (i, b) in self.td.bags.iter().enumerate() {
            let marks = [
                if i == self.root { " (root)" } else { "" },
                if self.td.core.contains(&i) {
                    " (core)"
                } else {
                    ""
                },
            ]
            .concat();
            s.push_str(&format!("  {i}: {}{}\n", h.display_set(*b), marks));
        }
        s.push_str("elimination:\n");
        for st in &self.steps {
            s.push_str(&format!(
                "  bag {} -> bag {} handling {} inequality(ies)\n",
                st.leaf,
                st.parent,
                st.ligaments.len()
            ));
        }
        for (lig, bag) in &self.absorbed {
            s.push_str(&format!("inequality {lig} absorbed into bag {bag}\n"));
        }
        for lig in &self.residual {
            s.push_str(&format!("inequality {lig} filters the free output\n"));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}

/// Select a minimum-width decomposition from the enumerated family and
/// route every ligament to an absorption bag, an elimination step, or the
/// final free-variable filter.
pub fn plan(q: &FaqAiQuery) -> Result<EvalPlan> {
    plan_with_mode(q, PlanMode::Relaxed)
}

pub fn plan_with_mode(q: &FaqAiQuery, mode: PlanMode) -> Result<EvalPlan> {
    let h = q.hypergraph()?;
    let free = q.free_set(&h)?;
    let relaxed = mode == PlanMode::Relaxed;
    let tds = enumerate_tds(&h, free, relaxed)?;
    if tds.is_empty() {
        return Err(no_plan_error(&h, free, relaxed));
    }

    let mut cache: BTreeMap<u32, Rat> = BTreeMap::new();
    let mut best: Option<(Rat, &TreeDecomposition)> = None;
    for td in &tds {
        let mut width = Rat::from_integer(0.into());
        for &bag in &td.bags {
            let r = match cache.get(&bag.0) {
                Some(r) => r.clone(),
                None => {
                    let r = rho_star(&h, bag)?;
                    cache.insert(bag.0, r.clone());
                    r
                }
            };
            if r > width {
                width = r;
            }
        }
        if best.as_ref().map(|(w, _)| width < *w).unwrap_or(true) {
            best = Some((width, td));
        }
    }
    let (width, td) = best.unwrap();
    let td = td.clone();

    // Root: canonically smallest core bag, else smallest bag overall.
    let root = if td.core.is_empty() {
        (0..td.bags.len()).min_by_key(|&i| td.bags[i].0).unwrap()
    } else {
        *td.core.iter().min_by_key(|&&i| td.bags[i].0).unwrap()
    };

    // Eliminate non-core leaves bottom-up, smallest bag first.
    let mut alive: Vec<bool> = vec![true; td.bags.len()];
    let mut steps: Vec<ElimStep> = Vec::new();
    loop {
        let degree = |t: usize| {
            td.edges
                .iter()
                .filter(|&&(a, b)| {
                    (a == t && alive[b]) || (b == t && alive[a])
                })
                .count()
        };
        let candidate = (0..td.bags.len())
            .filter(|&t| alive[t] && t != root && !td.core.contains(&t) && degree(t) <= 1)
            .min_by_key(|&t| (td.bags[t].0, t));
        let Some(leaf) = candidate else { break };
        let parent = td
            .edges
            .iter()
            .find_map(|&(a, b)| {
                if a == leaf && alive[b] {
                    Some(b)
                } else if b == leaf && alive[a] {
                    Some(a)
                } else {
                    None
                }
            })
            .unwrap_or(root);
        alive[leaf] = false;
        steps.push(ElimStep {
            leaf,
            parent,
            ligaments: Vec::new(),
        });
    }

    // Position of each bag in the elimination order; survivors last.
    let mut rank = vec![usize::MAX; td.bags.len()];
    for (i, s) in steps.iter().enumerate() {
        rank[s.leaf] = i;
    }
    let elim_rank = move |t: usize| rank[t];

    // Assign each skeleton edge to the earliest-eliminated bag covering it.
    let mut alpha = Vec::with_capacity(h.skeleton().len());
    for e in h.skeleton() {
        let bag = (0..td.bags.len())
            .filter(|&t| e.vars.is_subset(td.bags[t]))
            .min_by_key(|&t| (elim_rank(t), t))
            .ok_or_else(|| {
                Error::Plan(format!(
                    "skeleton edge {} not covered by the chosen decomposition",
                    h.display_set(e.vars)
                ))
            })?;
        alpha.push(bag);
    }

    // Route ligaments: absorb when inside a bag (earliest-eliminated one),
    // else the first step whose eliminated variables touch it, else the
    // final free filter.
    let mut absorbed = Vec::new();
    let mut residual = Vec::new();
    for (li, &lig) in h.ligaments().iter().enumerate() {
        if let Some(bag) = (0..td.bags.len())
            .filter(|&t| lig.is_subset(td.bags[t]))
            .min_by_key(|&t| (elim_rank(t), t))
        {
            absorbed.push((li, bag));
            continue;
        }
        let mut routed = false;
        for st in steps.iter_mut() {
            let eliminated = td.bags[st.leaf].minus(td.bags[st.parent]);
            if !lig.intersect(eliminated).is_empty() {
                let host = td.bags[st.leaf].union(td.bags[st.parent]);
                if !lig.is_subset(host) {
                    return Err(Error::Plan(format!(
                        "ligament {} touches eliminated variables but is not \
                         covered by bags {} and {}",
                        h.display_set(lig),
                        h.display_set(td.bags[st.leaf]),
                        h.display_set(td.bags[st.parent])
                    )));
                }
                st.ligaments.push(li);
                routed = true;
                break;
            }
        }
        if routed {
            continue;
        }
        if lig.is_subset(free) {
            residual.push(li);
        } else {
            return Err(Error::Plan(format!(
                "ligament {} is never covered during elimination",
                h.display_set(lig)
            )));
        }
    }

    let mut notes = vec![crate::widths::SEARCH_FAMILY_NOTE.to_string()];
    if h.ligaments().len() > 1 {
        notes.push(
            "inequalities are routed greedily to the earliest hosting step; \
             no per-step routing rule is claimed optimal"
                .to_string(),
        );
    }
    Ok(EvalPlan {
        td,
        root,
        alpha,
        steps,
        absorbed,
        residual,
        width,
        notes,
    })
}

fn no_plan_error(h: &Hypergraph, free: VarSet, relaxed: bool) -> Error {
    // Name a ligament that no decomposition can cover, if there is one.
    for (li, &lig) in h.ligaments().iter().enumerate() {
        let solo = Hypergraph::new(
            h.vars().to_vec(),
            h.skeleton().to_vec(),
            vec![lig],
        );
        if let Ok(solo) = solo {
            if let Ok(tds) = enumerate_tds(&solo, free, relaxed) {
                if tds.is_empty() {
                    return Error::Plan(format!(
                        "no valid decomposition covers ligament {li} = {}",
                        h.display_set(lig)
                    ));
                }
            }
        }
    }
    Error::Plan("no valid decomposition in the enumerated family".into())
}

/// Φ_t: the worst-case-optimal join of the bag's assigned factors with the
/// indicator projections of every finite factor overlapping the bag, with
/// absorbed inequalities and value weights applied.
pub fn bag_factor(
    db: &Database,
    q: &FaqAiQuery,
    h: &Hypergraph,
    plan: &EvalPlan,
    bag_idx: usize,
    counters: &mut EvalCounters,
) -> Result<AnnotatedRelation> {
    let bag = plan.td.bags[bag_idx];
    let bag_names = h.names_of(bag);

    let mut assigned: Vec<&AnnotatedRelation> = Vec::new();
    let mut projections: Vec<AnnotatedRelation> = Vec::new();
    for (ei, binding) in q.factors.iter().enumerate() {
        let rel = db.get(&binding.relation)?;
        if plan.alpha[ei] == bag_idx {
            assigned.push(rel);
        } else if !h.skeleton()[ei].vars.intersect(bag).is_empty() && h.skeleton()[ei].finite {
            projections.push(rel.indicator_projection(&bag_names)?);
        }
    }
    let mut parts: Vec<&AnnotatedRelation> = assigned;
    parts.extend(projections.iter());
    if parts.is_empty() {
        return Err(Error::Plan(format!(
            "bag {} holds no factor and no projection",
            h.display_set(bag)
        )));
    }
    let mut phi = multiway_join(&parts, counters)?;

    // Absorbed inequalities filter the bag rows directly.
    for &(li, b) in &plan.absorbed {
        if b != bag_idx {
            continue;
        }
        let lig = &q.ligaments[li];
        let positions: Vec<(usize, &crate::query::UnaryTerm)> = lig
            .terms
            .iter()
            .map(|t| {
                phi.schema()
                    .position(&t.var)
                    .map(|p| (p, t))
                    .ok_or_else(|| {
                        Error::Plan(format!(
                            "absorbed ligament variable {:?} missing from bag",
                            t.var
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut err = None;
        let filtered = phi.filter_rows(|row| {
            let mut sum = 0.0;
            for (p, term) in &positions {
                match term.eval(&row[*p], db) {
                    Ok(v) => sum += v,
                    Err(e) => {
                        err = Some(e);
                        return false;
                    }
                }
            }
            if lig.strict {
                sum < 0.0
            } else {
                sum <= 0.0
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        phi = filtered;
    }

    // Value weights assigned to this bag multiply the annotations.
    let weight_terms: Vec<&crate::query::ValueFactor> = q
        .weights
        .iter()
        .filter(|w| plan.weight_bag(h, w).ok() == Some(bag_idx))
        .collect();
    if !weight_terms.is_empty() {
        if phi.semiring() != SemiringId::RealSumProd {
            return Err(Error::Data(
                "value weights require the real semiring".into(),
            ));
        }
        let positions: Vec<(usize, &crate::query::ValueFactor)> = weight_terms
            .iter()
            .map(|w| {
                phi.schema()
                    .position(&w.var)
                    .map(|p| (p, *w))
                    .ok_or_else(|| Error::Plan(format!("weight variable {:?} missing", w.var)))
            })
            .collect::<Result<Vec<_>>>()?;
        phi = phi.map_annotations(|row, ann| {
            let mut v = match ann {
                SemiringValue::Real(r) => *r,
                _ => unreachable!(),
            };
            for (p, w) in &positions {
                let term = crate::query::UnaryTerm {
                    var: w.var.clone(),
                    expr: w.expr.clone(),
                };
                v *= term.eval(&row[*p], db)?;
            }
            Ok(SemiringValue::Real(v))
        })?;
    }
    counters.tuples_materialized += phi.len() as u64;
    Ok(phi)
}

impl EvalPlan {
    /// The bag whose factor a value weight multiplies: the earliest-
    /// eliminated bag containing the variable, so it is applied exactly
    /// once.
    fn weight_bag(&self, h: &Hypergraph, w: &crate::query::ValueFactor) -> Result<usize> {
        let v = h.var_index(&w.var)?;
        let elim_rank = |t: usize| {
            self.steps
                .iter()
                .position(|s| s.leaf == t)
                .unwrap_or(usize::MAX)
        };
        (0..self.td.bags.len())
            .filter(|&t| self.td.bags[t].contains(v))
            .min_by_key(|&t| (elim_rank(t), t))
            .ok_or_else(|| Error::Plan(format!("weight variable {:?} not in any bag", w.var)))
    }
}

/// φ_U(x_U) = Φ_U(x_U) ⊗ ⊕_{x_{L∖U}} Φ_L(x_L) ⊗ Π 1[inequality]: bucket
/// the leaf rows by the shared variables, index each bucket by the
/// negated leaf-side θ sums, and answer each parent row with one dominance
/// query at its own θ sums.
pub fn two_bag_eliminate(
    parent: &AnnotatedRelation,
    leaf: &AnnotatedRelation,
    ligaments: &[&Ligament],
    db: &Database,
    counters: &mut EvalCounters,
) -> Result<AnnotatedRelation> {
    let semiring = parent.semiring();
    let shared: Vec<String> = parent
        .schema()
        .vars()
        .iter()
        .filter(|v| leaf.schema().contains(v))
        .cloned()
        .collect();
    let parent_shared_pos: Vec<usize> = shared
        .iter()
        .map(|v| parent.schema().position(v).unwrap())
        .collect();
    let leaf_shared_pos: Vec<usize> = shared
        .iter()
        .map(|v| leaf.schema().position(v).unwrap())
        .collect();

    // Split each ligament's terms into the parent-side (query point) and
    // the leaf-only side (stored point).
    struct SplitLigament<'a> {
        parent_terms: Vec<(usize, &'a crate::query::UnaryTerm)>,
        leaf_terms: Vec<(usize, &'a crate::query::UnaryTerm)>,
        strict: Strictness,
    }
    let mut split: Vec<SplitLigament> = Vec::with_capacity(ligaments.len());
    for lig in ligaments {
        let mut parent_terms = Vec::new();
        let mut leaf_terms = Vec::new();
        for t in &lig.terms {
            if let Some(p) = parent.schema().position(&t.var) {
                parent_terms.push((p, t));
            } else if let Some(p) = leaf.schema().position(&t.var) {
                leaf_terms.push((p, t));
            } else {
                return Err(Error::Plan(format!(
                    "ligament variable {:?} is in neither bag of this step",
                    t.var
                )));
            }
        }
        if leaf_terms.is_empty() {
            return Err(Error::Plan(
                "ligament fully inside the parent bag should have been absorbed".into(),
            ));
        }
        split.push(SplitLigament {
            parent_terms,
            leaf_terms,
            strict: if lig.strict {
                Strictness::Strict
            } else {
                Strictness::NonStrict
            },
        });
    }
    let k = split.len();

    if k == 0 {
        // Plain aggregation of the leaf onto the shared variables, merged
        // into the parent. Columns reordered to the parent's view of the
        // shared variables so lookups line up.
        let agg = leaf.group_aggregate(&shared)?.reorder(&shared)?;
        counters.tuples_materialized += agg.len() as u64;
        let mut rows = Vec::new();
        for (tuple, w) in parent.rows() {
            let key: Vec<Value> = parent_shared_pos.iter().map(|&i| tuple[i].clone()).collect();
            counters.trie_probes += 1;
            let lw = agg.get(&key);
            if lw.is_zero() {
                continue;
            }
            let combined = semiring.mul(w, &lw)?;
            if !combined.is_zero() {
                counters.tuples_materialized += 1;
                rows.push((tuple.clone(), combined));
            }
        }
        return AnnotatedRelation::from_rows(parent.schema().clone(), semiring, rows);
    }

    // Bucket leaf rows by the shared projection.
    enum Bucket {
        Single(Vec<f64>, SemiringValue),
        Indexed(DominanceIndex),
    }
    let strictness: Vec<Strictness> = split.iter().map(|s| s.strict).collect();
    let mut grouped: BTreeMap<Vec<Value>, Vec<WeightedPoint>> = BTreeMap::new();
    for (tuple, w) in leaf.rows() {
        let mut coords = Vec::with_capacity(k);
        for s in &split {
            let mut sum = 0.0;
            for (p, term) in &s.leaf_terms {
                sum += term.eval(&tuple[*p], db)?;
            }
            coords.push(-sum);
        }
        let key: Vec<Value> = leaf_shared_pos.iter().map(|&i| tuple[i].clone()).collect();
        grouped.entry(key).or_default().push(WeightedPoint {
            coords,
            weight: w.clone(),
        });
    }
    let mut buckets: BTreeMap<Vec<Value>, Bucket> = BTreeMap::new();
    for (key, points) in grouped {
        let bucket = if points.len() == 1 {
            let p = points.into_iter().next().unwrap();
            Bucket::Single(p.coords, p.weight)
        } else {
            counters.tuples_materialized += points.len() as u64;
            Bucket::Indexed(DominanceIndex::build(
                points,
                k,
                semiring,
                strictness.clone(),
            )?)
        };
        buckets.insert(key, bucket);
    }

    let mut rows = Vec::new();
    for (tuple, w) in parent.rows() {
        let key: Vec<Value> = parent_shared_pos.iter().map(|&i| tuple[i].clone()).collect();
        counters.trie_probes += 1;
        let Some(bucket) = buckets.get(&key) else {
            continue;
        };
        let mut q = Vec::with_capacity(k);
        for s in &split {
            let mut sum = 0.0;
            for (p, term) in &s.parent_terms {
                sum += term.eval(&tuple[*p], db)?;
            }
            q.push(sum);
        }
        counters.dominance_queries += 1;
        let agg = match bucket {
            Bucket::Single(coords, weight) => {
                let dominated = q.iter().zip(coords).zip(&strictness).all(
                    |((qi, pi), s)| match s {
                        Strictness::NonStrict => qi <= pi,
                        Strictness::Strict => qi < pi,
                    },
                );
                if dominated {
                    weight.clone()
                } else {
                    semiring.zero()
                }
            }
            Bucket::Indexed(idx) => idx.query_counted(&q, &mut counters.dominance_nodes)?,
        };
        if agg.is_zero() {
            continue;
        }
        let combined = semiring.mul(w, &agg)?;
        if !combined.is_zero() {
            counters.tuples_materialized += 1;
            rows.push((tuple.clone(), combined));
        }
    }
    AnnotatedRelation::from_rows(parent.schema().clone(), semiring, rows)
}

/// Evaluate a query end to end over its default relaxed plan.
pub fn evaluate(
    db: &Database,
    q: &FaqAiQuery,
    counters: &mut EvalCounters,
) -> Result<AnnotatedRelation> {
    let plan = plan(q)?;
    evaluate_planned(db, q, &plan, counters)
}

pub fn evaluate_with_mode(
    db: &Database,
    q: &FaqAiQuery,
    mode: PlanMode,
    counters: &mut EvalCounters,
) -> Result<AnnotatedRelation> {
    let plan = plan_with_mode(q, mode)?;
    evaluate_planned(db, q, &plan, counters)
}

pub fn evaluate_planned(
    db: &Database,
    q: &FaqAiQuery,
    plan: &EvalPlan,
    counters: &mut EvalCounters,
) -> Result<AnnotatedRelation> {
    q.check_bindings(db)?;
    let h = q.hypergraph()?;
    let free = q.free_set(&h)?;

    let mut bag_rels: Vec<Option<AnnotatedRelation>> = Vec::new();
    for t in 0..plan.td.bags.len() {
        bag_rels.push(Some(bag_factor(db, q, &h, plan, t, counters)?));
    }

    for st in &plan.steps {
        let leaf = bag_rels[st.leaf].take().expect("leaf still alive");
        let parent = bag_rels[st.parent].take().expect("parent still alive");
        let ligs: Vec<&Ligament> = st.ligaments.iter().map(|&li| &q.ligaments[li]).collect();
        let merged = two_bag_eliminate(&parent, &leaf, &ligs, db, counters)?;
        bag_rels[st.parent] = Some(merged);
    }

    let survivors: Vec<AnnotatedRelation> = bag_rels.into_iter().flatten().collect();
    let free_names: Vec<String> = h.names_of(free);

    let mut result = if survivors.len() == 1 {
        survivors.into_iter().next().unwrap()
    } else {
        let refs: Vec<&AnnotatedRelation> = survivors.iter().collect();
        multiway_join(&refs, counters)?
    };

    // Residual ligaments have all-free variables and filter the join.
    for &li in &plan.residual {
        let lig = &q.ligaments[li];
        let positions: Vec<(usize, &crate::query::UnaryTerm)> = lig
            .terms
            .iter()
            .map(|t| {
                result
                    .schema()
                    .position(&t.var)
                    .map(|p| (p, t))
                    .ok_or_else(|| Error::Plan(format!("residual variable {:?} missing", t.var)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut err = None;
        let filtered = result.filter_rows(|row| {
            let mut sum = 0.0;
            for (p, term) in &positions {
                match term.eval(&row[*p], db) {
                    Ok(v) => sum += v,
                    Err(e) => {
                        err = Some(e);
                        return false;
                    }
                }
            }
            if lig.strict {
                sum < 0.0
            } else {
                sum <= 0.0
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        result = filtered;
    }

    let out = result.group_aggregate(&free_names)?.reorder(&free_names)?;
    counters.tuples_materialized += out.len() as u64;
    Ok(out)
}
