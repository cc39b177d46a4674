//! Exact width parameters via linear programming: fractional edge covers,
//! (relaxed) FAQ-width, and the (sharp) submodular FAQ-widths.
//!
//! Minimax widths take a minimum over the enumerated decomposition family
//! of the per-bag fractional edge cover number. Maximin widths maximize,
//! over ways of picking one bag from every decomposition, the LP
//! "max z subject to z ≤ h(B) for each picked bag" with h ranging over the
//! edge-dominated polymatroids (or their edge-restricted relaxation for
//! the sharp variants); the pointwise minimax identity makes this equal to
//! the maximin definition over the same family. Everything is exact
//! rational arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, VarSet};
use crate::simplex::{rat, solve, Cmp, Constraint, Lp, LpSolution, Rat, Sense};
use crate::td::{enumerate_tds, TreeDecomposition};

pub const CONE_VERTEX_BUDGET: usize = 6;
pub const BAG_SELECTION_BUDGET: usize = 1_000_000;

pub const SEARCH_FAMILY_NOTE: &str = "width is relative to the enumerated decomposition \
family (elimination orders plus two-bag covers); optimality over all relaxed decompositions \
is not guaranteed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeSpace {
    Polymatroid,
    EPolymatroid,
    Modular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthKind {
    RhoStar,
    Faqw,
    FaqwL,
    Smfw,
    SmfwL,
    SharpSmfw,
    SharpSmfwL,
}

impl WidthKind {
    pub fn name(self) -> &'static str {
        match self {
            WidthKind::RhoStar => "rho_star",
            WidthKind::Faqw => "faqw",
            WidthKind::FaqwL => "faqw_l",
            WidthKind::Smfw => "smfw",
            WidthKind::SmfwL => "smfw_l",
            WidthKind::SharpSmfw => "sharp_smfw",
            WidthKind::SharpSmfwL => "sharp_smfw_l",
        }
    }
}

#[derive(Debug, Clone)]
pub struct WidthReport {
    pub kind: WidthKind,
    pub value: Rat,
    pub witness_td: Option<TreeDecomposition>,
    pub witness_h: Option<Vec<(VarSet, Rat)>>,
    pub search_family_note: String,
}

/// Fractional edge cover number of `target` using the finite edges:
/// min Σ λ_K subject to Σ_{K ∋ v} λ_K ≥ 1 for every v in the target.
pub fn rho_star(h: &Hypergraph, target: VarSet) -> Result<Rat> {
    if target.is_empty() {
        return Ok(Rat::zero());
    }
    let finite: Vec<VarSet> = h.finite_edges().collect();
    for v in target.iter() {
        if !finite.iter().any(|k| k.contains(v)) {
            return Err(Error::Infeasible(format!(
                "variable {:?} is not covered by any finite edge",
                h.vars()[v]
            )));
        }
    }
    let constraints = target
        .iter()
        .map(|v| Constraint {
            terms: finite
                .iter()
                .enumerate()
                .filter(|(_, k)| k.contains(v))
                .map(|(i, _)| (i, rat(1)))
                .collect(),
            cmp: Cmp::Ge,
            rhs: rat(1),
        })
        .collect();
    let lp = Lp {
        num_vars: finite.len(),
        sense: Sense::Min,
        objective: vec![rat(1); finite.len()],
        constraints,
    };
    Ok(solve(&lp)?.value)
}

/// Index of the LP variable standing for h(S), S non-empty.
fn hvar(mask: VarSet) -> usize {
    debug_assert!(!mask.is_empty());
    (mask.0 - 1) as usize
}

/// Constraints carving out ED_¬∞ ∩ Γ (or its edge-restricted variant) over
/// the 2^n − 1 subset variables. h(∅) = 0 is implicit.
fn cone_constraints(n: usize, finite: &[VarSet], space: ConeSpace) -> Vec<Constraint> {
    let mut cs = Vec::new();
    let full = (1u32 << n) - 1;
    // Edge domination: h(K) ≤ 1 for finite K.
    for &k in finite {
        if !k.is_empty() {
            cs.push(Constraint {
                terms: vec![(hvar(k), rat(1))],
                cmp: Cmp::Le,
                rhs: rat(1),
            });
        }
    }
    // Elemental monotonicity: h(X) ≤ h(X ∪ {v}); X = ∅ is variable
    // non-negativity and can be skipped.
    for x_bits in 1..=full {
        let x = VarSet(x_bits);
        for v in 0..n {
            if !x.contains(v) {
                cs.push(Constraint {
                    terms: vec![(hvar(x), rat(1)), (hvar(x.insert(v)), rat(-1))],
                    cmp: Cmp::Le,
                    rhs: rat(0),
                });
            }
        }
    }
    match space {
        ConeSpace::Polymatroid => {
            // Elemental submodularity generates the full polymatroid cone:
            // h(X∪{i,j}) + h(X) ≤ h(X∪{i}) + h(X∪{j}).
            for x_bits in 0..=full {
                let x = VarSet(x_bits);
                for i in 0..n {
                    if x.contains(i) {
                        continue;
                    }
                    for j in (i + 1)..n {
                        if x.contains(j) {
                            continue;
                        }
                        let xi = x.insert(i);
                        let xj = x.insert(j);
                        let xij = xi.insert(j);
                        let mut terms = vec![
                            (hvar(xij), rat(1)),
                            (hvar(xi), rat(-1)),
                            (hvar(xj), rat(-1)),
                        ];
                        if !x.is_empty() {
                            terms.push((hvar(x), rat(1)));
                        }
                        cs.push(Constraint {
                            terms,
                            cmp: Cmp::Le,
                            rhs: rat(0),
                        });
                    }
                }
            }
        }
        ConeSpace::EPolymatroid => {
            // Submodularity restricted to pairs whose intersection lies in
            // a finite edge, generated for all such pairs (not only the
            // elemental ones; whether elemental generation suffices under
            // the restriction is open).
            for x_bits in 1..=full {
                for y_bits in (x_bits + 1)..=full {
                    let x = VarSet(x_bits);
                    let y = VarSet(y_bits);
                    if x.is_subset(y) || y.is_subset(x) {
                        continue;
                    }
                    let meet = x.intersect(y);
                    if !finite.iter().any(|&k| meet.is_subset(k)) {
                        continue;
                    }
                    let join = x.union(y);
                    let mut terms = vec![
                        (hvar(join), rat(1)),
                        (hvar(x), rat(-1)),
                        (hvar(y), rat(-1)),
                    ];
                    if !meet.is_empty() {
                        terms.push((hvar(meet), rat(1)));
                    }
                    cs.push(Constraint {
                        terms,
                        cmp: Cmp::Le,
                        rhs: rat(0),
                    });
                }
            }
        }
        ConeSpace::Modular => unreachable!("modular space uses the per-vertex LP"),
    }
    cs
}

/// max h(bag) over the chosen cone intersected with edge domination.
pub fn max_h_over_bag(h: &Hypergraph, bag: VarSet, space: ConeSpace) -> Result<Rat> {
    let n = h.n_vars();
    if n > CONE_VERTEX_BUDGET {
        return Err(Error::Capacity(format!(
            "set-function LPs support at most {CONE_VERTEX_BUDGET} vertices, got {n}"
        )));
    }
    if bag.is_empty() {
        return Ok(Rat::zero());
    }
    let finite: Vec<VarSet> = h.finite_edges().collect();
    if space == ConeSpace::Modular {
        // h(S) = Σ_{v∈S} h({v}): variables are the singleton values.
        let constraints = finite
            .iter()
            .map(|k| Constraint {
                terms: k.iter().map(|v| (v, rat(1))).collect(),
                cmp: Cmp::Le,
                rhs: rat(1),
            })
            .collect();
        let mut objective = vec![rat(0); n];
        for v in bag.iter() {
            objective[v] = rat(1);
        }
        let lp = Lp {
            num_vars: n,
            sense: Sense::Max,
            objective,
            constraints,
        };
        return Ok(solve(&lp)?.value);
    }
    let num_vars = (1usize << n) - 1;
    let mut objective = vec![rat(0); num_vars];
    objective[hvar(bag)] = rat(1);
    let lp = Lp {
        num_vars,
        sense: Sense::Max,
        objective,
        constraints: cone_constraints(n, &finite, space),
    };
    Ok(solve(&lp)?.value)
}

/// (Relaxed) FAQ-width: minimum over the enumerated F-connex family of the
/// largest per-bag fractional edge cover number. With no free variables
/// this is fhtw (fhtw_ℓ when relaxed).
pub fn faqw(h: &Hypergraph, free: VarSet, relaxed: bool) -> Result<WidthReport> {
    let tds = enumerate_tds(h, free, relaxed)?;
    if tds.is_empty() {
        return Err(Error::Plan(format!(
            "no valid {} decomposition in the enumerated family",
            if relaxed { "relaxed" } else { "non-relaxed" }
        )));
    }
    let mut cache: BTreeMap<u32, Rat> = BTreeMap::new();
    let mut best: Option<(Rat, &TreeDecomposition)> = None;
    for td in &tds {
        let mut width = Rat::zero();
        for &bag in &td.bags {
            let r = match cache.get(&bag.0) {
                Some(r) => r.clone(),
                None => {
                    let r = rho_star(h, bag)?;
                    cache.insert(bag.0, r.clone());
                    r
                }
            };
            if r > width {
                width = r;
            }
        }
        // Strict improvement keeps the canonically first witness on ties.
        if best.as_ref().map(|(w, _)| width < *w).unwrap_or(true) {
            best = Some((width, td));
        }
    }
    let (value, witness) = best.unwrap();
    Ok(WidthReport {
        kind: if relaxed {
            WidthKind::FaqwL
        } else {
            WidthKind::Faqw
        },
        value,
        witness_td: Some(witness.clone()),
        witness_h: None,
        search_family_note: SEARCH_FAMILY_NOTE.to_string(),
    })
}

/// Insert `bag` into an antichain of ⊆-minimal bags. A superset of an
/// existing bag adds nothing (its constraint is implied); a subset evicts
/// the bags it implies.
fn antichain_insert(chain: &[u32], bag: u32) -> Vec<u32> {
    if chain.iter().any(|&c| c & !bag == 0) {
        return chain.to_vec();
    }
    let mut out: Vec<u32> = chain.iter().copied().filter(|&c| bag & !c != 0).collect();
    out.push(bag);
    out.sort();
    out
}

/// All distinct constraint antichains arising from picking one bag per
/// decomposition, with dominated picks pruned.
fn bag_selection_antichains(tds: &[Vec<u32>], cap: usize) -> Result<Vec<Vec<u32>>> {
    let mut out: BTreeSet<Vec<u32>> = BTreeSet::new();
    let mut visited: BTreeSet<(usize, Vec<u32>)> = BTreeSet::new();
    let mut work = 0usize;

    fn rec(
        tds: &[Vec<u32>],
        i: usize,
        chain: Vec<u32>,
        out: &mut BTreeSet<Vec<u32>>,
        visited: &mut BTreeSet<(usize, Vec<u32>)>,
        work: &mut usize,
        cap: usize,
    ) -> Result<()> {
        *work += 1;
        if *work > cap {
            return Err(Error::Capacity(
                "bag-selection enumeration exceeded its budget".into(),
            ));
        }
        if i == tds.len() {
            out.insert(chain);
            return Ok(());
        }
        if !visited.insert((i, chain.clone())) {
            return Ok(());
        }
        // If some bag of this decomposition already contains a chosen bag,
        // choosing it adds no constraint, and any other choice only
        // tightens the LP; skip straight ahead.
        if tds[i]
            .iter()
            .any(|&b| chain.iter().any(|&c| c & !b == 0))
        {
            return rec(tds, i + 1, chain, out, visited, work, cap);
        }
        let mut options: Vec<u32> = tds[i].clone();
        options.sort();
        options.dedup();
        for b in options {
            let next = antichain_insert(&chain, b);
            rec(tds, i + 1, next, out, visited, work, cap)?;
        }
        Ok(())
    }

    rec(tds, 0, Vec::new(), &mut out, &mut visited, &mut work, cap)?;
    // Drop antichains whose LP is dominated: S is dominated by S' when
    // every bag of S' contains some bag of S (then feasible(S) ⊆
    // feasible(S')).
    let all: Vec<Vec<u32>> = out.into_iter().collect();
    let dominated = |s: &Vec<u32>, s2: &Vec<u32>| {
        s != s2 && s2.iter().all(|&b2| s.iter().any(|&b| b & !b2 == 0))
    };
    Ok(all
        .iter()
        .filter(|s| !all.iter().any(|s2| dominated(s, s2)))
        .cloned()
        .collect())
}

/// (Sharp, relaxed) submodular FAQ-width over the enumerated family.
pub fn smfw(h: &Hypergraph, free: VarSet, relaxed: bool, sharp: bool) -> Result<WidthReport> {
    let n = h.n_vars();
    if n > CONE_VERTEX_BUDGET {
        return Err(Error::Capacity(format!(
            "submodular width LPs support at most {CONE_VERTEX_BUDGET} vertices, got {n}"
        )));
    }
    let tds = enumerate_tds(h, free, relaxed)?;
    if tds.is_empty() {
        return Err(Error::Plan(
            "no valid decomposition in the enumerated family".into(),
        ));
    }
    // Keep only decompositions minimal under refinement: if every bag of A
    // fits inside a bag of B, then B can never be the inner minimum.
    let bag_lists: Vec<Vec<u32>> = tds
        .iter()
        .map(|td| td.bags.iter().map(|b| b.0).collect())
        .collect();
    let refines = |a: &Vec<u32>, b: &Vec<u32>| {
        a.iter().all(|&ba| b.iter().any(|&bb| ba & !bb == 0))
    };
    let mut minimal: Vec<Vec<u32>> = Vec::new();
    for cand in &bag_lists {
        if minimal.iter().any(|kept| refines(kept, cand)) {
            continue;
        }
        minimal.retain(|kept| !refines(cand, kept));
        minimal.push(cand.clone());
    }
    let product: usize = minimal
        .iter()
        .map(|t| t.len())
        .fold(1usize, |a, b| a.saturating_mul(b));
    if product > BAG_SELECTION_BUDGET {
        return Err(Error::Capacity(format!(
            "{product} bag-selection maps exceed the {BAG_SELECTION_BUDGET} budget"
        )));
    }
    minimal.sort_by_key(|t| t.len());
    let antichains = bag_selection_antichains(&minimal, BAG_SELECTION_BUDGET)?;

    let finite: Vec<VarSet> = h.finite_edges().collect();
    let space = if sharp {
        ConeSpace::EPolymatroid
    } else {
        ConeSpace::Polymatroid
    };
    let base = cone_constraints(n, &finite, space);
    let n_subsets = (1usize << n) - 1;
    let z = n_subsets; // extra LP variable for the inner min

    let mut best: Option<(Rat, LpSolution)> = None;
    for chain in &antichains {
        let mut constraints = base.clone();
        for &b in chain {
            constraints.push(Constraint {
                terms: vec![(z, rat(1)), (hvar(VarSet(b)), rat(-1))],
                cmp: Cmp::Le,
                rhs: rat(0),
            });
        }
        let mut objective = vec![rat(0); n_subsets + 1];
        objective[z] = rat(1);
        let lp = Lp {
            num_vars: n_subsets + 1,
            sense: Sense::Max,
            objective,
            constraints,
        };
        let sol = solve(&lp)?;
        if best.as_ref().map(|(v, _)| sol.value > *v).unwrap_or(true) {
            best = Some((sol.value.clone(), sol));
        }
    }
    let (value, sol) = best.ok_or_else(|| Error::Plan("no bag selection".into()))?;
    let mut witness_h: Vec<(VarSet, Rat)> = vec![(VarSet::EMPTY, Rat::zero())];
    for m in 1..=(n_subsets as u32) {
        witness_h.push((VarSet(m), sol.point[(m - 1) as usize].clone()));
    }
    let kind = match (relaxed, sharp) {
        (false, false) => WidthKind::Smfw,
        (true, false) => WidthKind::SmfwL,
        (false, true) => WidthKind::SharpSmfw,
        (true, true) => WidthKind::SharpSmfwL,
    };
    Ok(WidthReport {
        kind,
        value,
        witness_td: None,
        witness_h: Some(witness_h),
        search_family_note: SEARCH_FAMILY_NOTE.to_string(),
    })
}
