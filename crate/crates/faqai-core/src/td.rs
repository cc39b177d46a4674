//! Tree decompositions: validation under the relaxed ligament rule,
//! non-redundancy, and enumeration of the candidate family.
//!
//! Candidates come from two sources: the standard bag construction over all
//! elimination orders (free variables eliminated last), and, in relaxed
//! mode, every two-bag cover of the vertex set whose bags each hold their
//! assigned skeleton edges. Widths are reported relative to this family;
//! no claim is made that it always contains an optimal relaxed
//! decomposition, and width reports carry that caveat.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, VarSet};

pub const ENUMERATION_VERTEX_BUDGET: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<VarSet>,
    /// Adjacency pairs over bag indices; forms a tree.
    pub edges: Vec<(usize, usize)>,
    /// Indices of the F-connex core bags (empty when F = ∅).
    pub core: Vec<usize>,
}

/// How a ligament edge is covered by a decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LigamentWitness {
    /// Contained in a single bag.
    Bag(usize),
    /// Covered by the union of two adjacent bags.
    AdjacentPair(usize, usize),
}

/// Outcome of validating a decomposition; violations are data, not errors.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub valid: bool,
    /// One witness per ligament edge, when covered.
    pub ligament_witnesses: Vec<Option<LigamentWitness>>,
    pub violations: Vec<String>,
}

impl TreeDecomposition {
    pub fn n_bags(&self) -> usize {
        self.bags.len()
    }

    pub fn neighbors(&self, t: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == t {
                    Some(b)
                } else if b == t {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn union_of_bags(&self) -> VarSet {
        self.bags.iter().fold(VarSet::EMPTY, |a, &b| a.union(b))
    }

    /// Canonical key: sorted bag masks. Decompositions are deduplicated and
    /// ordered by this key.
    pub fn canonical_key(&self) -> Vec<u32> {
        let mut key: Vec<u32> = self.bags.iter().map(|b| b.0).collect();
        key.sort();
        key
    }

    fn is_tree(&self) -> bool {
        let n = self.bags.len();
        if n == 0 {
            return false;
        }
        if self.edges.len() != n - 1 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(t) = stack.pop() {
            for u in self.neighbors(t) {
                if u >= n {
                    return false;
                }
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn running_intersection_holds(&self, vertex: usize) -> bool {
        let holders: Vec<usize> = (0..self.bags.len())
            .filter(|&t| self.bags[t].contains(vertex))
            .collect();
        if holders.is_empty() {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![holders[0]];
        seen.insert(holders[0]);
        while let Some(t) = stack.pop() {
            for u in self.neighbors(t) {
                if self.bags[u].contains(vertex) && !seen.contains(&u) {
                    seen.insert(u);
                    stack.push(u);
                }
            }
        }
        holders.iter().all(|t| seen.contains(t))
    }
}

/// Search for an F-connex core: a connected set of bags, each ⊆ `free`,
/// whose union equals `free`. Returns bag indices, or None.
pub fn find_core(td: &TreeDecomposition, free: VarSet) -> Option<Vec<usize>> {
    if free.is_empty() {
        return Some(Vec::new());
    }
    // Candidate bags are exactly those inside F; a connected component of
    // candidates whose union is F is a valid core, and taking the whole
    // component loses nothing because every candidate bag is ⊆ F.
    let cands: Vec<usize> = (0..td.bags.len())
        .filter(|&t| td.bags[t].is_subset(free))
        .collect();
    let mut unassigned: BTreeSet<usize> = cands.iter().copied().collect();
    while let Some(&start) = unassigned.iter().next() {
        let mut comp = vec![start];
        unassigned.remove(&start);
        let mut stack = vec![start];
        while let Some(t) = stack.pop() {
            for u in td.neighbors(t) {
                if unassigned.contains(&u) {
                    unassigned.remove(&u);
                    comp.push(u);
                    stack.push(u);
                }
            }
        }
        let union = comp
            .iter()
            .fold(VarSet::EMPTY, |a, &t| a.union(td.bags[t]));
        if union == free {
            comp.sort();
            return Some(comp);
        }
    }
    None
}

/// Check a decomposition against the (possibly relaxed) coverage rules and
/// F-connexity, reporting per-ligament witnesses.
pub fn validate_relaxed(
    td: &TreeDecomposition,
    h: &Hypergraph,
    free: VarSet,
    relaxed: bool,
) -> CoverageReport {
    let mut violations = Vec::new();
    if !td.is_tree() {
        violations.push("bag adjacency does not form a tree".to_string());
    }
    for b in &td.bags {
        if !b.is_subset(h.all_vars()) {
            violations.push("bag contains unknown vertices".to_string());
        }
    }
    if td.is_tree() {
        for v in 0..h.n_vars() {
            if !td.running_intersection_holds(v) {
                violations.push(format!(
                    "running intersection fails for {:?}",
                    h.vars()[v]
                ));
            }
        }
    }
    for e in h.skeleton() {
        if !td.bags.iter().any(|&b| e.vars.is_subset(b)) {
            violations.push(format!(
                "skeleton edge {} not inside any bag",
                h.display_set(e.vars)
            ));
        }
    }
    let mut ligament_witnesses = Vec::with_capacity(h.ligaments().len());
    for &lig in h.ligaments() {
        let single = (0..td.bags.len()).find(|&t| lig.is_subset(td.bags[t]));
        let witness = if let Some(t) = single {
            Some(LigamentWitness::Bag(t))
        } else if relaxed {
            td.edges
                .iter()
                .find(|&&(a, b)| lig.is_subset(td.bags[a].union(td.bags[b])))
                .map(|&(a, b)| LigamentWitness::AdjacentPair(a, b))
        } else {
            None
        };
        if witness.is_none() {
            violations.push(format!(
                "ligament edge {} not covered{}",
                h.display_set(lig),
                if relaxed {
                    " by any adjacent bag pair"
                } else {
                    " by any bag"
                }
            ));
        }
        ligament_witnesses.push(witness);
    }
    if find_core(td, free).is_none() {
        violations.push(format!(
            "no connected core of bags unions to the free set {}",
            h.display_set(free)
        ));
    }
    CoverageReport {
        valid: violations.is_empty(),
        ligament_witnesses,
        violations,
    }
}

/// Absorb bags contained in an adjacent bag until none remain, skipping
/// any absorption that would destroy F-connexity. With free variables a
/// fully non-redundant decomposition need not exist (the core bag for a
/// single free variable sits inside whichever bag covers its edges), so
/// redundancy is removed only as far as the core allows.
pub fn make_non_redundant(td: &TreeDecomposition, free: VarSet) -> TreeDecomposition {
    let mut cur = TreeDecomposition {
        bags: td.bags.clone(),
        edges: td.edges.clone(),
        core: Vec::new(),
    };
    let had_core = find_core(&cur, free).is_some();
    loop {
        let mut candidates = Vec::new();
        for &(a, b) in &cur.edges {
            if cur.bags[a].is_subset(cur.bags[b]) {
                candidates.push((a, b));
            }
            if cur.bags[b].is_subset(cur.bags[a]) {
                candidates.push((b, a));
            }
        }
        let mut applied = false;
        for (gone, into) in candidates {
            let next = absorb(&cur, gone, into);
            if had_core && find_core(&next, free).is_none() {
                continue;
            }
            cur = next;
            applied = true;
            break;
        }
        if !applied {
            break;
        }
    }
    cur.core = find_core(&cur, free).unwrap_or_default();
    cur
}

/// Drop bag `gone`, reattaching its other neighbors to `into`.
fn absorb(td: &TreeDecomposition, gone: usize, into: usize) -> TreeDecomposition {
    let mut bags = td.bags.clone();
    let mut new_edges = Vec::with_capacity(td.edges.len().saturating_sub(1));
    for &(x, y) in &td.edges {
        if (x, y) == (gone, into) || (x, y) == (into, gone) {
            continue;
        }
        let x2 = if x == gone { into } else { x };
        let y2 = if y == gone { into } else { y };
        new_edges.push((x2, y2));
    }
    bags.remove(gone);
    let edges = new_edges
        .into_iter()
        .map(|(x, y)| {
            (
                if x > gone { x - 1 } else { x },
                if y > gone { y - 1 } else { y },
            )
        })
        .collect();
    TreeDecomposition {
        bags,
        edges,
        core: Vec::new(),
    }
}

/// Enumerate the candidate family of (relaxed) F-connex non-redundant tree
/// decompositions: elimination orders plus, in relaxed mode, all two-bag
/// covers. Output is deduplicated by bag set and canonically ordered.
pub fn enumerate_tds(
    h: &Hypergraph,
    free: VarSet,
    relaxed: bool,
) -> Result<Vec<TreeDecomposition>> {
    let n = h.n_vars();
    if n > ENUMERATION_VERTEX_BUDGET {
        return Err(Error::Capacity(format!(
            "decomposition enumeration supports at most {ENUMERATION_VERTEX_BUDGET} vertices, got {n}"
        )));
    }

    // Edges the bag construction must cover: skeleton only in relaxed mode
    // (ligaments are checked against adjacent pairs afterwards), skeleton
    // plus ligaments otherwise.
    let mut cover_edges: Vec<VarSet> = h.skeleton().iter().map(|e| e.vars).collect();
    if !relaxed {
        cover_edges.extend(h.ligaments().iter().copied());
    }

    let bound: Vec<usize> = (0..n).filter(|&v| !free.contains(v)).collect();
    let free_vars: Vec<usize> = (0..n).filter(|&v| free.contains(v)).collect();

    let mut seen: BTreeSet<Vec<u32>> = BTreeSet::new();
    let mut out: Vec<TreeDecomposition> = Vec::new();
    let mut consider = |cand: TreeDecomposition| {
        let report = validate_relaxed(&cand, h, free, relaxed);
        if !report.valid {
            return;
        }
        let key = cand.canonical_key();
        if seen.insert(key) {
            out.push(cand);
        }
    };

    // All elimination orders: bound variables first, then free ones.
    let mut bound_perm = bound.clone();
    permute(&mut bound_perm, 0, &mut |bp: &[usize]| {
        let mut free_perm = free_vars.clone();
        permute(&mut free_perm, 0, &mut |fp: &[usize]| {
            let order: Vec<usize> = bp.iter().chain(fp.iter()).copied().collect();
            let td = td_from_elimination_order(&order, &cover_edges, n);
            consider(make_non_redundant(&td, free));
        });
    });

    if relaxed {
        // Trivial single-bag decomposition.
        let trivial = TreeDecomposition {
            bags: vec![h.all_vars()],
            edges: vec![],
            core: Vec::new(),
        };
        consider(make_non_redundant(&trivial, free));
        // Two-bag covers: every split of V into (possibly overlapping)
        // bags such that each skeleton edge fits inside one of them.
        let skeleton: Vec<VarSet> = h.skeleton().iter().map(|e| e.vars).collect();
        enumerate_two_bag_covers(n, &skeleton, &mut |b1, b2| {
            let td = TreeDecomposition {
                bags: vec![b1, b2],
                edges: vec![(0, 1)],
                core: Vec::new(),
            };
            consider(make_non_redundant(&td, free));
        });
    }

    out.sort_by_key(|td| (td.bags.len(), td.canonical_key()));
    Ok(out)
}

fn permute<F: FnMut(&[usize])>(items: &mut Vec<usize>, k: usize, f: &mut F) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}

/// Standard bag construction for one elimination order: the bag of v is the
/// union of active sets containing v; its parent is the bag of the first
/// later-eliminated vertex in bag∖{v}.
fn td_from_elimination_order(
    order: &[usize],
    cover_edges: &[VarSet],
    n: usize,
) -> TreeDecomposition {
    let mut active: Vec<VarSet> = cover_edges.to_vec();
    // Every vertex must appear in some active set so it gets a bag.
    for v in 0..n {
        active.push(VarSet::singleton(v));
    }
    let mut bags: Vec<VarSet> = Vec::with_capacity(order.len());
    let mut elim_pos = vec![usize::MAX; n];
    for (k, &v) in order.iter().enumerate() {
        elim_pos[v] = k;
        let mut bag = VarSet::singleton(v);
        let mut rest = Vec::with_capacity(active.len());
        for &s in &active {
            if s.contains(v) {
                bag = bag.union(s);
            } else {
                rest.push(s);
            }
        }
        let residual = bag.minus(VarSet::singleton(v));
        if !residual.is_empty() {
            rest.push(residual);
        }
        active = rest;
        bags.push(bag);
    }
    let mut edges = Vec::new();
    for (k, &v) in order.iter().enumerate() {
        let residual = bags[k].minus(VarSet::singleton(v));
        if residual.is_empty() {
            continue;
        }
        // Parent: bag of the earliest-eliminated vertex remaining in the
        // residual set.
        let parent = residual.iter().map(|u| elim_pos[u]).min().unwrap();
        edges.push((k, parent));
    }
    // Disconnected pieces (independent components) are chained arbitrarily
    // so the result is a single tree.
    let td = TreeDecomposition {
        bags,
        edges,
        core: Vec::new(),
    };
    connect_components(td)
}

fn connect_components(mut td: TreeDecomposition) -> TreeDecomposition {
    let n = td.bags.len();
    let mut comp = vec![usize::MAX; n];
    let mut n_comp = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = n_comp;
        while let Some(t) = stack.pop() {
            for u in td.neighbors(t) {
                if comp[u] == usize::MAX {
                    comp[u] = n_comp;
                    stack.push(u);
                }
            }
        }
        n_comp += 1;
    }
    if n_comp > 1 {
        // Attach one representative of each extra component to bag 0.
        let mut reps = vec![usize::MAX; n_comp];
        for t in 0..n {
            if reps[comp[t]] == usize::MAX {
                reps[comp[t]] = t;
            }
        }
        for c in 1..n_comp {
            td.edges.push((reps[0], reps[c]));
        }
    }
    td
}

/// Visit every unordered pair (B1, B2) with B1 ∪ B2 = V, neither containing
/// the other, such that each skeleton edge lies inside B1 or inside B2.
fn enumerate_two_bag_covers<F: FnMut(VarSet, VarSet)>(
    n: usize,
    skeleton: &[VarSet],
    f: &mut F,
) {
    let full = VarSet::full(n);
    // Iterate over B1; B2 must contain V ∖ B1 plus any subset of B1.
    for b1_bits in 1..(1u32 << n) {
        let b1 = VarSet(b1_bits);
        if b1 == full {
            continue;
        }
        let rest = full.minus(b1);
        // overlap ⊆ B1: vertices shared by both bags
        let b1_vec: Vec<usize> = b1.iter().collect();
        for overlap_bits in 0..(1u32 << b1_vec.len()) {
            let mut b2 = rest;
            for (j, &v) in b1_vec.iter().enumerate() {
                if overlap_bits & (1 << j) != 0 {
                    b2 = b2.insert(v);
                }
            }
            if b1.is_subset(b2) || b2.is_subset(b1) {
                continue;
            }
            if b1.0 > b2.0 {
                continue; // unordered: visit each pair once
            }
            if skeleton
                .iter()
                .all(|&e| e.is_subset(b1) || e.is_subset(b2))
            {
                f(b1, b2);
            }
        }
    }
}
