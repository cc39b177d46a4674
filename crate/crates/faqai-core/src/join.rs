//! Worst-case-optimal multiway join over sorted implicit tries.
//!
//! Each input relation is re-sorted along the global variable order and the
//! join proceeds variable at a time: the relation with the narrowest
//! candidate run seeds distinct values, the others are narrowed by binary
//! search. Probe and output counts feed the complexity-witness tests.

use crate::error::{Error, Result};
use crate::relation::{AnnotatedRelation, Schema};
use crate::semiring::SemiringValue;
use crate::value::Value;

/// Deterministic operation counts for one evaluation.
#[derive(Debug, Clone, Default)]
pub struct EvalCounters {
    /// Binary-search probes into sorted runs (joins, semijoins, buckets).
    pub trie_probes: u64,
    /// Dominance queries issued.
    pub dominance_queries: u64,
    /// Range-tree nodes visited while answering dominance queries.
    pub dominance_nodes: u64,
    /// Rows emitted by joins, aggregations, and eliminations.
    pub tuples_materialized: u64,
}

impl EvalCounters {
    pub fn total(&self) -> u64 {
        self.trie_probes + self.dominance_queries + self.dominance_nodes + self.tuples_materialized
    }
}

struct JoinPart {
    /// Rows reordered to the global variable order restricted to this
    /// part's schema, then sorted.
    rows: Vec<(Vec<Value>, SemiringValue)>,
    /// For each global depth d, the column index in `rows` tuples that
    /// variable d occupies, if the part contains that variable.
    col_at_depth: Vec<Option<usize>>,
}

/// Natural join of `parts` with ⊗-combined annotations.
///
/// The output schema is the union of the part schemas in first-appearance
/// order.
pub fn multiway_join(
    parts: &[&AnnotatedRelation],
    counters: &mut EvalCounters,
) -> Result<AnnotatedRelation> {
    if parts.is_empty() {
        return Err(Error::Schema("multiway_join of zero relations".into()));
    }
    let semiring = parts[0].semiring();
    for p in parts {
        if p.semiring() != semiring {
            return Err(Error::Semiring(
                "multiway_join inputs use different semirings".into(),
            ));
        }
    }
    // Global variable order: first appearance across parts.
    let mut order: Vec<String> = Vec::new();
    for p in parts {
        for v in p.schema().vars() {
            if !order.contains(v) {
                order.push(v.clone());
            }
        }
    }

    let mut views = Vec::with_capacity(parts.len());
    for p in parts {
        // The subsequence of the global order covered by this schema.
        let local_order: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(_, v)| p.schema().contains(v))
            .map(|(d, _)| d)
            .collect();
        let perm: Vec<usize> = local_order
            .iter()
            .map(|&d| p.schema().position(&order[d]).unwrap())
            .collect();
        let mut rows: Vec<(Vec<Value>, SemiringValue)> = p
            .rows()
            .iter()
            .map(|(t, w)| {
                (
                    perm.iter().map(|&i| t[i].clone()).collect(),
                    w.clone(),
                )
            })
            .collect();
        rows.sort_by(|(a, _), (b, _)| a.cmp(b));
        let mut col_at_depth = vec![None; order.len()];
        for (c, &d) in local_order.iter().enumerate() {
            col_at_depth[d] = Some(c);
        }
        views.push(JoinPart { rows, col_at_depth });
    }

    let mut out: Vec<(Vec<Value>, SemiringValue)> = Vec::new();
    let mut ranges: Vec<(usize, usize)> = views.iter().map(|v| (0, v.rows.len())).collect();
    let mut prefix: Vec<Value> = Vec::with_capacity(order.len());
    join_rec(
        &views,
        &mut ranges,
        0,
        order.len(),
        semiring,
        &mut prefix,
        &mut out,
        counters,
    )?;
    // Recursion emits in global-order lexicographic order, which is sorted.
    let schema = Schema::new(order)?;
    AnnotatedRelation::from_rows(schema, semiring, out)
}

#[allow(clippy::too_many_arguments)]
fn join_rec(
    views: &[JoinPart],
    ranges: &mut Vec<(usize, usize)>,
    depth: usize,
    n_vars: usize,
    semiring: crate::semiring::SemiringId,
    prefix: &mut Vec<Value>,
    out: &mut Vec<(Vec<Value>, SemiringValue)>,
    counters: &mut EvalCounters,
) -> Result<()> {
    if depth == n_vars {
        // Every participating range is now a single row; multiply weights.
        let mut w = semiring.one();
        for (i, view) in views.iter().enumerate() {
            let (lo, hi) = ranges[i];
            debug_assert!(hi - lo <= 1 || view.rows.is_empty());
            if lo < hi {
                w = semiring.mul(&w, &view.rows[lo].1)?;
            }
        }
        if !w.is_zero() {
            counters.tuples_materialized += 1;
            out.push((prefix.clone(), w));
        }
        return Ok(());
    }

    let holders: Vec<usize> = (0..views.len())
        .filter(|&i| views[i].col_at_depth[depth].is_some())
        .collect();
    if holders.is_empty() {
        // No relation constrains this variable; cannot happen for schemas
        // built from the parts' union.
        return Err(Error::Schema(
            "join variable not covered by any input".into(),
        ));
    }
    // Seed from the narrowest run.
    let seed = *holders
        .iter()
        .min_by_key(|&&i| ranges[i].1 - ranges[i].0)
        .unwrap();
    let seed_col = views[seed].col_at_depth[depth].unwrap();
    let (seed_lo, seed_hi) = ranges[seed];

    let mut pos = seed_lo;
    'values: while pos < seed_hi {
        let v = views[seed].rows[pos].0[seed_col].clone();
        // End of this value's run in the seed.
        counters.trie_probes += 1;
        let run_end = upper_bound(&views[seed].rows, pos, seed_hi, seed_col, &v);

        let saved: Vec<(usize, usize)> = holders.iter().map(|&i| ranges[i]).collect();
        let mut all_match = true;
        for &i in &holders {
            if i == seed {
                ranges[i] = (pos, run_end);
                continue;
            }
            let col = views[i].col_at_depth[depth].unwrap();
            let (lo, hi) = ranges[i];
            counters.trie_probes += 1;
            let start = lower_bound(&views[i].rows, lo, hi, col, &v);
            counters.trie_probes += 1;
            let end = upper_bound(&views[i].rows, start, hi, col, &v);
            if start == end {
                all_match = false;
                ranges[i] = (lo, hi);
                break;
            }
            ranges[i] = (start, end);
        }
        if all_match {
            prefix.push(v);
            join_rec(
                views, ranges, depth + 1, n_vars, semiring, prefix, out, counters,
            )?;
            prefix.pop();
        }
        for (k, &i) in holders.iter().enumerate() {
            ranges[i] = saved[k];
        }
        pos = run_end;
        if pos >= seed_hi {
            break 'values;
        }
    }
    Ok(())
}

/// First index in `rows[lo..hi]` whose `col` value is ≥ `v`.
fn lower_bound(
    rows: &[(Vec<Value>, SemiringValue)],
    lo: usize,
    hi: usize,
    col: usize,
    v: &Value,
) -> usize {
    let mut lo = lo;
    let mut hi = hi;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if rows[mid].0[col] < *v {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// First index in `rows[lo..hi]` whose `col` value is > `v`.
fn upper_bound(
    rows: &[(Vec<Value>, SemiringValue)],
    lo: usize,
    hi: usize,
    col: usize,
    v: &Value,
) -> usize {
    let mut lo = lo;
    let mut hi = hi;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if rows[mid].0[col] <= *v {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}
