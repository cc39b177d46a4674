//! Semigroup dominance range searching: ⊕-aggregates of weights over all
//! stored points coordinate-wise above a query point.
//!
//! A plain layered range tree: a balanced tree on the first coordinate
//! whose nodes each hold a structure over the remaining coordinates, down
//! to a sorted array with suffix aggregates. Queries cost O(log^k N); the
//! fractionally-cascaded log-factor improvement is deliberately not done.
//! Aggregation is pure semigroup discipline: suffix sums only, never a
//! prefix difference, so the structure stays correct for monoids without
//! inverses.

use crate::error::{Error, Result};
use crate::semiring::{SemiringId, SemiringValue};

/// Per-dimension comparison: does the stored point dominate at q ≤ p or
/// strictly at q < p?
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    NonStrict,
    Strict,
}

#[derive(Debug, Clone)]
pub struct WeightedPoint {
    pub coords: Vec<f64>,
    pub weight: SemiringValue,
}

#[derive(Debug)]
enum Layer {
    /// Last dimension: coordinates ascending, suffix[i] = ⊕ weights[i..].
    Suffix {
        coords: Vec<f64>,
        suffix: Vec<SemiringValue>,
    },
    /// Inner dimension: points sorted by this coordinate; a balanced
    /// segment tree over them, each node holding the next-dimension
    /// structure for its range.
    Tree { coords: Vec<f64>, root: Node },
}

#[derive(Debug)]
struct Node {
    lo: usize,
    hi: usize,
    sub: Box<Layer>,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

#[derive(Debug)]
pub struct DominanceIndex {
    dim: usize,
    semiring: SemiringId,
    strictness: Vec<Strictness>,
    len: usize,
    root: Option<Layer>,
}

impl DominanceIndex {
    /// Build an immutable index over `points`; every point must have
    /// exactly `dim` finite coordinates.
    pub fn build(
        points: Vec<WeightedPoint>,
        dim: usize,
        semiring: SemiringId,
        strictness: Vec<Strictness>,
    ) -> Result<DominanceIndex> {
        if dim == 0 {
            return Err(Error::Schema("dominance index needs dimension ≥ 1".into()));
        }
        if strictness.len() != dim {
            return Err(Error::Schema(
                "one strictness flag per dimension required".into(),
            ));
        }
        for p in &points {
            if p.coords.len() != dim {
                return Err(Error::Schema(format!(
                    "point of dimension {} in a {}-dimensional index",
                    p.coords.len(),
                    dim
                )));
            }
            if p.coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::Data("non-finite point coordinate".into()));
            }
            if !p.weight.matches(semiring) {
                return Err(Error::Semiring(format!(
                    "point weight tagged {} under {} semiring",
                    p.weight.tag_name(),
                    semiring.name()
                )));
            }
        }
        let len = points.len();
        let root = if points.is_empty() {
            None
        } else {
            Some(build_layer(points, 0, dim, semiring)?)
        };
        Ok(DominanceIndex {
            dim,
            semiring,
            strictness,
            len,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// ⊕ over stored points p with q_i ≤ p_i (or <, per dimension) for
    /// all i. Returns the monoid zero when nothing dominates.
    pub fn query(&self, q: &[f64]) -> Result<SemiringValue> {
        self.query_counted(q, &mut 0)
    }

    /// Like `query`, also counting visited structure nodes into `nodes`.
    pub fn query_counted(&self, q: &[f64], nodes: &mut u64) -> Result<SemiringValue> {
        if q.len() != self.dim {
            return Err(Error::Schema(format!(
                "query of dimension {} against a {}-dimensional index",
                q.len(),
                self.dim
            )));
        }
        match &self.root {
            None => Ok(self.semiring.zero()),
            Some(layer) => query_layer(layer, 0, q, &self.strictness, self.semiring, nodes),
        }
    }
}

/// Points with coordinate `d` ≥ (or >) the bound form a suffix of the
/// d-sorted order; this finds its start.
fn threshold_index(coords: &[f64], bound: f64, strict: Strictness) -> usize {
    coords.partition_point(|&c| match strict {
        Strictness::NonStrict => c < bound,
        Strictness::Strict => c <= bound,
    })
}

fn build_layer(
    mut points: Vec<WeightedPoint>,
    d: usize,
    dim: usize,
    semiring: SemiringId,
) -> Result<Layer> {
    points.sort_by(|a, b| a.coords[d].total_cmp(&b.coords[d]));
    if d + 1 == dim {
        let coords: Vec<f64> = points.iter().map(|p| p.coords[d]).collect();
        let mut suffix = vec![semiring.zero(); points.len() + 1];
        for i in (0..points.len()).rev() {
            suffix[i] = semiring.add(&points[i].weight, &suffix[i + 1])?;
        }
        return Ok(Layer::Suffix { coords, suffix });
    }
    let coords: Vec<f64> = points.iter().map(|p| p.coords[d]).collect();
    let root = build_node(&points, 0, points.len(), d, dim, semiring)?;
    Ok(Layer::Tree { coords, root })
}

fn build_node(
    points: &[WeightedPoint],
    lo: usize,
    hi: usize,
    d: usize,
    dim: usize,
    semiring: SemiringId,
) -> Result<Node> {
    let sub = Box::new(build_layer(points[lo..hi].to_vec(), d + 1, dim, semiring)?);
    if hi - lo <= 1 {
        return Ok(Node {
            lo,
            hi,
            sub,
            left: None,
            right: None,
        });
    }
    let mid = lo + (hi - lo) / 2;
    Ok(Node {
        lo,
        hi,
        sub,
        left: Some(Box::new(build_node(points, lo, mid, d, dim, semiring)?)),
        right: Some(Box::new(build_node(points, mid, hi, d, dim, semiring)?)),
    })
}

fn query_layer(
    layer: &Layer,
    d: usize,
    q: &[f64],
    strictness: &[Strictness],
    semiring: SemiringId,
    nodes: &mut u64,
) -> Result<SemiringValue> {
    match layer {
        Layer::Suffix { coords, suffix } => {
            *nodes += 1;
            let idx = threshold_index(coords, q[d], strictness[d]);
            Ok(suffix[idx].clone())
        }
        Layer::Tree { coords, root } => {
            let idx = threshold_index(coords, q[d], strictness[d]);
            query_node(root, idx, d, q, strictness, semiring, nodes)
        }
    }
}

/// Canonical cover of the suffix [idx, n): whole subtrees fully inside the
/// suffix recurse into the next dimension.
#[allow(clippy::too_many_arguments)]
fn query_node(
    node: &Node,
    idx: usize,
    d: usize,
    q: &[f64],
    strictness: &[Strictness],
    semiring: SemiringId,
    nodes: &mut u64,
) -> Result<SemiringValue> {
    *nodes += 1;
    if idx >= node.hi {
        return Ok(semiring.zero());
    }
    if idx <= node.lo {
        return query_layer(&node.sub, d + 1, q, strictness, semiring, nodes);
    }
    let mut acc = semiring.zero();
    if let Some(left) = &node.left {
        let v = query_node(left, idx, d, q, strictness, semiring, nodes)?;
        acc = semiring.add(&acc, &v)?;
    }
    if let Some(right) = &node.right {
        let v = query_node(right, idx, d, q, strictness, semiring, nodes)?;
        acc = semiring.add(&acc, &v)?;
    }
    Ok(acc)
}

/// Linear-scan reference used by the equivalence tests.
pub fn scan_oracle(
    points: &[WeightedPoint],
    q: &[f64],
    semiring: SemiringId,
    strictness: &[Strictness],
) -> Result<SemiringValue> {
    let mut acc = semiring.zero();
    for p in points {
        let dominated = q.iter().zip(&p.coords).zip(strictness).all(
            |((qi, pi), s)| match s {
                Strictness::NonStrict => qi <= pi,
                Strictness::Strict => qi < pi,
            },
        );
        if dominated {
            acc = semiring.add(&acc, &p.weight)?;
        }
    }
    Ok(acc)
}
