//! Multi-hypergraphs with a skeleton/ligament edge partition.
//!
//! Variable sets are bitmasks over the hypergraph's vertex table, which
//! keeps decomposition enumeration and the width LPs compact.

use crate::error::{Error, Result};

/// A set of hypergraph vertices, as a bitmask over the owner's vertex list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarSet(pub u32);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn singleton(i: usize) -> VarSet {
        VarSet(1 << i)
    }

    pub fn full(n: usize) -> VarSet {
        if n == 32 {
            VarSet(u32::MAX)
        } else {
            VarSet((1u32 << n) - 1)
        }
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn insert(self, i: usize) -> VarSet {
        VarSet(self.0 | (1 << i))
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn intersect(self, other: VarSet) -> VarSet {
        VarSet(self.0 & other.0)
    }

    pub fn minus(self, other: VarSet) -> VarSet {
        VarSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.contains(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonEdge {
    pub vars: VarSet,
    pub finite: bool,
}

/// A hypergraph whose edge multiset is split into skeleton edges (stored
/// factors) and ligament edges (additive-inequality indicators).
#[derive(Debug, Clone)]
pub struct Hypergraph {
    vars: Vec<String>,
    skeleton: Vec<SkeletonEdge>,
    ligaments: Vec<VarSet>,
}

impl Hypergraph {
    pub fn new(
        vars: Vec<String>,
        skeleton: Vec<SkeletonEdge>,
        ligaments: Vec<VarSet>,
    ) -> Result<Hypergraph> {
        if vars.len() > 32 {
            return Err(Error::Capacity(format!(
                "{} vertices exceed the 32-vertex representation",
                vars.len()
            )));
        }
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(Error::Schema(format!("duplicate vertex {v:?}")));
            }
        }
        let all = VarSet::full(vars.len());
        for e in &skeleton {
            if !e.vars.is_subset(all) {
                return Err(Error::Schema("skeleton edge outside vertex set".into()));
            }
        }
        for l in &ligaments {
            if !l.is_subset(all) {
                return Err(Error::Schema("ligament edge outside vertex set".into()));
            }
        }
        let finite_union = skeleton
            .iter()
            .filter(|e| e.finite)
            .fold(VarSet::EMPTY, |acc, e| acc.union(e.vars));
        if finite_union != all {
            return Err(Error::Schema(
                "finite skeleton edges must cover every vertex".into(),
            ));
        }
        Ok(Hypergraph {
            vars,
            skeleton,
            ligaments,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn all_vars(&self) -> VarSet {
        VarSet::full(self.vars.len())
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::Schema(format!("unknown variable {name:?}")))
    }

    pub fn set_of(&self, names: &[String]) -> Result<VarSet> {
        let mut s = VarSet::EMPTY;
        for n in names {
            s = s.insert(self.var_index(n)?);
        }
        Ok(s)
    }

    pub fn names_of(&self, set: VarSet) -> Vec<String> {
        set.iter().map(|i| self.vars[i].clone()).collect()
    }

    pub fn skeleton(&self) -> &[SkeletonEdge] {
        &self.skeleton
    }

    pub fn ligaments(&self) -> &[VarSet] {
        &self.ligaments
    }

    pub fn finite_edges(&self) -> impl Iterator<Item = VarSet> + '_ {
        self.skeleton
            .iter()
            .filter(|e| e.finite)
            .map(|e| e.vars)
    }

    /// Pretty form of a variable set, for diagnostics.
    pub fn display_set(&self, set: VarSet) -> String {
        let names: Vec<&str> = set.iter().map(|i| self.vars[i].as_str()).collect();
        format!("{{{}}}", names.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn finite_cover_enforced() {
        let vars = names(&["a", "b"]);
        let e = SkeletonEdge {
            vars: VarSet(0b01),
            finite: true,
        };
        assert!(Hypergraph::new(vars.clone(), vec![e.clone()], vec![]).is_err());
        let full = SkeletonEdge {
            vars: VarSet(0b11),
            finite: true,
        };
        assert!(Hypergraph::new(vars, vec![full], vec![]).is_ok());
    }

    #[test]
    fn varset_ops() {
        let s = VarSet::EMPTY.insert(0).insert(2);
        assert_eq!(s.len(), 2);
        assert!(s.contains(2));
        assert!(!s.contains(1));
        assert_eq!(s.minus(VarSet::singleton(0)), VarSet::singleton(2));
        assert!(VarSet::singleton(2).is_subset(s));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 2]);
    }
}
