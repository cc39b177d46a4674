//! Tuples, annotated relations, and the primitive relational operators the
//! engine composes: indicator projection, group-aggregate, and semijoin.
//!
//! A relation is a finite map from tuples to semiring annotations. Rows are
//! kept sorted lexicographically in schema order; zero-annotated rows are
//! never stored. The sorted representation doubles as an implicit trie for
//! the join (binary search over sorted runs).

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::semiring::{SemiringId, SemiringValue};
use crate::value::Value;

/// An ordered list of distinct variable names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema(Vec<String>);

impl Schema {
    pub fn new(vars: Vec<String>) -> Result<Schema> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(Error::Schema(format!("duplicate variable {v:?} in schema")));
            }
        }
        Ok(Schema(vars))
    }

    pub fn vars(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, var: &str) -> Option<usize> {
        self.0.iter().position(|v| v == var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.position(var).is_some()
    }
}

impl<const N: usize> From<[&str; N]> for Schema {
    fn from(names: [&str; N]) -> Schema {
        Schema::new(names.iter().map(|s| s.to_string()).collect()).expect("distinct names")
    }
}

/// A finite map from tuples to non-zero semiring annotations.
#[derive(Debug, Clone)]
pub struct AnnotatedRelation {
    schema: Schema,
    semiring: SemiringId,
    /// Sorted lexicographically by tuple; tuples are unique.
    rows: Vec<(Vec<Value>, SemiringValue)>,
}

impl AnnotatedRelation {
    pub fn empty(schema: Schema, semiring: SemiringId) -> AnnotatedRelation {
        AnnotatedRelation {
            schema,
            semiring,
            rows: Vec::new(),
        }
    }

    /// Build from raw rows: checks arity and column tags, merges duplicate
    /// tuples with ⊕, sorts, and drops zero annotations.
    pub fn from_rows(
        schema: Schema,
        semiring: SemiringId,
        rows: Vec<(Vec<Value>, SemiringValue)>,
    ) -> Result<AnnotatedRelation> {
        let mut merged: BTreeMap<Vec<Value>, SemiringValue> = BTreeMap::new();
        for (tuple, w) in rows {
            if tuple.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "tuple arity {} does not match schema arity {}",
                    tuple.len(),
                    schema.len()
                )));
            }
            if !w.matches(semiring) {
                return Err(Error::Semiring(format!(
                    "annotation tagged {} under {} semiring",
                    w.tag_name(),
                    semiring.name()
                )));
            }
            match merged.entry(tuple) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(w);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let sum = semiring.add(e.get(), &w)?;
                    *e.get_mut() = sum;
                }
            }
        }
        // Column tag consistency.
        let mut col_tags: Vec<Option<&'static str>> = vec![None; schema.len()];
        for tuple in merged.keys() {
            for (c, v) in tuple.iter().enumerate() {
                match col_tags[c] {
                    None => col_tags[c] = Some(v.tag_name()),
                    Some(t) if t == v.tag_name() => {}
                    Some(t) => {
                        return Err(Error::Schema(format!(
                            "column {:?} mixes {} and {} values",
                            schema.vars()[c],
                            t,
                            v.tag_name()
                        )))
                    }
                }
            }
        }
        let rows: Vec<_> = merged.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        Ok(AnnotatedRelation {
            schema,
            semiring,
            rows,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn semiring(&self) -> SemiringId {
        self.semiring
    }

    pub fn rows(&self) -> &[(Vec<Value>, SemiringValue)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The annotation of `tuple`, or zero when absent.
    pub fn get(&self, tuple: &[Value]) -> SemiringValue {
        match self
            .rows
            .binary_search_by(|(t, _)| t.as_slice().cmp(tuple))
        {
            Ok(i) => self.rows[i].1.clone(),
            Err(_) => self.semiring.zero(),
        }
    }

    /// The nullary scalar view of a relation over the empty schema.
    pub fn scalar(&self) -> SemiringValue {
        debug_assert!(self.schema.is_empty());
        self.rows
            .first()
            .map(|(_, w)| w.clone())
            .unwrap_or_else(|| self.semiring.zero())
    }

    /// Positions of `vars` (those present) in this schema, in schema order.
    fn positions_of(&self, vars: &[String]) -> Vec<usize> {
        (0..self.schema.len())
            .filter(|&i| vars.contains(&self.schema.vars()[i]))
            .collect()
    }

    /// {0,1}-valued projection of the support onto `target_vars`.
    ///
    /// The output schema is the intersection of this schema with the target
    /// set; a tuple is present with annotation one iff some row extends it.
    pub fn indicator_projection(&self, target_vars: &[String]) -> Result<AnnotatedRelation> {
        let keep = self.positions_of(target_vars);
        if keep.is_empty() {
            return Err(Error::Schema(format!(
                "indicator projection target {:?} is disjoint from schema {:?}",
                target_vars,
                self.schema.vars()
            )));
        }
        let schema = Schema::new(
            keep.iter()
                .map(|&i| self.schema.vars()[i].clone())
                .collect(),
        )?;
        let one = self.semiring.one();
        let mut out: Vec<(Vec<Value>, SemiringValue)> = Vec::new();
        for (tuple, _) in &self.rows {
            let proj: Vec<Value> = keep.iter().map(|&i| tuple[i].clone()).collect();
            if out.last().map(|(t, _)| t) != Some(&proj) {
                out.push((proj, one.clone()));
            }
        }
        // Rows were sorted by the full tuple; a projection onto a prefix-
        // respecting subsequence of columns need not be sorted, so re-sort
        // and dedupe.
        out.sort_by(|(a, _), (b, _)| a.cmp(b));
        out.dedup_by(|a, b| a.0 == b.0);
        Ok(AnnotatedRelation {
            schema,
            semiring: self.semiring,
            rows: out,
        })
    }

    /// ⊕-aggregate all rows onto `keep_vars` (which must be a subset of the
    /// schema). Zero results are dropped.
    pub fn group_aggregate(&self, keep_vars: &[String]) -> Result<AnnotatedRelation> {
        for v in keep_vars {
            if !self.schema.contains(v) {
                return Err(Error::Schema(format!(
                    "group_aggregate keeps {v:?} which is not in schema {:?}",
                    self.schema.vars()
                )));
            }
        }
        let keep = self.positions_of(keep_vars);
        let schema = Schema::new(
            keep.iter()
                .map(|&i| self.schema.vars()[i].clone())
                .collect(),
        )?;
        let mut merged: BTreeMap<Vec<Value>, SemiringValue> = BTreeMap::new();
        for (tuple, w) in &self.rows {
            let key: Vec<Value> = keep.iter().map(|&i| tuple[i].clone()).collect();
            match merged.entry(key) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(w.clone());
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let sum = self.semiring.add(e.get(), w)?;
                    *e.get_mut() = sum;
                }
            }
        }
        let rows: Vec<_> = merged.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        Ok(AnnotatedRelation {
            schema,
            semiring: self.semiring,
            rows,
        })
    }

    /// Keep the rows whose projection onto `filter`'s schema lies in
    /// `filter`'s support. Annotations are unchanged.
    pub fn semijoin_reduce(&self, filter: &AnnotatedRelation) -> Result<AnnotatedRelation> {
        let mut keep_pos = Vec::with_capacity(filter.schema.len());
        for v in filter.schema.vars() {
            match self.schema.position(v) {
                Some(i) => keep_pos.push(i),
                None => {
                    return Err(Error::Schema(format!(
                        "semijoin filter variable {v:?} is not in schema {:?}",
                        self.schema.vars()
                    )))
                }
            }
        }
        let rows = self
            .rows
            .iter()
            .filter(|(tuple, _)| {
                let key: Vec<Value> = keep_pos.iter().map(|&i| tuple[i].clone()).collect();
                !filter.get(&key).is_zero()
            })
            .cloned()
            .collect();
        Ok(AnnotatedRelation {
            schema: self.schema.clone(),
            semiring: self.semiring,
            rows,
        })
    }

    /// Keep rows satisfying `pred`; annotations unchanged.
    pub fn filter_rows<F: FnMut(&[Value]) -> bool>(&self, mut pred: F) -> AnnotatedRelation {
        AnnotatedRelation {
            schema: self.schema.clone(),
            semiring: self.semiring,
            rows: self
                .rows
                .iter()
                .filter(|(t, _)| pred(t))
                .cloned()
                .collect(),
        }
    }

    /// Map every annotation, dropping resulting zeros.
    pub fn map_annotations<F>(&self, mut f: F) -> Result<AnnotatedRelation>
    where
        F: FnMut(&[Value], &SemiringValue) -> Result<SemiringValue>,
    {
        let mut rows = Vec::with_capacity(self.rows.len());
        for (t, w) in &self.rows {
            let w2 = f(t, w)?;
            if !w2.is_zero() {
                rows.push((t.clone(), w2));
            }
        }
        Ok(AnnotatedRelation {
            schema: self.schema.clone(),
            semiring: self.semiring,
            rows,
        })
    }

    /// Reorder columns to `vars`, which must be a permutation of the schema.
    pub fn reorder(&self, vars: &[String]) -> Result<AnnotatedRelation> {
        if vars.len() != self.schema.len() {
            return Err(Error::Schema("reorder is not a permutation".into()));
        }
        let perm: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.schema
                    .position(v)
                    .ok_or_else(|| Error::Schema(format!("reorder variable {v:?} missing")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = self
            .rows
            .iter()
            .map(|(t, w)| {
                (
                    perm.iter().map(|&i| t[i].clone()).collect::<Vec<_>>(),
                    w.clone(),
                )
            })
            .collect();
        AnnotatedRelation::from_rows(Schema::new(vars.to_vec())?, self.semiring, rows)
    }

    /// Set union of two relations over the same schema. Tuples present in
    /// both must carry equal annotations (the caller guarantees this; the
    /// first occurrence wins).
    pub fn union_support(&self, other: &AnnotatedRelation) -> Result<AnnotatedRelation> {
        if self.schema != other.schema {
            return Err(Error::Schema(
                "union of relations with different schemas".into(),
            ));
        }
        let mut merged: BTreeMap<Vec<Value>, SemiringValue> = BTreeMap::new();
        for (t, w) in self.rows.iter().chain(other.rows.iter()) {
            merged.entry(t.clone()).or_insert_with(|| w.clone());
        }
        Ok(AnnotatedRelation {
            schema: self.schema.clone(),
            semiring: self.semiring,
            rows: merged.into_iter().collect(),
        })
    }
}

/// A named collection of relations sharing one semiring.
#[derive(Debug, Clone)]
pub struct Database {
    semiring: SemiringId,
    relations: BTreeMap<String, AnnotatedRelation>,
}

impl Database {
    pub fn new(semiring: SemiringId) -> Database {
        Database {
            semiring,
            relations: BTreeMap::new(),
        }
    }

    pub fn semiring(&self) -> SemiringId {
        self.semiring
    }

    pub fn insert(&mut self, name: &str, rel: AnnotatedRelation) -> Result<()> {
        if rel.semiring() != self.semiring {
            return Err(Error::Semiring(format!(
                "relation {name:?} uses semiring {} but the database uses {}",
                rel.semiring().name(),
                self.semiring.name()
            )));
        }
        self.relations.insert(name.to_string(), rel);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&AnnotatedRelation> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::Data(format!("relation {name:?} not found in database")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(|s| s.as_str())
    }

    /// Largest relation size: the input-size parameter N.
    pub fn input_size(&self) -> usize {
        self.relations.values().map(|r| r.len()).max().unwrap_or(0)
    }

    /// Load every `*.csv` file in `dir` as a relation named after the file
    /// stem. First row holds variable names; an optional `__w` column is
    /// parsed as the annotation (absent means the semiring one).
    pub fn load_dir(dir: &Path, semiring: SemiringId) -> Result<Database> {
        let mut db = Database::new(semiring);
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::Data(format!("cannot read {dir:?}: {e}")))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
            .collect();
        entries.sort();
        for path in entries {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Data(format!("bad file name {path:?}")))?
                .to_string();
            let rel = load_csv(&path, semiring)?;
            db.insert(&name, rel)?;
        }
        Ok(db)
    }
}

/// Parse one CSV file into an annotated relation.
pub fn load_csv(path: &Path, semiring: SemiringId) -> Result<AnnotatedRelation> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {path:?}: {e}")))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{path:?}: {e}")))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let weight_col = headers.iter().position(|h| h == "__w");
    let var_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != weight_col)
        .map(|(_, h)| h.clone())
        .collect();
    let schema = Schema::new(var_names)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("{path:?}: {e}")))?;
        let mut tuple = Vec::with_capacity(schema.len());
        let mut weight = semiring.one();
        for (i, cell) in record.iter().enumerate() {
            if Some(i) == weight_col {
                weight = parse_weight(cell, semiring)
                    .map_err(|e| Error::Data(format!("{path:?}: {e}")))?;
            } else {
                tuple.push(Value::parse_cell(cell)?);
            }
        }
        rows.push((tuple, weight));
    }
    AnnotatedRelation::from_rows(schema, semiring, rows)
}

fn parse_weight(cell: &str, semiring: SemiringId) -> Result<SemiringValue> {
    let t = cell.trim();
    match semiring {
        SemiringId::Boolean => match t {
            "true" | "1" => Ok(SemiringValue::Bool(true)),
            "false" | "0" => Ok(SemiringValue::Bool(false)),
            _ => Err(Error::Data(format!("bad boolean annotation {t:?}"))),
        },
        SemiringId::CountInt => t
            .parse::<num_bigint::BigInt>()
            .map(SemiringValue::Int)
            .map_err(|_| Error::Data(format!("bad integer annotation {t:?}"))),
        SemiringId::RealSumProd => t
            .parse::<f64>()
            .map(SemiringValue::Real)
            .map_err(|_| Error::Data(format!("bad float annotation {t:?}"))),
    }
}
