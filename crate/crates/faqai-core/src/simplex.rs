//! A self-contained two-phase simplex over exact rational arithmetic.
//!
//! Width values like 3/2 are test pins, so the solver works in
//! arbitrary-precision rationals end to end. Dantzig pricing with a
//! permanent switch to Bland's rule after a fixed number of pivots
//! guarantees termination on the highly degenerate cone LPs.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rat = Ratio<BigInt>;

pub fn rat(n: i64) -> Rat {
    Ratio::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> Rat {
    Ratio::new(BigInt::from(n), BigInt::from(d))
}

/// Render a rational as an exact fraction string, e.g. "3/2" or "2".
pub fn rat_display(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub terms: Vec<(usize, Rat)>,
    pub cmp: Cmp,
    pub rhs: Rat,
}

/// A linear program over non-negative variables.
#[derive(Debug, Clone)]
pub struct Lp {
    pub num_vars: usize,
    pub sense: Sense,
    pub objective: Vec<Rat>,
    pub constraints: Vec<Constraint>,
}

pub struct LpSolution {
    pub value: Rat,
    pub point: Vec<Rat>,
}

struct Tableau {
    rows: Vec<Vec<Rat>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, l: usize, e: usize, obj: &mut [Rat]) {
        let piv = self.rows[l][e].clone();
        for x in self.rows[l].iter_mut() {
            if !x.is_zero() {
                *x /= piv.clone();
            }
        }
        let pivot_row = self.rows[l].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == l || row[e].is_zero() {
                continue;
            }
            let factor = row[e].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
        }
        if !obj[e].is_zero() {
            let factor = obj[e].clone();
            for (x, p) in obj.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
        }
        self.basis[l] = e;
    }

    /// Run primal simplex on the maximization encoded by `obj` (reduced
    /// costs; last entry is the negated objective constant).
    fn optimize(&mut self, obj: &mut [Rat], allowed_cols: usize) -> Result<()> {
        let bland_after = 4 * (self.width + self.rows.len()) + 64;
        let mut pivots = 0usize;
        loop {
            let entering = if pivots < bland_after {
                let mut best: Option<(usize, &Rat)> = None;
                for (j, c) in obj[..allowed_cols].iter().enumerate() {
                    if c.is_positive() && best.map(|(_, b)| c > b).unwrap_or(true) {
                        best = Some((j, c));
                    }
                }
                best.map(|(j, _)| j)
            } else {
                obj[..allowed_cols].iter().position(|c| c.is_positive())
            };
            let Some(e) = entering else { return Ok(()) };
            let mut leave: Option<(usize, Rat)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[e].is_positive() {
                    let ratio = &row[self.width - 1] / &row[e];
                    match &leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((l, _)) = leave else {
                return Err(Error::Infeasible("unbounded linear program".into()));
            };
            self.pivot(l, e, obj);
            pivots += 1;
            if pivots > 500_000 {
                return Err(Error::Capacity("simplex pivot budget exhausted".into()));
            }
        }
    }
}

pub fn solve(lp: &Lp) -> Result<LpSolution> {
    let n = lp.num_vars;
    debug_assert_eq!(lp.objective.len(), n);
    let m = lp.constraints.len();

    // Count auxiliary columns. Every row gets a slack or surplus where
    // applicable; Ge and Eq rows get an artificial.
    let mut n_slack = 0;
    let mut n_art = 0;
    type NormalizedRow = (Vec<(usize, Rat)>, Cmp, Rat);
    let mut normalized: Vec<NormalizedRow> = Vec::with_capacity(m);
    for c in &lp.constraints {
        let mut terms = c.terms.clone();
        let mut cmp = c.cmp;
        let mut rhs = c.rhs.clone();
        if rhs.is_negative() {
            for (_, t) in terms.iter_mut() {
                *t = -t.clone();
            }
            rhs = -rhs;
            cmp = match cmp {
                Cmp::Le => Cmp::Ge,
                Cmp::Ge => Cmp::Le,
                Cmp::Eq => Cmp::Eq,
            };
        }
        match cmp {
            Cmp::Le => n_slack += 1,
            Cmp::Ge => {
                n_slack += 1;
                n_art += 1;
            }
            Cmp::Eq => n_art += 1,
        }
        normalized.push((terms, cmp, rhs));
    }

    let width = n + n_slack + n_art + 1;
    let art_start = n + n_slack;
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack_idx = n;
    let mut art_idx = art_start;
    for (terms, cmp, rhs) in &normalized {
        let mut row = vec![Rat::zero(); width];
        for (j, c) in terms {
            row[*j] += c.clone();
        }
        row[width - 1] = rhs.clone();
        match cmp {
            Cmp::Le => {
                row[slack_idx] = Rat::one();
                basis.push(slack_idx);
                slack_idx += 1;
            }
            Cmp::Ge => {
                row[slack_idx] = -Rat::one();
                slack_idx += 1;
                row[art_idx] = Rat::one();
                basis.push(art_idx);
                art_idx += 1;
            }
            Cmp::Eq => {
                row[art_idx] = Rat::one();
                basis.push(art_idx);
                art_idx += 1;
            }
        }
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis, width };

    if n_art > 0 {
        // Phase one: maximize −Σ artificials. Reduced costs start as the
        // sum of the artificial rows over non-artificial columns.
        let mut obj = vec![Rat::zero(); width];
        for (i, row) in tab.rows.iter().enumerate() {
            if tab.basis[i] >= art_start {
                for j in 0..width {
                    if j < art_start || j == width - 1 {
                        obj[j] += row[j].clone();
                    }
                }
            }
        }
        tab.optimize(&mut obj, art_start)?;
        if obj[width - 1].is_positive() {
            return Err(Error::Infeasible("no feasible point".into()));
        }
        // Drive any zero-level artificials out of the basis.
        for i in 0..tab.rows.len() {
            if tab.basis[i] >= art_start {
                if let Some(e) = (0..art_start).find(|&j| !tab.rows[i][j].is_zero()) {
                    let mut dummy = vec![Rat::zero(); width];
                    tab.pivot(i, e, &mut dummy);
                }
            }
        }
        // Any artificial still basic sits in an all-zero (redundant) row.
        let keep: Vec<usize> = (0..tab.rows.len())
            .filter(|&i| tab.basis[i] < art_start)
            .collect();
        tab.rows = keep.iter().map(|&i| tab.rows[i].clone()).collect();
        tab.basis = keep.iter().map(|&i| tab.basis[i]).collect();
        // Blank out artificial columns so they can never re-enter.
        for row in tab.rows.iter_mut() {
            for x in row[art_start..width - 1].iter_mut() {
                *x = Rat::zero();
            }
        }
    }

    // Phase two: price the real objective over the current basis.
    let negate = lp.sense == Sense::Min;
    let mut obj = vec![Rat::zero(); width];
    for (j, c) in lp.objective.iter().enumerate() {
        obj[j] = if negate { -c.clone() } else { c.clone() };
    }
    for i in 0..tab.rows.len() {
        let b = tab.basis[i];
        if !obj[b].is_zero() {
            let factor = obj[b].clone();
            let row = tab.rows[i].clone();
            for (x, p) in obj.iter_mut().zip(&row) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
        }
    }
    tab.optimize(&mut obj, art_start)?;

    let mut point = vec![Rat::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            point[b] = tab.rows[i][width - 1].clone();
        }
    }
    let mut value = lp
        .objective
        .iter()
        .zip(&point)
        .map(|(c, x)| c * x)
        .fold(Rat::zero(), |a, b| a + b);
    if negate {
        // value computed from the point is already in original sense
        let _ = &mut value;
    }
    Ok(LpSolution { value, point })
}
