//! Model training over a feature-extraction join, with every objective and
//! (sub)gradient evaluation compiled into aggregate queries over the
//! ligament extension of the join — the join itself is never materialized.
//!
//! Each loss decomposes into sums of the form Σ w(x)·1[linear inequality]
//! over the join; the inequality coefficients come from the current model,
//! the w factors are the identity-factor weights, and label predicates are
//! per-relation selections. The engine answers each sum through a relaxed
//! decomposition whose plan is cached across iterations.

use std::cell::RefCell;
use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{evaluate_planned, plan, EvalPlan};
use crate::error::{Error, Result};
use crate::join::{multiway_join, EvalCounters};
use crate::query::{FactorBinding, FaqAiQuery, Ligament, TermExpr, UnaryTerm, ValueFactor};
use crate::relation::Database;
use crate::semiring::{SemiringId, SemiringValue};
#[cfg(test)]
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Huber,
    Hinge,
    #[serde(rename = "eps")]
    EpsInsensitive,
    #[serde(rename = "ordinal")]
    OrdinalHinge,
    Scalene,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feature {
    /// The always-one synthetic feature x₁ ≡ 1.
    Intercept,
    Var(String),
}

/// A feature-extraction join: skeleton factors, the feature variables
/// (possibly including the intercept), and an optional label variable.
#[derive(Debug, Clone)]
pub struct FeatureQuery {
    pub variables: Vec<String>,
    pub factors: Vec<FactorBinding>,
    pub features: Vec<Feature>,
    pub label: Option<String>,
}

/// JSON form of a feature query; `"1"` in the feature list is the
/// intercept.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeatureQueryFile {
    variables: Vec<String>,
    factors: Vec<FactorBinding>,
    features: Vec<String>,
    #[serde(default)]
    label: Option<String>,
}

impl FeatureQuery {
    pub fn from_json(text: &str) -> Result<FeatureQuery> {
        let file: FeatureQueryFile =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("bad feature JSON: {e}")))?;
        let features = file
            .features
            .iter()
            .map(|f| {
                if f == "1" {
                    Feature::Intercept
                } else {
                    Feature::Var(f.clone())
                }
            })
            .collect();
        Ok(FeatureQuery {
            variables: file.variables,
            factors: file.factors,
            features,
            label: file.label,
        })
    }

    fn check(&self) -> Result<()> {
        for f in &self.features {
            if let Feature::Var(v) = f {
                if !self.variables.contains(v) {
                    return Err(Error::Schema(format!("feature variable {v:?} unknown")));
                }
            }
        }
        if let Some(l) = &self.label {
            if !self.variables.contains(l) {
                return Err(Error::Schema(format!("label variable {l:?} unknown")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// ℓ2 regularization strength.
    pub lambda: f64,
    /// SVM regularization for the cutting-plane trainer.
    pub c: f64,
    /// Cutting-plane violation tolerance.
    pub eps: f64,
    pub max_iters: usize,
    /// Armijo backtracking line search in gradient descent.
    pub armijo: bool,
    /// Ordinal label count d (labels live in 1..=d).
    pub ordinal_d: u32,
    /// Scalene quantile weight in (0,1).
    pub alpha_scalene: f64,
    /// Epsilon-insensitive band.
    pub eps_insensitive: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            lambda: 1e-3,
            c: 1.0,
            eps: 1e-3,
            max_iters: 200,
            armijo: true,
            ordinal_d: 5,
            alpha_scalene: 0.5,
            eps_insensitive: 0.1,
            seed: 0,
        }
    }
}

/// One linear inequality over (label, features):
/// label_coef·y + Σ_j feat_coefs[j]·x_j + constant ≤ 0 (or < 0).
#[derive(Debug, Clone)]
struct LinearIneq {
    label_coef: f64,
    feat_coefs: Vec<f64>,
    constant: f64,
    strict: bool,
}

/// A per-relation selection on the label column.
#[derive(Debug, Clone, Copy, PartialEq)]
enum LabelPred {
    Eq(f64),
    Lt(f64),
    Gt(f64),
}

/// What gets summed: a product of at most two join columns.
#[derive(Debug, Clone, Copy)]
enum AggVar {
    Label,
    Feat(usize),
}

/// Evaluates Σ Π(vars)·Π 1[ineq] over the join through the engine, caching
/// plans by ligament shape.
struct JoinAggregator<'a> {
    db: &'a Database,
    fq: &'a FeatureQuery,
    plans: RefCell<BTreeMap<String, EvalPlan>>,
}

impl<'a> JoinAggregator<'a> {
    fn new(db: &'a Database, fq: &'a FeatureQuery) -> Result<JoinAggregator<'a>> {
        fq.check()?;
        if db.semiring() != SemiringId::RealSumProd {
            return Err(Error::Semiring(
                "training requires the real sum-product semiring".into(),
            ));
        }
        Ok(JoinAggregator {
            db,
            fq,
            plans: RefCell::new(BTreeMap::new()),
        })
    }

    fn feature_var(&self, j: usize) -> Option<&str> {
        match &self.fq.features[j] {
            Feature::Intercept => None,
            Feature::Var(v) => Some(v.as_str()),
        }
    }

    /// Σ over the join (optionally label-filtered) of the product of the
    /// given columns and inequality indicators.
    fn sum(
        &self,
        vars: &[AggVar],
        ineqs: &[LinearIneq],
        label_pred: Option<LabelPred>,
    ) -> Result<f64> {
        // Fold each inequality into ligament terms; constant-only
        // inequalities resolve immediately.
        let mut ligaments = Vec::new();
        for ineq in ineqs {
            let mut terms: Vec<UnaryTerm> = Vec::new();
            let mut constant = ineq.constant;
            if ineq.label_coef != 0.0 {
                let label = self.fq.label.as_ref().ok_or_else(|| {
                    Error::Schema("loss needs a label but the query has none".into())
                })?;
                terms.push(UnaryTerm {
                    var: label.clone(),
                    expr: TermExpr::Affine {
                        a: ineq.label_coef,
                        b: 0.0,
                    },
                });
            }
            for (j, &c) in ineq.feat_coefs.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                match self.feature_var(j) {
                    None => constant += c, // intercept: x ≡ 1
                    Some(v) => {
                        if terms.iter().any(|t| t.var == v) {
                            // merge coefficients on a repeated variable
                            for t in terms.iter_mut() {
                                if t.var == v {
                                    if let TermExpr::Affine { a, .. } = &mut t.expr {
                                        *a += c;
                                    }
                                }
                            }
                        } else {
                            terms.push(UnaryTerm {
                                var: v.to_string(),
                                expr: TermExpr::Affine { a: c, b: 0.0 },
                            });
                        }
                    }
                }
            }
            if terms.is_empty() {
                let holds = if ineq.strict {
                    constant < 0.0
                } else {
                    constant <= 0.0
                };
                if holds {
                    continue; // indicator ≡ 1
                }
                return Ok(0.0); // indicator ≡ 0
            }
            // fold the constant into the first term's offset
            if let TermExpr::Affine { b, .. } = &mut terms[0].expr {
                *b += constant;
            }
            ligaments.push(Ligament {
                terms,
                strict: ineq.strict,
            });
        }

        let mut weights = Vec::new();
        for v in vars {
            match v {
                AggVar::Label => {
                    let label = self.fq.label.as_ref().ok_or_else(|| {
                        Error::Schema("loss needs a label but the query has none".into())
                    })?;
                    weights.push(ValueFactor {
                        var: label.clone(),
                        expr: TermExpr::Affine { a: 1.0, b: 0.0 },
                    });
                }
                AggVar::Feat(j) => match self.feature_var(*j) {
                    None => {} // intercept multiplies by one
                    Some(name) => weights.push(ValueFactor {
                        var: name.to_string(),
                        expr: TermExpr::Affine { a: 1.0, b: 0.0 },
                    }),
                },
            }
        }

        let q = FaqAiQuery {
            semiring: SemiringId::RealSumProd,
            variables: self.fq.variables.clone(),
            factors: self.fq.factors.clone(),
            free: vec![],
            ligaments,
            weights,
        };

        // Plans depend only on the ligament variable shapes.
        let shape_key: String = q
            .ligaments
            .iter()
            .map(|l| {
                let mut vs: Vec<&str> = l.terms.iter().map(|t| t.var.as_str()).collect();
                vs.sort();
                format!("[{}]", vs.join(","))
            })
            .collect();
        let cached = self.plans.borrow().get(&shape_key).cloned();
        let the_plan = match cached {
            Some(p) => p,
            None => {
                let p = plan(&q)?;
                self.plans
                    .borrow_mut()
                    .insert(shape_key, p.clone());
                p
            }
        };

        let filtered;
        let db: &Database = match label_pred {
            None => self.db,
            Some(pred) => {
                filtered = self.filter_label(pred)?;
                &filtered
            }
        };
        let mut counters = EvalCounters::default();
        let out = evaluate_planned(db, &q, &the_plan, &mut counters)?;
        match out.scalar() {
            SemiringValue::Real(v) => Ok(v),
            _ => unreachable!("real semiring"),
        }
    }

    /// Apply a label selection to every relation holding the label column.
    fn filter_label(&self, pred: LabelPred) -> Result<Database> {
        let label = self
            .fq
            .label
            .as_ref()
            .ok_or_else(|| Error::Schema("label predicate without a label".into()))?;
        let mut db = Database::new(self.db.semiring());
        for name in self.db.names() {
            let rel = self.db.get(name)?;
            match rel.schema().position(label) {
                None => db.insert(name, rel.clone())?,
                Some(col) => {
                    let kept = rel.filter_rows(|t| {
                        let y = t[col].as_f64().unwrap_or(f64::NAN);
                        match pred {
                            LabelPred::Eq(v) => y == v,
                            LabelPred::Lt(v) => y < v,
                            LabelPred::Gt(v) => y > v,
                        }
                    });
                    db.insert(name, kept)?;
                }
            }
        }
        Ok(db)
    }

    /// Validate the label domain for classification / ordinal losses.
    fn label_values(&self) -> Result<Vec<f64>> {
        let label = self
            .fq
            .label
            .as_ref()
            .ok_or_else(|| Error::Label("this loss requires a label".into()))?;
        let mut vals = Vec::new();
        for name in self.db.names() {
            let rel = self.db.get(name)?;
            if let Some(col) = rel.schema().position(label) {
                for (t, _) in rel.rows() {
                    vals.push(t[col].as_f64()?);
                }
            }
        }
        Ok(vals)
    }
}

/// The per-side aggregates a loss needs: plain count, Σy, Σy², Σx_j,
/// Σy·x_j, Σx_j·x_k.
struct SideAggregates {
    count: f64,
    y: f64,
    yy: f64,
    x: Vec<f64>,
    xy: Vec<f64>,
    xx: Vec<Vec<f64>>,
}

impl<'a> JoinAggregator<'a> {
    fn side(
        &self,
        ineqs: &[LinearIneq],
        label_pred: Option<LabelPred>,
        need_second_order: bool,
    ) -> Result<SideAggregates> {
        let n = self.fq.features.len();
        let count = self.sum(&[], ineqs, label_pred)?;
        let y = if self.fq.label.is_some() {
            self.sum(&[AggVar::Label], ineqs, label_pred)?
        } else {
            0.0
        };
        let mut x = Vec::with_capacity(n);
        let mut xy = Vec::with_capacity(n);
        for j in 0..n {
            x.push(self.sum(&[AggVar::Feat(j)], ineqs, label_pred)?);
            if need_second_order {
                xy.push(self.sum(&[AggVar::Label, AggVar::Feat(j)], ineqs, label_pred)?);
            }
        }
        let mut yy = 0.0;
        let mut xx = Vec::new();
        if need_second_order {
            yy = self.sum(&[AggVar::Label, AggVar::Label], ineqs, label_pred)?;
            for j in 0..n {
                let mut row = Vec::with_capacity(n);
                for k in 0..n {
                    row.push(self.sum(
                        &[AggVar::Feat(j), AggVar::Feat(k)],
                        ineqs,
                        label_pred,
                    )?);
                }
                xx.push(row);
            }
        }
        Ok(SideAggregates {
            count,
            y,
            yy,
            x,
            xy,
            xx,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Objective and (sub)gradient of the chosen loss at `beta`, computed
/// entirely through ligament-extension aggregates.
pub fn loss_eval(
    db: &Database,
    fq: &FeatureQuery,
    beta: &[f64],
    loss: Loss,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<f64>)> {
    if beta.len() != fq.features.len() {
        return Err(Error::Schema(format!(
            "{} parameters for {} features",
            beta.len(),
            fq.features.len()
        )));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Diverged("non-finite parameters".into()));
    }
    let agg = JoinAggregator::new(db, fq)?;
    let n = beta.len();
    // label_coef·y − scale·f(x) + constant ≤/< 0
    let ineq = |label_coef: f64, scale: f64, constant: f64, strict: bool| LinearIneq {
        label_coef,
        feat_coefs: beta.iter().map(|b| -scale * b).collect(),
        constant,
        strict,
    };
    let reg: f64 = 0.5 * cfg.lambda * beta.iter().map(|b| b * b).sum::<f64>();
    let reg_grad = |g: &mut Vec<f64>| {
        for (gj, bj) in g.iter_mut().zip(beta) {
            *gj += cfg.lambda * bj;
        }
    };

    match loss {
        Loss::Huber => {
            // 0 ≤ y − f ≤ 1 and −1 ≤ y − f < 0 split the square region.
            let plus = [
                ineq(1.0, 1.0, -1.0, false),  // y − f − 1 ≤ 0
                ineq(-1.0, -1.0, 0.0, false), // f − y ≤ 0
            ];
            let minus = [
                ineq(-1.0, -1.0, -1.0, false), // f − y − 1 ≤ 0
                ineq(1.0, 1.0, 0.0, true),     // y − f < 0
            ];
            let hi = [ineq(-1.0, -1.0, 1.0, true)]; // 1 − y + f < 0 ⟺ y − f > 1
            let lo = [ineq(1.0, 1.0, 1.0, true)]; // y − f + 1 < 0 ⟺ y − f < −1
            let sp = agg.side(&plus, None, true)?;
            let sm = agg.side(&minus, None, true)?;
            let shi = agg.side(&hi, None, false)?;
            let slo = agg.side(&lo, None, false)?;

            let mut square = 0.0;
            for s in [&sp, &sm] {
                let mut v = s.yy;
                for j in 0..n {
                    v -= 2.0 * beta[j] * s.xy[j];
                    for k in 0..n {
                        v += beta[j] * beta[k] * s.xx[j][k];
                    }
                }
                square += v;
            }
            let abs_hi = shi.y - dot(beta, &shi.x) - shi.count;
            let abs_lo = dot(beta, &slo.x) - slo.y - slo.count;
            let objective = 0.5 * (square + abs_hi + abs_lo) + reg;

            let mut grad = Vec::with_capacity(n);
            for j in 0..n {
                let mut g = -(sp.xy[j] + sm.xy[j]);
                for (k, bk) in beta.iter().enumerate() {
                    g += bk * (sp.xx[j][k] + sm.xx[j][k]);
                }
                g += -0.5 * shi.x[j] + 0.5 * slo.x[j];
                grad.push(g);
            }
            reg_grad(&mut grad);
            Ok((objective, grad))
        }
        Loss::Hinge => {
            let labels = agg.label_values()?;
            if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
                return Err(Error::Label("hinge loss needs labels in {−1, +1}".into()));
            }
            // y = 1: 1[f ≤ 1]; y = −1: 1[f ≥ −1] (both non-strict).
            let pos = [ineq(0.0, -1.0, -1.0, false)]; // f − 1 ≤ 0
            let neg = [ineq(0.0, 1.0, -1.0, false)]; // −f − 1 ≤ 0
            let sp = agg.side(&pos, Some(LabelPred::Eq(1.0)), false)?;
            let sn = agg.side(&neg, Some(LabelPred::Eq(-1.0)), false)?;
            let objective =
                (sp.count - dot(beta, &sp.x)) + (sn.count + dot(beta, &sn.x)) + reg;
            let mut grad: Vec<f64> = (0..n).map(|j| -sp.x[j] + sn.x[j]).collect();
            reg_grad(&mut grad);
            Ok((objective, grad))
        }
        Loss::EpsInsensitive => {
            let e = cfg.eps_insensitive;
            let above = [ineq(-1.0, -1.0, e, true)]; // ε − y + f < 0 ⟺ y − f > ε
            let below = [ineq(1.0, 1.0, e, true)]; // ε + y − f < 0 ⟺ f − y > ε
            let sa = agg.side(&above, None, false)?;
            let sb = agg.side(&below, None, false)?;
            let objective = (sa.y - dot(beta, &sa.x) - e * sa.count)
                + (dot(beta, &sb.x) - sb.y - e * sb.count)
                + reg;
            let mut grad: Vec<f64> = (0..n).map(|j| sb.x[j] - sa.x[j]).collect();
            reg_grad(&mut grad);
            Ok((objective, grad))
        }
        Loss::OrdinalHinge => {
            let d = cfg.ordinal_d as i64;
            let labels = agg.label_values()?;
            if labels
                .iter()
                .any(|&y| y.fract() != 0.0 || y < 1.0 || y > d as f64)
            {
                return Err(Error::Label(format!(
                    "ordinal labels must be integers in 1..={d}"
                )));
            }
            let mut objective = reg;
            let mut grad = vec![0.0; n];
            for t in 1..=d {
                let tf = t as f64;
                // t < y side: (1 − f + t)·1[f < 1 + t]
                let low = [ineq(0.0, -1.0, -(1.0 + tf), true)]; // f − (1+t) < 0
                let sl = agg.side(&low, Some(LabelPred::Gt(tf)), false)?;
                objective += (1.0 + tf) * sl.count - dot(beta, &sl.x);
                // t > y side: (1 + f − t)·1[f > t − 1]
                let high = [ineq(0.0, 1.0, tf - 1.0, true)]; // (t−1) − f < 0
                let sh = agg.side(&high, Some(LabelPred::Lt(tf)), false)?;
                objective += (1.0 - tf) * sh.count + dot(beta, &sh.x);
                for (j, g) in grad.iter_mut().enumerate() {
                    *g += -sl.x[j] + sh.x[j];
                }
            }
            reg_grad(&mut grad);
            Ok((objective, grad))
        }
        Loss::Scalene => {
            let a = cfg.alpha_scalene;
            let above = [ineq(-1.0, -1.0, 0.0, true)]; // f − y < 0 ⟺ y > f
            let below = [ineq(1.0, 1.0, 0.0, true)]; // y − f < 0 ⟺ f > y
            let sa = agg.side(&above, None, false)?;
            let sb = agg.side(&below, None, false)?;
            let objective =
                a * (sa.y - dot(beta, &sa.x)) + (1.0 - a) * (dot(beta, &sb.x) - sb.y) + reg;
            let mut grad: Vec<f64> =
                (0..n).map(|j| (1.0 - a) * sb.x[j] - a * sa.x[j]).collect();
            reg_grad(&mut grad);
            Ok((objective, grad))
        }
    }
}

/// Batch (sub)gradient descent with the Armijo backtracking line search.
pub fn bgd_train(
    db: &Database,
    fq: &FeatureQuery,
    loss: Loss,
    cfg: &TrainConfig,
) -> Result<ModelParams> {
    let n = fq.features.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut beta: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
    for t in 1..=cfg.max_iters {
        let (j0, grad) = loss_eval(db, fq, &beta, loss, cfg)?;
        if !j0.is_finite() {
            return Err(Error::Diverged(format!("objective became {j0}")));
        }
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < 1e-6 {
            break;
        }
        let mut alpha = if cfg.lambda > 0.0 {
            1.0 / (cfg.lambda * t as f64)
        } else {
            1.0 / t as f64
        };
        if cfg.armijo {
            // Accept only strict Armijo descent; the simplified Huber tail
            // has a jump at |y − f| = 1, and a failed search marks
            // convergence onto such a point.
            let mut accepted = false;
            for _ in 0..80 {
                let cand: Vec<f64> = beta
                    .iter()
                    .zip(&grad)
                    .map(|(b, g)| b - alpha * g)
                    .collect();
                let (jc, _) = loss_eval(db, fq, &cand, loss, cfg)?;
                if jc < j0 - 0.5 * alpha * gnorm2 {
                    beta = cand;
                    accepted = true;
                    break;
                }
                alpha /= 2.0;
            }
            if !accepted {
                break;
            }
        } else {
            for (b, g) in beta.iter_mut().zip(&grad) {
                *b -= alpha * g;
            }
        }
    }
    Ok(ModelParams { beta })
}

/// Maximize −½‖Σ α_T x_T‖² + Σ |T| α_T over α ≥ 0, Σα ≤ budget, by
/// projected gradient ascent to a small KKT residual. Deterministic.
pub fn wolfe_dual_solve(xs: &[Vec<f64>], sizes: &[f64], budget: f64) -> Vec<f64> {
    let m = xs.len();
    if m == 0 || budget <= 0.0 {
        return vec![0.0; m];
    }
    let gram: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| dot(&xs[i], &xs[j])).collect())
        .collect();
    let trace: f64 = (0..m).map(|i| gram[i][i]).sum();
    let step = 1.0 / (trace + 1.0);
    let mut alpha = vec![0.0; m];
    for _ in 0..200_000 {
        let grad: Vec<f64> = (0..m)
            .map(|i| sizes[i] - dot(&gram[i], &alpha))
            .collect();
        // KKT residual under the current iterate.
        let at_budget = alpha.iter().sum::<f64>() >= budget - 1e-12;
        let mu = if at_budget {
            alpha
                .iter()
                .zip(&grad)
                .filter(|(a, _)| **a > 0.0)
                .map(|(_, g)| *g)
                .fold(0.0f64, f64::max)
        } else {
            0.0
        };
        let residual = (0..m)
            .map(|i| {
                if alpha[i] > 0.0 {
                    (grad[i] - mu).abs()
                } else {
                    (grad[i] - mu).max(0.0)
                }
            })
            .fold(0.0f64, f64::max);
        if residual < 1e-8 {
            break;
        }
        let moved: Vec<f64> = (0..m).map(|i| alpha[i] + step * grad[i]).collect();
        alpha = project_capped_simplex(&moved, budget);
    }
    alpha
}

/// Euclidean projection onto {α ≥ 0, Σα ≤ budget}.
fn project_capped_simplex(v: &[f64], budget: f64) -> Vec<f64> {
    let clamped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clamped.iter().sum::<f64>() <= budget {
        return clamped;
    }
    // Σ max(v_i − τ, 0) = budget
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        acc += x;
        let candidate = (acc - budget) / (i as f64 + 1.0);
        if i + 1 == sorted.len() || sorted[i + 1] <= candidate {
            tau = candidate;
            break;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Termination diagnostics of the cutting-plane trainer.
#[derive(Debug, Clone, Default)]
pub struct CuttingPlaneReport {
    /// Violation of the most violated constraint at the final iterate.
    pub final_violation: f64,
    /// Slack ξ over the final working set.
    pub final_xi: f64,
    pub iterations: usize,
}

/// Cutting-plane training of a linear classification SVM: the most
/// violated constraint is identified with two aggregate queries per
/// coordinate, the working-set problem is solved in the Wolfe dual, and
/// termination is by the ε-violation rule.
pub fn cutting_plane_train(
    db: &Database,
    fq: &FeatureQuery,
    cfg: &TrainConfig,
) -> Result<ModelParams> {
    Ok(cutting_plane_train_report(db, fq, cfg)?.0)
}

pub fn cutting_plane_train_report(
    db: &Database,
    fq: &FeatureQuery,
    cfg: &TrainConfig,
) -> Result<(ModelParams, CuttingPlaneReport)> {
    let agg = JoinAggregator::new(db, fq)?;
    let labels = agg.label_values()?;
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::Label(
            "classification SVM needs labels in {−1, +1}".into(),
        ));
    }
    let n = fq.features.len();
    let g_size = agg.sum(&[], &[], None)?;
    if g_size <= 0.0 {
        return Ok((
            ModelParams {
                beta: vec![0.0; n],
            },
            CuttingPlaneReport::default(),
        ));
    }
    let budget = cfg.c / g_size;

    let mut working_x: Vec<Vec<f64>> = Vec::new();
    let mut working_size: Vec<f64> = Vec::new();
    let mut beta = vec![0.0; n];
    let mut xi = 0.0;
    let mut report = CuttingPlaneReport::default();
    for round in 0..cfg.max_iters.max(1) {
        // Most violated constraint at the current β: T = {y·⟨β,x⟩ < 1}.
        let ineq_pos = LinearIneq {
            label_coef: 0.0,
            feat_coefs: beta.to_vec(),
            constant: -1.0,
            strict: true,
        }; // f − 1 < 0
        let ineq_neg = LinearIneq {
            label_coef: 0.0,
            feat_coefs: beta.iter().map(|b| -b).collect(),
            constant: -1.0,
            strict: true,
        }; // −f − 1 < 0
        let mut x_t = vec![0.0; n];
        for (j, x) in x_t.iter_mut().enumerate() {
            let q1 = agg.sum(
                &[AggVar::Feat(j)],
                std::slice::from_ref(&ineq_pos),
                Some(LabelPred::Eq(1.0)),
            )?;
            let q2 = agg.sum(
                &[AggVar::Feat(j)],
                std::slice::from_ref(&ineq_neg),
                Some(LabelPred::Eq(-1.0)),
            )?;
            *x = q1 - q2;
        }
        let t_size = agg.sum(&[], std::slice::from_ref(&ineq_pos), Some(LabelPred::Eq(1.0)))?
            + agg.sum(
                &[],
                std::slice::from_ref(&ineq_neg),
                Some(LabelPred::Eq(-1.0)),
            )?;
        let violation = (t_size - dot(&beta, &x_t)) / g_size;
        report.final_violation = violation;
        report.final_xi = xi;
        report.iterations = round;
        if violation <= xi + cfg.eps {
            break;
        }
        working_x.push(x_t);
        working_size.push(t_size);
        let alpha = wolfe_dual_solve(&working_x, &working_size, budget);
        beta = vec![0.0; n];
        for (a, x) in alpha.iter().zip(&working_x) {
            for (b, v) in beta.iter_mut().zip(x) {
                *b += a * v;
            }
        }
        xi = working_x
            .iter()
            .zip(&working_size)
            .map(|(x, s)| (s - dot(&beta, x)) / g_size)
            .fold(0.0f64, f64::max);
    }
    Ok((ModelParams { beta }, report))
}

/// Full k-means output: final means plus the mean trace per iteration.
#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub means: Vec<Vec<f64>>,
    /// means after each update step, starting with the initial ones
    pub trace: Vec<Vec<Vec<f64>>>,
}

/// Lloyd iterations where cluster sizes and coordinate sums are aggregate
/// queries with k−1 inequality indicators each; the join is enumerated
/// once only to seed the means (reservoir over distinct points).
pub fn kmeans_fit(
    db: &Database,
    fq: &FeatureQuery,
    k: usize,
    cfg: &TrainConfig,
) -> Result<KmeansResult> {
    if k == 0 {
        return Err(Error::Schema("k must be at least 1".into()));
    }
    let agg = JoinAggregator::new(db, fq)?;
    let n = fq.features.len();

    // Seeded reservoir over the engine's enumeration of distinct points.
    let points = enumerate_feature_points(db, fq)?;
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    let mut seen: BTreeMap<Vec<u64>, ()> = BTreeMap::new();
    let mut reservoir: Vec<Vec<f64>> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for p in points {
        let key: Vec<u64> = p.iter().map(|f| f.to_bits()).collect();
        if seen.insert(key, ()).is_some() {
            continue;
        }
        distinct.push(p.clone());
        let i = distinct.len();
        if reservoir.len() < k {
            reservoir.push(p);
        } else {
            let j = rng.gen_range(0..i);
            if j < k {
                reservoir[j] = p;
            }
        }
    }
    if distinct.len() < k {
        return Err(Error::Data(format!(
            "degenerate initialization: k = {k} exceeds the {} distinct points",
            distinct.len()
        )));
    }
    let mut means = reservoir;
    let mut trace = vec![means.clone()];

    for _ in 0..cfg.max_iters.max(1) {
        let mut next = Vec::with_capacity(k);
        for i in 0..k {
            // x is closest to mean i (ties to the lowest index):
            // strictly closer than every earlier mean, at least as close
            // as every later one.
            let ineqs: Vec<LinearIneq> = (0..k)
                .filter(|&j| j != i)
                .map(|j| {
                    let mut feat_coefs = vec![0.0; n];
                    let mut constant = 0.0;
                    for l in 0..n {
                        let coef = -2.0 * (means[i][l] - means[j][l]);
                        constant += means[i][l] * means[i][l] - means[j][l] * means[j][l];
                        match &fq.features[l] {
                            Feature::Intercept => constant += coef,
                            Feature::Var(_) => feat_coefs[l] = coef,
                        }
                    }
                    LinearIneq {
                        label_coef: 0.0,
                        feat_coefs,
                        constant,
                        strict: j < i,
                    }
                })
                .collect();
            let size = agg.sum(&[], &ineqs, None)?;
            if size == 0.0 {
                next.push(means[i].clone());
                continue;
            }
            let mut mean = Vec::with_capacity(n);
            for l in 0..n {
                let s = agg.sum(&[AggVar::Feat(l)], &ineqs, None)?;
                mean.push(s / size);
            }
            next.push(mean);
        }
        let moved = means
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0f64, f64::max);
        means = next;
        trace.push(means.clone());
        if moved < 1e-9 {
            break;
        }
    }
    Ok(KmeansResult { means, trace })
}

/// Enumerate the join's feature vectors through the engine's join.
fn enumerate_feature_points(db: &Database, fq: &FeatureQuery) -> Result<Vec<Vec<f64>>> {
    let rels = fq
        .factors
        .iter()
        .map(|f| db.get(&f.relation))
        .collect::<Result<Vec<_>>>()?;
    let mut counters = EvalCounters::default();
    let join = multiway_join(&rels, &mut counters)?;
    let feat_pos: Vec<Option<usize>> = fq
        .features
        .iter()
        .map(|f| match f {
            Feature::Intercept => None,
            Feature::Var(v) => join.schema().position(v),
        })
        .collect();
    join.rows()
        .iter()
        .map(|(t, _)| {
            feat_pos
                .iter()
                .map(|p| match p {
                    None => Ok(1.0),
                    Some(i) => t[*i].as_f64(),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

#[cfg(test)]
use crate::relation::AnnotatedRelation;
