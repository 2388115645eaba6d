//! Diagonal weight-importance scores.
//!
//! Each score vector weights the compression objective
//! `sum_i I_i (w_i - what_i)^2 [+ sum_i H_i (w_i - what_i)^4]`.
//! Off-diagonal importance terms are never computed. All kinds are plain
//! sample means over the dataset, so duplicating the dataset leaves every
//! score unchanged.

use crate::autodiff::{grad_loss, hessian_diag_loss, jacobian_outputs};
use crate::net::{Dataset, FlatIndexer, Head, Network, PROB_FLOOR};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImportanceKind {
    /// All-ones scores; reduces every objective to plain squared error.
    Baseline,
    /// Mean squared output Jacobian (regression nets).
    UnsupRegression,
    /// Mean squared output Jacobian over floored output probabilities.
    UnsupClassification,
    /// Mean squared loss gradient.
    SupGradient,
    /// Mean loss-Hessian diagonal, clamped at zero, plus a ridge.
    SupHessian,
    /// Gradient scores plus quartic scores from the squared Hessian diagonal.
    SupGradHessian,
}

impl ImportanceKind {
    pub fn name(self) -> &'static str {
        match self {
            ImportanceKind::Baseline => "baseline",
            ImportanceKind::UnsupRegression => "unsup-reg",
            ImportanceKind::UnsupClassification => "unsup-cls",
            ImportanceKind::SupGradient => "grad",
            ImportanceKind::SupHessian => "hess",
            ImportanceKind::SupGradHessian => "grad-hess",
        }
    }

    pub fn needs_labels(self) -> bool {
        matches!(
            self,
            ImportanceKind::SupGradient | ImportanceKind::SupHessian | ImportanceKind::SupGradHessian
        )
    }
}

/// Nonnegative per-parameter scores; `quartic` present only for the
/// gradient+hessian kind.
#[derive(Debug, Clone)]
pub struct ImportanceDiag {
    quadratic: Vec<f64>,
    quartic: Option<Vec<f64>>,
    kind: ImportanceKind,
    hessian_ridge: f64,
}

impl ImportanceDiag {
    fn checked(
        quadratic: Vec<f64>,
        quartic: Option<Vec<f64>>,
        kind: ImportanceKind,
        hessian_ridge: f64,
    ) -> Result<Self> {
        let ok = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !ok(&quadratic) || !quartic.as_deref().map_or(true, ok) {
            return Err(Error::numeric(
                "importance scores must be finite and nonnegative",
            ));
        }
        Ok(ImportanceDiag {
            quadratic,
            quartic,
            kind,
            hessian_ridge,
        })
    }

    pub fn baseline(m: usize) -> Self {
        ImportanceDiag {
            quadratic: vec![1.0; m],
            quartic: None,
            kind: ImportanceKind::Baseline,
            hessian_ridge: 0.0,
        }
    }

    pub fn from_parts(
        quadratic: Vec<f64>,
        quartic: Option<Vec<f64>>,
        kind: ImportanceKind,
    ) -> Result<Self> {
        Self::checked(quadratic, quartic, kind, 0.0)
    }

    pub fn len(&self) -> usize {
        self.quadratic.len()
    }
    pub fn is_empty(&self) -> bool {
        self.quadratic.is_empty()
    }
    pub fn quadratic(&self) -> &[f64] {
        &self.quadratic
    }
    pub fn quartic(&self) -> Option<&[f64]> {
        self.quartic.as_deref()
    }
    pub fn kind(&self) -> ImportanceKind {
        self.kind
    }
    pub fn hessian_ridge(&self) -> f64 {
        self.hessian_ridge
    }

    /// Borrow the scores for a contiguous global-index range (one layer).
    pub fn slice(&self, range: std::ops::Range<usize>) -> ImportanceDiag {
        ImportanceDiag {
            quadratic: self.quadratic[range.clone()].to_vec(),
            quartic: self.quartic.as_ref().map(|h| h[range].to_vec()),
            kind: self.kind,
            hessian_ridge: self.hessian_ridge,
        }
    }

    /// CSV rows `(global_index, layer, row, col, I, H)`; bias entries carry
    /// `col = -1`, a missing quartic part emits an empty `H` field.
    pub fn csv_rows(&self, idx: &FlatIndexer) -> Vec<String> {
        (0..self.len())
            .map(|g| {
                let c = idx.from_global(g).expect("index within range");
                let col = c.col.map_or(-1i64, |v| v as i64);
                let h = match &self.quartic {
                    Some(q) => format!("{:.16e}", q[g]),
                    None => String::new(),
                };
                format!(
                    "{g},{},{},{col},{:.16e},{h}",
                    c.layer, c.row, self.quadratic[g]
                )
            })
            .collect()
    }
}

pub const IMPORTANCE_CSV_COLUMNS: &str = "global_index,layer,row,col,I,H";

fn check_ridge(ridge: f64) -> Result<()> {
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(Error::domain("hessian ridge must be finite and >= 0"));
    }
    Ok(())
}

/// Mean over samples of the squared output Jacobian.
pub fn importance_unsup_regression(
    net: &Network,
    idx: &FlatIndexer,
    data: &Dataset,
) -> Result<ImportanceDiag> {
    if net.head() != Head::Regression {
        return Err(Error::domain(
            "unsupervised regression importance needs a regression head",
        ));
    }
    data.validate_for(net, false)?;
    let m = idx.len();
    let c_dim = net.output_dim();
    let mut acc = vec![0.0; m];
    for s in 0..data.len() {
        let jac = jacobian_outputs(net, idx, data.input(s))?;
        for c in 0..c_dim {
            let row = &jac[c * m..(c + 1) * m];
            for (a, &j) in acc.iter_mut().zip(row) {
                *a += j * j;
            }
        }
    }
    let n = data.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    ImportanceDiag::checked(acc, None, ImportanceKind::UnsupRegression, 0.0)
}

/// Mean over samples of the squared output Jacobian divided by the floored
/// output probability.
pub fn importance_unsup_classification(
    net: &Network,
    idx: &FlatIndexer,
    data: &Dataset,
) -> Result<ImportanceDiag> {
    if net.head() != Head::Classification {
        return Err(Error::domain(
            "unsupervised classification importance needs a classification head",
        ));
    }
    data.validate_for(net, false)?;
    let m = idx.len();
    let c_dim = net.output_dim();
    let mut acc = vec![0.0; m];
    for s in 0..data.len() {
        let x = data.input(s);
        let f = net.forward(x)?;
        let jac = jacobian_outputs(net, idx, x)?;
        for c in 0..c_dim {
            let inv_p = 1.0 / f[c].max(PROB_FLOOR);
            let row = &jac[c * m..(c + 1) * m];
            for (a, &j) in acc.iter_mut().zip(row) {
                *a += j * j * inv_p;
            }
        }
    }
    let n = data.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    ImportanceDiag::checked(acc, None, ImportanceKind::UnsupClassification, 0.0)
}

/// Mean over samples of the squared loss gradient.
pub fn importance_sup_gradient(
    net: &Network,
    idx: &FlatIndexer,
    data: &Dataset,
) -> Result<ImportanceDiag> {
    data.validate_for(net, true)?;
    let mut acc = vec![0.0; idx.len()];
    for s in 0..data.len() {
        let g = grad_loss(net, idx, data.input(s), data.sample_label(s).unwrap())?;
        for (a, &gv) in acc.iter_mut().zip(&g) {
            *a += gv * gv;
        }
    }
    let n = data.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    ImportanceDiag::checked(acc, None, ImportanceKind::SupGradient, 0.0)
}

/// Mean loss-Hessian diagonal, negative means clamped to zero, plus `ridge`.
pub fn importance_sup_hessian(
    net: &Network,
    idx: &FlatIndexer,
    data: &Dataset,
    ridge: f64,
) -> Result<ImportanceDiag> {
    check_ridge(ridge)?;
    data.validate_for(net, true)?;
    let mut acc = vec![0.0; idx.len()];
    for s in 0..data.len() {
        let h = hessian_diag_loss(net, idx, data.input(s), data.sample_label(s).unwrap())?;
        for (a, &hv) in acc.iter_mut().zip(&h) {
            *a += hv;
        }
    }
    let n = data.len() as f64;
    acc.iter_mut().for_each(|a| *a = (*a / n).max(0.0) + ridge);
    ImportanceDiag::checked(acc, None, ImportanceKind::SupHessian, ridge)
}

/// Quadratic part from squared gradients, quartic part from one quarter of
/// the squared Hessian diagonal plus `ridge`.
pub fn importance_sup_grad_hessian(
    net: &Network,
    idx: &FlatIndexer,
    data: &Dataset,
    ridge: f64,
) -> Result<ImportanceDiag> {
    check_ridge(ridge)?;
    data.validate_for(net, true)?;
    let m = idx.len();
    let mut quad = vec![0.0; m];
    let mut quart = vec![0.0; m];
    for s in 0..data.len() {
        let x = data.input(s);
        let y = data.sample_label(s).unwrap();
        let g = grad_loss(net, idx, x, y)?;
        let h = hessian_diag_loss(net, idx, x, y)?;
        for i in 0..m {
            quad[i] += g[i] * g[i];
            quart[i] += h[i] * h[i];
        }
    }
    let n = data.len() as f64;
    quad.iter_mut().for_each(|a| *a /= n);
    quart.iter_mut().for_each(|a| *a = 0.25 * (*a / n) + ridge);
    ImportanceDiag::checked(quad, Some(quart), ImportanceKind::SupGradHessian, ridge)
}

/// Dispatch by kind; `ridge` only feeds the Hessian-based kinds.
pub fn compute_importance(
    kind: ImportanceKind,
    net: &Network,
    idx: &FlatIndexer,
    data: &Dataset,
    ridge: f64,
) -> Result<ImportanceDiag> {
    match kind {
        ImportanceKind::Baseline => Ok(ImportanceDiag::baseline(idx.len())),
        ImportanceKind::UnsupRegression => importance_unsup_regression(net, idx, data),
        ImportanceKind::UnsupClassification => importance_unsup_classification(net, idx, data),
        ImportanceKind::SupGradient => importance_sup_gradient(net, idx, data),
        ImportanceKind::SupHessian => importance_sup_hessian(net, idx, data, ridge),
        ImportanceKind::SupGradHessian => importance_sup_grad_hessian(net, idx, data, ridge),
    }
}
