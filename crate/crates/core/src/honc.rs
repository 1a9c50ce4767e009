//! Higher-order neighborhood contrastive loss.
//!
//! For a similarity matrix `S` (rows: anchors, columns: candidates) and a
//! binary incidence mask `M` of the same shape, each column `j` with at
//! least one incident row contributes
//!
//! ```text
//! l_j = −log( Σ_i M[i][j]·exp(S[i][j]/μ) / Σ_i exp(S[i][j]/μ) )
//! ```
//!
//! Columns without incident rows are skipped and reported.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Real};
use crate::sparse::SparseStructure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoncConfig {
    pub mu_v: f64,
    pub mu_e: f64,
    pub mu_f: f64,
    pub beta_v: f64,
    pub beta_e: f64,
    pub beta_f: f64,
    /// Drop `i == j` from the vertex-vertex term.
    pub exclude_diagonal: bool,
    /// Use the signed node-edge incidence as attraction weights.
    pub signed_b1: bool,
}

impl Default for HoncConfig {
    fn default() -> Self {
        Self {
            mu_v: 2.0,
            mu_e: 2.0,
            mu_f: 2.0,
            beta_v: 1.0,
            beta_e: 1.0,
            beta_f: 1.0,
            exclude_diagonal: true,
            signed_b1: false,
        }
    }
}

impl HoncConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, mu) in [("mu_v", self.mu_v), ("mu_e", self.mu_e), ("mu_f", self.mu_f)] {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::Config(format!("{name} must be a positive temperature, got {mu}")));
            }
        }
        for (name, b) in [("beta_v", self.beta_v), ("beta_e", self.beta_e), ("beta_f", self.beta_f)] {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {b}")));
            }
        }
        Ok(())
    }

    /// All multipliers zero: the loss is plain cross-entropy.
    pub fn is_disabled(&self) -> bool {
        self.beta_v == 0.0 && self.beta_e == 0.0 && self.beta_f == 0.0
    }
}

/// Column bookkeeping of one contrastive term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HoncDiagnostics {
    /// Columns that contributed a loss term.
    pub columns: usize,
    /// Columns skipped for lack of positive mass.
    pub skipped: usize,
}

impl std::ops::AddAssign for HoncDiagnostics {
    fn add_assign(&mut self, o: Self) {
        self.columns += o.columns;
        self.skipped += o.skipped;
    }
}

/// Row-wise cosine similarity `S[i][j] = cos(za_i, zb_j)`; zero rows give 0.
pub fn similarity<T: Real>(tape: &mut Tape<T>, za: Var, zb: Var) -> Result<Var> {
    let (ha, hb) = (tape.shape(za).1, tape.shape(zb).1);
    if ha != hb {
        return Err(Error::shape("similarity", format!("embedding widths {ha} vs {hb}")));
    }
    let na = tape.row_l2_normalize(za)?;
    let nb = if za == zb { na } else { tape.row_l2_normalize(zb)? };
    tape.matmul_nt(na, nb)
}

/// Sum of `l_j` over qualifying columns, recorded as one differentiable node.
///
/// With `exclude_diagonal` (square `S` only) the `i == j` entry is dropped
/// from both sums, which keeps every `l_j ≥ 0` for binary masks.
pub fn honc_loss<T: Real>(
    tape: &mut Tape<T>,
    s: Var,
    mask: &SparseStructure,
    mu: f64,
    exclude_diagonal: bool,
) -> Result<(Var, HoncDiagnostics)> {
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {mu}")));
    }
    let (a, b) = tape.shape(s);
    if mask.shape() != (a, b) {
        return Err(Error::shape(
            "honc_loss",
            format!("similarity {:?} vs mask {:?}", (a, b), mask.shape()),
        ));
    }
    if exclude_diagonal && a != b {
        return Err(Error::shape(
            "honc_loss",
            format!("diagonal exclusion needs a square matrix, got {a}x{b}"),
        ));
    }
    let (value, grad_t, diag) = column_losses(&tape.value(s).transpose(), mask, mu, exclude_diagonal);
    let node = tape.fused_scalar("honc_loss", s, value, grad_t.transpose())?;
    Ok((node, diag))
}

/// Works on `Sᵀ` so that each column of `S` is a contiguous row.
fn column_losses<T: Real>(
    st: &Matrix<T>,
    mask: &SparseStructure,
    mu: f64,
    exclude_diagonal: bool,
) -> (T, Matrix<T>, HoncDiagnostics) {
    let (b, a) = st.shape();
    let inv_mu = T::lit(1.0 / mu);
    let mt = mask.transpose();
    let mut grad = Matrix::zeros(b, a);
    let mut total = T::zero();
    let mut diag = HoncDiagnostics::default();
    let mut e = vec![T::zero(); a];

    for j in 0..b {
        let weights: Vec<(usize, T)> = mt
            .row(j)
            .filter(|&(i, _)| !(exclude_diagonal && i == j))
            .map(|(i, w)| (i, T::lit(w as f64)))
            .collect();
        if weights.is_empty() {
            diag.skipped += 1;
            continue;
        }
        let row = st.row(j);
        let included = |i: usize| !(exclude_diagonal && i == j);
        let max = row
            .iter()
            .enumerate()
            .filter(|&(i, _)| included(i))
            .fold(T::neg_infinity(), |m, (_, &v)| m.max(v));
        let mut den = T::zero();
        for (i, (ei, &sv)) in e.iter_mut().zip(row).enumerate() {
            *ei = if included(i) { ((sv - max) * inv_mu).exp() } else { T::zero() };
            den = den + *ei;
        }
        let num: T = weights.iter().map(|&(i, w)| w * e[i]).sum();
        if !(num > T::zero()) {
            diag.skipped += 1;
            continue;
        }
        diag.columns += 1;
        total = total + den.ln() - num.ln();
        let g = grad.row_mut(j);
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = inv_mu * e[i] / den;
        }
        for &(i, w) in &weights {
            g[i] = g[i] - inv_mu * w * e[i] / num;
        }
    }
    (total, grad, diag)
}

/// Loss components of one training step, as plain values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_v: f64,
    pub l_e: f64,
    pub l_f: f64,
    pub ce: f64,
    pub total: f64,
}

/// Embeddings and structure blocks of one batch as seen by [`total_loss`].
pub struct LossInputs<'a> {
    pub z0: Var,
    pub z1: Option<Var>,
    pub z2: Option<Var>,
    pub y0: Var,
    pub a0: &'a SparseStructure,
    pub b1: &'a SparseStructure,
    pub b02: &'a SparseStructure,
    /// Batch rows that carry a training label, and their labels.
    pub ce_rows: &'a [usize],
    pub ce_labels: &'a [usize],
}

/// `β_v·Σl_v + β_e·Σl_e + β_f·Σl_f + CE`. Terms with a zero multiplier are
/// not computed; the cross-entropy term is omitted when the batch holds no
/// labeled rows.
pub fn total_loss<T: Real>(
    tape: &mut Tape<T>,
    inputs: &LossInputs<'_>,
    cfg: &HoncConfig,
) -> Result<(Var, LossBreakdown, HoncDiagnostics)> {
    cfg.validate()?;
    let mut parts = LossBreakdown::default();
    let mut diag = HoncDiagnostics::default();
    let mut terms: Vec<Var> = Vec::new();

    let mut add_term = |tape: &mut Tape<T>,
                        other: Option<Var>,
                        mask: &SparseStructure,
                        mu: f64,
                        beta: f64,
                        exclude: bool,
                        name: &str|
     -> Result<Option<f64>> {
        if beta == 0.0 {
            return Ok(None);
        }
        let other = other.ok_or_else(|| {
            Error::InvalidArgument(format!("{name} term enabled but its embeddings are missing"))
        })?;
        let s = similarity(tape, inputs.z0, other)?;
        let (l, d) = honc_loss(tape, s, mask, mu, exclude)?;
        diag += d;
        let value = tape.scalar(l).to_f64().unwrap_or(f64::NAN);
        terms.push(tape.scale(l, T::lit(beta))?);
        Ok(Some(value))
    };

    if let Some(v) = add_term(tape, Some(inputs.z0), inputs.a0, cfg.mu_v, cfg.beta_v, cfg.exclude_diagonal, "vertex")? {
        parts.l_v = v;
    }
    if let Some(v) = add_term(tape, inputs.z1, inputs.b1, cfg.mu_e, cfg.beta_e, false, "edge")? {
        parts.l_e = v;
    }
    if let Some(v) = add_term(tape, inputs.z2, inputs.b02, cfg.mu_f, cfg.beta_f, false, "face")? {
        parts.l_f = v;
    }
    if !inputs.ce_rows.is_empty() {
        let ce = tape.cross_entropy(inputs.y0, inputs.ce_rows, inputs.ce_labels)?;
        parts.ce = tape.scalar(ce).to_f64().unwrap_or(f64::NAN);
        terms.push(ce);
    }

    let mut total = match terms.first() {
        Some(&t) => t,
        None => {
            return Err(Error::InvalidArgument(
                "loss has no terms: all multipliers zero and no labeled rows".into(),
            ))
        }
    };
    for &t in &terms[1..] {
        total = tape.add(total, t)?;
    }
    parts.total = tape.scalar(total).to_f64().unwrap_or(f64::NAN);
    Ok((total, parts, diag))
}
