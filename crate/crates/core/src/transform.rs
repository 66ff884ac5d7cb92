//! Learning the orthonormal transform `A = V_F U_Fᵀ B` from a data matrix.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, complete_orthonormal, orthonormality_defect};
use crate::signal::{dft_factors_cached, reconstruct_principal};
use crate::solvers::{cpcp, default_pcp_lambda, orthonormal_fit_l1, orthonormal_fit_l2, pcp, AdmmConfig};

/// Maximum tolerated deviation of `AᵀA` from the identity.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformMethod {
    Pca,
    Pcp,
}

impl TransformMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformMethod::Pca => "pca",
            TransformMethod::Pcp => "pcp",
        }
    }
}

impl FromStr for TransformMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(TransformMethod::Pca),
            "pcp" => Ok(TransformMethod::Pcp),
            other => Err(invalid(format!("unknown transform method `{other}`"))),
        }
    }
}

/// Loss used to fit `B` against the PCP target `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitLoss {
    #[default]
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcpOptions {
    /// PCP sparsity weight; `None` means `1/√max(m, n)`. `+∞` reduces to PCA.
    pub lambda: Option<f64>,
    pub loss: FitLoss,
    pub fit: AdmmConfig,
}

impl Default for PcpOptions {
    fn default() -> Self {
        Self { lambda: None, loss: FitLoss::L1, fit: AdmmConfig::default() }
    }
}

/// Learned orthonormal transform of shape `q × m` with `q = 2m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformModel {
    a: DMatrix<f64>,
    method: TransformMethod,
    training_fingerprint: String,
    /// Whether the PCP stage reached its tolerance (always true for PCA).
    pub pcp_converged: bool,
}

impl TransformModel {
    /// Wraps an existing matrix after checking the shape and orthonormality.
    pub fn from_matrix(a: DMatrix<f64>, method: TransformMethod, fingerprint: impl Into<String>) -> Result<Self> {
        let (q, m) = a.shape();
        if m == 0 || q != 2 * m {
            return Err(invalid(format!("transform must be 2m x m, got {q}x{m}")));
        }
        let defect = orthonormality_defect(&a);
        if defect > ORTHONORMAL_TOL {
            return Err(Error::Degenerate(format!("transform is not orthonormal (defect {defect:.2e})")));
        }
        Ok(Self { a, method, training_fingerprint: fingerprint.into(), pcp_converged: true })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn method(&self) -> TransformMethod {
        self.method
    }

    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    pub fn q(&self) -> usize {
        self.a.nrows()
    }

    pub fn training_fingerprint(&self) -> &str {
        &self.training_fingerprint
    }

    /// `Az`.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        crate::diagnostics::transform_signal(&self.a, z)
    }

    /// Reconstruction of `z` from the `r` dominant Fourier coefficients of `Az`.
    pub fn reconstruct_principal(&self, z: &[f64], r: usize) -> Result<Vec<f64>> {
        reconstruct_principal(&self.a, z, r)
    }

    /// Writes the model as text: a header line followed by `q` rows of `m`
    /// whitespace-separated values.
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        writeln!(
            out,
            "lbcnnm-transform m={} q={} method={} fingerprint={}",
            self.m(),
            self.q(),
            self.method.as_str(),
            self.training_fingerprint
        )?;
        let mut line = String::new();
        for i in 0..self.q() {
            line.clear();
            for j in 0..self.m() {
                if j > 0 {
                    line.push(' ');
                }
                write!(line, "{:e}", self.a[(i, j)]).expect("writing to a String");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "missing header"))??;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("lbcnnm-transform") {
            return Err(parse_err(1, "not a transform file"));
        }
        let (mut m, mut q, mut method, mut fingerprint) = (None, None, None, String::new());
        for f in fields {
            let (key, value) = f.split_once('=').ok_or_else(|| parse_err(1, "malformed header field"))?;
            match key {
                "m" => m = Some(value.parse::<usize>().map_err(|e| parse_err(1, e))?),
                "q" => q = Some(value.parse::<usize>().map_err(|e| parse_err(1, e))?),
                "method" => method = Some(value.parse::<TransformMethod>()?),
                "fingerprint" => fingerprint = value.to_string(),
                _ => {}
            }
        }
        let m = m.ok_or_else(|| parse_err(1, "header lacks m"))?;
        let q = q.ok_or_else(|| parse_err(1, "header lacks q"))?;
        let method = method.ok_or_else(|| parse_err(1, "header lacks method"))?;
        let mut data = Vec::with_capacity(q * m);
        for row in 0..q {
            let line = lines.next().ok_or_else(|| parse_err(row + 2, "missing row"))??;
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|e| parse_err(row + 2, e))?);
            }
            if data.len() - before != m {
                return Err(parse_err(row + 2, format!("expected {m} values")));
            }
        }
        Self::from_matrix(DMatrix::from_row_slice(q, m, &data), method, fingerprint)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse { location: format!("line {line}"), message: msg.to_string() }
}

/// SHA-256 of the shape and little-endian entries of `y`.
pub fn fingerprint(y: &DMatrix<f64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((y.nrows() as u64).to_le_bytes());
    hasher.update((y.ncols() as u64).to_le_bytes());
    for v in y.iter() {
        hasher.update(v.to_le_bytes());
    }
    hasher.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").expect("writing to a String");
        s
    })
}

/// All `m` left singular vectors of `y`. Directions beyond the numerical
/// rank are completed in index order so the basis is reproducible.
fn full_left_basis(y: &DMatrix<f64>) -> DMatrix<f64> {
    let m = y.nrows();
    let dec = linalg::svd(y);
    let r = dec.rank();
    complete_orthonormal(&dec.u.columns(0, r).into_owned(), m)
}

/// `A = V_F U_Fᵀ B` for `B` of shape `2m × m`.
fn mix(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let f = dft_factors_cached(b.nrows())?;
    Ok(f.mixing() * b)
}

fn check_data(y: &DMatrix<f64>) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptyProblem("training matrix has no entries".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("training matrix contains non-finite values"));
    }
    Ok(())
}

/// PCA transform: `B = [U_Yᵀ; 0]`.
pub fn learn_pca(y: &DMatrix<f64>) -> Result<TransformModel> {
    check_data(y)?;
    let m = y.nrows();
    let u = full_left_basis(y);
    let mut b = DMatrix::zeros(2 * m, m);
    b.rows_mut(0, m).copy_from(&u.transpose());
    let a = mix(&b)?;
    TransformModel::from_matrix(a, TransformMethod::Pca, fingerprint(y))
}

/// PCP transform with default options.
pub fn learn_pcp(y: &DMatrix<f64>) -> Result<TransformModel> {
    learn_pcp_with(y, &PcpOptions::default())
}

pub fn learn_pcp_with(y: &DMatrix<f64>, opts: &PcpOptions) -> Result<TransformModel> {
    check_data(y)?;
    let lambda = opts.lambda.unwrap_or_else(|| default_pcp_lambda(y.nrows(), y.ncols()));
    if lambda == f64::INFINITY {
        return learn_pca(y);
    }
    let dec = pcp(y, lambda)?;
    if !dec.converged {
        log::warn!("PCP did not converge (residual {:.2e}); using best iterate", dec.residual);
    }
    finish_pcp(y, &dec.l, &dec.s, dec.converged, fingerprint(y), opts)
}

/// PCP transform from a partially observed matrix: the CPCP completion
/// `L + S` replaces `Y`.
pub fn learn_pcp_incomplete(y: &DMatrix<f64>, observed: &DMatrix<bool>) -> Result<TransformModel> {
    learn_pcp_incomplete_with(y, observed, &PcpOptions::default())
}

pub fn learn_pcp_incomplete_with(
    y: &DMatrix<f64>,
    observed: &DMatrix<bool>,
    opts: &PcpOptions,
) -> Result<TransformModel> {
    if y.is_empty() {
        return Err(Error::EmptyProblem("training matrix has no entries".into()));
    }
    let masked = y.zip_map(observed, |v, o| if o { v } else { 0.0 });
    check_data(&masked)?;
    let lambda = opts.lambda.unwrap_or_else(|| default_pcp_lambda(y.nrows(), y.ncols()));
    let lambda = if lambda.is_finite() { lambda } else { f64::MAX };
    let dec = cpcp(&masked, observed, lambda)?;
    if !dec.converged {
        log::warn!("CPCP did not converge (residual {:.2e}); using best iterate", dec.residual);
    }
    let completed = &dec.l + &dec.s;
    let fp = fingerprint(&masked);
    if opts.lambda == Some(f64::INFINITY) {
        let mut model = learn_pca(&completed)?;
        model.training_fingerprint = fp;
        model.pcp_converged = dec.converged;
        return Ok(model);
    }
    finish_pcp(&completed, &dec.l, &dec.s, dec.converged, fp, opts)
}

fn finish_pcp(
    y: &DMatrix<f64>,
    l: &DMatrix<f64>,
    s: &DMatrix<f64>,
    converged: bool,
    fp: String,
    opts: &PcpOptions,
) -> Result<TransformModel> {
    let m = y.nrows();
    let u_l = full_left_basis(l);
    let mut e = DMatrix::zeros(2 * m, y.ncols());
    e.rows_mut(0, m).copy_from(&(u_l.transpose() * l));
    e.rows_mut(m, m).copy_from(s);
    let b = match opts.loss {
        FitLoss::L1 => orthonormal_fit_l1(y, &e, &opts.fit)?,
        FitLoss::L2 => orthonormal_fit_l2(y, &e)?,
    };
    let mut model = TransformModel::from_matrix(mix(&b)?, TransformMethod::Pcp, fp)?;
    model.pcp_converged = converged;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pca_on_identity_is_orthonormal() {
        let model = learn_pca(&DMatrix::identity(5, 5)).unwrap();
        assert_eq!(model.q(), 10);
        assert!(orthonormality_defect(model.matrix()) < 1e-10);
    }

    #[test]
    fn round_trip_text() {
        let y = DMatrix::from_fn(4, 6, |i, j| (i as f64 + 1.0) * (j as f64).sin() + 0.3);
        let model = learn_pca(&y).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = TransformModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn rejects_malformed_file() {
        assert!(TransformModel::read_from("nope".as_bytes()).is_err());
        let text = "lbcnnm-transform m=1 q=2 method=pca fingerprint=x\n1\n";
        assert!(matches!(TransformModel::read_from(text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn infinite_lambda_reduces_to_pca() {
        let y = DMatrix::from_fn(4, 7, |i, j| ((i + 3 * j) % 5) as f64 + 1.0);
        let opts = PcpOptions { lambda: Some(f64::INFINITY), ..PcpOptions::default() };
        let a = learn_pcp_with(&y, &opts).unwrap();
        let b = learn_pca(&y).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn fingerprint_depends_on_content() {
        let y = DMatrix::from_element(2, 2, 1.0);
        let mut z = y.clone();
        z[(1, 1)] = 2.0;
        assert_ne!(fingerprint(&y), fingerprint(&z));
        assert_eq!(fingerprint(&y).len(), 64);
    }
}
