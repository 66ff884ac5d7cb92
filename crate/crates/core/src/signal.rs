//! Circular-convolution operators, DFT-derived orthogonal factors and the
//! index conventions shared by the rest of the crate.
//!
//! Indices are zero-based throughout. A circular shift by `s` moves entry `i`
//! to position `(i + s) mod w`; column `j` of a convolution matrix is the
//! signal shifted down by `j`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::fft;

/// A univariate series with its forecast horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub values: Vec<f64>,
    pub horizon: usize,
    #[serde(default)]
    pub frequency_label: Option<String>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, values: Vec<f64>, horizon: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("time series must contain at least one value"));
        }
        if horizon == 0 {
            return Err(invalid("forecast horizon must be positive"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at position {pos}")));
        }
        Ok(Self { id: id.into(), values, horizon, frequency_label: None })
    }

    pub fn with_frequency(mut self, label: impl Into<String>) -> Self {
        self.frequency_label = Some(label.into());
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Set of observed positions of a length-`dim` vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingMask {
    indices: Vec<usize>,
    dim: usize,
}

impl SamplingMask {
    /// Builds a mask from strictly increasing zero-based indices.
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("sampling mask must be non-empty"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("sampling mask indices must be strictly increasing"));
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(invalid(format!("mask index {last} out of range for dimension {dim}")));
            }
        }
        Ok(Self { indices, dim })
    }

    /// The first `count` positions of a length-`dim` vector.
    pub fn prefix(dim: usize, count: usize) -> Result<Self> {
        if count > dim {
            return Err(invalid(format!("prefix of {count} exceeds dimension {dim}")));
        }
        Self::new((0..count).collect(), dim)
    }

    pub fn full(dim: usize) -> Result<Self> {
        Self::prefix(dim, dim)
    }

    pub fn from_flags(flags: &[bool]) -> Result<Self> {
        let idx = flags.iter().enumerate().filter_map(|(i, &f)| f.then_some(i)).collect();
        Self::new(idx, flags.len())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn flags(&self) -> Vec<bool> {
        let mut f = vec![false; self.dim];
        for &i in &self.indices {
            f[i] = true;
        }
        f
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

/// Target of a completion problem: a length-`m` vector with observed entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    pub values: Vec<f64>,
    pub mask: SamplingMask,
    /// One-based position of entry 0 on the series timeline (`l + h - m + 1`).
    pub timeline_offset: i64,
}

impl TargetVector {
    /// Standard forecasting window: the last `m - h` observations followed by
    /// `h` unknown entries (stored as zero).
    pub fn forecast_window(history: &[f64], m: usize, h: usize) -> Result<Self> {
        let l = history.len();
        if h == 0 || h >= m {
            return Err(invalid(format!("need 0 < h < m, got h={h}, m={m}")));
        }
        let observed = m - h;
        if observed > l {
            return Err(invalid(format!("window needs {observed} observations, series has {l}")));
        }
        let mut values = history[l - observed..].to_vec();
        values.resize(m, 0.0);
        Ok(Self {
            values,
            mask: SamplingMask::prefix(m, observed)?,
            timeline_offset: l as i64 + h as i64 - m as i64 + 1,
        })
    }
}

/// Circular convolution with a fixed signal length and kernel size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvOperator {
    pub signal_length: usize,
    pub kernel_size: usize,
}

impl ConvOperator {
    pub fn new(signal_length: usize, kernel_size: usize) -> Result<Self> {
        if kernel_size == 0 || kernel_size > signal_length {
            return Err(invalid(format!("kernel size {kernel_size} outside [1, {signal_length}]")));
        }
        Ok(Self { signal_length, kernel_size })
    }

    pub fn apply(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        check_len(self.signal_length, z.len())?;
        Ok(conv_matrix_unchecked(z, self.kernel_size))
    }

    pub fn adjoint(&self, m: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_len(self.signal_length, m.nrows())?;
        check_len(self.kernel_size, m.ncols())?;
        Ok(conv_adjoint_unchecked(m))
    }
}

/// Convolution matrix `w × k` whose column `j` is `z` circularly shifted down by `j`.
pub fn conv_matrix(z: &[f64], k: usize) -> Result<DMatrix<f64>> {
    ConvOperator::new(z.len(), k)?;
    Ok(conv_matrix_unchecked(z, k))
}

pub(crate) fn conv_matrix_unchecked(z: &[f64], k: usize) -> DMatrix<f64> {
    let w = z.len();
    DMatrix::from_fn(w, k, |i, j| z[(i + w - j % w) % w])
}

/// Adjoint of [`conv_matrix`]: `Σ_j T^{-j} Z e_j`.
pub fn conv_adjoint(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.ncols() > m.nrows() {
        return Err(invalid(format!("adjoint needs k <= w, got a {}x{} matrix", m.nrows(), m.ncols())));
    }
    Ok(conv_adjoint_unchecked(m))
}

pub(crate) fn conv_adjoint_unchecked(m: &DMatrix<f64>) -> Vec<f64> {
    let (w, k) = m.shape();
    let mut out = vec![0.0; w];
    for j in 0..k {
        let col = m.column(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[(i + j) % w];
        }
    }
    out
}

/// `out[i] = z[(i - s) mod w]`; positive `s` shifts down.
pub fn circular_shift(z: &[f64], s: isize) -> Vec<f64> {
    let w = z.len();
    if w == 0 {
        return Vec::new();
    }
    let s = s.rem_euclid(w as isize) as usize;
    (0..w).map(|i| z[(i + w - s) % w]).collect()
}

/// Zeroes every entry outside the mask.
pub fn project_mask(z: &[f64], mask: &SamplingMask) -> Result<Vec<f64>> {
    check_len(mask.dim(), z.len())?;
    let mut out = vec![0.0; z.len()];
    for &i in mask.indices() {
        out[i] = z[i];
    }
    Ok(out)
}

/// `‖F(z)‖₁`, the sum of DFT coefficient magnitudes.
pub fn fourier_l1(z: &[f64]) -> f64 {
    fft::forward(z).iter().map(|c| c.norm()).sum()
}

/// Orthogonal factors `U_F = [U₁, U₂]`, `V_F = [V₁, V₂]` from the skinny SVDs
/// `F₁ = √w U₁V₁ᵀ` and `F₂ = √w U₂V₂ᵀ` of the real and imaginary parts of the
/// DFT matrix.
#[derive(Debug, Clone)]
pub struct DftFactors {
    pub u_f: DMatrix<f64>,
    pub v_f: DMatrix<f64>,
    pub w: usize,
    /// Number of columns belonging to the real-part block.
    pub real_rank: usize,
    mixing: DMatrix<f64>,
}

impl DftFactors {
    /// `V_F U_Fᵀ`, the orthogonal matrix that turns coordinate sparsity into
    /// Fourier sparsity.
    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    pub fn u1(&self) -> DMatrix<f64> {
        self.u_f.columns(0, self.real_rank).into_owned()
    }

    pub fn u2(&self) -> DMatrix<f64> {
        self.u_f.columns(self.real_rank, self.w - self.real_rank).into_owned()
    }

    pub fn v1(&self) -> DMatrix<f64> {
        self.v_f.columns(0, self.real_rank).into_owned()
    }

    pub fn v2(&self) -> DMatrix<f64> {
        self.v_f.columns(self.real_rank, self.w - self.real_rank).into_owned()
    }
}

/// Real and imaginary parts of the `w × w` DFT matrix `F_{ab} = e^{-2πi ab/w}`.
pub fn dft_parts(w: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let angle = |a: usize, b: usize| {
        let t = ((a * b) % w) as f64 / w as f64;
        2.0 * std::f64::consts::PI * t
    };
    let re = DMatrix::from_fn(w, w, |a, b| angle(a, b).cos());
    let im = DMatrix::from_fn(w, w, |a, b| -angle(a, b).sin());
    (re, im)
}

/// Builds the DFT factors for size `w`.
///
/// `F₁` and `F₂` satisfy `F₁² = w P_even` and `F₂² = -w P_odd` with
/// `P_even`/`P_odd` the projectors onto vectors symmetric/antisymmetric under
/// `i ↦ -i mod w`, so every nonzero singular value equals `√w`. The left
/// factors are therefore orthonormal bases of those subspaces and the right
/// factors follow as `V = F U / √w`.
pub fn dft_factors(w: usize) -> Result<DftFactors> {
    if w == 0 {
        return Err(invalid("DFT size must be positive"));
    }
    let (f1, f2) = dft_parts(w);
    let h = std::f64::consts::FRAC_1_SQRT_2;

    let mut even: Vec<DVector<f64>> = Vec::with_capacity(w / 2 + 1);
    let mut odd: Vec<DVector<f64>> = Vec::with_capacity(w / 2);
    let mut e0 = DVector::zeros(w);
    e0[0] = 1.0;
    even.push(e0);
    for j in 1..w {
        let partner = w - j;
        if j < partner {
            let mut s = DVector::zeros(w);
            s[j] = h;
            s[partner] = h;
            even.push(s);
            let mut a = DVector::zeros(w);
            a[j] = h;
            a[partner] = -h;
            odd.push(a);
        } else if j == partner {
            let mut s = DVector::zeros(w);
            s[j] = 1.0;
            even.push(s);
        }
    }
    let real_rank = even.len();
    let u1 = DMatrix::from_columns(&even);
    let scale = 1.0 / (w as f64).sqrt();
    let v1 = &f1 * &u1 * scale;
    let (u_f, v_f) = if odd.is_empty() {
        (u1, v1)
    } else {
        let u2 = DMatrix::from_columns(&odd);
        let v2 = &f2 * &u2 * scale;
        let mut u_f = DMatrix::zeros(w, w);
        let mut v_f = DMatrix::zeros(w, w);
        u_f.columns_mut(0, real_rank).copy_from(&u1);
        u_f.columns_mut(real_rank, w - real_rank).copy_from(&u2);
        v_f.columns_mut(0, real_rank).copy_from(&v1);
        v_f.columns_mut(real_rank, w - real_rank).copy_from(&v2);
        (u_f, v_f)
    };
    let mixing = &v_f * u_f.transpose();
    Ok(DftFactors { u_f, v_f, w, real_rank, mixing })
}

/// Memoized [`dft_factors`].
pub fn dft_factors_cached(w: usize) -> Result<Arc<DftFactors>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<DftFactors>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(f) = cache.read().expect("dft cache poisoned").get(&w) {
        return Ok(Arc::clone(f));
    }
    let built = Arc::new(dft_factors(w)?);
    let mut guard = cache.write().expect("dft cache poisoned");
    Ok(Arc::clone(guard.entry(w).or_insert(built)))
}

/// Keeps the `r` largest-magnitude Fourier coefficients of `A z` and maps the
/// result back through `Aᵀ`.
pub fn reconstruct_principal(transform: &DMatrix<f64>, z: &[f64], r: usize) -> Result<Vec<f64>> {
    check_len(transform.ncols(), z.len())?;
    let q = transform.nrows();
    if r > q {
        return Err(invalid(format!("r = {r} exceeds transform rows {q}")));
    }
    let az = transform * DVector::from_column_slice(z);
    let mut spec = fft::forward(az.as_slice());
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| spec[b].norm().total_cmp(&spec[a].norm()).then(a.cmp(&b)));
    for &i in &order[r..] {
        spec[i] = rustfft::num_complex::Complex64::new(0.0, 0.0);
    }
    let back = DVector::from_vec(fft::inverse_real(&spec));
    Ok((transform.transpose() * back).as_slice().to_vec())
}
