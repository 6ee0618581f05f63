//! Monte Carlo oracle: Haar-random unitaries, truncated channel matrices and
//! mutual-information ensembles.
//!
//! The channel is the leading `n x m` block of an `l x l` Haar unitary and the
//! power allocation is taken diagonal. Because the channel law is invariant
//! under unitary rotations, only the eigenvalues of the allocation matter, so
//! this loses no generality.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::mgf::ChannelConfig;

/// Generator used for every ensemble; recorded in exported metadata.
pub const GENERATOR: &str = "ChaCha20 (rand_chacha 0.9), seed_from_u64(seed), stream = chunk index";
/// Samples per independently seeded stream.
pub const CHUNK: usize = 4096;
/// Default histogram bin width in nats.
pub const DEFAULT_BIN: f64 = 0.02;

/// Dense complex matrix stored column-major; used for the rectangular
/// channel block.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl RectMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.rows + row]
    }

    pub fn column(&self, col: usize) -> &[Complex64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    /// Leading `rows x cols` block.
    pub fn truncate(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows > self.rows || cols > self.cols {
            return Err(Error::Dimension(format!(
                "cannot take a {rows}x{cols} block of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let data = (0..cols)
            .flat_map(|c| self.column(c)[..rows].iter().copied())
            .collect();
        Ok(Self { rows, cols, data })
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

// Gram-Schmidt with one re-orthogonalisation pass. The resulting R has a real
// positive diagonal, which is exactly the phase correction that makes the Q
// factor of a Ginibre matrix Haar distributed. Returns false on numerical
// rank deficiency.
fn orthonormalize(rows: usize, cols: usize, data: &mut [Complex64]) -> bool {
    for j in 0..cols {
        let (done, rest) = data.split_at_mut(j * rows);
        let v = &mut rest[..rows];
        let start: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for _pass in 0..2 {
            for k in 0..j {
                let qk = &done[k * rows..(k + 1) * rows];
                let c: Complex64 = qk.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                for (x, a) in v.iter_mut().zip(qk) {
                    *x -= c * a;
                }
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 1e-10 * start) {
            return false;
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    true
}

/// First `cols` columns of an `l x l` Haar unitary.
///
/// Column `j` depends only on the first `j + 1` Gaussian columns, so this is
/// the same draw as the corresponding columns of [`sample_haar_unitary`].
pub fn sample_haar_columns<R: Rng + ?Sized>(l: usize, cols: usize, rng: &mut R) -> Result<RectMatrix> {
    if l == 0 || cols == 0 || cols > l {
        return Err(Error::Dimension(format!("need 1 <= cols <= l, got cols={cols}, l={l}")));
    }
    loop {
        let mut data: Vec<Complex64> = (0..l * cols).map(|_| complex_normal(rng)).collect();
        if orthonormalize(l, cols, &mut data) {
            return RectMatrix::new(l, cols, data);
        }
    }
}

/// Haar-distributed `l x l` unitary.
pub fn sample_haar_unitary<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Result<ComplexMatrix> {
    let q = sample_haar_columns(l, l, rng)?;
    ComplexMatrix::from_fn(l, |r, c| q.get(r, c))
}

/// Leading `n x m` block of `u`.
pub fn channel_from_unitary(u: &ComplexMatrix, m: usize, n: usize) -> Result<RectMatrix> {
    let l = u.dim();
    if m == 0 || n == 0 || m > l || n > l {
        return Err(Error::Dimension(format!("cannot take a {n}x{m} block of a {l}x{l} unitary")));
    }
    let data = (0..m).flat_map(|c| (0..n).map(move |r| u.get(r, c))).collect();
    RectMatrix::new(n, m, data)
}

// ln det of a Hermitian positive-definite matrix (row-major) by Cholesky.
fn hermitian_log_det(dim: usize, mut a: Vec<Complex64>) -> Result<f64> {
    let mut log_det = 0.0;
    for j in 0..dim {
        let mut d = a[j * dim + j].re;
        for k in 0..j {
            d -= a[j * dim + k].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::Singular(d));
        }
        let pivot = d.sqrt();
        log_det += 2.0 * pivot.ln();
        a[j * dim + j] = Complex64::new(pivot, 0.0);
        for i in j + 1..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= a[i * dim + k] * a[j * dim + k].conj();
            }
            a[i * dim + j] = s / pivot;
        }
    }
    Ok(log_det)
}

fn check_powers(h: &RectMatrix, q: &[f64]) -> Result<()> {
    if q.len() != h.cols() {
        return Err(Error::Dimension(format!("{} powers for {} transmit modes", q.len(), h.cols())));
    }
    if let Some(bad) = q.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Parameter(format!("powers must be finite and >= 0, got {bad}")));
    }
    Ok(())
}

/// `ln det(1_m + Q H†H)` in nats for an `n x m` channel `h` and diagonal
/// powers `q`.
pub fn mutual_info_sample(h: &RectMatrix, q: &[f64]) -> Result<f64> {
    check_powers(h, q)?;
    let m = h.cols();
    let root: Vec<f64> = q.iter().map(|x| x.sqrt()).collect();
    let mut a = vec![Complex64::new(0.0, 0.0); m * m];
    for j in 0..m {
        for k in 0..=j {
            let g: Complex64 = h.column(j).iter().zip(h.column(k)).map(|(x, y)| x.conj() * y).sum();
            let v = g * (root[j] * root[k]);
            a[j * m + k] = v;
            a[k * m + j] = v.conj();
        }
        a[j * m + j] += 1.0;
    }
    // the matrix is at least the identity, so a negative result is rounding
    Ok(hermitian_log_det(m, a)?.max(0.0))
}

/// The same quantity as `ln det(1_n + H Q H†)`, which Sylvester's identity
/// makes equal to [`mutual_info_sample`].
pub fn mutual_info_sylvester(h: &RectMatrix, q: &[f64]) -> Result<f64> {
    check_powers(h, q)?;
    let n = h.rows();
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..=r {
            let v: Complex64 = (0..h.cols()).map(|k| h.get(r, k) * h.get(c, k).conj() * q[k]).sum();
            a[r * n + c] = v;
            a[c * n + r] = v.conj();
        }
        a[r * n + r] += 1.0;
    }
    Ok(hermitian_log_det(n, a)?.max(0.0))
}

/// Mutual-information samples for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct McEnsemble {
    cfg: ChannelConfig,
    seed: u64,
    samples: Vec<f64>,
}

/// Sample mean, unbiased variance and moment skewness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

impl McEnsemble {
    /// Wraps externally produced samples, e.g. ones read back from CSV.
    pub fn from_samples(cfg: ChannelConfig, seed: u64, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Parameter("ensemble needs at least one sample".into()));
        }
        if let Some(bad) = samples.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Parameter(format!("mutual information must be finite and >= 0, got {bad}")));
        }
        Ok(Self { cfg, seed, samples })
    }

    pub fn cfg(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn stats(&self) -> SampleStats {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        let (mut m2, mut m3) = (0.0, 0.0);
        for &x in &self.samples {
            let d = x - mean;
            m2 += d * d;
            m3 += d * d * d;
        }
        let variance = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
        let (m2, m3) = (m2 / n, m3 / n);
        let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        SampleStats { mean, variance, skewness }
    }

    /// CSV with a `#` metadata line, header `index,I_nats`, one row per
    /// sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# cfg={} seed={} count={} generator={} chunk={}",
            self.cfg,
            self.seed,
            self.count(),
            GENERATOR,
            CHUNK
        )?;
        writeln!(w, "index,I_nats")?;
        for (i, x) in self.samples.iter().enumerate() {
            writeln!(w, "{i},{x}")?;
        }
        Ok(())
    }
}

fn chunk_samples(cfg: &ChannelConfig, seed: u64, chunk: usize, len: usize) -> Result<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    (0..len)
        .map(|_| {
            let u = sample_haar_columns(cfg.l(), cfg.m(), &mut rng)?;
            let h = u.truncate(cfg.n(), cfg.m())?;
            mutual_info_sample(&h, cfg.q())
        })
        .collect()
}

/// `count` samples; chunk `c` uses stream `c` of the generator seeded with
/// `seed`, so the result does not depend on the thread schedule.
pub fn run_ensemble(cfg: &ChannelConfig, count: usize, seed: u64) -> Result<McEnsemble> {
    if count == 0 {
        return Err(Error::Parameter("count must be >= 1".into()));
    }
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| chunk_samples(cfg, seed, c, CHUNK.min(count - c * CHUNK)))
        .collect::<Result<_>>()?;
    Ok(McEnsemble {
        cfg: cfg.clone(),
        seed,
        samples: parts.concat(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Pdf,
    Cdf,
    Sf,
}

/// Values of a distribution curve on bin centres spaced by the bin width.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCurve {
    pub bin_centers: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: CurveKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCurves {
    pub pdf: EmpiricalCurve,
    pub cdf: EmpiricalCurve,
    pub sf: EmpiricalCurve,
    pub bin_width: f64,
}

/// Histogram density on bins `[k δ, (k+1) δ)` covering `[0, max + 3δ]`, and
/// the exact empirical CDF/SF at the same centres.
///
/// The PDF is trimmed to the span between the first and last occupied bins;
/// CDF and SF keep the full range.
pub fn empirical_curves(ens: &McEnsemble, bin_width: f64) -> Result<EmpiricalCurves> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Parameter(format!("bin width must be > 0, got {bin_width}")));
    }
    let mut sorted = ens.samples.clone();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        return Err(Error::Degenerate(format!("all {} samples equal {lo}", sorted.len())));
    }
    let bins = ((hi + 3.0 * bin_width) / bin_width).ceil() as usize;
    let centers: Vec<f64> = (0..bins).map(|k| (k as f64 + 0.5) * bin_width).collect();
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        counts[((x / bin_width) as usize).min(bins - 1)] += 1;
    }
    let total = sorted.len() as f64;
    let first = counts.iter().position(|&c| c > 0).unwrap_or(0);
    let last = counts.iter().rposition(|&c| c > 0).unwrap_or(bins - 1);
    let pdf = EmpiricalCurve {
        bin_centers: centers[first..=last].to_vec(),
        values: counts[first..=last].iter().map(|&c| c as f64 / (total * bin_width)).collect(),
        kind: CurveKind::Pdf,
    };
    let cdf_values: Vec<f64> = centers
        .iter()
        .map(|&c| sorted.partition_point(|&x| x <= c) as f64 / total)
        .collect();
    let sf = EmpiricalCurve {
        bin_centers: centers.clone(),
        values: cdf_values.iter().map(|c| 1.0 - c).collect(),
        kind: CurveKind::Sf,
    };
    let cdf = EmpiricalCurve {
        bin_centers: centers,
        values: cdf_values,
        kind: CurveKind::Cdf,
    };
    Ok(EmpiricalCurves { pdf, cdf, sf, bin_width })
}

/// Sample estimate of `E[exp(iκI)]` with the standard error of each
/// component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMgf {
    pub value: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

impl McMgf {
    /// Largest component deviation from `reference`, in standard errors.
    /// Components with zero standard error count as infinitely many unless
    /// they match exactly.
    pub fn z_score(&self, reference: Complex64) -> f64 {
        let z = |d: f64, se: f64| if d == 0.0 { 0.0 } else { d.abs() / se };
        z(self.value.re - reference.re, self.se_re).max(z(self.value.im - reference.im, self.se_im))
    }

    /// Standard error of the complex estimate, combining both components.
    pub fn se(&self) -> f64 {
        self.se_re.hypot(self.se_im)
    }
}

pub fn mc_mgf(ens: &McEnsemble, kappa: f64) -> McMgf {
    let n = ens.samples.len() as f64;
    let (mut sc, mut ss) = (0.0, 0.0);
    for &x in &ens.samples {
        sc += (kappa * x).cos();
        ss += (kappa * x).sin();
    }
    let (mc, ms) = (sc / n, ss / n);
    let (mut vc, mut vs) = (0.0, 0.0);
    for &x in &ens.samples {
        vc += ((kappa * x).cos() - mc).powi(2);
        vs += ((kappa * x).sin() - ms).powi(2);
    }
    let dof = (n - 1.0).max(1.0);
    McMgf {
        value: Complex64::new(mc, ms),
        se_re: (vc / dof / n).sqrt(),
        se_im: (vs / dof / n).sqrt(),
    }
}

/// Kolmogorov-Smirnov distance between the sample and a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of the one-sample KS distance at level `alpha`.
pub fn ks_critical(count: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (count as f64).sqrt()
}
