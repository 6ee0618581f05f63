//! Distribution curves of the mutual information: Fourier inversion of the
//! exact MGF and the Gaussian and Weibull moment-matched approximations.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mgf::{MgfGrid, MomentSet};
use crate::montecarlo::{CurveKind, EmpiricalCurve};
use crate::specfun::{erf, ln_gamma_real};

/// Largest imaginary part tolerated in an inverted value.
pub const INVERSION_RESIDUE: f64 = 1e-6;
/// Most negative PDF value always accepted as ringing.
pub const RINGING_FLOOR: f64 = -1e-4;
/// Truncating the sum at `±L` leaves oscillations of the order of `|M(±L)|`;
/// excursions within this multiple of it are accepted too.
pub const RINGING_PER_TAIL: f64 = 2.0;
/// Largest downward step accepted in an inverted CDF.
pub const MONOTONE_SLACK: f64 = 1e-3;
/// Points in the default evaluation grid.
pub const DEFAULT_GRID_POINTS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gaussian,
    Weibull,
    Fourier,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Gaussian => "gaussian",
            Method::Weibull => "weibull",
            Method::Fourier => "fourier",
            Method::MonteCarlo => "monte-carlo",
        })
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveKind::Pdf => "pdf",
            CurveKind::Cdf => "cdf",
            CurveKind::Sf => "sf",
        })
    }
}

/// A PDF, CDF or SF sampled at increasing abscissae (nats).
///
/// Inverted PDFs keep their raw values, small negative ringing included;
/// [`DistCurve::clipped`] gives the non-negative version.
#[derive(Debug, Clone, PartialEq)]
pub struct DistCurve {
    pub points: Vec<(f64, f64)>,
    pub kind: CurveKind,
    pub method: Method,
}

impl DistCurve {
    fn from_parts(xs: &[f64], values: Vec<f64>, kind: CurveKind, method: Method) -> Self {
        Self {
            points: xs.iter().copied().zip(values).collect(),
            kind,
            method,
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Negative values replaced by zero.
    pub fn clipped(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1.max(0.0)).collect()
    }

    /// CSV with `#` metadata lines (method, kind, then `meta` verbatim) and
    /// header `I,value`.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[String]) -> io::Result<()> {
        writeln!(w, "# method={} kind={}", self.method, self.kind)?;
        for line in meta {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "I,value")?;
        for (x, v) in &self.points {
            writeln!(w, "{x},{v}")?;
        }
        Ok(())
    }
}

impl From<&EmpiricalCurve> for DistCurve {
    fn from(c: &EmpiricalCurve) -> Self {
        DistCurve::from_parts(&c.bin_centers, c.values.clone(), c.kind, Method::MonteCarlo)
    }
}

/// PDF, CDF (outage probability) and SF on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub pdf: DistCurve,
    pub cdf: DistCurve,
    pub sf: DistCurve,
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// 600 points on `[max(0, μ₁ − 6σ), μ₁ + 6σ]`.
pub fn default_grid(moments: &MomentSet) -> Vec<f64> {
    let s = moments.sigma();
    linspace((moments.mu1 - 6.0 * s).max(0.0), moments.mu1 + 6.0 * s, DEFAULT_GRID_POINTS)
}

pub fn gaussian_curves(mu1: f64, sigma2: f64, grid: &[f64]) -> Result<CurveSet> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Parameter(format!("variance must be > 0, got {sigma2}")));
    }
    let norm = 1.0 / (2.0 * PI * sigma2).sqrt();
    let pdf = grid.iter().map(|&x| norm * (-(x - mu1).powi(2) / (2.0 * sigma2)).exp()).collect();
    let cdf: Vec<f64> = grid
        .iter()
        .map(|&x| 0.5 * (1.0 + erf((x - mu1) / (2.0 * sigma2).sqrt())))
        .collect();
    let sf = cdf.iter().map(|c| 1.0 - c).collect();
    Ok(CurveSet {
        pdf: DistCurve::from_parts(grid, pdf, CurveKind::Pdf, Method::Gaussian),
        cdf: DistCurve::from_parts(grid, cdf, CurveKind::Cdf, Method::Gaussian),
        sf: DistCurve::from_parts(grid, sf, CurveKind::Sf, Method::Gaussian),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullParams {
    pub beta_shape: f64,
    pub lambda_scale: f64,
}

const WEIBULL_SHAPE_RANGE: (f64, f64) = (0.1, 50.0);

// ln(Γ²(1+1/β)/Γ(1+2/β)); increases monotonically from -∞ to 0.
fn ln_weibull_ratio(beta: f64) -> Result<f64> {
    Ok(2.0 * ln_gamma_real(1.0 + 1.0 / beta)? - ln_gamma_real(1.0 + 2.0 / beta)?)
}

/// Shape and scale matching the first two raw moments.
pub fn weibull_fit(mu1: f64, mu2: f64) -> Result<WeibullParams> {
    if !(mu1 > 0.0 && mu2 > mu1 * mu1 && mu2.is_finite()) {
        return Err(Error::Parameter(format!("need 0 < mu1^2 < mu2, got mu1={mu1}, mu2={mu2}")));
    }
    let target = 2.0 * mu1.ln() - mu2.ln();
    let (mut lo, mut hi) = WEIBULL_SHAPE_RANGE;
    let (f_lo, f_hi) = (ln_weibull_ratio(lo)? - target, ln_weibull_ratio(hi)? - target);
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::NoBracket(format!(
            "moment ratio {:.6e} outside the range reachable with shape in [{lo}, {hi}]",
            target.exp()
        )));
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if ln_weibull_ratio(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let residual = (ln_weibull_ratio(beta)? - target).abs();
    if residual > 1e-10 {
        return Err(Error::NonConvergence {
            terms: 0,
            context: format!("Weibull moment ratio residual {residual:e}"),
        });
    }
    Ok(WeibullParams {
        beta_shape: beta,
        lambda_scale: mu1 / ln_gamma_real(1.0 + 1.0 / beta)?.exp(),
    })
}

/// Closed-form Weibull curves; everything at `I <= 0` is treated as outside
/// the support.
pub fn weibull_curves(p: WeibullParams, grid: &[f64]) -> Result<CurveSet> {
    let WeibullParams { beta_shape: b, lambda_scale: lam } = p;
    if !(b > 0.0 && lam > 0.0 && b.is_finite() && lam.is_finite()) {
        return Err(Error::Parameter(format!("invalid Weibull parameters {p:?}")));
    }
    let mut pdf = Vec::with_capacity(grid.len());
    let mut cdf = Vec::with_capacity(grid.len());
    let mut sf = Vec::with_capacity(grid.len());
    for &x in grid {
        if x <= 0.0 {
            pdf.push(0.0);
            cdf.push(0.0);
            sf.push(1.0);
            continue;
        }
        let t = (x / lam).powf(b);
        let tail = (-t).exp();
        pdf.push(b / lam * (x / lam).powf(b - 1.0) * tail);
        cdf.push(-(-t).exp_m1());
        sf.push(tail);
    }
    Ok(CurveSet {
        pdf: DistCurve::from_parts(grid, pdf, CurveKind::Pdf, Method::Weibull),
        cdf: DistCurve::from_parts(grid, cdf, CurveKind::Cdf, Method::Weibull),
        sf: DistCurve::from_parts(grid, sf, CurveKind::Sf, Method::Weibull),
    })
}

// Σ_κ w(κ) M(κ) δκ / 2π at each abscissa, with the residue check.
fn invert(grid: &MgfGrid, xs: &[f64], weight: impl Fn(f64, f64) -> Complex64 + Sync) -> Result<Vec<f64>> {
    if grid.is_empty() || !(grid.step > 0.0) || grid.kappas.len() != grid.values.len() {
        return Err(Error::Parameter("malformed MGF grid".into()));
    }
    xs.par_iter()
        .map(|&x| {
            let sum: Complex64 = grid
                .kappas
                .iter()
                .zip(&grid.values)
                .map(|(&k, &m)| weight(k, x) * m)
                .sum();
            let v = sum * (grid.step / (2.0 * PI));
            if v.im.abs() > INVERSION_RESIDUE {
                return Err(Error::Inversion(format!(
                    "imaginary residue {:e} at I = {x} (L = {}, step = {})",
                    v.im, grid.cutoff, grid.step
                )));
            }
            Ok(v.re)
        })
        .collect()
}

/// `p(I) ≈ (1/2π) Σ e^{-iκI} M(κ) δκ` on `xs`.
///
/// Values below [`ringing_floor`] are an error; smaller negative ringing is
/// kept in the returned curve.
pub fn fourier_pdf(grid: &MgfGrid, xs: &[f64]) -> Result<DistCurve> {
    let values = invert(grid, xs, |k, x| Complex64::from_polar(1.0, -k * x))?;
    let floor = ringing_floor(grid);
    if let Some((x, v)) = xs.iter().zip(&values).find(|(_, v)| **v < floor) {
        return Err(Error::Inversion(format!(
            "pdf ringing {v:e} at I = {x} (L = {}, step = {})",
            grid.cutoff, grid.step
        )));
    }
    Ok(DistCurve::from_parts(xs, values, CurveKind::Pdf, Method::Fourier))
}

/// Most negative inverted PDF value attributable to truncation of `grid`.
pub fn ringing_floor(grid: &MgfGrid) -> f64 {
    let tail = match (grid.values.first(), grid.values.last()) {
        (Some(a), Some(b)) => a.norm().max(b.norm()),
        _ => 0.0,
    };
    RINGING_FLOOR.min(-RINGING_PER_TAIL * tail)
}

/// Outage probability `P(I <= R) ≈ (i/2π) Σ (e^{-iκR} - 1)/κ M(κ) δκ`.
///
/// The κ = 0 term uses its limit `-iR`.
pub fn fourier_cdf(grid: &MgfGrid, rs: &[f64]) -> Result<DistCurve> {
    let i = Complex64::i();
    let values = invert(grid, rs, |k, r| {
        let factor = if k == 0.0 {
            Complex64::new(0.0, -r)
        } else {
            (Complex64::from_polar(1.0, -k * r) - 1.0) / k
        };
        i * factor
    })?;
    check_cdf(&values, rs, grid)?;
    Ok(DistCurve::from_parts(rs, values, CurveKind::Cdf, Method::Fourier))
}

fn check_cdf(values: &[f64], rs: &[f64], grid: &MgfGrid) -> Result<()> {
    for (w, r) in values.windows(2).zip(rs.windows(2)) {
        if r[1] > r[0] && w[1] < w[0] - MONOTONE_SLACK {
            return Err(Error::Inversion(format!(
                "outage probability drops by {:e} at R = {} (L = {}, step = {})",
                w[0] - w[1],
                r[1],
                grid.cutoff,
                grid.step
            )));
        }
    }
    Ok(())
}

/// Survival function `1 - P_out(R)`.
pub fn fourier_sf(grid: &MgfGrid, rs: &[f64]) -> Result<DistCurve> {
    let cdf = fourier_cdf(grid, rs)?;
    let values = cdf.points.iter().map(|p| 1.0 - p.1).collect();
    Ok(DistCurve::from_parts(rs, values, CurveKind::Sf, Method::Fourier))
}

pub fn fourier_curves(grid: &MgfGrid, xs: &[f64]) -> Result<CurveSet> {
    let cdf = fourier_cdf(grid, xs)?;
    let sf_values = cdf.points.iter().map(|p| 1.0 - p.1).collect();
    Ok(CurveSet {
        pdf: fourier_pdf(grid, xs)?,
        sf: DistCurve::from_parts(xs, sf_values, CurveKind::Sf, Method::Fourier),
        cdf,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // reference values carry every digit they were computed with
mod tests {
    use super::*;
    use crate::mgf::{mgf_grid, moments, ChannelConfig, Cutoff};
    use crate::montecarlo::{empirical_curves, run_ensemble};

    fn gaussian_mgf_grid(mu: f64, sigma: f64, cutoff: f64, step: f64) -> MgfGrid {
        let half = (cutoff / step).round() as i64;
        let kappas: Vec<f64> = (-half..=half).map(|k| k as f64 * step).collect();
        let values = kappas
            .iter()
            .map(|&k| Complex64::from_polar((-sigma * sigma * k * k / 2.0).exp(), k * mu))
            .collect();
        MgfGrid { cutoff, step, kappas, values }
    }

    fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
        xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
    }

    #[test]
    fn gaussian_closed_forms() {
        let grid = linspace(-1.0, 5.0, 601);
        let c = gaussian_curves(2.0, 0.49, &grid).unwrap();
        let mid = c.cdf.points[300];
        assert_eq!(mid.0, 2.0);
        assert!((mid.1 - 0.5).abs() < 1e-15);
        assert!((c.pdf.points[300].1 - 1.0 / (2.0 * PI * 0.49f64).sqrt()).abs() < 1e-15);
        for (a, b) in c.cdf.points.iter().zip(&c.sf.points) {
            assert_eq!(a.1 + b.1, 1.0);
        }
        assert!(gaussian_curves(0.0, 0.0, &grid).is_err());
    }

    #[test]
    fn weibull_fit_examples() {
        let p = weibull_fit(1.0, 2.0).unwrap();
        assert!((p.beta_shape - 1.0).abs() < 1e-10 && (p.lambda_scale - 1.0).abs() < 1e-10);
        let p = weibull_fit(PI.sqrt() / 2.0, 1.0).unwrap();
        assert!((p.beta_shape - 2.0).abs() < 1e-10 && (p.lambda_scale - 1.0).abs() < 1e-10);
        assert!(weibull_fit(1.0, 0.5).is_err());
        // ratio 1e-8 needs a shape far below 0.1
        assert!(matches!(weibull_fit(1e-4, 1.0), Err(Error::NoBracket(_))));
    }

    #[test]
    fn weibull_curves_reproduce_moments() {
        let (mu1, mu2) = (1.749217584880240, 1.749217584880240f64.powi(2) + 0.05767940582802557);
        let p = weibull_fit(mu1, mu2).unwrap();
        let c = weibull_curves(p, &[0.0, p.lambda_scale]).unwrap();
        assert_eq!((c.cdf.points[0].1, c.sf.points[0].1), (0.0, 1.0));
        assert!((c.cdf.points[1].1 - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        // composite Simpson on a fine grid as an independent moment oracle
        let xs = linspace(0.0, 6.0 * p.lambda_scale, 200_001);
        let pdf = weibull_curves(p, &xs).unwrap().pdf.values();
        let h = xs[1] - xs[0];
        let simpson = |f: &dyn Fn(usize) -> f64| {
            let n = xs.len() - 1;
            (f(0) + f(n) + (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i)).sum::<f64>()) * h / 3.0
        };
        let m1 = simpson(&|i| xs[i] * pdf[i]);
        let m2 = simpson(&|i| xs[i] * xs[i] * pdf[i]);
        assert!((m1 - mu1).abs() < 1e-8 * mu1, "{m1} vs {mu1}");
        assert!((m2 - mu2).abs() < 1e-8 * mu2, "{m2} vs {mu2}");
    }

    #[test]
    fn inversion_recovers_gaussian() {
        let (mu, sigma) = (2.0, 0.5);
        let grid = gaussian_mgf_grid(mu, sigma, 30.0, 0.05);
        let xs = linspace(0.0, 4.0, 401);
        let got = fourier_pdf(&grid, &xs).unwrap();
        let want = gaussian_curves(mu, sigma * sigma, &xs).unwrap();
        let err = got.values().iter().zip(want.pdf.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        // the outage formula integrates from I = 0
        let below = want.cdf.points[0].1;
        let cdf = fourier_cdf(&grid, &xs).unwrap();
        let err = cdf.values().iter().zip(want.cdf.values()).map(|(a, b)| (a - (b - below)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn pure_phase_concentrates() {
        let c = 1.234;
        let grid = gaussian_mgf_grid(c, 0.0, 20.0, 0.05);
        let xs = linspace(0.0, 3.0, 301);
        let pdf = fourier_pdf(&grid, &xs);
        // a delta rings heavily; either it is flagged or the peak is right
        if let Ok(pdf) = pdf {
            let (arg, _) = pdf.points.iter().fold((0.0, f64::MIN), |a, p| if p.1 > a.1 { *p } else { a });
            assert!((arg - c).abs() <= 0.005 + 1e-12);
        }
        let values = invert(&grid, &xs, |k, x| Complex64::from_polar(1.0, -k * x)).unwrap();
        let best = values.iter().enumerate().fold(0, |b, (i, v)| if *v > values[b] { i } else { b });
        assert!((xs[best] - c).abs() <= 0.005 + 1e-12);
    }

    #[test]
    fn exact_mgf_inversion_properties() {
        let cfg = ChannelConfig::new(3, 6, 12, vec![8.8, 0.11, 0.09]).unwrap();
        let grid = mgf_grid(&cfg, Cutoff::Fixed(25.0), 0.05).unwrap();
        let mom = moments(&cfg).unwrap();
        let xs = default_grid(&mom);
        assert_eq!(xs.len(), DEFAULT_GRID_POINTS);
        let c = fourier_curves(&grid, &xs).map_err(|e| e.to_string()).unwrap();
        let pdf = c.pdf.values();
        assert!((trapezoid(&xs, &pdf) - 1.0).abs() < 1e-4);
        // cumulative trapezoid of the pdf against the direct outage formula
        let cdf = c.cdf.values();
        let mut acc = cdf[0];
        for i in 1..xs.len() {
            acc += 0.5 * (xs[i] - xs[i - 1]) * (pdf[i] + pdf[i - 1]);
            assert!((acc - cdf[i]).abs() < 1e-4, "i={i}");
        }
        let edge = fourier_cdf(&grid, &[0.0, 40.0]).unwrap();
        assert!(edge.points[0].1.abs() < 1e-4 && (edge.points[1].1 - 1.0).abs() < 1e-4);
        let sf = fourier_sf(&grid, &[0.0]).unwrap();
        assert!((sf.points[0].1 - 1.0).abs() < 1e-4);
        assert!(c.sf.values().windows(2).all(|w| w[1] <= w[0] + 1e-3));
    }

    #[test]
    fn survival_matches_simulation() {
        let cfg = ChannelConfig::new(4, 3, 10, vec![11.0, 5.0, 1.5, 0.5]).unwrap();
        let grid = mgf_grid(&cfg, Cutoff::auto(), 0.05).unwrap();
        let ens = run_ensemble(&cfg, 200_000, 17).unwrap();
        let emp = empirical_curves(&ens, 0.02).unwrap();
        let mom = moments(&cfg).unwrap();
        let (lo, hi) = (mom.mu1 - 3.0 * mom.sigma(), mom.mu1 + 3.0 * mom.sigma());
        let bulk: Vec<(f64, f64)> = emp.sf.bin_centers.iter().copied().zip(emp.sf.values.iter().copied()).filter(|p| p.0 > lo && p.0 < hi).collect();
        let xs: Vec<f64> = bulk.iter().map(|p| p.0).collect();
        let sf = fourier_sf(&grid, &xs).unwrap();
        let err = sf.values().iter().zip(&bulk).map(|(a, b)| (a - b.1).abs()).fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn residue_and_ringing_are_reported() {
        let mut grid = gaussian_mgf_grid(1.0, 0.3, 10.0, 0.05);
        grid.values[10] += Complex64::new(0.0, 1.0);
        assert!(matches!(fourier_pdf(&grid, &[1.0]), Err(Error::Inversion(_))));
        // a corrupted mid-grid pair rings far beyond the truncation level
        let mut grid = gaussian_mgf_grid(1.0, 0.5, 30.0, 1.0);
        assert_eq!(ringing_floor(&grid), RINGING_FLOOR);
        let n = grid.values.len();
        grid.values[n / 2 + 3] += 5.0;
        grid.values[n / 2 - 3] += 5.0;
        let xs = linspace(0.0, 2.0, 201);
        assert!(matches!(fourier_pdf(&grid, &xs), Err(Error::Inversion(_))));
        let short = gaussian_mgf_grid(1.0, 0.5, 5.0, 0.05);
        assert!((ringing_floor(&short) + 2.0 * (-0.125 * 25.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let c = gaussian_curves(1.0, 0.1, &[0.5, 1.0]).unwrap();
        let mut buf = Vec::new();
        c.sf.write_csv(&mut buf, &["L=25 step=0.05".to_string()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# method=gaussian kind=sf");
        assert_eq!(lines[1], "# L=25 step=0.05");
        assert_eq!(lines[2], "I,value");
        assert_eq!(lines.len(), 5);
    }
}
