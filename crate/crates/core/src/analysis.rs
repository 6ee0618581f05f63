//! Comparison metrics and experiment drivers: histogram KL divergence,
//! approximation reports, capacity sweeps and inversion robustness scans.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::distributions::{
    fourier_pdf, gaussian_curves, weibull_curves, weibull_fit, DistCurve, Method,
};
use crate::error::{Error, Result};
use crate::mgf::{ergodic_capacity, mgf_grid_with, moments_with, ChannelConfig, Cutoff, MgfEvaluator, MgfGrid, MomentSet};
pub use crate::montecarlo::DEFAULT_BIN;
use crate::montecarlo::{empirical_curves, run_ensemble, McEnsemble};

/// Reference densities below this are left out of the KL sum.
pub const DEFAULT_MASK: f64 = 1e-2;
/// Default κ step of the inversion grid.
pub const DEFAULT_KAPPA_STEP: f64 = 0.05;
/// Candidate densities are floored here inside the logarithm.
pub const DENSITY_FLOOR: f64 = 1e-300;
/// |skewness| below this suggests the Gaussian approximation.
pub const SKEW_ADVISORY_LIMIT: f64 = 0.4;

/// Masked, discretised divergence `Σ p_ref ln(p_ref / p_cand) δI`.
///
/// The sum runs only over points where the reference reaches the mask, so a
/// candidate carrying more mass there than the reference can give a slightly
/// negative value.
#[derive(Debug, Clone, PartialEq)]
pub struct KlReport {
    pub reference: String,
    pub candidate: String,
    pub dkl: f64,
    pub mask_threshold: f64,
    pub bin_width: f64,
    pub points: usize,
}

pub fn kl_divergence(reference: &DistCurve, candidate: &DistCurve, mask_threshold: f64, bin_width: f64) -> Result<KlReport> {
    if reference.points.len() != candidate.points.len() {
        return Err(Error::Dimension(format!(
            "curves have {} and {} points",
            reference.points.len(),
            candidate.points.len()
        )));
    }
    if !(bin_width > 0.0) {
        return Err(Error::Parameter(format!("bin width must be > 0, got {bin_width}")));
    }
    let mut dkl = 0.0;
    let mut points = 0;
    for (&(x, p), &(y, c)) in reference.points.iter().zip(&candidate.points) {
        if (x - y).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(Error::Dimension(format!("abscissae differ: {x} vs {y}")));
        }
        if p >= mask_threshold && p > 0.0 {
            dkl += p * (p / c.max(DENSITY_FLOOR)).ln();
            points += 1;
        }
    }
    if points == 0 {
        return Err(Error::EmptyMask(format!("no reference value reaches {mask_threshold}")));
    }
    Ok(KlReport {
        reference: reference.method.to_string(),
        candidate: candidate.method.to_string(),
        dkl: dkl * bin_width,
        mask_threshold,
        bin_width,
        points,
    })
}

/// Which moment-matched approximation the skewness points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advisory {
    Gaussian,
    Weibull,
}

impl fmt::Display for Advisory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Advisory::Gaussian => "gaussian",
            Advisory::Weibull => "weibull",
        })
    }
}

/// Heuristic only: near-zero skewness favours the Gaussian, a clearly
/// negative one the Weibull.
pub fn skew_advisory(skewness: f64) -> Advisory {
    if skewness.abs() < SKEW_ADVISORY_LIMIT {
        Advisory::Gaussian
    } else {
        Advisory::Weibull
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub mask_threshold: f64,
    pub bin_width: f64,
    pub cutoff: Cutoff,
    pub kappa_step: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            mask_threshold: DEFAULT_MASK,
            bin_width: DEFAULT_BIN,
            cutoff: Cutoff::auto(),
            kappa_step: DEFAULT_KAPPA_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationReport {
    pub cfg: ChannelConfig,
    pub moments: MomentSet,
    pub weibull_shape: f64,
    pub weibull_scale: f64,
    pub cutoff: f64,
    pub gaussian: KlReport,
    pub weibull: KlReport,
    pub fourier: KlReport,
    pub advisory: Advisory,
}

impl ApproximationReport {
    /// Method with the smallest divergence from the simulation.
    pub fn best(&self) -> Method {
        [
            (Method::Gaussian, self.gaussian.dkl),
            (Method::Weibull, self.weibull.dkl),
            (Method::Fourier, self.fourier.dkl),
        ]
        .into_iter()
        .fold((Method::Fourier, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
        .0
    }
}

/// Inverted PDF with negative ringing clipped to zero.
///
/// The clipped curve is deliberately not renormalised: the raw inversion
/// already carries unit mass, and rescaling by the extra mass of the clipped
/// tails would shift the masked divergence by about that excess, which is as
/// large as the divergences being measured.
fn fourier_on_bins(grid: &MgfGrid, xs: &[f64]) -> Result<DistCurve> {
    let mut pdf = fourier_pdf(grid, xs)?;
    for p in pdf.points.iter_mut() {
        p.1 = p.1.max(0.0);
    }
    Ok(pdf)
}

/// Gaussian, Weibull and Fourier-inverted PDFs scored against the
/// simulated histogram.
pub fn approximation_report(cfg: &ChannelConfig, mc: &McEnsemble, opts: &ReportOptions) -> Result<ApproximationReport> {
    let eval = MgfEvaluator::new(cfg)?;
    let moments = moments_with(&eval)?;
    let hist = empirical_curves(mc, opts.bin_width)?;
    let reference = DistCurve::from(&hist.pdf);
    let xs = &hist.pdf.bin_centers;

    let gauss = gaussian_curves(moments.mu1, moments.sigma2, xs)?.pdf;
    let wp = weibull_fit(moments.mu1, moments.mu2)?;
    let weib = weibull_curves(wp, xs)?.pdf;
    let grid = mgf_grid_with(&eval, opts.cutoff, opts.kappa_step)?;
    let four = fourier_on_bins(&grid, xs)?;

    let kl = |c: &DistCurve| kl_divergence(&reference, c, opts.mask_threshold, opts.bin_width);
    Ok(ApproximationReport {
        cfg: cfg.clone(),
        moments,
        weibull_shape: wp.beta_shape,
        weibull_scale: wp.lambda_scale,
        cutoff: grid.cutoff,
        gaussian: kl(&gauss)?,
        weibull: kl(&weib)?,
        fourier: kl(&four)?,
        advisory: skew_advisory(moments.skewness),
    })
}

/// Ergodic capacity against total power for a fixed allocation shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rho_db: Vec<f64>,
    pub capacity: Vec<f64>,
    pub allocation_ratio: Vec<f64>,
}

impl SweepResult {
    pub fn is_strictly_increasing(&self) -> bool {
        self.capacity.windows(2).all(|w| w[1] > w[0])
    }
}

/// `ρ = 10^{dB/10}`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Capacity for `q_j = r_j ρ` over the dB grid, with `r` the ratios scaled
/// to unit sum. Modes with a zero ratio carry no power and are dropped,
/// which leaves the channel of the remaining modes.
pub fn capacity_sweep(m: usize, n: usize, l: usize, ratios: &[f64], rho_db: &[f64]) -> Result<SweepResult> {
    if ratios.len() != m {
        return Err(Error::Config(format!("{} ratios for m = {m}", ratios.len())));
    }
    if let Some(bad) = ratios.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::Config(format!("ratios must be finite and >= 0, got {bad}")));
    }
    let total: f64 = ratios.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Config("ratios must not all be zero".into()));
    }
    if let Some(bad) = rho_db.iter().find(|x| !x.is_finite()) {
        return Err(Error::Parameter(format!("non-finite dB value {bad}")));
    }
    let allocation_ratio: Vec<f64> = ratios.iter().map(|r| r / total).collect();
    let active: Vec<f64> = allocation_ratio.iter().copied().filter(|&r| r > 0.0).collect();
    let capacity = rho_db
        .par_iter()
        .map(|&db| {
            let rho = db_to_linear(db);
            let q = active.iter().map(|r| r * rho).collect();
            ergodic_capacity(&ChannelConfig::new(active.len(), n, l, q)?)
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        rho_db: rho_db.to_vec(),
        capacity,
        allocation_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessCell {
    pub cutoff: f64,
    pub kappa_step: f64,
    pub dkl: f64,
}

/// KL of the inverted PDF against the simulation for each `(L, δκ)` pair.
pub fn robustness_scan(
    cfg: &ChannelConfig,
    settings: &[(f64, f64)],
    mc: &McEnsemble,
    mask_threshold: f64,
    bin_width: f64,
) -> Result<Vec<RobustnessCell>> {
    let grids = scan_grids(cfg, settings)?;
    scan_with_grids(&grids, mc, mask_threshold, bin_width)
}

fn scan_grids(cfg: &ChannelConfig, settings: &[(f64, f64)]) -> Result<Vec<MgfGrid>> {
    let eval = MgfEvaluator::new(cfg)?;
    settings
        .iter()
        .map(|&(cutoff, step)| mgf_grid_with(&eval, Cutoff::Fixed(cutoff), step))
        .collect()
}

fn scan_with_grids(grids: &[MgfGrid], mc: &McEnsemble, mask_threshold: f64, bin_width: f64) -> Result<Vec<RobustnessCell>> {
    let hist = empirical_curves(mc, bin_width)?;
    let reference = DistCurve::from(&hist.pdf);
    grids
        .iter()
        .map(|grid| {
            let pdf = fourier_on_bins(grid, &hist.pdf.bin_centers)?;
            Ok(RobustnessCell {
                cutoff: grid.cutoff,
                kappa_step: grid.step,
                dkl: kl_divergence(&reference, &pdf, mask_threshold, bin_width)?.dkl,
            })
        })
        .collect()
}

/// Mean and spread of one scan cell over independent ensembles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicatedCell {
    pub cutoff: f64,
    pub kappa_step: f64,
    pub mean: f64,
    pub std_err: f64,
    pub min: f64,
    pub max: f64,
}

/// [`robustness_scan`] repeated on `replicates` ensembles of `count` samples
/// with seeds `seed, seed + 1, ...`.
///
/// A single masked divergence at the 1e-4 level is dominated by how much
/// simulated mass happens to fall inside the mask, which can even make it
/// negative; the replicate mean estimates its expectation instead.
pub fn replicated_robustness(
    cfg: &ChannelConfig,
    settings: &[(f64, f64)],
    count: usize,
    seed: u64,
    replicates: usize,
    mask_threshold: f64,
    bin_width: f64,
) -> Result<Vec<ReplicatedCell>> {
    if replicates == 0 {
        return Err(Error::Parameter("need at least one replicate".into()));
    }
    let grids = scan_grids(cfg, settings)?;
    let runs: Vec<Vec<RobustnessCell>> = (0..replicates as u64)
        .map(|r| {
            let mc = run_ensemble(cfg, count, seed.wrapping_add(r))?;
            scan_with_grids(&grids, &mc, mask_threshold, bin_width)
        })
        .collect::<Result<_>>()?;
    let k = replicates as f64;
    Ok((0..settings.len())
        .map(|i| {
            let vals: Vec<f64> = runs.iter().map(|run| run[i].dkl).collect();
            let mean = vals.iter().sum::<f64>() / k;
            let var = if replicates > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            ReplicatedCell {
                cutoff: settings[i].0,
                kappa_step: settings[i].1,
                mean,
                std_err: (var / k).sqrt(),
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect())
}

/// Largest over smallest positive KL in a scan.
pub fn robustness_spread(cells: &[RobustnessCell]) -> f64 {
    let (lo, hi) = cells.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c.dkl), hi.max(c.dkl)));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// A labelled configuration from the published study.
#[derive(Debug, Clone, PartialEq)]
pub struct RefConfig {
    pub label: &'static str,
    pub cfg: ChannelConfig,
}

const POWERS_M_LE_N: [f64; 7] = [8.80, 0.11, 0.09, 0.55, 1.20, 0.75, 0.28];
const POWERS_M_GT_N: [f64; 7] = [11.00, 5.00, 1.50, 0.50, 0.75, 1.10, 3.30];

fn from_set(m: usize, n: usize, l: usize, set: &[f64; 7]) -> ChannelConfig {
    ChannelConfig::new(m, n, l, set[..m].to_vec()).expect("reference configuration is valid")
}

/// Square-or-wide family (m <= n), powers drawn from a fixed set.
pub fn wide_family() -> Vec<RefConfig> {
    vec![
        RefConfig { label: "wide-3x6-l12", cfg: from_set(3, 6, 12, &POWERS_M_LE_N) },
        RefConfig { label: "wide-5x7-l16", cfg: from_set(5, 7, 16, &POWERS_M_LE_N) },
        RefConfig { label: "wide-7x8-l17", cfg: from_set(7, 8, 17, &POWERS_M_LE_N) },
    ]
}

/// Tall family (m > n), powers drawn from a fixed set.
pub fn tall_family() -> Vec<RefConfig> {
    vec![
        RefConfig { label: "tall-2x1-l6", cfg: from_set(2, 1, 6, &POWERS_M_GT_N) },
        RefConfig { label: "tall-4x3-l10", cfg: from_set(4, 3, 10, &POWERS_M_GT_N) },
        RefConfig { label: "tall-7x5-l14", cfg: from_set(7, 5, 14, &POWERS_M_GT_N) },
    ]
}

/// Configuration used to display the MGF itself.
pub fn mgf_display_config() -> RefConfig {
    RefConfig {
        label: "mgf-display-3x6-l12",
        cfg: ChannelConfig::new(3, 6, 12, vec![6.80, 1.50, 0.70]).expect("valid"),
    }
}

/// The tall-family powers with l = 12, used for the inversion robustness
/// scan alongside l = 10 (both are reported; sources disagree on l).
pub fn tall_robustness_config() -> RefConfig {
    RefConfig {
        label: "tall-4x3-l12",
        cfg: from_set(4, 3, 12, &POWERS_M_GT_N),
    }
}

/// All eight distinct configurations.
pub fn reference_configs() -> Vec<RefConfig> {
    let mut all = vec![mgf_display_config()];
    all.extend(wide_family());
    all.extend(tall_family());
    all.push(tall_robustness_config());
    all
}

/// Cut-off/step pairs varied in the published robustness study, wide case.
pub const WIDE_SCAN: [(f64, f64); 6] = [(25.0, 0.05), (25.0, 0.5), (25.0, 1.0), (22.0, 0.05), (28.0, 0.05), (34.0, 0.05)];
/// Same for the tall case.
pub const TALL_SCAN: [(f64, f64); 6] = [(15.0, 0.05), (15.0, 0.5), (15.0, 1.0), (8.0, 0.05), (14.0, 0.05), (20.0, 0.05)];

/// Allocation shapes of the capacity comparison, unequal first.
pub fn sweep_ratios(m: usize) -> Option<Vec<Vec<f64>>> {
    match m {
        3 => Some(vec![vec![0.995, 0.003, 0.002], vec![0.850, 0.100, 0.050], vec![1.0, 1.0, 1.0]]),
        4 => Some(vec![
            vec![1.170, 0.015, 0.010, 0.005],
            vec![0.900, 0.100, 0.095, 0.105],
            vec![1.0, 1.0, 1.0, 1.0],
        ]),
        _ => None,
    }
}

/// `m,n,l,dkl_gaussian,dkl_weibull,dkl_fourier` rows.
pub fn write_report_table<W: Write>(mut w: W, rows: &[ApproximationReport]) -> io::Result<()> {
    writeln!(w, "m,n,l,dkl_gaussian,dkl_weibull,dkl_fourier,skewness,advisory")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.cfg.m(),
            r.cfg.n(),
            r.cfg.l(),
            r.gaussian.dkl,
            r.weibull.dkl,
            r.fourier.dkl,
            r.moments.skewness,
            r.advisory
        )?;
    }
    Ok(())
}

/// `L,dkappa,dkl` rows.
pub fn write_robustness_table<W: Write>(mut w: W, cells: &[RobustnessCell]) -> io::Result<()> {
    writeln!(w, "L,dkappa,dkl")?;
    for c in cells {
        writeln!(w, "{},{},{}", c.cutoff, c.kappa_step, c.dkl)?;
    }
    Ok(())
}

/// `rho_db,capacity_nats` rows preceded by a ratio comment line.
pub fn write_sweep<W: Write>(mut w: W, s: &SweepResult) -> io::Result<()> {
    let ratios: Vec<String> = s.allocation_ratio.iter().map(|r| r.to_string()).collect();
    writeln!(w, "# ratios={}", ratios.join(":"))?;
    writeln!(w, "rho_db,capacity_nats")?;
    for (d, c) in s.rho_db.iter().zip(&s.capacity) {
        writeln!(w, "{d},{c}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::linspace;
    use crate::mgf::moments;
    use crate::montecarlo::{run_ensemble, CurveKind};

    fn curve(xs: &[f64], f: impl Fn(f64) -> f64, method: Method) -> DistCurve {
        DistCurve {
            points: xs.iter().map(|&x| (x, f(x))).collect(),
            kind: CurveKind::Pdf,
            method,
        }
    }

    fn normal(mu: f64) -> impl Fn(f64) -> f64 {
        move |x| (-(x - mu).powi(2) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn identical_curves_give_zero() {
        let xs = linspace(-4.0, 4.0, 401);
        let a = curve(&xs, normal(0.0), Method::MonteCarlo);
        let r = kl_divergence(&a, &a, DEFAULT_MASK, 0.02).unwrap();
        assert_eq!(r.dkl, 0.0);
        assert!(r.points > 0 && r.points < 401);
    }

    #[test]
    fn shifted_gaussians_match_closed_form() {
        let xs = linspace(-6.0, 6.0, 601);
        let dx = xs[1] - xs[0];
        let p = curve(&xs, normal(0.0), Method::MonteCarlo);
        let q = curve(&xs, normal(0.1), Method::Gaussian);
        let r = kl_divergence(&p, &q, DEFAULT_MASK, dx).unwrap();
        // ln(p/q) = (0.01 - 0.2x)/2 for unit variances
        let want: f64 = xs
            .iter()
            .filter(|&&x| normal(0.0)(x) >= DEFAULT_MASK)
            .map(|&x| normal(0.0)(x) * (0.01 - 0.2 * x) / 2.0)
            .sum::<f64>()
            * dx;
        assert!((r.dkl - want).abs() < 1e-4);
        // the mask drops little mass here, so the continuous value 0.005 is close
        assert!((r.dkl - 0.005).abs() < 1e-3);
    }

    #[test]
    fn kl_errors() {
        let xs = linspace(0.0, 1.0, 11);
        let a = curve(&xs, |_| 1e-3, Method::MonteCarlo);
        assert!(matches!(kl_divergence(&a, &a, DEFAULT_MASK, 0.1), Err(Error::EmptyMask(_))));
        let b = curve(&xs[1..], |_| 1.0, Method::Gaussian);
        assert!(kl_divergence(&a, &b, DEFAULT_MASK, 0.1).is_err());
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.01).collect();
        let c = curve(&shifted, |_| 1.0, Method::Gaussian);
        assert!(kl_divergence(&a, &c, 0.0, 0.1).is_err());
    }

    #[test]
    fn negative_candidate_is_floored() {
        let xs = linspace(0.0, 1.0, 11);
        let a = curve(&xs, |_| 1.0, Method::MonteCarlo);
        let b = curve(&xs, |x| if x < 0.05 { -1.0 } else { 1.0 }, Method::Fourier);
        let r = kl_divergence(&a, &b, DEFAULT_MASK, 0.1).unwrap();
        assert!((r.dkl - 0.1 * (1.0 / DENSITY_FLOOR).ln()).abs() < 1e-9);
    }

    #[test]
    fn advisory_threshold() {
        assert_eq!(skew_advisory(-0.62117), Advisory::Weibull);
        assert_eq!(skew_advisory(-0.05385), Advisory::Gaussian);
    }

    #[test]
    fn reference_set() {
        let all = reference_configs();
        assert_eq!(all.len(), 8);
        let mut labels: Vec<&str> = all.iter().map(|r| r.label).collect();
        labels.dedup();
        assert_eq!(labels.len(), 8);
        assert_eq!(tall_family()[0].cfg.q(), &[11.0, 5.0]);
        assert_eq!(wide_family()[2].cfg.q().len(), 7);
    }

    #[test]
    fn sweep_basics() {
        let s = capacity_sweep(3, 6, 12, &[0.995, 0.003, 0.002], &[-60.0, 0.0, 10.0]).unwrap();
        assert!((s.allocation_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.capacity[0] < 1e-5 && s.capacity[0] >= 0.0);
        assert!(s.is_strictly_increasing());
        let ratio = capacity_sweep(4, 3, 10, &[1.170, 0.015, 0.010, 0.005], &[0.0]).unwrap();
        assert!((ratio.allocation_ratio[0] - 0.975).abs() < 1e-12);
        // a zero ratio is the same as one fewer transmit mode
        let dropped = capacity_sweep(3, 6, 12, &[0.5, 0.5, 0.0], &[5.0]).unwrap();
        let direct = ergodic_capacity(&ChannelConfig::new(2, 6, 12, vec![db_to_linear(5.0) / 2.0; 2]).unwrap()).unwrap();
        assert!((dropped.capacity[0] - direct).abs() < 1e-12);
        assert!(capacity_sweep(3, 6, 12, &[1.0, 0.0], &[0.0]).is_err());
        assert!(capacity_sweep(3, 6, 12, &[0.0; 3], &[0.0]).is_err());
    }

    #[test]
    fn report_on_small_ensemble() {
        let cfg = tall_family()[1].cfg.clone();
        let mc = run_ensemble(&cfg, 50_000, 3).unwrap();
        let rep = approximation_report(&cfg, &mc, &ReportOptions::default()).unwrap();
        let mom = moments(&cfg).unwrap();
        assert_eq!(rep.moments, mom);
        // the exact inversion should beat both moment fits
        assert!(rep.fourier.dkl < rep.gaussian.dkl.min(rep.weibull.dkl), "{rep:?}");
        assert_eq!(rep.best(), Method::Fourier);
        assert_eq!(rep.advisory, Advisory::Gaussian);
        let mut buf = Vec::new();
        write_report_table(&mut buf, &[rep]).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().nth(1).unwrap().starts_with("4,3,10,"));
    }
}
