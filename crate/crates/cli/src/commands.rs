//! Subcommand bodies. Each appends CSV rows to the output buffer.

use std::f64::consts::LN_2;
use std::io::Write;

use jacobi_mimo::analysis::{
    approximation_report, capacity_sweep, replicated_robustness, robustness_scan, tall_family, wide_family,
    write_report_table, write_robustness_table, write_sweep, TALL_SCAN, WIDE_SCAN,
};
use jacobi_mimo::distributions::{
    default_grid, fourier_cdf, fourier_pdf, fourier_sf, gaussian_curves, linspace, weibull_curves, weibull_fit,
    CurveSet, DistCurve,
};
use jacobi_mimo::mgf::{ergodic_capacity, high_snr_capacity, mgf_grid_with, moments_with, MgfEvaluator};
use jacobi_mimo::montecarlo::{empirical_curves, run_ensemble};

use crate::config::{RunConfig, parse_list};
use crate::manifest::cutoff_label;
use crate::{CliError, FamilyArg, KindArg, MethodArg};

pub fn mgf(rc: &RunConfig, out: &mut Vec<u8>) -> Result<(), CliError> {
    let eval = MgfEvaluator::new(rc.channel()?)?;
    let grid = mgf_grid_with(&eval, rc.cutoff, rc.dkappa)?;
    writeln!(out, "# cutoff_used={} points={}", grid.cutoff, grid.len())?;
    writeln!(out, "kappa,re_M,im_M")?;
    for (k, v) in grid.kappas.iter().zip(&grid.values) {
        writeln!(out, "{k},{},{}", v.re, v.im)?;
    }
    Ok(())
}

pub fn moments(rc: &RunConfig, out: &mut Vec<u8>) -> Result<(), CliError> {
    let m = moments_with(&MgfEvaluator::new(rc.channel()?)?)?;
    if rc.bits {
        writeln!(out, "mu1,sigma2,skewness,capacity_nats,capacity_bits")?;
        writeln!(out, "{},{},{},{},{}", m.mu1, m.sigma2, m.skewness, m.mu1, m.mu1 / LN_2)?;
    } else {
        writeln!(out, "mu1,sigma2,skewness,capacity_nats")?;
        writeln!(out, "{},{},{},{}", m.mu1, m.sigma2, m.skewness, m.mu1)?;
    }
    Ok(())
}

pub fn capacity(rc: &RunConfig, out: &mut Vec<u8>) -> Result<(), CliError> {
    let cfg = rc.channel()?;
    let c = ergodic_capacity(cfg)?;
    let mut header = vec!["rho", "capacity_nats"];
    let mut row = vec![cfg.rho(), c];
    if rc.bits {
        header.push("capacity_bits");
        row.push(c / LN_2);
    }
    // The asymptotic formula only exists for equal power with m < n.
    if cfg.is_equal_power() && cfg.m() < cfg.n() {
        header.push("high_snr_nats");
        row.push(high_snr_capacity(cfg)?);
    }
    writeln!(out, "{}", header.join(","))?;
    let row: Vec<String> = row.iter().map(f64::to_string).collect();
    writeln!(out, "{}", row.join(","))?;
    Ok(())
}

pub fn dist(
    rc: &RunConfig,
    method: MethodArg,
    kind: KindArg,
    points: usize,
    range: (Option<f64>, Option<f64>),
    bin: f64,
    out: &mut Vec<u8>,
) -> Result<(), CliError> {
    let cfg = rc.channel()?;
    let pick = |set: CurveSet| match kind {
        KindArg::Pdf => set.pdf,
        KindArg::Cdf => set.cdf,
        KindArg::Sf => set.sf,
    };
    let mut meta = vec![];
    let curve: DistCurve = if let MethodArg::Mc = method {
        let ens = run_ensemble(cfg, rc.samples, rc.seed)?;
        let emp = empirical_curves(&ens, bin)?;
        meta.push(format!("bin_width={bin}"));
        DistCurve::from(match kind {
            KindArg::Pdf => &emp.pdf,
            KindArg::Cdf => &emp.cdf,
            KindArg::Sf => &emp.sf,
        })
    } else {
        if points < 2 {
            return Err(CliError::Config(format!("points must be >= 2, got {points}")));
        }
        let eval = MgfEvaluator::new(cfg)?;
        let mom = moments_with(&eval)?;
        let default = default_grid(&mom);
        let lo = range.0.unwrap_or(default[0]);
        let hi = range.1.unwrap_or(default[default.len() - 1]);
        if hi <= lo || hi.is_nan() || lo.is_nan() {
            return Err(CliError::Config(format!("grid needs from < to, got [{lo}, {hi}]")));
        }
        let xs = linspace(lo, hi, points);
        match method {
            MethodArg::Gaussian => pick(gaussian_curves(mom.mu1, mom.sigma2, &xs)?),
            MethodArg::Weibull => {
                let wp = weibull_fit(mom.mu1, mom.mu2)?;
                meta.push(format!("weibull_shape={} weibull_scale={}", wp.beta_shape, wp.lambda_scale));
                pick(weibull_curves(wp, &xs)?)
            }
            MethodArg::Fourier => {
                let grid = mgf_grid_with(&eval, rc.cutoff, rc.dkappa)?;
                meta.push(format!("cutoff_used={} dkappa={}", grid.cutoff, grid.step));
                match kind {
                    KindArg::Pdf => fourier_pdf(&grid, &xs)?,
                    KindArg::Cdf => fourier_cdf(&grid, &xs)?,
                    KindArg::Sf => fourier_sf(&grid, &xs)?,
                }
            }
            MethodArg::Mc => unreachable!("handled above"),
        }
    };
    curve.write_csv(&mut *out, &meta)?;
    Ok(())
}

pub fn compare(
    rc: &RunConfig,
    family: Option<FamilyArg>,
    mask: f64,
    bin: f64,
    out: &mut Vec<u8>,
) -> Result<(), CliError> {
    let configs = match family {
        Some(FamilyArg::Wide) => wide_family().into_iter().map(|r| r.cfg).collect(),
        Some(FamilyArg::Tall) => tall_family().into_iter().map(|r| r.cfg).collect(),
        None => vec![rc.channel()?.clone()],
    };
    let opts = jacobi_mimo::analysis::ReportOptions {
        mask_threshold: mask,
        bin_width: bin,
        cutoff: rc.cutoff,
        kappa_step: rc.dkappa,
    };
    let rows = configs
        .iter()
        .map(|cfg| {
            let ens = run_ensemble(cfg, rc.samples, rc.seed)?;
            approximation_report(cfg, &ens, &opts)
        })
        .collect::<jacobi_mimo::Result<Vec<_>>>()?;
    writeln!(out, "# mask={mask} bin_width={bin} cutoff={}", cutoff_label(rc.cutoff))?;
    write_report_table(&mut *out, &rows)?;
    Ok(())
}

pub fn sweep(
    rc: &RunConfig,
    ratios: Option<&[f64]>,
    db: (f64, f64, f64),
    out: &mut Vec<u8>,
) -> Result<(), CliError> {
    let cfg = rc.channel()?;
    let (lo, hi, step) = db;
    if !(step > 0.0 && hi >= lo) {
        return Err(CliError::Config(format!("dB grid needs step > 0 and max >= min, got {lo}..{hi} by {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|i| lo + i as f64 * step).collect();
    let ratios = ratios.unwrap_or(cfg.q());
    let s = capacity_sweep(cfg.m(), cfg.n(), cfg.l(), ratios, &grid)?;
    if rc.bits {
        let r: Vec<String> = s.allocation_ratio.iter().map(f64::to_string).collect();
        writeln!(out, "# ratios={}", r.join(":"))?;
        writeln!(out, "rho_db,capacity_nats,capacity_bits")?;
        for (d, c) in s.rho_db.iter().zip(&s.capacity) {
            writeln!(out, "{d},{c},{}", c / LN_2)?;
        }
    } else {
        write_sweep(&mut *out, &s)?;
    }
    Ok(())
}

pub fn scan(
    rc: &RunConfig,
    settings: Option<&[String]>,
    replicates: usize,
    mask: f64,
    bin: f64,
    out: &mut Vec<u8>,
) -> Result<(), CliError> {
    let cfg = rc.channel()?;
    let settings: Vec<(f64, f64)> = match settings {
        Some(list) => list.iter().map(|s| parse_setting(s)).collect::<Result<_, _>>()?,
        None if cfg.m() <= cfg.n() => WIDE_SCAN.to_vec(),
        None => TALL_SCAN.to_vec(),
    };
    writeln!(out, "# mask={mask} bin_width={bin} replicates={replicates}")?;
    if replicates <= 1 {
        let ens = run_ensemble(cfg, rc.samples, rc.seed)?;
        write_robustness_table(&mut *out, &robustness_scan(cfg, &settings, &ens, mask, bin)?)?;
        return Ok(());
    }
    let cells = replicated_robustness(cfg, &settings, rc.samples, rc.seed, replicates, mask, bin)?;
    writeln!(out, "L,dkappa,dkl_mean,std_err,min,max")?;
    for c in &cells {
        writeln!(out, "{},{},{},{},{},{}", c.cutoff, c.kappa_step, c.mean, c.std_err, c.min, c.max)?;
    }
    Ok(())
}

fn parse_setting(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Config(format!("setting `{s}` is not of the form L:dkappa"));
    let (l, dk) = s.split_once(':').ok_or_else(bad)?;
    let v = parse_list(&format!("{l},{dk}")).map_err(|_| bad())?;
    if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok((v[0], v[1]))
    } else {
        Err(bad())
    }
}
