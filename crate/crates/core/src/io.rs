//! File output: JSON documents, per-checkpoint CSV and plot-ready data.
//!
//! Plot files are data only. Column legends:
//!
//! * `fluct_hist.csv`: `bin_lo,bin_hi,count,density,normal_density`. Histogram of
//!   the scaled fluctuation at the horizon against the limiting Gaussian density.
//! * `asclt_overlay.csv`: `x,asclt_mean,asclt_path0,asclt_path0_literal,normal_cdf`.
//!   Log-averaged empirical CDFs against the limiting Gaussian CDF.
//! * `cn_trace.csv`: `n,cn_over_n,limit`. `C_n / n` along replication 0.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ensemble::{EnsembleSummary, PathStats};
use crate::error::{OdlError, Result};
use crate::harness::VerificationReport;
use crate::special::normal_cdf;

/// Creates `dir` if needed and opens `dir/name` for buffered writing.
pub fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir).map_err(|e| OdlError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| OdlError::Io(format!("{}: {e}", path.display())))?;
    Ok((path, BufWriter::new(f)))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}

/// Runs `body` against a fresh buffered file and flushes it.
pub fn write_with<F>(dir: &Path, name: &str, body: F) -> Result<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let (path, mut w) = create(dir, name)?;
    body(&mut w)?;
    w.flush()?;
    Ok(path)
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// `n,stat,value,stderr`; `stderr` is empty where none applies.
pub fn write_checkpoint_csv<W: Write>(summary: &EnsembleSummary, mut w: W) -> Result<()> {
    writeln!(w, "n,stat,value,stderr")?;
    for c in &summary.checkpoints {
        let rows: [(&str, f64, f64); 10] = [
            ("count_a_mean", c.count_a.mean, c.count_a.stderr),
            ("count_a_var", c.count_a.variance, f64::NAN),
            ("scaled_mean", c.scaled.mean, c.scaled.stderr),
            ("scaled_var", c.scaled.variance, f64::NAN),
            ("scaled_pair_cov", c.scaled_pair_cov, f64::NAN),
            ("scaled_second", c.scaled_second, f64::NAN),
            ("z_mean", c.z.mean, c.z.stderr),
            ("cn_ratio_mean", c.cn_ratio.mean, c.cn_ratio.stderr),
            ("cn_scaled_var", c.cn_scaled.variance, f64::NAN),
            ("cn_corr", c.cn_corr, f64::NAN),
        ];
        for (stat, v, se) in rows {
            writeln!(w, "{},{stat},{},{}", c.n, num(v), num(se))?;
        }
    }
    Ok(())
}

/// One line per report row: `name,n,theoretical,empirical,tolerance,tolerance_kind,stderr,passed,enforced`.
pub fn write_report_csv<W: Write>(report: &VerificationReport, mut w: W) -> Result<()> {
    writeln!(w, "name,n,theoretical,empirical,tolerance,tolerance_kind,stderr,passed,enforced")?;
    for r in &report.rows {
        let kind = serde_json::to_value(r.tolerance_kind)?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.name,
            r.n,
            num(r.theoretical),
            num(r.empirical),
            num(r.tolerance),
            kind.as_str().unwrap_or_default(),
            r.stderr.map(num).unwrap_or_default(),
            r.passed,
            r.enforced
        )?;
    }
    Ok(())
}

/// Equal-width histogram over `[-span, span]` standard deviations; values
/// outside the range are dropped from the counts but kept in the density
/// normalisation.
pub fn write_fluct_histogram<W: Write>(values: &[f64], var: f64, bins: usize, span: f64, mut w: W) -> Result<()> {
    writeln!(w, "bin_lo,bin_hi,count,density,normal_density")?;
    if values.is_empty() || bins == 0 {
        return Ok(());
    }
    let sd = if var > 0.0 {
        var.sqrt()
    } else {
        crate::stats::two_pass_variance(values).sqrt().max(1e-300)
    };
    let (lo, hi) = (-span * sd, span * sd);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        if v >= lo && v < hi {
            counts[((v - lo) / width) as usize] += 1;
        }
    }
    let total = values.len() as f64;
    for (i, &c) in counts.iter().enumerate() {
        let a = lo + i as f64 * width;
        let b = a + width;
        let mid = 0.5 * (a + b);
        let normal = if var > 0.0 {
            (-0.5 * mid * mid / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        } else {
            f64::NAN
        };
        writeln!(w, "{},{},{c},{},{}", num(a), num(b), num(c as f64 / (total * width)), num(normal))?;
    }
    Ok(())
}

pub fn write_asclt_overlay<W: Write>(ps: &PathStats, var: f64, mut w: W) -> Result<()> {
    writeln!(w, "x,asclt_mean,asclt_path0,asclt_path0_literal,normal_cdf")?;
    for (i, &x) in ps.x_grid.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            num(x),
            num(ps.asclt_cdf_mean[i]),
            num(ps.asclt_cdf[i]),
            num(ps.asclt_cdf_literal[i]),
            num(normal_cdf(x, var))
        )?;
    }
    Ok(())
}

pub fn write_cn_trace<W: Write>(trace: &[(u64, f64)], limit: f64, mut w: W) -> Result<()> {
    writeln!(w, "n,cn_over_n,limit")?;
    for &(n, v) in trace {
        writeln!(w, "{n},{},{}", num(v), num(limit))?;
    }
    Ok(())
}
