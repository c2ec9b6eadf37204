//! Fixed CSV schemas for simulation and analysis artifacts.
//!
//! * `anchors.csv`    — `particle,k,t,x_1..x_d`
//! * `snapshots.csv`  — `t,n_points,mean_1..mean_d,second_raw_moment,w2_to_oracle,jb_stat,jb_reject`
//!   (the last three cells are empty when not computed)
//! * `rates.csv`      — `q,delta,t,rmse,log2_rmse`
//! * `fit.csv`        — `t,slope,intercept,r2`
//! * `density.csv`    — `x,density,label`
//! * `cost.csv`       — `scheme,t,tau,delta,N,exact,paper_order`
//! * `assumptions.csv`— `inequality,max_violation,satisfied,witness`
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! identical runs produce byte-identical files.

use crate::analysis::{CostReport, DensityCurve, RateFit, RmseTable};
use crate::checks::AssumptionReport;
use crate::error::Result;
use crate::schemes::SimOutput;
use std::io::Write;

pub fn write_anchors_csv<W: Write>(output: &SimOutput, out: &mut W) -> Result<()> {
    write!(out, "particle,k,t")?;
    for j in 1..=output.state_dim {
        write!(out, ",x_{j}")?;
    }
    writeln!(out)?;
    let tau = output.grid.tau();
    for particle in 0..output.n_particles() {
        for k in 0..output.n_anchors() {
            write!(out, "{particle},{k},{}", k as f64 * tau)?;
            for x in output.anchor(particle, k) {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn write_snapshots_csv<W: Write>(output: &SimOutput, out: &mut W) -> Result<()> {
    write!(out, "t,n_points")?;
    for j in 1..=output.state_dim {
        write!(out, ",mean_{j}")?;
    }
    writeln!(out, ",second_raw_moment,w2_to_oracle,jb_stat,jb_reject")?;
    for snap in &output.snapshots {
        write!(out, "{},{}", snap.t, snap.measure.len())?;
        for m in &snap.mean {
            write!(out, ",{m}")?;
        }
        write!(out, ",{}", snap.second_raw_moment)?;
        match snap.w2_to_oracle {
            Some(w) => write!(out, ",{w}")?,
            None => write!(out, ",")?,
        }
        match snap.jb_stat {
            Some(s) => write!(out, ",{s}")?,
            None => write!(out, ",")?,
        }
        match snap.jb_reject {
            Some(r) => writeln!(out, ",{r}")?,
            None => writeln!(out, ",")?,
        }
    }
    Ok(())
}

pub fn write_rates_csv<W: Write>(table: &RmseTable, out: &mut W) -> Result<()> {
    writeln!(out, "q,delta,t,rmse,log2_rmse")?;
    for row in &table.rows {
        let delta = row.grid.delta();
        let q = -delta.log2();
        for (i, &t) in table.eval_times.iter().enumerate() {
            let rmse = row.rmse[i];
            writeln!(out, "{q},{delta},{t},{rmse},{}", rmse.log2())?;
        }
    }
    Ok(())
}

pub fn write_fit_csv<W: Write>(fits: &[(f64, RateFit)], out: &mut W) -> Result<()> {
    writeln!(out, "t,slope,intercept,r2")?;
    for (t, fit) in fits {
        writeln!(out, "{t},{},{},{}", fit.slope, fit.intercept, fit.r_squared)?;
    }
    Ok(())
}

pub fn write_density_csv<W: Write>(curves: &[(String, DensityCurve)], out: &mut W) -> Result<()> {
    writeln!(out, "x,density,label")?;
    for (label, curve) in curves {
        for (x, d) in curve.xs.iter().zip(&curve.densities) {
            writeln!(out, "{x},{d},{label}")?;
        }
    }
    Ok(())
}

pub fn write_cost_csv<W: Write>(reports: &[CostReport], out: &mut W) -> Result<()> {
    writeln!(out, "scheme,t,tau,delta,N,exact,paper_order")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scheme, r.t, r.tau, r.delta, r.n_particles, r.exact_coeff_evals, r.paper_order
        )?;
    }
    Ok(())
}

pub fn write_assumptions_csv<W: Write>(report: &AssumptionReport, out: &mut W) -> Result<()> {
    writeln!(out, "inequality,max_violation,satisfied,witness")?;
    for (name, stat) in report.iter() {
        writeln!(
            out,
            "{name},{},{},\"{}\"",
            stat.max_violation,
            stat.satisfied(),
            stat.witness.replace('"', "'")
        )?;
    }
    Ok(())
}
