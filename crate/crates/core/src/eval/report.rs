use std::io::Write;

use super::config::ForecastMethod;
use crate::dynamics::fmt_f64;
use crate::error::Result;

/// SRMSE of one method, uncertainty level and variable at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SrmseRow {
    pub method: ForecastMethod,
    /// `None` for a method without parameters when no levels are configured.
    pub uncertainty_pct: Option<f64>,
    pub variable: String,
    /// Steps beyond the end of the training data, from 1.
    pub horizon_step: usize,
    pub srmse_mean: f64,
    pub srmse_stderr: f64,
}

/// Spread of one parameter's final estimates over realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRow {
    pub method: ForecastMethod,
    pub uncertainty_pct: Option<f64>,
    pub param: String,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub count: usize,
}

/// Success and warning counts of one method at one uncertainty level.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub method: ForecastMethod,
    pub uncertainty_pct: Option<f64>,
    pub succeeded: usize,
    pub failed: usize,
    /// Steps that fell back to persistence for lack of neighbors.
    pub warnings: usize,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastReport {
    pub realizations: usize,
    pub horizon: usize,
    pub h: f64,
    pub rows: Vec<SrmseRow>,
    pub params: Vec<ParamRow>,
    pub cells: Vec<CellSummary>,
}

fn level(u: Option<f64>) -> String {
    u.map(|v| v.to_string()).unwrap_or_else(|| "NA".into())
}

impl ForecastReport {
    /// SRMSE means over horizons 1..=T_F.
    pub fn curve(&self, method: ForecastMethod, uncertainty_pct: Option<f64>, variable: &str) -> Option<Vec<f64>> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.uncertainty_pct == uncertainty_pct && r.variable == variable)
            .map(|r| r.srmse_mean)
            .collect();
        (!v.is_empty()).then_some(v)
    }

    pub fn param(&self, method: ForecastMethod, uncertainty_pct: Option<f64>, name: &str) -> Option<&ParamRow> {
        self.params
            .iter()
            .find(|p| p.method == method && p.uncertainty_pct == uncertainty_pct && p.param == name)
    }

    /// `method,uncertainty,variable,horizon_step,srmse_mean,srmse_stderr`.
    pub fn write_srmse_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method,uncertainty,variable,horizon_step,srmse_mean,srmse_stderr")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.method,
                level(r.uncertainty_pct),
                r.variable,
                r.horizon_step,
                fmt_f64(r.srmse_mean),
                fmt_f64(r.srmse_stderr)
            )?;
        }
        Ok(())
    }

    /// `method,uncertainty,param,mean,std`.
    pub fn write_params_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method,uncertainty,param,mean,std")?;
        for p in &self.params {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.method,
                level(p.uncertainty_pct),
                p.param,
                fmt_f64(p.mean),
                fmt_f64(p.std)
            )?;
        }
        Ok(())
    }

    /// `method,uncertainty,succeeded,failed,warnings`.
    pub fn write_cells_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method,uncertainty,succeeded,failed,warnings")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{}",
                c.method,
                level(c.uncertainty_pct),
                c.succeeded,
                c.failed,
                c.warnings
            )?;
        }
        Ok(())
    }
}
