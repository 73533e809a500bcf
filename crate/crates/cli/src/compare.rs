//! Side-by-side tables of audit reports made under one decision policy.

use std::path::Path;

use rankaudit::audit::AuditReport;
use serde::Serialize;

use crate::error::{CliError, CliResult, InModule};

/// Largest spread of realized positive decision rates that still counts
/// as a controlled comparison.
pub const PDR_SPREAD_LIMIT: f64 = 0.05;

pub const UNCONTROLLED_CAVEAT: &str = "these rows were decided at different positive decision rates; \
fairness and accuracy metrics shift with the selection rate itself, so their differences mix the effect \
of the method with the effect of selecting more or fewer instances. Compare under a fixed-rate policy, \
or pass --allow-uncontrolled to tabulate anyway.";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub report: String,
    pub dataset: String,
    pub policy: String,
    pub method: String,
    pub decision: String,
    pub auc: f64,
    pub acc: f64,
    pub spd: f64,
    pub eod: f64,
    pub pdr: f64,
    pub tau_overall: f64,
    pub tau_protected: f64,
    pub tau_privileged: f64,
    /// Differences to the same method in the first report.
    pub delta_auc: Option<f64>,
    pub delta_acc: Option<f64>,
    pub delta_spd: Option<f64>,
    pub delta_eod: Option<f64>,
    pub delta_pdr: Option<f64>,
    pub delta_tau_overall: Option<f64>,
    pub warning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub policy: String,
    pub pdr_min: f64,
    pub pdr_max: f64,
    pub controlled: bool,
    pub caveat: Option<String>,
    pub rows: Vec<CompareRow>,
}

pub fn load_report(path: &Path) -> CliResult<AuditReport<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    AuditReport::from_json(&text).in_module("audit")
}

/// Juxtapose `reports` (name, report). Fails with `PolicyMismatch` when the
/// policy labels differ and with `Uncontrolled` when realized rates spread
/// beyond [`PDR_SPREAD_LIMIT`] and `allow_uncontrolled` is off.
pub fn compare(reports: &[(String, AuditReport<f64>)], allow_uncontrolled: bool) -> CliResult<Comparison> {
    if reports.len() < 2 {
        return Err(CliError::Config(format!("compare needs at least 2 reports, got {}", reports.len())));
    }
    let policy = reports[0].1.policy_label.clone();
    if let Some((name, r)) = reports.iter().find(|(_, r)| r.policy_label != policy) {
        return Err(CliError::PolicyMismatch(format!(
            "{name} was decided under `{}`, {} under `{policy}`",
            r.policy_label, reports[0].0
        )));
    }
    let pdrs = reports.iter().flat_map(|(_, r)| r.rows.iter().map(|m| m.pdr));
    let (pdr_min, pdr_max) = pdrs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
    let controlled = pdr_max - pdr_min <= PDR_SPREAD_LIMIT;
    if !controlled && !allow_uncontrolled {
        return Err(CliError::Uncontrolled(format!(
            "refusing to compare: realized PDR ranges from {pdr_min} to {pdr_max}, a spread above {PDR_SPREAD_LIMIT}.\n{UNCONTROLLED_CAVEAT}"
        )));
    }

    let first = &reports[0].1;
    let mut rows = Vec::new();
    for (name, r) in reports {
        for m in &r.rows {
            let tau = r.tau_row(&m.method);
            let nan = f64::NAN;
            let (t_all, t_prot, t_priv) = tau.map_or((nan, nan, nan), |t| (t.tau_overall, t.tau_protected, t.tau_privileged));
            let refm = first.row(&m.method);
            let reft = first.tau_row(&m.method);
            let delta = |f: fn(&rankaudit::audit::MetricRow<f64>) -> f64| refm.map(|x| f(m) - f(x));
            let warning = if controlled {
                String::new()
            } else {
                format!("uncontrolled-pdr: {} vs range {pdr_min}..{pdr_max}", m.pdr)
            };
            rows.push(CompareRow {
                report: name.clone(),
                dataset: r.header.dataset.clone(),
                policy: r.policy_label.clone(),
                method: m.method.clone(),
                decision: m.decision.clone(),
                auc: m.auc,
                acc: m.acc,
                spd: m.spd,
                eod: m.eod,
                pdr: m.pdr,
                tau_overall: t_all,
                tau_protected: t_prot,
                tau_privileged: t_priv,
                delta_auc: delta(|x| x.auc),
                delta_acc: delta(|x| x.acc),
                delta_spd: delta(|x| x.spd),
                delta_eod: delta(|x| x.eod),
                delta_pdr: delta(|x| x.pdr),
                delta_tau_overall: reft.map(|t| t_all - t.tau_overall),
                warning,
            });
        }
    }
    Ok(Comparison {
        policy,
        pdr_min,
        pdr_max,
        controlled,
        caveat: (!controlled).then(|| UNCONTROLLED_CAVEAT.to_string()),
        rows,
    })
}

impl Comparison {
    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| CliError::Serialize(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Serialize(e.to_string()))
    }
}
