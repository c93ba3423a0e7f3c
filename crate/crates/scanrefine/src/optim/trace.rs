//! Per-step optimization trace and its CSV form.

use crate::io::IoError;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct TraceRow {
    /// Global 1-based step index across the whole run.
    pub step: usize,
    /// 1-based external cycle.
    pub cycle: usize,
    pub stage: &'static str,
    pub l_rgb: Option<f64>,
    pub l_depth: Option<f64>,
    pub l_iou: Option<f64>,
    pub l_common: f64,
    pub l_lap: Option<f64>,
    pub d_loss: Option<f64>,
    pub g_loss: Option<f64>,
    pub decision: &'static str,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(
        "step,cycle,stage,L_rgb,L_depth,L_iou,L_common,L_lap,d_loss,g_loss,decision\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:?},{},{},{},{}\n",
            r.step,
            r.cycle,
            r.stage,
            fmt_opt(r.l_rgb),
            fmt_opt(r.l_depth),
            fmt_opt(r.l_iou),
            r.l_common,
            fmt_opt(r.l_lap),
            fmt_opt(r.d_loss),
            fmt_opt(r.g_loss),
            r.decision,
        ));
    }
    out
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<(), IoError> {
    std::fs::write(path, trace_to_csv(rows)).map_err(|e| IoError::file(path, e))
}
