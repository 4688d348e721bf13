//! CSV formatting for iteration records. Output is byte-deterministic: the
//! timing column is reserved (always 0); measured times live in the summary
//! metadata instead.

use dfw_core::algorithms::IterationRecord;

pub const RECORD_HEADER: &str = "variant,trial,iter,dist,contraction,r_inv_norm,noise_norm,wall_ms";

/// Floats with 17 significant digits, enough to reconstruct the exact f64.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn record_line(variant: &str, trial: usize, record: &IterationRecord) -> String {
    format!(
        "{variant},{trial},{iter},{dist},{contraction},{rinv},{noise},0",
        iter = record.iter,
        dist = fmt_float(record.dist.unwrap_or(f64::NAN)),
        contraction = fmt_float(record.contraction_factor),
        rinv = fmt_float(record.orthogonalization_inverse_norm),
        noise = fmt_float(record.noise_term_norm.unwrap_or(f64::NAN)),
    )
}

pub fn records_csv(variant: &str, trial: usize, records: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(RECORD_HEADER);
    out.push('\n');
    for record in records {
        out.push_str(&record_line(variant, trial, record));
        out.push('\n');
    }
    out
}
