use crate::error::{Error, Result};

/// Bonferroni adjustment: each p becomes min(1, p·m) with m the number of
/// tests. Order is preserved.
pub fn bonferroni_adjust(pvalues: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!(
            "bonferroni_adjust values must lie in [0, 1], got {bad}"
        )));
    }
    let m = pvalues.len() as f64;
    Ok(pvalues.iter().map(|p| (p * m).min(1.0)).collect())
}
