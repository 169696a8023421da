use crate::error::{LqdgError, Result};
use crate::model::PolicySet;

/// Normalized gain error `Σ_i ‖K^i − K^{i*}‖_F / ‖K^{i*}‖_F`.
pub fn normalized_error(pol: &PolicySet, reference: &PolicySet) -> Result<f64> {
    if pol.players() != reference.players() {
        return Err(LqdgError::Dimension("policy and reference differ in player count".into()));
    }
    let mut total = 0.0;
    for (i, (k, kref)) in pol.gains().iter().zip(reference.gains()).enumerate() {
        if k.shape() != kref.shape() {
            return Err(LqdgError::Dimension(format!("gain {i} shape differs from reference")));
        }
        let denom = kref.norm();
        if denom == 0.0 {
            return Err(LqdgError::UndefinedMetric { player: i });
        }
        total += (k - kref).norm() / denom;
    }
    Ok(total)
}
