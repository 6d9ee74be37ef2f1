use serde::Serialize;

use crate::error::{ModelError, Result};

/// Editorial policy: panel size, acceptance rate and detection intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Policy {
    pub panel: u32,
    pub accept_rate: f64,
    pub p_det: f64,
}

impl Policy {
    pub fn new(panel: u32, accept_rate: f64, p_det: f64) -> Result<Policy> {
        let p = Policy { panel, accept_rate, p_det };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if self.panel == 0 {
            return Err(ModelError::InvalidInput("panel size must be at least 1".into()));
        }
        if !(self.accept_rate > 0.0 && self.accept_rate < 1.0) {
            return Err(ModelError::InvalidInput(format!(
                "acceptance rate must lie in (0, 1), got {}",
                self.accept_rate
            )));
        }
        if !(0.0..1.0).contains(&self.p_det) {
            return Err(ModelError::InvalidInput(format!(
                "detection must lie in [0, 1), got {}",
                self.p_det
            )));
        }
        Ok(())
    }
}
