use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_probability, Result};

/// Hardware model shared by both parties: source, channel and detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Mean photon number per source pulse.
    pub mu_s: f64,
    /// Channel transfer efficiency.
    pub eta_c: f64,
    /// Quantum efficiency of the honest receiver's detector.
    pub eta_d: f64,
    pub eps_s: f64,
    pub eps_c: f64,
    pub eps_d: f64,
    /// Dark-count probability per detection slot.
    pub dark_rate: f64,
}

impl SystemParams {
    pub fn new(
        mu_s: f64,
        eta_c: f64,
        eta_d: f64,
        eps_s: f64,
        eps_c: f64,
        eps_d: f64,
        dark_rate: f64,
    ) -> Result<Self> {
        let params = Self {
            mu_s,
            eta_c,
            eta_d,
            eps_s,
            eps_c,
            eps_d,
            dark_rate,
        };
        params.validate()?;
        Ok(params)
    }

    /// Error-free, dark-count-free hardware delivering mean photon number `mu`
    /// at the detector through a lossless channel and a detector of
    /// efficiency `eta_d`.
    pub fn ideal_for_mu(mu: f64, eta_d: f64) -> Result<Self> {
        check_non_negative("mu", mu)?;
        if !(eta_d > 0.0 && eta_d <= 1.0) {
            return Err(crate::Error::Domain {
                name: "eta_d",
                value: eta_d,
                reason: "must lie in (0, 1]",
            });
        }
        Self::new(mu / eta_d, 1.0, eta_d, 0.0, 0.0, 0.0, 0.0)
    }

    /// Same hardware with the detector error set so that the overall error
    /// rate is `eps`.
    pub fn with_error(mut self, eps: f64) -> Result<Self> {
        check_probability("eps", eps)?;
        self.eps_s = 0.0;
        self.eps_c = 0.0;
        self.eps_d = eps;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("mu_s", self.mu_s)?;
        check_probability("eta_c", self.eta_c)?;
        check_probability("eta_d", self.eta_d)?;
        check_probability("eps_s", self.eps_s)?;
        check_probability("eps_c", self.eps_c)?;
        check_probability("eps_d", self.eps_d)?;
        check_probability("dark_rate", self.dark_rate)
    }

    /// Mean photon number arriving at the honest detector.
    pub fn mu(&self) -> f64 {
        self.mu_s * self.eta_c * self.eta_d
    }

    /// Overall error rate of source, channel and detector combined.
    pub fn eps(&self) -> f64 {
        1.0 - (1.0 - self.eps_s) * (1.0 - self.eps_c) * (1.0 - self.eps_d)
    }

    /// Combined survival probability of a photon on the way to a click.
    pub fn transfer(&self) -> f64 {
        self.eta_c * self.eta_d
    }

    /// Whether `eta_c * eta_d` reaches `threshold` (0.8 for the super-channel
    /// adversary discussion).
    pub fn meets_transfer_threshold(&self, threshold: f64) -> bool {
        self.transfer() >= threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let p = SystemParams::new(6.25, 0.9, 0.8, 0.001, 0.001, 0.001, 1e-5).unwrap();
        assert!((p.mu() - 4.5).abs() < 1e-12);
        let eps = 1.0 - 0.999f64.powi(3);
        assert!((p.eps() - eps).abs() < 1e-15);
        assert!(p.mu() <= p.mu_s);
        assert!(!p.meets_transfer_threshold(0.8));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(SystemParams::new(-1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(SystemParams::new(1.0, 1.2, 1.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(SystemParams::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, -0.1).is_err());
        assert!(SystemParams::ideal_for_mu(5.0, 0.0).is_err());
    }

    #[test]
    fn ideal_for_mu_recovers_mu() {
        let p = SystemParams::ideal_for_mu(5.0, 0.8).unwrap();
        assert!((p.mu_s - 6.25).abs() < 1e-12);
        assert!((p.mu() - 5.0).abs() < 1e-12);
        assert_eq!(p.eps(), 0.0);
    }
}
