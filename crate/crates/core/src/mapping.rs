use crate::channel::{validate_cptp, QuantumChannel};
use crate::error::{Error, Result};

/// Tolerance for `N^0 = id`.
pub const IDENTITY_TOL: f64 = 1e-9;

/// A discrete-time dynamical mapping `(N^0 = id, N^1, ..., N^n)` on a fixed system.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicalMapping {
    system_dim: usize,
    channels: Vec<QuantumChannel>,
}

impl DynamicalMapping {
    pub fn new(channels: Vec<QuantumChannel>) -> Result<Self> {
        let first = channels.first().ok_or_else(|| Error::InvalidParameter("mapping has no channels".into()))?;
        let d = first.dim_in();
        for (i, n) in channels.iter().enumerate() {
            if n.dim_in() != d || n.dim_out() != d {
                return Err(Error::DimensionMismatch(format!(
                    "channel {i} maps {} -> {}, expected {d} -> {d}",
                    n.dim_in(),
                    n.dim_out()
                )));
            }
            let report = validate_cptp(n)?;
            if !report.ok {
                return Err(Error::InvalidChannel(format!(
                    "channel {i}: cp residual {:.3e}, tp residual {:.3e}",
                    report.cp_residual, report.tp_residual
                )));
            }
        }
        let dist = first.choi_distance(&QuantumChannel::identity(d));
        if dist > IDENTITY_TOL {
            return Err(Error::InvalidChannel(format!("N^0 differs from the identity by {dist:.3e}")));
        }
        Ok(Self { system_dim: d, channels })
    }

    /// Prepends `N^0 = id` to the given channels.
    pub fn from_steps(d: usize, later: Vec<QuantumChannel>) -> Result<Self> {
        let mut channels = Vec::with_capacity(later.len() + 1);
        channels.push(QuantumChannel::identity(d));
        channels.extend(later);
        Self::new(channels)
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn channels(&self) -> &[QuantumChannel] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &QuantumChannel {
        &self.channels[i]
    }

    /// Number of time indices, including `0`.
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Number of steps `N^{k-1} -> N^k`.
    pub fn steps(&self) -> usize {
        self.channels.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requires_identity_start() {
        let d = QuantumChannel::dephasing(0.5).unwrap();
        assert!(DynamicalMapping::new(vec![d.clone()]).is_err());
        let m = DynamicalMapping::from_steps(2, vec![d]).unwrap();
        assert_eq!(m.steps(), 1);
    }

    #[test]
    fn rejects_non_cptp() {
        let bad = QuantumChannel::dephasing_unchecked(1.6);
        assert!(DynamicalMapping::from_steps(2, vec![bad]).is_err());
    }
}
