//! JSON interchange: complex numbers as `[re, im]`, matrices row-major.

use serde::{Deserialize, Serialize};

use crate::channel::{DensityMatrix, QuantumChannel};
use crate::discrimination::Ensemble;
use crate::error::{Error, Result};
use crate::mapping::DynamicalMapping;
use crate::matrix::{ComplexMatrix, HermitianOperator, C64};

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &JsonMatrix, what: &str) -> Result<ComplexMatrix> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch(format!("{what}: rows of unequal length")));
    }
    let data = rows.iter().flatten().map(|&[re, im]| C64::new(re, im)).collect();
    ComplexMatrix::from_vec(n, cols, data).map_err(|e| Error::DimensionMismatch(format!("{what}: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub dim_in: usize,
    pub dim_out: usize,
    pub choi: JsonMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

impl ChannelJson {
    pub fn from_channel(n: &QuantumChannel, method: Option<&str>) -> Self {
        Self {
            dim_in: n.dim_in(),
            dim_out: n.dim_out(),
            choi: matrix_to_json(n.choi().matrix()),
            method: method.map(str::to_owned),
        }
    }

    /// Shape-checked channel; CPTP is not enforced here.
    pub fn to_channel(&self) -> Result<QuantumChannel> {
        let m = matrix_from_json(&self.choi, "choi")?;
        if !m.is_square() {
            return Err(Error::DimensionMismatch("choi must be square".into()));
        }
        QuantumChannel::from_choi(self.dim_in, self.dim_out, HermitianOperator::new(m)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingJson {
    pub system_dim: usize,
    pub channels: Vec<ChannelJson>,
}

impl MappingJson {
    pub fn from_mapping(m: &DynamicalMapping) -> Self {
        Self { system_dim: m.system_dim(), channels: m.channels().iter().map(|n| ChannelJson::from_channel(n, None)).collect() }
    }

    pub fn to_mapping(&self) -> Result<DynamicalMapping> {
        let channels = self.channels.iter().map(ChannelJson::to_channel).collect::<Result<Vec<_>>>()?;
        let m = DynamicalMapping::new(channels)?;
        if m.system_dim() != self.system_dim {
            return Err(Error::DimensionMismatch(format!(
                "system_dim {} but channels act on dimension {}",
                self.system_dim,
                m.system_dim()
            )));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedStateJson {
    pub prob: f64,
    pub rho: JsonMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleJson {
    pub states: Vec<WeightedStateJson>,
}

impl EnsembleJson {
    pub fn from_ensemble(e: &Ensemble) -> Self {
        Self {
            states: e
                .states()
                .iter()
                .map(|(p, rho)| WeightedStateJson { prob: *p, rho: matrix_to_json(rho.matrix().matrix()) })
                .collect(),
        }
    }

    pub fn to_ensemble(&self) -> Result<Ensemble> {
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let m = matrix_from_json(&s.rho, &format!("states[{k}].rho"))?;
                Ok((s.prob, DensityMatrix::new(HermitianOperator::new(m)?)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(states)
    }
}
