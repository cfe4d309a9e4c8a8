//! Dataset → decomposition → models → directions.

use crate::dataset::LatentDataset;
use crate::decomposition::{hosvd, HosvdResult};
use crate::directions::{all_directions, SemanticDirection};
use crate::error::Result;
use crate::model::{TensorModel, TruncatedModel};

/// Everything fitted from one dataset.
#[derive(Debug, Clone)]
pub struct Fit {
    pub decomposition: HosvdResult,
    pub model: TensorModel,
    pub truncated: TruncatedModel,
}

impl Fit {
    /// Expression directions, then yaw when the dataset has two rotations.
    pub fn directions(&self) -> Result<Vec<SemanticDirection>> {
        all_directions(&self.truncated, &self.model)
    }
}

pub fn fit(ds: &LatentDataset) -> Result<Fit> {
    let decomposition = hosvd(ds.latents())?;
    if decomposition.is_degenerate() {
        log::warn!("dataset has no variation around its mean; the model is trivial");
    }
    for (mode, (&rank, sv)) in decomposition
        .numerical_rank()
        .iter()
        .zip(decomposition.singular_values())
        .enumerate()
    {
        if rank < sv.len() {
            log::info!(
                "mode {} is rank deficient: {rank} of {}",
                mode + 1,
                sv.len()
            );
        }
    }
    let model = TensorModel::from_hosvd(&decomposition, ds.labels().clone(), ds.layout())?;
    let truncated = model.truncate_intensity()?;
    Ok(Fit {
        decomposition,
        model,
        truncated,
    })
}
