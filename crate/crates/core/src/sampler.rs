//! Seeded stratified selection of evaluation images.
//!
//! Every image gets the key `splitmix64(seed ^ fnv1a64(id))`; each stratum is
//! sorted by key (ties by id) and the first `k` ids are taken. The result
//! depends only on the ids, their strata and the plan.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{image_stratum, GroundTruthObject, ImageId, Stratum};
use crate::rng::{fnv1a64, splitmix64};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumTargets {
    pub small: usize,
    pub medium: usize,
    pub large: usize,
}

impl StratumTargets {
    pub fn get(&self, stratum: Stratum) -> usize {
        match stratum {
            Stratum::Small => self.small,
            Stratum::Medium => self.medium,
            Stratum::Large => self.large,
        }
    }

    pub fn total(&self) -> usize {
        self.small + self.medium + self.large
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratificationPlan {
    pub targets: StratumTargets,
    pub seed: u64,
}

impl Default for StratificationPlan {
    fn default() -> Self {
        Self {
            targets: StratumTargets {
                small: 1_000,
                medium: 2_000,
                large: 2_000,
            },
            seed: DEFAULT_SEED,
        }
    }
}

impl StratificationPlan {
    pub fn new(small: usize, medium: usize, large: usize, seed: u64) -> Result<Self> {
        let plan = Self {
            targets: StratumTargets { small, medium, large },
            seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.total() == 0 {
            return Err(Error::invalid("targets", "total target count must be > 0"));
        }
        Ok(())
    }
}

/// Sort key of an image id under `seed`.
pub fn sample_key(seed: u64, id: &ImageId) -> u64 {
    splitmix64(seed ^ fnv1a64(id.as_str().as_bytes()))
}

/// Stratum of every image that has at least one object.
pub fn image_strata(objects: &[GroundTruthObject]) -> BTreeMap<ImageId, Stratum> {
    let mut areas: BTreeMap<&ImageId, Vec<u64>> = BTreeMap::new();
    for o in objects {
        areas.entry(&o.image_id).or_default().push(o.area);
    }
    areas
        .into_iter()
        .filter_map(|(id, a)| image_stratum(&a).map(|s| (id.clone(), s)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledImage {
    pub image_id: ImageId,
    pub stratum: Stratum,
}

/// Draws the planned number of images per stratum. Output runs small,
/// medium, large; within a stratum in key order.
pub fn stratified_sample(strata: &BTreeMap<ImageId, Stratum>, plan: &StratificationPlan) -> Result<Vec<SampledImage>> {
    plan.validate()?;
    let mut pools: BTreeMap<Stratum, Vec<(u64, &ImageId)>> = BTreeMap::new();
    for (id, &s) in strata {
        pools.entry(s).or_default().push((sample_key(plan.seed, id), id));
    }
    let mut out = Vec::with_capacity(plan.targets.total());
    for stratum in Stratum::ALL {
        let want = plan.targets.get(stratum);
        let pool = pools.entry(stratum).or_default();
        if pool.len() < want {
            return Err(Error::InsufficientStratum {
                stratum,
                available: pool.len(),
                requested: want,
            });
        }
        pool.sort_unstable();
        out.extend(pool.iter().take(want).map(|(_, id)| SampledImage {
            image_id: (*id).clone(),
            stratum,
        }));
    }
    Ok(out)
}

/// [`stratified_sample`] over ground-truth objects.
pub fn sample_objects(objects: &[GroundTruthObject], plan: &StratificationPlan) -> Result<Vec<SampledImage>> {
    stratified_sample(&image_strata(objects), plan)
}
