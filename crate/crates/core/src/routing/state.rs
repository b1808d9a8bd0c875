use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::{Modality, ModalityCombo};
use crate::error::{Error, Result};

/// Which modalities are degraded, bit order camera, gps, lidar, radar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DegradationState(u8);

impl DegradationState {
    pub const COUNT: usize = 16;
    pub const CLEAN: Self = Self(0);

    pub fn from_mask(mask: u8) -> Result<Self> {
        if mask > 0b1111 {
            return Err(Error::Domain(format!("state mask {mask} out of range")));
        }
        Ok(Self(mask))
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..16u8).map(Self)
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn is_degraded(self, m: Modality) -> bool {
        self.0 & m.bit() != 0
    }

    /// Network input: 1.0 per degraded modality.
    pub fn features(self) -> [f64; 4] {
        Modality::ALL.map(|m| if self.is_degraded(m) { 1.0 } else { 0.0 })
    }

    pub fn degraded_count(self) -> usize {
        self.0.count_ones() as usize
    }
}

impl fmt::Display for DegradationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("clean");
        }
        let names: Vec<&str> = Modality::ALL
            .iter()
            .filter(|m| self.is_degraded(**m))
            .map(|m| m.name())
            .collect();
        write!(f, "degraded:{}", names.join("+"))
    }
}

/// Combo pair chosen for the beam and blockage agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoutingAction {
    pub beam: ModalityCombo,
    pub block: ModalityCombo,
}

impl RoutingAction {
    pub const COUNT: usize = ModalityCombo::COUNT * ModalityCombo::COUNT;

    pub fn new(beam: ModalityCombo, block: ModalityCombo) -> Self {
        Self { beam, block }
    }

    pub fn from_indices(beam: usize, block: usize) -> Result<Self> {
        Ok(Self {
            beam: ModalityCombo::from_index(beam)?,
            block: ModalityCombo::from_index(block)?,
        })
    }

    /// Beam-major flat index in `0..225`.
    pub fn flat_index(self) -> usize {
        self.beam.index() * ModalityCombo::COUNT + self.block.index()
    }

    pub fn from_flat(i: usize) -> Result<Self> {
        Self::from_indices(i / ModalityCombo::COUNT, i % ModalityCombo::COUNT)
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..Self::COUNT).map(|i| Self::from_flat(i).expect("in range"))
    }

    /// True when either combo relies on a degraded modality.
    pub fn uses_degraded(self, state: DegradationState) -> bool {
        self.beam.overlap(state.mask()) > 0 || self.block.overlap(state.mask()) > 0
    }
}

impl fmt::Display for RoutingAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.beam, self.block)
    }
}
