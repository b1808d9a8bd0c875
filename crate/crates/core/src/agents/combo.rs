use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Camera,
    Gps,
    Lidar,
    Radar,
}

impl Modality {
    /// Canonical order camera < gps < lidar < radar.
    pub const ALL: [Modality; 4] = [Modality::Camera, Modality::Gps, Modality::Lidar, Modality::Radar];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn bit(self) -> u8 {
        1 << self.index()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Camera => "camera",
            Modality::Gps => "gps",
            Modality::Lidar => "lidar",
            Modality::Radar => "radar",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "camera" => Ok(Modality::Camera),
            "gps" => Ok(Modality::Gps),
            "lidar" => Ok(Modality::Lidar),
            "radar" => Ok(Modality::Radar),
            other => Err(Error::Data(format!("unknown modality `{other}`"))),
        }
    }
}

/// A non-empty subset of the four modalities, stored as a bitmask
/// (camera = bit 0 .. radar = bit 3). Index order is `mask - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModalityCombo(u8);

/// Row labels as printed in the published performance tables, indexed by `mask - 1`.
const LABELS: [&str; 15] = [
    "camera_only",
    "gps_only",
    "camera_gps",
    "lidar_only",
    "camera_lidar",
    "gps_lidar",
    "camera_gps_lidar",
    "radar_only",
    "camera_radar",
    "gps_radar",
    "camera_gps_radar",
    "radar_lidar",
    "camera_radar_lidar",
    "gps_lidar_radar",
    "camera_gps_radar_lidar",
];

impl ModalityCombo {
    pub const COUNT: usize = 15;

    pub fn from_mask(mask: u8) -> Result<Self> {
        if mask == 0 || mask > 0b1111 {
            return Err(Error::Domain(format!("combo mask {mask} out of range")));
        }
        Ok(Self(mask))
    }

    pub fn from_index(index: usize) -> Result<Self> {
        if index >= Self::COUNT {
            return Err(Error::Domain(format!("combo index {index} out of range")));
        }
        Ok(Self(index as u8 + 1))
    }

    pub fn from_modalities(mods: &[Modality]) -> Result<Self> {
        Self::from_mask(mods.iter().fold(0, |m, x| m | x.bit()))
    }

    pub fn all() -> impl Iterator<Item = ModalityCombo> {
        (1..=15u8).map(ModalityCombo)
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn contains(self, m: Modality) -> bool {
        self.0 & m.bit() != 0
    }

    pub fn modalities(self) -> impl Iterator<Item = Modality> {
        Modality::ALL.into_iter().filter(move |m| self.contains(*m))
    }

    /// Number of this combo's modalities that are in `degraded_mask`.
    pub fn overlap(self, degraded_mask: u8) -> usize {
        (self.0 & degraded_mask).count_ones() as usize
    }

    pub fn label(self) -> &'static str {
        LABELS[self.index()]
    }

    pub fn single(m: Modality) -> Self {
        Self(m.bit())
    }
}

impl fmt::Display for ModalityCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Accepts the table labels and any other underscore-joined spelling of the
/// same set (`lidar_camera`, `radar`, `gps_only`).
impl FromStr for ModalityCombo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut mask = 0u8;
        for tok in s.trim().split('_') {
            if tok == "only" {
                continue;
            }
            let m: Modality = tok
                .parse()
                .map_err(|_| Error::Data(format!("bad combo label `{s}`")))?;
            if mask & m.bit() != 0 {
                return Err(Error::Data(format!("repeated modality in `{s}`")));
            }
            mask |= m.bit();
        }
        Self::from_mask(mask).map_err(|_| Error::Data(format!("bad combo label `{s}`")))
    }
}

impl TryFrom<String> for ModalityCombo {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModalityCombo> for String {
    fn from(c: ModalityCombo) -> String {
        c.label().to_string()
    }
}
