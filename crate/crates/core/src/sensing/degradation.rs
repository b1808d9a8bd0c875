use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::Modality;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationKind {
    Blur,
    Oversaturate,
    Darken,
    Sparsify,
    GaussianNoise,
    Jitter,
}

impl DegradationKind {
    pub fn modality(self) -> Modality {
        match self {
            Self::Blur | Self::Oversaturate | Self::Darken => Modality::Camera,
            Self::Sparsify => Modality::Lidar,
            Self::GaussianNoise => Modality::Radar,
            Self::Jitter => Modality::Gps,
        }
    }

    /// Kinds applicable to `m`; the first is the default.
    pub fn for_modality(m: Modality) -> &'static [DegradationKind] {
        match m {
            Modality::Camera => &[Self::Blur, Self::Oversaturate, Self::Darken],
            Modality::Gps => &[Self::Jitter],
            Modality::Lidar => &[Self::Sparsify],
            Modality::Radar => &[Self::GaussianNoise],
        }
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Blur => "blur",
            Self::Oversaturate => "oversaturate",
            Self::Darken => "darken",
            Self::Sparsify => "sparsify",
            Self::GaussianNoise => "gaussian_noise",
            Self::Jitter => "jitter",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impairment {
    pub kind: DegradationKind,
    /// 0 is clean, 1 is the strongest synthetic impairment.
    pub severity: f64,
}

impl Impairment {
    pub fn clean(m: Modality) -> Self {
        Self {
            kind: DegradationKind::for_modality(m)[0],
            severity: 0.0,
        }
    }

    pub fn is_degraded(&self) -> bool {
        self.severity > 0.0
    }
}

/// Per-modality impairment, indexed in canonical modality order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub camera: Impairment,
    pub gps: Impairment,
    pub lidar: Impairment,
    pub radar: Impairment,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        Self::clean()
    }
}

impl DegradationSpec {
    pub fn clean() -> Self {
        Self {
            camera: Impairment::clean(Modality::Camera),
            gps: Impairment::clean(Modality::Gps),
            lidar: Impairment::clean(Modality::Lidar),
            radar: Impairment::clean(Modality::Radar),
        }
    }

    pub fn get(&self, m: Modality) -> &Impairment {
        match m {
            Modality::Camera => &self.camera,
            Modality::Gps => &self.gps,
            Modality::Lidar => &self.lidar,
            Modality::Radar => &self.radar,
        }
    }

    pub fn get_mut(&mut self, m: Modality) -> &mut Impairment {
        match m {
            Modality::Camera => &mut self.camera,
            Modality::Gps => &mut self.gps,
            Modality::Lidar => &mut self.lidar,
            Modality::Radar => &mut self.radar,
        }
    }

    /// Sets one modality's impairment, rejecting kinds that belong elsewhere.
    pub fn with(mut self, kind: DegradationKind, severity: f64) -> Result<Self> {
        *self.get_mut(kind.modality()) = Impairment { kind, severity };
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for m in Modality::ALL {
            let imp = self.get(m);
            if !(0.0..=1.0).contains(&imp.severity) {
                return Err(Error::Domain(format!("{m} severity {} outside [0,1]", imp.severity)));
            }
            if imp.kind.modality() != m {
                return Err(Error::Domain(format!("{} is not a {m} impairment", imp.kind)));
            }
        }
        Ok(())
    }

    /// Bitmask of modalities with non-zero severity.
    pub fn degraded_mask(&self) -> u8 {
        Modality::ALL
            .iter()
            .filter(|m| self.get(**m).is_degraded())
            .fold(0, |acc, m| acc | m.bit())
    }
}

/// Classifier output: one degraded flag per modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DegradationFlags(pub [bool; 4]);

impl DegradationFlags {
    pub fn from_mask(mask: u8) -> Self {
        Self(Modality::ALL.map(|m| mask & m.bit() != 0))
    }

    pub fn mask(&self) -> u8 {
        Modality::ALL
            .iter()
            .filter(|m| self.0[m.index()])
            .fold(0, |acc, m| acc | m.bit())
    }

    pub fn get(&self, m: Modality) -> bool {
        self.0[m.index()]
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|b| *b)
    }
}
