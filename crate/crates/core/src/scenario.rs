//! Synthetic scenarios: a vehicle trajectory past two base stations with
//! per-tick ground truth for blockage, sensor degradation and beam powers.
//!
//! Beam profiles are normalized linear powers from the codebook's
//! raised-cosine lobe, aimed at the bearing from each BS to the vehicle.
//! Received power composes that beam gain with UMi pathloss.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::agents::Modality;
use crate::error::{Error, Result};
use crate::handover::BsId;
use crate::linkmodel::{
    angle_diff_deg, beam_gain_db, bearing_deg, haversine_m, optimal_beam, received_power_dbm, BeamCodebook,
    BeamPowerProfile, GeoPoint, LinkBudget,
};
use crate::seed::{rng_for, stream};
use crate::sensing::{random_impairment, DegradationSpec, WINDOW};

pub const SCENARIO_SCHEMA: &str = "enwarsim-scenario";
pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Straight,
    /// Heading changes by a constant amount every tick.
    Turning { deg_per_tick: f64 },
}

/// Mean on/off dwell times of a two-state renewal process, in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dwell {
    pub mean_on: f64,
    pub mean_off: f64,
}

impl Dwell {
    fn validate(&self, what: &str) -> Result<()> {
        if !(self.mean_on >= 1.0 && self.mean_off >= 1.0 && self.mean_on.is_finite() && self.mean_off.is_finite()) {
            return Err(Error::InvalidConfig(format!("{what} dwell means must be finite and >= 1 tick")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub ticks: usize,
    pub ts_ms: f64,
    pub trajectory: Trajectory,
    pub speed_mps: f64,
    pub start: GeoPoint,
    pub heading_deg: f64,
    pub unit1: GeoPoint,
    pub bs2: GeoPoint,
    /// Array boresight of each BS, degrees from north.
    pub boresight_deg: [f64; 2],
    /// Links shorter than this are line-of-sight.
    pub los_range_m: f64,
    pub link: LinkBudget,
    pub codebook_m: usize,
    pub codebook_o: usize,
    pub sidelobe_floor_db: f64,
    /// Unit 1 link blockage process.
    pub blockage: Dwell,
    pub blockage_loss_db: f64,
    /// Per-modality degradation episodes.
    pub degradation: Dwell,
    pub severity_min: f64,
    pub severity_max: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let start = GeoPoint { lat: 33.4200, lon: -111.9290 };
        Self {
            ticks: 200,
            ts_ms: 300.0,
            trajectory: Trajectory::Straight,
            speed_mps: 8.0,
            start,
            heading_deg: 90.0,
            unit1: start.destination(0.0, 30.0).destination(90.0, 120.0),
            bs2: start.destination(0.0, 30.0).destination(90.0, 380.0),
            boresight_deg: [180.0, 180.0],
            los_range_m: 250.0,
            link: LinkBudget::default(),
            codebook_m: 16,
            codebook_o: 4,
            sidelobe_floor_db: -20.0,
            blockage: Dwell { mean_on: 8.0, mean_off: 30.0 },
            blockage_loss_db: 15.0,
            degradation: Dwell { mean_on: 20.0, mean_off: 80.0 },
            severity_min: 0.6,
            severity_max: 1.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.ticks == 0 {
            return bad("ticks must be > 0".into());
        }
        if !(self.ts_ms > 0.0 && self.ts_ms.is_finite()) {
            return bad(format!("tick period {} ms must be > 0", self.ts_ms));
        }
        if !(self.speed_mps >= 0.0 && self.speed_mps.is_finite()) {
            return bad(format!("speed {} m/s must be >= 0", self.speed_mps));
        }
        if let Trajectory::Turning { deg_per_tick } = self.trajectory {
            if !deg_per_tick.is_finite() {
                return bad("turn rate must be finite".into());
            }
        }
        for p in [self.start, self.unit1, self.bs2] {
            p.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        self.link.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self.codebook_m == 0 || self.codebook_o == 0 {
            return bad("codebook needs m >= 1 and o >= 1".into());
        }
        if !(self.sidelobe_floor_db < 0.0 && self.blockage_loss_db >= 0.0 && self.los_range_m > 0.0) {
            return bad("floor must be < 0 dB, blockage loss >= 0 dB, LoS range > 0".into());
        }
        if !(0.0 < self.severity_min && self.severity_min <= self.severity_max && self.severity_max <= 1.0) {
            return bad("severities must satisfy 0 < min <= max <= 1".into());
        }
        self.blockage.validate("blockage")?;
        self.degradation.validate("degradation")?;
        Ok(())
    }

    pub fn codebook(&self) -> Result<BeamCodebook> {
        BeamCodebook::new(self.codebook_m, self.codebook_o)
    }
}

/// Generated scenario. Per-tick data is stored column-wise; this struct is
/// also the on-disk schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: String,
    pub version: u32,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub ts_ms: f64,
    pub ticks: usize,
    pub codebook: BeamCodebook,
    pub unit1: GeoPoint,
    pub bs2: GeoPoint,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    pub los_unit1: Vec<bool>,
    pub los_bs2: Vec<bool>,
    pub blocked: Vec<bool>,
    pub degradation: Vec<DegradationSpec>,
    pub profile_unit1: Vec<Vec<f64>>,
    pub profile_bs2: Vec<Vec<f64>>,
}

/// Ground truth at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickTruth {
    pub tick: u64,
    pub position: GeoPoint,
    pub blocked: bool,
    pub degradation: DegradationSpec,
    /// Indexed Unit 1, BS2.
    pub optimal_beam: [usize; 2],
    pub distance_m: [f64; 2],
    pub bearing_deg: [f64; 2],
    pub los: [bool; 2],
    pub optimal_power_dbm: [f64; 2],
}

fn dwell_ticks<R: Rng>(rng: &mut R, mean: f64) -> usize {
    1 + Geometric::new(1.0 / mean).expect("mean >= 1").sample(rng) as usize
}

/// Alternating off/on schedule starting off.
fn renewal<R: Rng>(rng: &mut R, n: usize, d: Dwell) -> Vec<bool> {
    let mut out = Vec::with_capacity(n);
    let mut on = false;
    while out.len() < n {
        let len = dwell_ticks(rng, if on { d.mean_on } else { d.mean_off });
        out.extend(std::iter::repeat_n(on, len.min(n - out.len())));
        on = !on;
    }
    out
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let codebook = cfg.codebook()?;
    let n = cfg.ticks;
    let step_m = cfg.speed_mps * cfg.ts_ms / 1000.0;

    let mut traj = Vec::with_capacity(n);
    let mut pos = cfg.start;
    let mut heading = cfg.heading_deg;
    for _ in 0..n {
        traj.push(pos);
        pos = pos.destination(heading, step_m);
        if let Trajectory::Turning { deg_per_tick } = cfg.trajectory {
            heading = (heading + deg_per_tick).rem_euclid(360.0);
        }
    }

    let mut rng = rng_for(cfg.seed, stream::SCENARIO, 0);
    let blocked = renewal(&mut rng, n, cfg.blockage);
    let mut degradation = vec![DegradationSpec::clean(); n];
    for m in Modality::ALL {
        let mut rng = rng_for(cfg.seed, stream::SCENARIO, 1 + m.index() as u64);
        let active = renewal(&mut rng, n, cfg.degradation);
        let mut t = 0;
        while t < n {
            if !active[t] {
                t += 1;
                continue;
            }
            // One impairment per episode.
            let imp = random_impairment(&mut rng, m, cfg.severity_min, cfg.severity_max);
            while t < n && active[t] {
                *degradation[t].get_mut(m) = imp;
                t += 1;
            }
        }
    }

    let block_factor = 10f64.powf(-cfg.blockage_loss_db / 10.0);
    let profile = |bs: GeoPoint, boresight: f64, p: GeoPoint| {
        codebook.profile(angle_diff_deg(bearing_deg(bs, p), boresight), 1.0, cfg.sidelobe_floor_db)
    };
    let mut profile_unit1 = Vec::with_capacity(n);
    let mut profile_bs2 = Vec::with_capacity(n);
    for (t, p) in traj.iter().enumerate() {
        let p1 = profile(cfg.unit1, cfg.boresight_deg[0], *p);
        profile_unit1.push(if blocked[t] { p1.scaled(block_factor) } else { p1 }.powers);
        profile_bs2.push(profile(cfg.bs2, cfg.boresight_deg[1], *p).powers);
    }
    let los = |bs: GeoPoint| traj.iter().map(|p| haversine_m(bs, *p) <= cfg.los_range_m).collect();

    let s = Scenario {
        schema: SCENARIO_SCHEMA.into(),
        version: SCENARIO_VERSION,
        seed: cfg.seed,
        config: cfg.clone(),
        ts_ms: cfg.ts_ms,
        ticks: n,
        codebook,
        unit1: cfg.unit1,
        bs2: cfg.bs2,
        lat: traj.iter().map(|p| p.lat).collect(),
        lon: traj.iter().map(|p| p.lon).collect(),
        los_unit1: los(cfg.unit1),
        los_bs2: los(cfg.bs2),
        blocked,
        degradation,
        profile_unit1,
        profile_bs2,
    };
    s.validate()?;
    Ok(s)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCENARIO_SCHEMA || self.version != SCENARIO_VERSION {
            return Err(Error::Data(format!(
                "unsupported scenario schema {} v{}",
                self.schema, self.version
            )));
        }
        if !(self.ts_ms > 0.0) {
            return Err(Error::Data("tick period must be > 0".into()));
        }
        let n = self.ticks;
        let lens = [
            self.lat.len(),
            self.lon.len(),
            self.los_unit1.len(),
            self.los_bs2.len(),
            self.blocked.len(),
            self.degradation.len(),
            self.profile_unit1.len(),
            self.profile_bs2.len(),
        ];
        if n == 0 || lens.iter().any(|l| *l != n) {
            return Err(Error::Data(format!("per-tick arrays must all have length {n}, got {lens:?}")));
        }
        self.codebook.validate()?;
        for p in self.profile_unit1.iter().chain(&self.profile_bs2) {
            if p.len() != self.codebook.q {
                return Err(Error::Data(format!("profile length {} != codebook size {}", p.len(), self.codebook.q)));
            }
            BeamPowerProfile::new(p.clone()).map_err(|e| Error::Data(e.to_string()))?;
        }
        for d in &self.degradation {
            d.validate().map_err(|e| Error::Data(e.to_string()))?;
        }
        for t in 0..n {
            self.position(t).validate().map_err(|e| Error::Data(e.to_string()))?;
        }
        Ok(())
    }

    pub fn position(&self, tick: usize) -> GeoPoint {
        GeoPoint {
            lat: self.lat[tick],
            lon: self.lon[tick],
        }
    }

    pub fn bs_position(&self, bs: BsId) -> GeoPoint {
        match bs {
            BsId::Unit1 => self.unit1,
            BsId::Bs2 => self.bs2,
        }
    }

    pub fn profile(&self, bs: BsId, tick: usize) -> BeamPowerProfile {
        BeamPowerProfile {
            powers: match bs {
                BsId::Unit1 => self.profile_unit1[tick].clone(),
                BsId::Bs2 => self.profile_bs2[tick].clone(),
            },
        }
    }

    pub fn los(&self, bs: BsId, tick: usize) -> bool {
        match bs {
            BsId::Unit1 => self.los_unit1[tick],
            BsId::Bs2 => self.los_bs2[tick],
        }
    }

    fn check_tick(&self, tick: u64) -> Result<usize> {
        if tick as usize >= self.ticks {
            return Err(Error::Domain(format!("tick {tick} outside scenario of {} ticks", self.ticks)));
        }
        Ok(tick as usize)
    }

    /// Received power in dBm when `bs` serves on codeword `beam`.
    pub fn received_power_dbm(&self, bs: BsId, tick: u64, beam: usize) -> Result<f64> {
        let t = self.check_tick(tick)?;
        let powers = match bs {
            BsId::Unit1 => &self.profile_unit1[t],
            BsId::Bs2 => &self.profile_bs2[t],
        };
        let gain = powers
            .get(beam)
            .ok_or_else(|| Error::Domain(format!("beam {beam} outside codebook of {}", powers.len())))?;
        let d = haversine_m(self.bs_position(bs), self.position(t)).max(1.0);
        received_power_dbm(&self.config.link.with_los(self.los(bs, t)), d, beam_gain_db(*gain)?)
    }

    /// Ticks of the input window ending at `tick`: the last `WINDOW` ticks.
    pub fn input_window(&self, tick: u64) -> Result<std::ops::RangeInclusive<u64>> {
        self.check_tick(tick)?;
        let w = WINDOW as u64;
        if tick + 1 < w {
            return Err(Error::Domain(format!("tick {tick} precedes the first full window")));
        }
        Ok(tick + 1 - w..=tick)
    }

    pub fn window_span_ms(&self) -> f64 {
        WINDOW as f64 * self.ts_ms
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Scenario> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingAsset(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let s: Scenario = serde_json::from_slice(&bytes)?;
        s.validate()?;
        Ok(s)
    }
}

pub fn truth_at(s: &Scenario, tick: u64) -> Result<TickTruth> {
    let t = s.check_tick(tick)?;
    let pos = s.position(t);
    let mut truth = TickTruth {
        tick,
        position: pos,
        blocked: s.blocked[t],
        degradation: s.degradation[t],
        optimal_beam: [0; 2],
        distance_m: [0.0; 2],
        bearing_deg: [0.0; 2],
        los: [false; 2],
        optimal_power_dbm: [0.0; 2],
    };
    for (i, bs) in [BsId::Unit1, BsId::Bs2].into_iter().enumerate() {
        let beam = optimal_beam(&s.profile(bs, t))?;
        truth.optimal_beam[i] = beam;
        truth.distance_m[i] = haversine_m(s.bs_position(bs), pos);
        truth.bearing_deg[i] = bearing_deg(s.bs_position(bs), pos);
        truth.los[i] = s.los(bs, t);
        truth.optimal_power_dbm[i] = s.received_power_dbm(bs, tick, beam)?;
    }
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            ticks: 120,
            seed: 3,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn zero_speed_is_static() {
        let s = generate(&ScenarioConfig {
            speed_mps: 0.0,
            ..small()
        })
        .unwrap();
        let a = truth_at(&s, 0).unwrap();
        let b = truth_at(&s, s.ticks as u64 - 1).unwrap();
        assert_eq!(a.position, b.position);
        assert_eq!(a.optimal_beam, b.optimal_beam);
        assert_eq!(a.bearing_deg, b.bearing_deg);
    }

    #[test]
    fn straight_pass_by_sweeps_beams_monotonically() {
        let s = generate(&small()).unwrap();
        for bs in [0, 1] {
            let beams: Vec<usize> = (0..s.ticks as u64).map(|t| truth_at(&s, t).unwrap().optimal_beam[bs]).collect();
            // Boresight faces the road: the bearing sweeps west to east, so
            // the relative angle and the beam index both decrease.
            assert!(beams.windows(2).all(|w| w[1] <= w[0]), "{beams:?}");
            assert!(beams[0] > beams[s.ticks - 1]);
        }
    }

    #[test]
    fn peak_is_nearest_codeword() {
        let s = generate(&small()).unwrap();
        for t in 0..s.ticks {
            for (bs, boresight) in [(BsId::Unit1, 180.0), (BsId::Bs2, 180.0)] {
                let rel = angle_diff_deg(bearing_deg(s.bs_position(bs), s.position(t)), boresight);
                let want = s.codebook.nearest(rel.clamp(-90.0, 90.0));
                assert_eq!(optimal_beam(&s.profile(bs, t)).unwrap(), want);
            }
        }
    }

    #[test]
    fn optimal_beam_is_exhaustive_argmax() {
        let s = generate(&small()).unwrap();
        for t in 0..s.ticks as u64 {
            let tr = truth_at(&s, t).unwrap();
            let p = &s.profile_unit1[t as usize];
            let max = p.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(p[tr.optimal_beam[0]], max);
        }
    }

    #[test]
    fn no_blockage_when_never_on() {
        let s = generate(&ScenarioConfig {
            blockage: Dwell {
                mean_on: 1.0,
                mean_off: 1e12,
            },
            ..small()
        })
        .unwrap();
        assert!(s.blocked.iter().all(|b| !b));
    }

    #[test]
    fn blockage_attenuates_unit1_profile() {
        let s = generate(&small()).unwrap();
        let t = s.blocked.iter().position(|b| *b).expect("some blockage at default rates");
        let clean = generate(&ScenarioConfig {
            blockage: Dwell { mean_on: 1.0, mean_off: 1e12 },
            ..small()
        })
        .unwrap();
        let ratio = s.profile_unit1[t][0] / clean.profile_unit1[t][0];
        assert!((10.0 * ratio.log10() + 15.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_and_round_trips() {
        let a = generate(&small()).unwrap();
        assert_eq!(a, generate(&small()).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        a.save_json(&p).unwrap();
        let b = Scenario::load_json(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn degradation_episodes_present() {
        let s = generate(&ScenarioConfig { ticks: 400, ..small() }).unwrap();
        for m in Modality::ALL {
            assert!(s.degradation.iter().any(|d| d.get(m).is_degraded()), "{m}");
        }
    }

    #[test]
    fn window_spans_five_ticks() {
        let s = generate(&small()).unwrap();
        assert!(s.input_window(3).is_err());
        for t in 4..s.ticks as u64 {
            let w = s.input_window(t).unwrap();
            assert_eq!(w.clone().count(), 5);
            assert_eq!(*w.end(), t);
        }
        assert_eq!(s.window_span_ms(), 1500.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = generate(&small()).unwrap();
        assert!(truth_at(&s, s.ticks as u64).is_err());
        assert!(generate(&ScenarioConfig { ts_ms: 0.0, ..small() }).is_err());
        assert!(generate(&ScenarioConfig { speed_mps: -1.0, ..small() }).is_err());
        let mut broken = s.clone();
        broken.blocked.pop();
        assert!(broken.validate().is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Scenario::load_json(&dir.path().join("none.json")), Err(Error::MissingAsset(_))));
    }

    #[test]
    fn turning_changes_heading() {
        let s = generate(&ScenarioConfig {
            trajectory: Trajectory::Turning { deg_per_tick: 2.0 },
            ..small()
        })
        .unwrap();
        let b0 = bearing_deg(s.position(0), s.position(1));
        let b1 = bearing_deg(s.position(10), s.position(11));
        assert!((angle_diff_deg(b1, b0) - 20.0).abs() < 0.1);
    }
}
