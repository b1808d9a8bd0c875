//! Closed-form geometry and link-budget math.
//!
//! Angles are degrees at the API boundary and radians internally. Powers in
//! beam profiles are normalized linear values; everything else is dB/dBm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used by the great-circle distance.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lat.is_finite() || !self.lon.is_finite() {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::Domain(format!(
                "coordinate ({}, {}) out of range",
                self.lat, self.lon
            )));
        }
        Ok(())
    }

    /// Point reached by travelling `distance_m` along a great circle with the
    /// given initial bearing.
    pub fn destination(&self, bearing_deg: f64, distance_m: f64) -> GeoPoint {
        if distance_m == 0.0 {
            return *self;
        }
        let phi1 = self.lat.to_radians();
        let lambda1 = self.lon.to_radians();
        let theta = bearing_deg.to_radians();
        let delta = distance_m / EARTH_RADIUS_M;
        let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
        let lambda2 = lambda1
            + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
        let mut lon = lambda2.to_degrees();
        lon = (lon + 540.0).rem_euclid(360.0) - 180.0;
        GeoPoint {
            lat: phi2.to_degrees(),
            lon,
        }
    }
}

/// Forward azimuth from `from` to `to`, in `[0, 360)`. Coincident points map to 0.
pub fn bearing_deg(from: GeoPoint, to: GeoPoint) -> f64 {
    if from == to {
        return 0.0;
    }
    let phi1 = from.lat.to_radians();
    let phi2 = to.lat.to_radians();
    let dlambda = (to.lon - from.lon).to_radians();
    let x = dlambda.sin() * phi2.cos();
    let y = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    let deg = x.atan2(y).to_degrees().rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if deg >= 360.0 {
        0.0
    } else {
        deg
    }
}

/// Haversine great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    let c = 2.0 * h.sqrt().atan2((1.0 - h).sqrt());
    EARTH_RADIUS_M * c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Transmit power, dBm.
    pub p_tx: f64,
    pub f_ghz: f64,
    /// User-equipment height, meters.
    pub h_ue: f64,
    pub los: bool,
}

impl LinkBudget {
    pub fn new(p_tx: f64, f_ghz: f64, h_ue: f64, los: bool) -> Result<Self> {
        let b = Self {
            p_tx,
            f_ghz,
            h_ue,
            los,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_ghz > 0.0 && self.f_ghz.is_finite()) {
            return Err(Error::Domain(format!("carrier {} GHz must be > 0", self.f_ghz)));
        }
        if !(self.h_ue >= 0.0 && self.h_ue.is_finite()) {
            return Err(Error::Domain(format!("UE height {} m must be >= 0", self.h_ue)));
        }
        if !self.p_tx.is_finite() {
            return Err(Error::Domain("non-finite transmit power".into()));
        }
        Ok(())
    }

    pub fn with_los(self, los: bool) -> Self {
        Self { los, ..self }
    }
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            p_tx: 30.0,
            f_ghz: 28.0,
            h_ue: 1.5,
            los: true,
        }
    }
}

/// 3GPP UMi street-canyon pathloss; branch selected by `budget.los`.
pub fn pathloss_db(d_m: f64, budget: &LinkBudget) -> Result<f64> {
    if !(d_m > 0.0 && d_m.is_finite()) {
        return Err(Error::Domain(format!("distance {d_m} m must be > 0")));
    }
    budget.validate()?;
    let pl = if budget.los {
        32.4 + 21.0 * d_m.log10() + 20.0 * budget.f_ghz.log10()
    } else {
        22.4 + 35.3 * d_m.log10() + 21.3 * budget.f_ghz.log10() - 0.3 * (budget.h_ue - 1.5)
    };
    Ok(pl)
}

/// Beamforming gain from a normalized linear beam power.
pub fn beam_gain_db(p_beam: f64) -> Result<f64> {
    if !(p_beam > 0.0 && p_beam.is_finite()) {
        return Err(Error::Domain(format!("beam power {p_beam} must be > 0")));
    }
    Ok(10.0 * p_beam.log10())
}

pub fn received_power_dbm(budget: &LinkBudget, d_m: f64, gain_db: f64) -> Result<f64> {
    Ok(budget.p_tx - pathloss_db(d_m, budget)? + gain_db)
}

/// Power loss of the chosen beam relative to the optimum, dB (<= 0 when
/// `p_prime <= p_star`).
pub fn apl_db(p_prime: f64, p_star: f64) -> Result<f64> {
    if !(p_prime > 0.0 && p_star > 0.0) || !p_prime.is_finite() || !p_star.is_finite() {
        return Err(Error::Domain(format!(
            "APL needs positive powers, got {p_prime} and {p_star}"
        )));
    }
    Ok(10.0 * (p_prime / p_star).log10())
}

/// Oversampled uniform codebook over a sector: `q = o * m` codewords, each
/// `sector / m` wide, with centers spaced `sector / q` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamCodebook {
    pub m: usize,
    pub o: usize,
    pub q: usize,
    /// Beam centers relative to the BS boresight, degrees, strictly increasing.
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

/// Field of view covered by a codebook, degrees.
pub const SECTOR_DEG: f64 = 180.0;

impl BeamCodebook {
    pub fn new(m: usize, o: usize) -> Result<Self> {
        if m == 0 || o == 0 {
            return Err(Error::Domain("codebook needs m >= 1 and o >= 1".into()));
        }
        let q = m * o;
        let spacing = SECTOR_DEG / q as f64;
        let width = SECTOR_DEG / m as f64;
        let centers = (0..q)
            .map(|i| -SECTOR_DEG / 2.0 + (i as f64 + 0.5) * spacing)
            .collect();
        Ok(Self {
            m,
            o,
            q,
            centers,
            widths: vec![width; q],
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.q != self.m * self.o || self.centers.len() != self.q || self.widths.len() != self.q {
            return Err(Error::Data("codebook arity mismatch".into()));
        }
        if self.centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data("codebook centers not strictly increasing".into()));
        }
        if self.widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Data("codebook widths must be > 0".into()));
        }
        Ok(())
    }

    /// Index of the codeword whose center is nearest `rel_deg` (lowest index on ties).
    pub fn nearest(&self, rel_deg: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d = (c - rel_deg).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Raised-cosine main lobe of one beamwidth on either side of each center,
    /// sitting on a `floor_db` sidelobe floor, scaled so an exactly aligned
    /// codeword receives `peak`.
    pub fn profile(&self, rel_deg: f64, peak: f64, floor_db: f64) -> BeamPowerProfile {
        let rel = rel_deg.clamp(-SECTOR_DEG / 2.0, SECTOR_DEG / 2.0);
        let floor = 10f64.powf(floor_db / 10.0);
        let powers = self
            .centers
            .iter()
            .zip(&self.widths)
            .map(|(c, w)| {
                let d = (rel - c).abs();
                let g = if d < *w {
                    floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * d / w).cos())
                } else {
                    floor
                };
                peak * g
            })
            .collect();
        BeamPowerProfile { powers }
    }
}

impl Default for BeamCodebook {
    fn default() -> Self {
        Self::new(16, 4).expect("default codebook")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPowerProfile {
    pub powers: Vec<f64>,
}

impl BeamPowerProfile {
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        let p = Self { powers };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.powers.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain("beam powers must be finite and >= 0".into()));
        }
        if !self.powers.iter().any(|p| *p > 0.0) {
            return Err(Error::Domain("beam profile has no positive power".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            powers: self.powers.iter().map(|p| p * factor).collect(),
        }
    }
}

/// Index of the strongest codeword; ties go to the lowest index.
pub fn optimal_beam(profile: &BeamPowerProfile) -> Result<usize> {
    profile.validate()?;
    let mut best = 0;
    for (i, p) in profile.powers.iter().enumerate().skip(1) {
        if *p > profile.powers[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Signed difference `a - b` folded into `(-180, 180]`.
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gp(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    /// Bearing via local east/north unit vectors on the unit sphere.
    fn bearing_by_vectors(a: GeoPoint, b: GeoPoint) -> f64 {
        let to_xyz = |p: GeoPoint| {
            let (phi, lam) = (p.lat.to_radians(), p.lon.to_radians());
            [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
        };
        let pa = to_xyz(a);
        let pb = to_xyz(b);
        let (phi, lam) = (a.lat.to_radians(), a.lon.to_radians());
        let east = [-lam.sin(), lam.cos(), 0.0];
        let north = [-phi.sin() * lam.cos(), -phi.sin() * lam.sin(), phi.cos()];
        let d = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
        let dot = |u: [f64; 3], v: [f64; 3]| u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
        dot(d, east).atan2(dot(d, north)).to_degrees().rem_euclid(360.0)
    }

    #[test]
    fn bearing_cardinal_directions() {
        assert!((bearing_deg(gp(0.0, 0.0), gp(1.0, 0.0)) - 0.0).abs() < 1e-12);
        assert!((bearing_deg(gp(0.0, 0.0), gp(0.0, 1.0)) - 90.0).abs() < 1e-12);
        assert!((bearing_deg(gp(0.0, 0.0), gp(-1.0, 0.0)) - 180.0).abs() < 1e-12);
        assert!((bearing_deg(gp(0.0, 0.0), gp(0.0, -1.0)) - 270.0).abs() < 1e-12);
    }

    #[test]
    fn bearing_matches_vector_oracle() {
        let a = gp(33.0, -111.0);
        let b = gp(33.5, -110.5);
        let expected = bearing_by_vectors(a, b);
        // frozen from the vector construction
        assert!((expected - 39.7685).abs() < 1e-3, "{expected}");
        assert!((bearing_deg(a, b) - expected).abs() < 1e-9);
    }

    #[test]
    fn coincident_bearing_is_zero() {
        assert_eq!(bearing_deg(gp(10.0, 10.0), gp(10.0, 10.0)), 0.0);
    }

    #[test]
    fn haversine_examples() {
        assert_eq!(haversine_m(gp(5.0, 5.0), gp(5.0, 5.0)), 0.0);
        let d = haversine_m(gp(0.0, 0.0), gp(1.0, 0.0));
        assert!((d - 111_194.9).abs() < 0.1, "{d}");
        let anti = haversine_m(gp(0.0, 0.0), gp(0.0, 180.0));
        assert!((anti - std::f64::consts::PI * EARTH_RADIUS_M).abs() < 1.0);
    }

    #[test]
    fn pathloss_examples() {
        let los = LinkBudget::new(30.0, 28.0, 1.5, true).unwrap();
        assert!((pathloss_db(100.0, &los).unwrap() - 103.344).abs() < 1e-3);
        let nlos = los.with_los(false);
        assert!((pathloss_db(100.0, &nlos).unwrap() - 123.825).abs() < 1e-3);
        let unit = LinkBudget::new(30.0, 1.0, 1.5, true).unwrap();
        assert!((pathloss_db(1.0, &unit).unwrap() - 32.4).abs() < 1e-12);
        assert!(matches!(pathloss_db(0.0, &los), Err(Error::Domain(_))));
        assert!(matches!(pathloss_db(-3.0, &los), Err(Error::Domain(_))));
    }

    #[test]
    fn nlos_height_term() {
        let b = LinkBudget::new(30.0, 28.0, 11.5, false).unwrap();
        let base = pathloss_db(100.0, &b.clone().with_los(false)).unwrap();
        let ref_h = LinkBudget { h_ue: 1.5, ..b };
        assert!((pathloss_db(100.0, &ref_h).unwrap() - base - 3.0).abs() < 1e-9);
    }

    #[test]
    fn budget_validation() {
        assert!(LinkBudget::new(30.0, 0.0, 1.5, true).is_err());
        assert!(LinkBudget::new(30.0, 28.0, -1.0, true).is_err());
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 181.0).is_err());
    }

    #[test]
    fn gain_examples() {
        assert_eq!(beam_gain_db(1.0).unwrap(), 0.0);
        assert!((beam_gain_db(0.1226).unwrap() + 9.115).abs() < 1e-3);
        assert!((beam_gain_db(0.14928).unwrap() + 8.260).abs() < 1e-3);
        assert!(beam_gain_db(0.0).is_err());
    }

    #[test]
    fn received_power_examples() {
        let unit = LinkBudget::new(30.0, 1.0, 1.5, true).unwrap();
        assert!((received_power_dbm(&unit, 1.0, 0.0).unwrap() + 2.4).abs() < 1e-12);
        let b = LinkBudget::new(30.0, 28.0, 1.5, true).unwrap();
        let p = received_power_dbm(&b, 100.0, -9.115).unwrap();
        assert!((p + 82.459).abs() < 1e-2, "{p}");
        let p3 = received_power_dbm(&b, 100.0, 3.0).unwrap();
        let p0 = received_power_dbm(&b, 100.0, 0.0).unwrap();
        assert!((p3 - p0 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_beam_examples() {
        let p = BeamPowerProfile::new(vec![0.1, 0.9, 0.3]).unwrap();
        assert_eq!(optimal_beam(&p).unwrap(), 1);
        let u = BeamPowerProfile::new(vec![0.5; 8]).unwrap();
        assert_eq!(optimal_beam(&u).unwrap(), 0);
        assert!(BeamPowerProfile::new(vec![0.0; 4]).is_err());
    }

    #[test]
    fn apl_examples() {
        assert_eq!(apl_db(0.3, 0.3).unwrap(), 0.0);
        assert!((apl_db(0.5, 1.0).unwrap() + 3.0103).abs() < 1e-4);
        assert!(apl_db(0.0, 1.0).is_err());
        assert!(apl_db(1.0, -1.0).is_err());
        // best of a top-3 set that contains the optimum
        let profile = [0.2, 0.7, 0.9, 0.4];
        let top3 = [1usize, 2, 3];
        let best = top3.iter().map(|i| profile[*i]).fold(0.0, f64::max);
        assert_eq!(apl_db(best, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn codebook_shape() {
        let cb = BeamCodebook::default();
        assert_eq!(cb.q, 64);
        cb.validate().unwrap();
        let prof = cb.profile(10.0, 1.0, -20.0);
        assert_eq!(optimal_beam(&prof).unwrap(), cb.nearest(10.0));
        let floor = prof.powers.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((floor - 0.01).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bearing_in_range(a in -89.0f64..89.0, b in -179.0f64..179.0,
                            c in -89.0f64..89.0, d in -179.0f64..179.0) {
            let x = bearing_deg(gp(a, b), gp(c, d));
            prop_assert!((0.0..360.0).contains(&x));
        }

        #[test]
        fn due_east_along_equator(x in 1e-6f64..179.999) {
            let b = bearing_deg(gp(0.0, 0.0), gp(0.0, x));
            prop_assert!((b - 90.0).abs() < 1e-9);
        }

        #[test]
        fn haversine_symmetric(a in -89.0f64..89.0, b in -179.0f64..179.0,
                               c in -89.0f64..89.0, d in -179.0f64..179.0) {
            let p = gp(a, b);
            let q = gp(c, d);
            prop_assert!((haversine_m(p, q) - haversine_m(q, p)).abs() < 1e-6);
        }

        #[test]
        fn haversine_triangle(lats in proptest::array::uniform3(0.0f64..80.0),
                              lons in proptest::array::uniform3(-80.0f64..80.0)) {
            let p: Vec<_> = (0..3).map(|i| gp(lats[i], lons[i])).collect();
            let ab = haversine_m(p[0], p[1]);
            let bc = haversine_m(p[1], p[2]);
            let ac = haversine_m(p[0], p[2]);
            prop_assert!(ac <= ab + bc + 1e-6);
        }

        #[test]
        fn pathloss_monotone(d in 1.0f64..1000.0, dd in 0.01f64..100.0,
                             f in 1.0f64..100.0, df in 0.01f64..10.0, los: bool) {
            let b = LinkBudget::new(30.0, f, 1.5, los).unwrap();
            let b2 = LinkBudget::new(30.0, f + df, 1.5, los).unwrap();
            prop_assert!(pathloss_db(d + dd, &b).unwrap() > pathloss_db(d, &b).unwrap());
            prop_assert!(pathloss_db(d, &b2).unwrap() > pathloss_db(d, &b).unwrap());
        }

        #[test]
        fn optimal_beam_matches_scan(powers in proptest::collection::vec(0.0f64..1.0, 1..64)) {
            prop_assume!(powers.iter().any(|p| *p > 0.0));
            let prof = BeamPowerProfile::new(powers.clone()).unwrap();
            let max = powers.iter().cloned().fold(f64::MIN, f64::max);
            let scan = powers.iter().position(|p| *p == max).unwrap();
            prop_assert_eq!(optimal_beam(&prof).unwrap(), scan);
        }

        #[test]
        fn apl_monotone(p in 0.001f64..1.0, dp in 0.0001f64..1.0, star in 0.001f64..2.0) {
            prop_assert!(apl_db(p + dp, star).unwrap() > apl_db(p, star).unwrap());
            prop_assert_eq!(apl_db(star, star).unwrap(), 0.0);
        }

        #[test]
        fn profile_peak_is_nearest_center(rel in -90.0f64..90.0) {
            let cb = BeamCodebook::default();
            let prof = cb.profile(rel, 1.0, -20.0);
            prop_assert_eq!(optimal_beam(&prof).unwrap(), cb.nearest(rel));
        }
    }
}
