//! Per-combo, per-horizon agent performance records.
//!
//! The shipped asset is `assets/perf_table.csv`; its SHA-256 is pinned in
//! [`PERF_TABLE_SHA256`] and checked whenever the bundled copy is loaded.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::combo::ModalityCombo;
use crate::error::{Error, Result};

pub const HORIZONS: usize = 5;

pub const PERF_TABLE_CSV: &str = include_str!("../../assets/perf_table.csv");
pub const PERF_TABLE_SHA256: &str =
    "4c7e8a5c92a4f71926c3b6c82dc8d8d70885d95a0b40e51d2f6c7b8f1bfa7963";
pub const PERF_TABLE_FILE: &str = "perf_table.csv";

pub const CSV_HEADER: [&str; 9] = [
    "combo",
    "horizon",
    "preproc_ms",
    "beam_acc",
    "beam_apl",
    "beam_infer_ms",
    "block_f1",
    "block_auc",
    "block_infer_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfRecord {
    pub preproc_ms: f64,
    /// Beam top-3 accuracy, fraction.
    pub beam_top3_acc: f64,
    pub beam_apl: f64,
    pub beam_infer_ms: f64,
    pub block_f1: f64,
    /// Informational only; the mock agents do not use it.
    pub block_auc: f64,
    pub block_infer_ms: f64,
}

impl PerfRecord {
    fn validate(&self, what: &str) -> Result<()> {
        let fracs = [self.beam_top3_acc, self.block_f1, self.block_auc];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Data(format!("{what}: fraction outside [0,1]")));
        }
        let times = [self.preproc_ms, self.beam_infer_ms, self.block_infer_ms];
        if times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Data(format!("{what}: times must be > 0")));
        }
        if !(self.beam_apl <= 0.0) {
            return Err(Error::Data(format!("{what}: APL must be <= 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    combo: String,
    horizon: usize,
    preproc_ms: f64,
    beam_acc: f64,
    beam_apl: f64,
    beam_infer_ms: f64,
    block_f1: f64,
    block_auc: f64,
    block_infer_ms: f64,
}

/// Complete 15 x 5 table, immutable after load.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfTable {
    records: Vec<[PerfRecord; HORIZONS]>,
    checksum: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl PerfTable {
    /// The bundled table, checksum-verified.
    pub fn bundled() -> Result<Self> {
        let sum = sha256_hex(PERF_TABLE_CSV.as_bytes());
        if sum != PERF_TABLE_SHA256 {
            return Err(Error::Data(format!(
                "bundled performance table checksum mismatch: {sum}"
            )));
        }
        Self::from_csv_str(PERF_TABLE_CSV)
    }

    /// Loads a table file. A sibling `<file>.sha256` is verified when present.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingAsset(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let sidecar = path.with_extension("csv.sha256");
        if sidecar.exists() {
            let expected = std::fs::read_to_string(&sidecar)?;
            let expected = expected.split_whitespace().next().unwrap_or("");
            let got = sha256_hex(text.as_bytes());
            if got != expected {
                return Err(Error::Data(format!(
                    "{} checksum mismatch: expected {expected}, got {got}",
                    path.display()
                )));
            }
        }
        Self::from_csv_str(&text)
    }

    pub fn from_reader<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::Data(format!("unexpected table header {header:?}")));
        }
        let mut cells: BTreeMap<(usize, usize), PerfRecord> = BTreeMap::new();
        for row in rdr.deserialize::<CsvRow>() {
            let row = row?;
            let combo: ModalityCombo = row.combo.parse()?;
            if !(1..=HORIZONS).contains(&row.horizon) {
                return Err(Error::Data(format!("{}: horizon {} out of range", row.combo, row.horizon)));
            }
            let rec = PerfRecord {
                preproc_ms: row.preproc_ms,
                beam_top3_acc: row.beam_acc,
                beam_apl: row.beam_apl,
                beam_infer_ms: row.beam_infer_ms,
                block_f1: row.block_f1,
                block_auc: row.block_auc,
                block_infer_ms: row.block_infer_ms,
            };
            rec.validate(&format!("{} t+{}", row.combo, row.horizon))?;
            if cells.insert((combo.index(), row.horizon), rec).is_some() {
                return Err(Error::Data(format!("duplicate row {} t+{}", row.combo, row.horizon)));
            }
        }
        let mut records = Vec::with_capacity(ModalityCombo::COUNT);
        for combo in ModalityCombo::all() {
            let mut per = [None; HORIZONS];
            for (h, slot) in per.iter_mut().enumerate() {
                *slot = cells.get(&(combo.index(), h + 1)).copied();
            }
            if per.iter().any(Option::is_none) {
                return Err(Error::Data(format!("table incomplete for {combo}")));
            }
            records.push(per.map(Option::unwrap));
        }
        let table = Self {
            records,
            checksum: sha256_hex(text.as_bytes()),
        };
        table.audit()?;
        Ok(table)
    }

    /// Beam accuracy and blockage F1 must not improve with horizon.
    pub fn audit(&self) -> Result<()> {
        for combo in ModalityCombo::all() {
            let recs = &self.records[combo.index()];
            for h in 1..HORIZONS {
                if recs[h].beam_top3_acc > recs[h - 1].beam_top3_acc {
                    return Err(Error::Data(format!(
                        "{combo}: beam accuracy increases at t+{}",
                        h + 1
                    )));
                }
                if recs[h].block_f1 > recs[h - 1].block_f1 {
                    return Err(Error::Data(format!(
                        "{combo}: blockage F1 increases at t+{}",
                        h + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Record for `combo` at horizon `t + horizon`, `horizon` in 1..=5.
    pub fn lookup(&self, combo: ModalityCombo, horizon: usize) -> Result<&PerfRecord> {
        if !(1..=HORIZONS).contains(&horizon) {
            return Err(Error::Data(format!("horizon {horizon} out of range")));
        }
        Ok(&self.records[combo.index()][horizon - 1])
    }

    /// t+1 record; always present once loaded.
    pub fn t1(&self, combo: ModalityCombo) -> &PerfRecord {
        &self.records[combo.index()][0]
    }

    /// SHA-256 of the source text, for manifests.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// Applies `f` to every record. Used for sensitivity studies.
    pub fn map_records(&self, f: impl Fn(&PerfRecord) -> PerfRecord) -> Self {
        Self {
            records: self.records.iter().map(|row| row.map(|r| f(&r))).collect(),
            checksum: self.checksum.clone(),
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for combo in ModalityCombo::all() {
            for h in 1..=HORIZONS {
                let r = self.lookup(combo, h)?;
                w.write_record([
                    combo.label().to_string(),
                    h.to_string(),
                    r.preproc_ms.to_string(),
                    r.beam_top3_acc.to_string(),
                    r.beam_apl.to_string(),
                    r.beam_infer_ms.to_string(),
                    r.block_f1.to_string(),
                    r.block_auc.to_string(),
                    r.block_infer_ms.to_string(),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> ModalityCombo {
        s.parse().unwrap()
    }

    #[test]
    fn bundled_examples() {
        let t = PerfTable::bundled().unwrap();
        let r = t.lookup(c("camera_gps_lidar"), 1).unwrap();
        assert_eq!(r.beam_top3_acc, 0.885);
        assert_eq!(r.beam_apl, -0.009220);
        let g = t.lookup(c("gps_only"), 1).unwrap();
        assert_eq!(g.beam_top3_acc, 0.590);
        assert_eq!(g.block_f1, 0.617);
        let cr = t.lookup(c("camera_radar"), 1).unwrap();
        assert_eq!(cr.block_f1, 0.984);
        assert_eq!(cr.block_auc, 0.988);
    }

    #[test]
    fn bad_horizon_is_data_error() {
        let t = PerfTable::bundled().unwrap();
        assert!(matches!(t.lookup(c("gps_only"), 0), Err(Error::Data(_))));
        assert!(matches!(t.lookup(c("gps_only"), 6), Err(Error::Data(_))));
    }

    #[test]
    fn missing_row_rejected() {
        let text: String = PERF_TABLE_CSV
            .lines()
            .filter(|l| !l.starts_with("lidar_only,3"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(PerfTable::from_csv_str(&text), Err(Error::Data(_))));
    }

    #[test]
    fn horizon_increase_rejected() {
        let text = PERF_TABLE_CSV.replace(
            "gps_only,5,1.0,0.55,",
            "gps_only,5,1.0,0.99,",
        );
        assert_ne!(text, PERF_TABLE_CSV);
        let err = PerfTable::from_csv_str(&text).unwrap_err();
        assert!(err.to_string().contains("increases"), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let t = PerfTable::bundled().unwrap();
        let again = PerfTable::from_csv_str(&t.to_csv_string().unwrap()).unwrap();
        assert_eq!(t.records, again.records);
    }

    #[test]
    fn sidecar_checksum_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(PERF_TABLE_FILE);
        std::fs::write(&path, PERF_TABLE_CSV).unwrap();
        std::fs::write(dir.path().join("perf_table.csv.sha256"), PERF_TABLE_SHA256).unwrap();
        PerfTable::load(&path).unwrap();
        std::fs::write(dir.path().join("perf_table.csv.sha256"), "00").unwrap();
        assert!(matches!(PerfTable::load(&path), Err(Error::Data(_))));
        assert!(matches!(
            PerfTable::load(&dir.path().join("nope.csv")),
            Err(Error::MissingAsset(_))
        ));
    }
}
