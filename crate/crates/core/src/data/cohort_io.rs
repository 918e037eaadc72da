//! Cohort directories: `cohort.csv` plus one volume file per patient under
//! `volumes/`.

use super::schema::{
    Gender, PatientRecord, QualitativeClinical, QuantitativeClinical, Tabacology, Tnm, YesNo,
};
use super::volume::{load_volume, save_volume};
use super::DataError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "cohort.csv";
pub const VOLUME_DIR: &str = "volumes";

pub const MANIFEST_HEADER: &str = "id,volume_path,recurrence,hemoglobin,lymphocytes,leucocytes,\
thrombocytes,albumin,treatment_duration,total_dose,num_fractions,avg_dose_per_fraction,\
weight_start,weight_end,gender,tabacology,induction_chemo,concomitant_chemo,tnm_t,tnm_n,tnm_m";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    id: String,
    volume_path: String,
    recurrence: u8,
    hemoglobin: f64,
    lymphocytes: f64,
    leucocytes: f64,
    thrombocytes: f64,
    albumin: f64,
    treatment_duration: f64,
    total_dose: f64,
    num_fractions: u32,
    avg_dose_per_fraction: f64,
    weight_start: f64,
    weight_end: f64,
    gender: Gender,
    tabacology: Tabacology,
    induction_chemo: YesNo,
    concomitant_chemo: YesNo,
    tnm_t: u8,
    tnm_n: u8,
    tnm_m: u8,
}

fn volume_rel_path(id: &str) -> String {
    format!("{VOLUME_DIR}/{id}.thcv")
}

/// Writes the cohort under `dir` and returns every file written, manifest
/// last.
pub fn save_cohort(records: &[PatientRecord], dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    std::fs::create_dir_all(dir.join(VOLUME_DIR))?;
    let mut written = Vec::with_capacity(records.len() + 1);
    let manifest = dir.join(MANIFEST_FILE);
    let mut w = csv::Writer::from_path(&manifest)?;
    for r in records {
        let rel = volume_rel_path(&r.id);
        let path = dir.join(&rel);
        save_volume(&r.volume, &path)?;
        written.push(path);
        let q = &r.quantitative;
        let c = &r.qualitative;
        w.serialize(Row {
            id: r.id.clone(),
            volume_path: rel,
            recurrence: r.recurrence,
            hemoglobin: q.hemoglobin,
            lymphocytes: q.lymphocytes,
            leucocytes: q.leucocytes,
            thrombocytes: q.thrombocytes,
            albumin: q.albumin,
            treatment_duration: q.treatment_duration,
            total_dose: q.total_dose,
            num_fractions: q.num_fractions,
            avg_dose_per_fraction: q.avg_dose_per_fraction,
            weight_start: q.weight_start,
            weight_end: q.weight_end,
            gender: c.gender,
            tabacology: c.tabacology,
            induction_chemo: c.induction_chemo,
            concomitant_chemo: c.concomitant_chemo,
            tnm_t: c.tnm.t,
            tnm_n: c.tnm.n,
            tnm_m: c.tnm.m,
        })?;
    }
    w.flush()?;
    written.push(manifest);
    Ok(written)
}

/// Reads a cohort written by [`save_cohort`]. Volume paths are resolved
/// relative to `dir`.
pub fn load_cohort(dir: &Path) -> Result<Vec<PatientRecord>, DataError> {
    let mut reader = csv::Reader::from_path(dir.join(MANIFEST_FILE))?;
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != MANIFEST_HEADER {
        return Err(DataError::Corrupt(format!("unexpected cohort header {header:?}")));
    }
    let mut records = Vec::new();
    for row in reader.deserialize() {
        let row: Row = row?;
        let record = PatientRecord {
            volume: load_volume(&dir.join(&row.volume_path))?,
            quantitative: QuantitativeClinical {
                hemoglobin: row.hemoglobin,
                lymphocytes: row.lymphocytes,
                leucocytes: row.leucocytes,
                thrombocytes: row.thrombocytes,
                albumin: row.albumin,
                treatment_duration: row.treatment_duration,
                total_dose: row.total_dose,
                num_fractions: row.num_fractions,
                avg_dose_per_fraction: row.avg_dose_per_fraction,
                weight_start: row.weight_start,
                weight_end: row.weight_end,
            },
            qualitative: QualitativeClinical {
                gender: row.gender,
                tabacology: row.tabacology,
                induction_chemo: row.induction_chemo,
                concomitant_chemo: row.concomitant_chemo,
                tnm: Tnm::new(row.tnm_t, row.tnm_n, row.tnm_m)?,
            },
            recurrence: row.recurrence,
            id: row.id,
        };
        record.validate()?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(DataError::Corrupt("cohort has no patients".into()));
    }
    Ok(records)
}
