use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use crate::dataset::{write_clinical, write_gl_table, write_timeseries, Feature};
use crate::error::{Error, Result};
use crate::synth::{gen_cgm_cohort, gen_clinical, CgmSubject, SynthConfig, SyntheticCgm, SyntheticClinical};

pub const CLINICAL_FILE: &str = "clinical.csv";
pub const GL_TABLE_FILE: &str = "gl_table.csv";
pub const SERIES_DIR: &str = "series";

/// A generated cohort: clinical records and one CGM series per subject.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub clinical: SyntheticClinical,
    pub cgm: SyntheticCgm,
}

/// Couples clinical and CGM generation: a subject's CGM baseline is
/// `40 + 0.6·FPG` (clamped to [70, 300] mg/dL), and latent-sharing groups
/// are consecutive runs of `cfg.group_size` subjects in FPG order, so
/// subjects with close markers share glucose dynamics.
pub fn gen_dataset(cfg: &SynthConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let clinical = gen_clinical(cfg);
    let fpg: Vec<f64> = clinical
        .records
        .iter()
        .map(|r| r.get(Feature::Fpg).unwrap_or(cfg.baseline))
        .collect();
    let mut order: Vec<usize> = (0..fpg.len()).collect();
    order.sort_by(|&a, &b| fpg[a].total_cmp(&fpg[b]).then(a.cmp(&b)));
    let mut group = vec![0; fpg.len()];
    for (rank, &i) in order.iter().enumerate() {
        group[i] = rank / cfg.group_size;
    }
    let subjects: Vec<CgmSubject> = clinical
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| CgmSubject {
            subject_id: r.subject_id.clone(),
            baseline: (40.0 + 0.6 * fpg[i]).clamp(70.0, 300.0),
            group: group[i],
        })
        .collect();
    let cgm = gen_cgm_cohort(cfg, &subjects)?;
    Ok(SyntheticDataset { clinical, cgm })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes `clinical.csv`, `gl_table.csv` and `series/<id>.csv` in the
/// loader formats.
pub fn write_dataset(data: &SyntheticDataset, dir: &Path) -> Result<()> {
    let series_dir = dir.join(SERIES_DIR);
    fs::create_dir_all(&series_dir).map_err(|e| Error::io(&series_dir, e))?;
    write_clinical(&data.clinical.records, create(&dir.join(CLINICAL_FILE))?)?;
    write_gl_table(&data.cgm.gl_table, create(&dir.join(GL_TABLE_FILE))?)?;
    for s in &data.cgm.series {
        write_timeseries(s, create(&series_dir.join(format!("{}.csv", s.subject_id)))?)?;
    }
    Ok(())
}
