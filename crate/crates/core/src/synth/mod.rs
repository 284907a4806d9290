//! Synthetic cohorts and independent oracles.
//!
//! Generators produce clinical records with a known dependency DAG and CGM
//! series with known components. The oracles recompute results of the
//! structure search, the BIC, marker inference and the Kalman filter by
//! brute force.

mod cgm;
mod clinical;
mod config;
mod mdrd;
mod netoracle;
mod ssoracle;
mod writer;

pub use cgm::{
    gen_cgm_cohort, gen_cgm_series, synthetic_gl_table, synthetic_start, CgmSubject, CgmTruth, SyntheticCgm,
    SYNTH_CGM_MAX, SYNTH_CGM_MIN,
};
pub use clinical::{gen_clinical, truth_dag, SyntheticClinical, TRUE_ARCS};
pub use config::SynthConfig;
pub use mdrd::{mdrd_egfr, Ethnicity, CR_UMOL_PER_MGDL};
pub use netoracle::{
    brute_force_bic, brute_force_posterior, dag_enumeration_oracle, enumerate_dags, random_network, sample_network,
    MAX_ENUMERATION_NODES,
};
pub use ssoracle::{
    gaussian_predictive_oracle, gaussian_smoother_oracle, random_state_space, GaussianPredictive, RandomStateSpace,
    ORACLE_MAX_DIM, ORACLE_MAX_HORIZON, ORACLE_MAX_LEN,
};
pub use writer::{gen_dataset, write_dataset, SyntheticDataset, CLINICAL_FILE, GL_TABLE_FILE, SERIES_DIR};
