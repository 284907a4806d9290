use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bayesnet::Dag;
use crate::dataset::{ClinicalRecord, Feature, Gender};
use crate::preprocess::GENDER_VARIABLE;
use crate::synth::mdrd::{mdrd_egfr, Ethnicity, CR_UMOL_PER_MGDL};
use crate::synth::SynthConfig;

/// Generated cohort plus the DAG the generator follows.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticClinical {
    pub records: Vec<ClinicalRecord>,
    /// Over `gender` and every feature name, in encoded-dataset order.
    pub truth: Dag,
}

/// Arcs of the generating process (parent, child).
pub const TRUE_ARCS: [(&str, &str); 14] = [
    ("gender", "height"),
    ("gender", "cr"),
    ("gender", "egfr"),
    ("cr", "egfr"),
    ("age", "egfr"),
    ("height", "weight"),
    ("bmi", "weight"),
    ("hba1c", "ga"),
    ("hba1c", "fpg"),
    ("fpg", "hpp2"),
    ("ldl", "tc"),
    ("tc", "tg"),
    ("ldl", "tg"),
    ("hdl", "tg"),
];

pub fn truth_dag() -> Dag {
    let mut names = vec![GENDER_VARIABLE];
    names.extend(Feature::ALL.iter().map(|f| f.name()));
    let mut dag = Dag::new(names);
    for (a, b) in TRUE_ARCS {
        dag.add_arc_by_name(a, b).expect("generator arcs form a DAG");
    }
    dag
}

fn gauss<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("valid normal").sample(rng)
}

/// Samples a clinical cohort whose dependencies follow [`TRUE_ARCS`].
///
/// Units follow the clinical schema (creatinine in µmol/L); eGFR is the
/// MDRD value plus Gaussian noise of `cfg.egfr_noise_sd`.
pub fn gen_clinical(cfg: &SynthConfig) -> SyntheticClinical {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut records = Vec::with_capacity(cfg.n_subjects);
    for i in 0..cfg.n_subjects {
        let mut r = ClinicalRecord::new(format!("S{:03}", i + 1));
        let female = rng.random::<f64>() < 0.44;
        let gender = if female { Gender::Female } else { Gender::Male };
        r.gender = Some(gender);

        let height = if female { gauss(&mut rng, 1.59, 0.055) } else { gauss(&mut rng, 1.71, 0.06) }.clamp(1.35, 2.05);
        let bmi = gauss(&mut rng, 24.1, 3.25).clamp(16.0, 40.0);
        let weight = bmi * height * height;
        let age = rng.random_range(22.0..88.0);

        let cr = if female { gauss(&mut rng, 55f64.ln(), 0.18) } else { gauss(&mut rng, 78f64.ln(), 0.18) }.exp();
        let egfr = mdrd_egfr(cr / CR_UMOL_PER_MGDL, age, gender, Ethnicity::Other).expect("positive inputs");
        let egfr = (egfr + cfg.egfr_noise_sd * gauss(&mut rng, 0.0, 1.0)).max(5.0);

        let hba1c = gauss(&mut rng, 75.9, 27.0).clamp(30.0, 180.0);
        let ga = (0.32 * hba1c + gauss(&mut rng, 0.0, 3.0)).max(5.0);
        let fpg = (35.0 + 1.7 * hba1c + gauss(&mut rng, 0.0, 25.0)).clamp(45.0, 600.0);
        let hpp2 = (90.0 + 1.05 * fpg + gauss(&mut rng, 0.0, 35.0)).clamp(60.0, 650.0);

        let ldl = gauss(&mut rng, 3.15, 1.0).clamp(0.5, 8.0);
        let hdl = gauss(&mut rng, 1.14, 0.34).clamp(0.3, 3.0);
        let tc = (0.95 * ldl + 1.85 + gauss(&mut rng, 0.0, 0.45)).max(1.0);
        let tg = (0.55 + 0.3 * (tc - 4.85) - 0.2 * (ldl - 3.15) - 0.8 * (hdl - 1.14) + gauss(&mut rng, 0.0, 0.25))
            .exp()
            .clamp(0.2, 15.0);

        let ua = gauss(&mut rng, 335.0, 95.0).max(50.0);
        let bun = gauss(&mut rng, 6.1, 2.0).max(1.0);

        for (f, v) in [
            (Feature::Age, age),
            (Feature::Height, height),
            (Feature::Weight, weight),
            (Feature::Bmi, bmi),
            (Feature::Hba1c, hba1c),
            (Feature::Ga, ga),
            (Feature::Tc, tc),
            (Feature::Tg, tg),
            (Feature::Hdl, hdl),
            (Feature::Ldl, ldl),
            (Feature::Cr, cr),
            (Feature::Egfr, egfr),
            (Feature::Fpg, fpg),
            (Feature::Hpp2, hpp2),
        ] {
            r.set(f, Some(v));
        }
        r.ua = Some(ua);
        r.bun = Some(bun);

        if cfg.missing_rate > 0.0 {
            for f in Feature::CHARACTERISTICS {
                if rng.random::<f64>() < cfg.missing_rate {
                    r.set(f, None);
                }
            }
        }
        records.push(r);
    }
    SyntheticClinical {
        records,
        truth: truth_dag(),
    }
}
