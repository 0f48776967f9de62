//! Deterministic synthetic-cohort generator.
//!
//! Every survey total is driven by a per-participant latent trajectory; a
//! configurable subset of feature columns carries a linear trace of that
//! latent state while the rest are pure noise. Because the generating
//! process is recorded alongside the files, the pipeline can be tested
//! against a known information ceiling instead of a private dataset.

use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{balanced_accuracy, ConfusionMatrix};
use crate::ingest::{Gender, Race, DEMOGRAPHICS_HEADER, EMA_HEADER, EMA_ITEM_COUNT};
use crate::models::derive_seed;
use crate::registry::{FeatureRegistry, FeatureSet};

/// Item-score intercept; eight of these put the zero-latent total at the
/// 334 decision threshold, so labels stay near-balanced by default.
const ITEM_CENTER: f64 = 41.75;
/// Item points per unit of latent state.
const ITEM_SLOPE: f64 = 12.0;
/// Label threshold on the 0-800 total.
const SCORE_THRESHOLD: f64 = 334.0;
/// Attention window the generator plants failures outside of.
const ATTENTION_TOLERANCE: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_participants: usize,
    /// Sessions per participant: count ~ round(Normal(mean, std)), min 1.
    pub sessions_mean: f64,
    pub sessions_std: f64,
    /// Images captured per survey, 1..=5.
    pub images_per_session: usize,
    /// Latent-to-feature gain on carrier columns; 0 severs the link.
    pub signal_strength: f64,
    /// Feature group whose columns carry the signal.
    pub signal_carrier: FeatureSet,
    /// Feature noise standard deviation.
    pub noise_std: f64,
    /// Survey item noise standard deviation (0 = deterministic totals).
    pub item_noise_std: f64,
    /// Shifts the latent distribution; raises the depressed fraction.
    pub latent_mean: f64,
    /// AR(1) coefficient of the within-participant trajectory, in [0,1).
    pub ar_coefficient: f64,
    /// Spread of the stable per-participant offset.
    pub between_std: f64,
    pub female_fraction: f64,
    pub white_fraction: f64,
    /// Multiplies feature noise for female participants (1 = symmetric).
    pub noise_multiplier_female: f64,
    pub attention_failure_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_participants: 177,
            sessions_mean: 180.0,
            sessions_std: 20.0,
            images_per_session: 3,
            signal_strength: 1.0,
            signal_carrier: FeatureSet::Landmarks3d,
            noise_std: 1.0,
            item_noise_std: 12.0,
            latent_mean: 0.0,
            ar_coefficient: 0.6,
            between_std: 0.8,
            female_fraction: 0.864,
            white_fraction: 0.836,
            noise_multiplier_female: 1.0,
            attention_failure_rate: 0.1,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_participants == 0 {
            return fail("n_participants must be >= 1".into());
        }
        if !(self.sessions_mean >= 1.0) || !self.sessions_std.is_finite() || self.sessions_std < 0.0 {
            return fail(format!(
                "sessions mean/std ({}, {}) invalid",
                self.sessions_mean, self.sessions_std
            ));
        }
        if !(1..=5).contains(&self.images_per_session) {
            return fail(format!(
                "images_per_session {} outside 1..=5",
                self.images_per_session
            ));
        }
        if !self.signal_strength.is_finite() || self.signal_strength < 0.0 {
            return fail(format!("signal_strength {} must be >= 0", self.signal_strength));
        }
        for (name, v) in [
            ("noise_std", self.noise_std),
            ("item_noise_std", self.item_noise_std),
            ("between_std", self.between_std),
        ] {
            if !v.is_finite() || v < 0.0 {
                return fail(format!("{name} {v} must be >= 0"));
            }
        }
        if !self.latent_mean.is_finite() {
            return fail("latent_mean must be finite".into());
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return fail(format!("ar_coefficient {} outside [0,1)", self.ar_coefficient));
        }
        for (name, v) in [
            ("female_fraction", self.female_fraction),
            ("white_fraction", self.white_fraction),
            ("attention_failure_rate", self.attention_failure_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} {v} outside [0,1]"));
            }
        }
        if !self.noise_multiplier_female.is_finite() || self.noise_multiplier_female <= 0.0 {
            return fail(format!(
                "noise_multiplier_female {} must be > 0",
                self.noise_multiplier_female
            ));
        }
        Ok(())
    }
}

/// Ground truth for one survey session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSession {
    pub participant_id: String,
    pub session_id: String,
    /// Latent state that generated this session.
    pub latent: f64,
    /// Total as the ingest pipeline will compute it (sum of written items).
    pub total: f64,
    pub depressed: bool,
    pub attention_failure: bool,
}

/// `truth.json`: the generating process, recorded for oracle evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub config: SynthConfig,
    /// Registry indices of the signal-carrying columns.
    pub carrier_indices: Vec<usize>,
    /// Per-carrier latent coefficient, aligned with `carrier_indices`.
    pub carrier_coefficients: Vec<f64>,
    pub sessions: Vec<TruthSession>,
}

impl TruthFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot open {}: {e}", path.display())))?;
        Self::from_json(&raw)
    }
}

/// Paths written by `generate_cohort`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortFiles {
    pub ema: PathBuf,
    pub features: PathBuf,
    pub demographics: PathBuf,
    pub truth: PathBuf,
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// What a latent-informed predictor forecasts the total to be. Summed the
/// same way the generator accumulates items, so the zero-noise case matches
/// recorded totals bit for bit.
fn expected_total(latent: f64) -> f64 {
    let item = round2((ITEM_CENTER + ITEM_SLOPE * latent).clamp(0.0, 100.0));
    let mut total = 0.0;
    for _ in 0..EMA_ITEM_COUNT {
        total += item;
    }
    total
}

/// Reversed-item score consistent with `item` up to a small honest jitter.
fn honest_reversed(item: f64, rng: &mut ChaCha8Rng) -> f64 {
    let jitter: f64 = rng.gen_range(-5.0..=5.0);
    round2((100.0 - item + jitter).clamp(0.0, 100.0))
}

/// Reversed-item score guaranteed inconsistent at the default tolerance.
fn failed_reversed(item: f64, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let r = round2(rng.gen_range(0.0..=100.0));
        if (item - (100.0 - r)).abs() > ATTENTION_TOLERANCE {
            return r;
        }
    }
}

fn sample_gender(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Gender {
    if rng.gen::<f64>() < cfg.female_fraction {
        Gender::Female
    } else {
        let v: f64 = rng.gen();
        if v < 0.75 {
            Gender::Male
        } else if v < 0.95 {
            Gender::Nonbinary
        } else {
            Gender::Other
        }
    }
}

fn sample_race(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Race {
    if rng.gen::<f64>() < cfg.white_fraction {
        Race::White
    } else {
        const REST: [Race; 5] = [
            Race::Asian,
            Race::Black,
            Race::AmerIndianAkNative,
            Race::Multiple,
            Race::Other,
        ];
        REST[rng.gen_range(0..REST.len())]
    }
}

/// Generate a full cohort under `out_dir`: `ema.csv`, `features.csv`,
/// `demographics.csv`, and `truth.json`. Byte-identical for a given config.
pub fn generate_cohort(config: &SynthConfig, out_dir: &Path) -> Result<CohortFiles> {
    config.validate()?;
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::Validation(format!("cannot create {}: {e}", out_dir.display())))?;

    let registry = FeatureRegistry::standard();
    let carrier_indices = registry.group_indices(config.signal_carrier);
    let mut coeff_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0xCAFE));
    let carrier_coefficients: Vec<f64> = carrier_indices
        .iter()
        .map(|_| {
            let magnitude = coeff_rng.gen_range(0.5..=1.5);
            if coeff_rng.gen::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    // Dense lookup: coefficient per registry column, 0 off the carrier group.
    let mut dense_coeff = vec![0.0f64; registry.len()];
    for (&idx, &a) in carrier_indices.iter().zip(&carrier_coefficients) {
        dense_coeff[idx] = a;
    }

    let files = CohortFiles {
        ema: out_dir.join("ema.csv"),
        features: out_dir.join("features.csv"),
        demographics: out_dir.join("demographics.csv"),
        truth: out_dir.join("truth.json"),
    };
    let open = |p: &Path| -> Result<BufWriter<File>> {
        Ok(BufWriter::with_capacity(
            1 << 20,
            File::create(p)
                .map_err(|e| Error::Validation(format!("cannot create {}: {e}", p.display())))?,
        ))
    };
    let mut ema_w = open(&files.ema)?;
    let mut feat_w = open(&files.features)?;
    let mut demo_w = open(&files.demographics)?;

    let io = |e: std::io::Error| Error::Validation(format!("write failed: {e}"));
    writeln!(ema_w, "{}", EMA_HEADER.join(",")).map_err(io)?;
    let mut feat_header = String::new();
    for (i, name) in feature_header_fields(&registry).iter().enumerate() {
        if i > 0 {
            feat_header.push(',');
        }
        feat_header.push_str(name);
    }
    writeln!(feat_w, "{feat_header}").map_err(io)?;
    writeln!(demo_w, "{}", DEMOGRAPHICS_HEADER.join(",")).map_err(io)?;

    let mut sessions = Vec::new();
    let innovation = (1.0 - config.ar_coefficient * config.ar_coefficient).sqrt();
    let mut line = String::with_capacity(registry.len() * 8 + 64);

    for p in 0..config.n_participants {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x9000 + p as u64));
        let pid = format!("sp{p:04}");

        let gender = sample_gender(config, &mut rng);
        let race = sample_race(config, &mut rng);
        let age = rng.gen_range(18.0f64..=65.0).round();
        writeln!(demo_w, "{pid},{},{},{age}", gender.key(), race.key()).map_err(io)?;
        let noise_mult = if gender == Gender::Female {
            config.noise_multiplier_female
        } else {
            1.0
        };

        let n_sessions = (config.sessions_mean + config.sessions_std * normal(&mut rng))
            .round()
            .max(1.0) as usize;
        let offset = config.between_std * normal(&mut rng);
        let mut walk = normal(&mut rng);
        let base_ts: i64 = 1_716_000_000 + p as i64 * 131;

        for s in 0..n_sessions {
            if s > 0 {
                walk = config.ar_coefficient * walk + innovation * normal(&mut rng);
            }
            let latent = config.latent_mean + offset + walk;
            let sid = format!("e{s:04}");
            let timestamp = base_ts + s as i64 * 86_400 + rng.gen_range(0..3_600);

            let mut items = [0.0f64; EMA_ITEM_COUNT];
            let mut total = 0.0;
            for item in &mut items {
                let noise = config.item_noise_std * normal(&mut rng);
                *item = round2((ITEM_CENTER + ITEM_SLOPE * latent + noise).clamp(0.0, 100.0));
                total += *item;
            }
            let attn_index = rng.gen_range(0..EMA_ITEM_COUNT);
            let attention_failure = rng.gen::<f64>() < config.attention_failure_rate;
            let attn_score = if attention_failure {
                failed_reversed(items[attn_index], &mut rng)
            } else {
                honest_reversed(items[attn_index], &mut rng)
            };
            let duration = round2(8.0 + (18.0 + 6.0 * normal(&mut rng)).abs());

            line.clear();
            line.push_str(&format!("{pid},{sid},{timestamp}"));
            for item in &items {
                line.push_str(&format!(",{item:.2}"));
            }
            line.push_str(&format!(",{attn_index},{attn_score:.2},{duration:.2}"));
            writeln!(ema_w, "{line}").map_err(io)?;

            for img in 0..config.images_per_session {
                let image_id = format!("{pid}-{sid}-i{img}");
                let confidence = round2(0.88 + 0.1 * rng.gen::<f64>());
                line.clear();
                line.push_str(&format!("{pid},{sid},{image_id}"));
                for &a in &dense_coeff {
                    let v = config.signal_strength * a * latent
                        + config.noise_std * noise_mult * normal(&mut rng);
                    line.push_str(&format!(",{v:.4}"));
                }
                line.push_str(&format!(",{confidence:.2},1"));
                writeln!(feat_w, "{line}").map_err(io)?;
            }

            sessions.push(TruthSession {
                participant_id: pid.clone(),
                session_id: sid,
                latent,
                total,
                depressed: total >= SCORE_THRESHOLD,
                attention_failure,
            });
        }
    }

    ema_w.flush().map_err(io)?;
    feat_w.flush().map_err(io)?;
    demo_w.flush().map_err(io)?;

    let truth = TruthFile {
        config: config.clone(),
        carrier_indices,
        carrier_coefficients,
        sessions,
    };
    fs::write(&files.truth, truth.to_json()?)
        .map_err(|e| Error::Validation(format!("cannot write truth file: {e}")))?;
    Ok(files)
}

fn feature_header_fields(registry: &FeatureRegistry) -> Vec<String> {
    crate::ingest::feature_file_header(registry)
}

/// Performance ceiling the generated cohort supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleMetrics {
    /// None when the cohort is single-class.
    pub balanced_accuracy: Option<f64>,
    pub mae: f64,
    pub n_sessions: usize,
    pub n_depressed: usize,
    /// "latent" when features carry signal, else "constant".
    pub predictor: String,
}

/// Best achievable metrics for a feature-based model on this cohort.
///
/// With signal present the ceiling is the latent-informed predictor
/// (features reveal the latent state in the large-signal limit); with zero
/// signal features are independent of the labels and the ceiling collapses
/// to the best constant: BA 1/2, MAE around the median total.
pub fn oracle_metrics(truth: &TruthFile, config: &SynthConfig) -> Result<OracleMetrics> {
    if truth.config != *config {
        return Err(Error::Validation(
            "truth file was generated under a different config".into(),
        ));
    }
    if truth.sessions.is_empty() {
        return Err(Error::Validation("truth file has no sessions".into()));
    }
    let n_sessions = truth.sessions.len();
    let n_depressed = truth.sessions.iter().filter(|s| s.depressed).count();
    let single_class = n_depressed == 0 || n_depressed == n_sessions;

    if config.signal_strength == 0.0 {
        let mut totals: Vec<f64> = truth.sessions.iter().map(|s| s.total).collect();
        totals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if n_sessions % 2 == 1 {
            totals[n_sessions / 2]
        } else {
            (totals[n_sessions / 2 - 1] + totals[n_sessions / 2]) / 2.0
        };
        let mae = totals.iter().map(|t| (t - median).abs()).sum::<f64>() / n_sessions as f64;
        return Ok(OracleMetrics {
            balanced_accuracy: (!single_class).then_some(0.5),
            mae,
            n_sessions,
            n_depressed,
            predictor: "constant".into(),
        });
    }

    let truths: Vec<bool> = truth.sessions.iter().map(|s| s.depressed).collect();
    let predicted: Vec<bool> = truth
        .sessions
        .iter()
        .map(|s| expected_total(s.latent) >= SCORE_THRESHOLD)
        .collect();
    let mae = truth
        .sessions
        .iter()
        .map(|s| (s.total - expected_total(s.latent)).abs())
        .sum::<f64>()
        / n_sessions as f64;
    let balanced_accuracy = if single_class {
        None
    } else {
        let cm = ConfusionMatrix::from_labels(&truths, &predicted)?;
        Some(balanced_accuracy::<f64>(&cm)?)
    };
    Ok(OracleMetrics {
        balanced_accuracy,
        mae,
        n_sessions,
        n_depressed,
        predictor: "latent".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{attention_filter, load_dataset, parse_ema_file, ParseMode};
    use std::io::Cursor;

    fn small_config(seed: u64) -> SynthConfig {
        SynthConfig {
            n_participants: 10,
            sessions_mean: 6.0,
            sessions_std: 1.0,
            images_per_session: 2,
            ..SynthConfig::default()
        }
        .with_seed(seed)
    }

    impl SynthConfig {
        fn with_seed(mut self, seed: u64) -> Self {
            self.seed = seed;
            self
        }
    }

    #[test]
    fn cohort_round_trips_through_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(11);
        let files = generate_cohort(&cfg, dir.path()).unwrap();
        let (dataset, _report) = load_dataset(
            &files.ema,
            &files.features,
            &files.demographics,
            25.0,
            334.0,
            true,
        )
        .unwrap();

        let truth = TruthFile::load(&files.truth).unwrap();
        let honest: Vec<&TruthSession> =
            truth.sessions.iter().filter(|s| !s.attention_failure).collect();
        assert_eq!(dataset.provenance.ema_kept, honest.len());
        assert_eq!(dataset.n_samples(), honest.len() * cfg.images_per_session);
        assert_eq!(dataset.n_features(), 709);
        assert_eq!(dataset.n_participants(), cfg.n_participants);

        // Labels and totals in the dataset match the recorded truth.
        let truth_by_key: std::collections::BTreeMap<(String, String), &TruthSession> = honest
            .iter()
            .map(|s| ((s.participant_id.clone(), s.session_id.clone()), *s))
            .collect();
        for m in &dataset.meta {
            let t = truth_by_key[&(m.participant_id.clone(), m.session_id.clone())];
            assert!((m.total_score - t.total).abs() < 1e-9);
            assert_eq!(m.depressed, t.depressed);
        }
    }

    #[test]
    fn same_seed_same_bytes_different_seed_different_bytes() {
        let cfg = small_config(3);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let f1 = generate_cohort(&cfg, d1.path()).unwrap();
        let f2 = generate_cohort(&cfg, d2.path()).unwrap();
        for (a, b) in [
            (&f1.ema, &f2.ema),
            (&f1.features, &f2.features),
            (&f1.demographics, &f2.demographics),
            (&f1.truth, &f2.truth),
        ] {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }

        let d3 = tempfile::tempdir().unwrap();
        let f3 = generate_cohort(&small_config(4), d3.path()).unwrap();
        assert_ne!(fs::read(&f1.ema).unwrap(), fs::read(&f3.ema).unwrap());
    }

    #[test]
    fn attention_failures_are_excluded_at_the_planted_rate() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            n_participants: 60,
            sessions_mean: 40.0,
            sessions_std: 5.0,
            images_per_session: 1,
            attention_failure_rate: 0.1,
            ..SynthConfig::default()
        }
        .with_seed(29);
        let files = generate_cohort(&cfg, dir.path()).unwrap();
        let raw = fs::read(&files.ema).unwrap();
        let parse = parse_ema_file(Cursor::new(raw), ParseMode::Strict).unwrap();
        let n = parse.records.len();
        assert!(n > 2_000);

        let outcome = attention_filter(parse.records, 25.0).unwrap();
        let frac = outcome.excluded.len() as f64 / n as f64;
        assert!((frac - 0.1).abs() < 0.01, "excluded fraction {frac}");

        // Exclusions agree with the recorded failures exactly.
        let truth = TruthFile::load(&files.truth).unwrap();
        let planted = truth.sessions.iter().filter(|s| s.attention_failure).count();
        assert_eq!(outcome.excluded.len(), planted);
    }

    #[test]
    fn zero_signal_oracle_is_chance() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            signal_strength: 0.0,
            ..small_config(5)
        };
        let files = generate_cohort(&cfg, dir.path()).unwrap();
        let truth = TruthFile::load(&files.truth).unwrap();
        let oracle = oracle_metrics(&truth, &cfg).unwrap();
        assert_eq!(oracle.balanced_accuracy, Some(0.5));
        assert_eq!(oracle.predictor, "constant");
        assert!(oracle.mae > 0.0);
    }

    #[test]
    fn noiseless_strong_signal_oracle_is_perfect() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            item_noise_std: 0.0,
            signal_strength: 3.0,
            ..small_config(6)
        };
        let files = generate_cohort(&cfg, dir.path()).unwrap();
        let truth = TruthFile::load(&files.truth).unwrap();
        let oracle = oracle_metrics(&truth, &cfg).unwrap();
        assert_eq!(oracle.balanced_accuracy, Some(1.0));
        assert_eq!(oracle.mae, 0.0);
        assert_eq!(oracle.predictor, "latent");
    }

    #[test]
    fn oracle_rejects_mismatched_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(8);
        let files = generate_cohort(&cfg, dir.path()).unwrap();
        let truth = TruthFile::load(&files.truth).unwrap();
        let other = cfg.clone().with_seed(9);
        assert!(oracle_metrics(&truth, &other).is_err());
    }

    #[test]
    fn label_balance_rises_with_latent_mean() {
        let mut fractions = Vec::new();
        for latent_mean in [-0.8, 0.0, 0.8] {
            let dir = tempfile::tempdir().unwrap();
            let cfg = SynthConfig {
                latent_mean,
                n_participants: 40,
                sessions_mean: 10.0,
                ..small_config(12)
            };
            let files = generate_cohort(&cfg, dir.path()).unwrap();
            let truth = TruthFile::load(&files.truth).unwrap();
            let frac = truth.sessions.iter().filter(|s| s.depressed).count() as f64
                / truth.sessions.len() as f64;
            fractions.push(frac);
        }
        assert!(fractions[0] < fractions[1] && fractions[1] < fractions[2], "{fractions:?}");
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = small_config(1);
        cfg.attention_failure_rate = 1.2;
        assert!(generate_cohort(&cfg, Path::new("/tmp/unused")).is_err());
        let mut cfg = small_config(1);
        cfg.images_per_session = 6;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(1);
        cfg.ar_coefficient = 1.0;
        assert!(cfg.validate().is_err());
    }
}
