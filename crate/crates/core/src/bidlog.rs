//! Synthetic auction logs.
//!
//! A [`BidLog`] is an ordered list of won-or-lost auction opportunities. Each
//! [`Impression`] contributes a page view, an expected click and an expected GMV if it
//! is won, and costs a fixed clearing price (second-price abstraction: the bid only
//! decides win or lose).
//!
//! Logs are persisted as a CSV table (`id,ctr,cvr,price,cost`) plus a JSON sidecar
//! holding the schema version, seed and generation parameters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::ensure_parent;
use crate::numeric::CompensatedSum;

/// Number of KPIs tracked per impression: page views, clicks, GMV.
pub const N_KPI: usize = 3;

pub const KPI_NAMES: [&str; N_KPI] = ["pv", "clicks", "gmv"];

/// Version of the on-disk log layout (CSV columns + sidecar fields).
pub const LOG_SCHEMA_VERSION: u32 = 1;

const CSV_HEADER: [&str; 5] = ["id", "ctr", "cvr", "price", "cost"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impression {
    pub id: usize,
    pub ctr: f64,
    pub cvr: f64,
    pub price: f64,
    pub cost: f64,
    /// `[1, ctr, ctr * cvr * price]`, derived from the fields above.
    pub kpi_values: [f64; N_KPI],
}

impl Impression {
    /// Builds an impression and checks its invariants.
    pub fn new(id: usize, ctr: f64, cvr: f64, price: f64, cost: f64) -> Result<Self> {
        let bad = |what: &str| Error::Invariant(format!("impression {id}: {what}"));
        if !(ctr.is_finite() && (0.0..=1.0).contains(&ctr)) {
            return Err(bad(&format!("click probability {ctr} outside [0, 1]")));
        }
        if !(cvr.is_finite() && (0.0..=1.0).contains(&cvr)) {
            return Err(bad(&format!("conversion probability {cvr} outside [0, 1]")));
        }
        if !(price.is_finite() && price >= 0.0) {
            return Err(bad(&format!("price {price} is negative or not finite")));
        }
        if !(cost.is_finite() && cost > 0.0) {
            return Err(bad(&format!("cost {cost} must be positive")));
        }
        Ok(Self {
            id,
            ctr,
            cvr,
            price,
            cost,
            kpi_values: [1.0, ctr, ctr * cvr * price],
        })
    }
}

/// Distribution parameters for [`generate_log`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogGenParams {
    pub n_impressions: usize,
    pub ctr_alpha: f64,
    pub ctr_beta: f64,
    pub cvr_alpha: f64,
    pub cvr_beta: f64,
    pub price_mu: f64,
    pub price_sigma: f64,
    /// Cost per unit of click probability.
    pub cost_base: f64,
    /// Half-width of the multiplicative uniform cost noise, in `[0, 1)`.
    pub cost_noise: f64,
}

impl Default for LogGenParams {
    fn default() -> Self {
        Self {
            n_impressions: 10_000,
            ctr_alpha: 2.0,
            ctr_beta: 50.0,
            cvr_alpha: 2.0,
            cvr_beta: 30.0,
            price_mu: 4.0,
            price_sigma: 0.5,
            cost_base: 100.0,
            cost_noise: 0.3,
        }
    }
}

impl LogGenParams {
    pub fn with_impressions(n_impressions: usize) -> Self {
        Self {
            n_impressions,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if self.n_impressions == 0 {
            return Err(Error::Config("n_impressions must be at least 1".into()));
        }
        positive("ctr_alpha", self.ctr_alpha)?;
        positive("ctr_beta", self.ctr_beta)?;
        positive("cvr_alpha", self.cvr_alpha)?;
        positive("cvr_beta", self.cvr_beta)?;
        positive("price_sigma", self.price_sigma)?;
        positive("cost_base", self.cost_base)?;
        if !self.price_mu.is_finite() {
            return Err(Error::Config("price_mu must be finite".into()));
        }
        if !(self.cost_noise.is_finite() && (0.0..1.0).contains(&self.cost_noise)) {
            return Err(Error::Config(format!(
                "cost_noise must lie in [0, 1), got {}",
                self.cost_noise
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidLog {
    impressions: Vec<Impression>,
    seed: u64,
    params: LogGenParams,
}

impl BidLog {
    /// Assembles a log from explicit impressions. Ids must run `0..len` in order.
    pub fn from_impressions(
        impressions: Vec<Impression>,
        seed: u64,
        params: LogGenParams,
    ) -> Result<Self> {
        for (i, imp) in impressions.iter().enumerate() {
            if imp.id != i {
                return Err(Error::Invariant(format!(
                    "impression ids must be 0..len without gaps; position {i} holds id {}",
                    imp.id
                )));
            }
        }
        Ok(Self {
            impressions,
            seed,
            params,
        })
    }

    pub fn impressions(&self) -> &[Impression] {
        &self.impressions
    }

    pub fn len(&self) -> usize {
        self.impressions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.impressions.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &LogGenParams {
        &self.params
    }

    pub fn total_cost(&self) -> f64 {
        self.impressions
            .iter()
            .map(|imp| imp.cost)
            .collect::<CompensatedSum>()
            .value()
    }

    /// Log-wide KPI yield per unit cost, `sum(kpi_i) / sum(cost)` for each KPI.
    pub fn kpi_per_cost(&self) -> [f64; N_KPI] {
        let total_cost = self.total_cost();
        let mut out = [0.0; N_KPI];
        for (k, slot) in out.iter_mut().enumerate() {
            let total: CompensatedSum = self.impressions.iter().map(|imp| imp.kpi_values[k]).collect();
            *slot = if total_cost > 0.0 {
                total.value() / total_cost
            } else {
                0.0
            };
        }
        out
    }
}

/// Draws a synthetic log. `(params, seed)` fully determine the result.
pub fn generate_log(params: &LogGenParams, seed: u64) -> Result<BidLog> {
    params.validate()?;
    let beta_err = |e: rand_distr::BetaError| Error::Config(format!("beta distribution: {e}"));
    let ctr_dist = Beta::new(params.ctr_alpha, params.ctr_beta).map_err(beta_err)?;
    let cvr_dist = Beta::new(params.cvr_alpha, params.cvr_beta).map_err(beta_err)?;
    let price_dist = LogNormal::new(params.price_mu, params.price_sigma)
        .map_err(|e| Error::Config(format!("log-normal distribution: {e}")))?;
    let noise_dist = if params.cost_noise > 0.0 {
        Some(
            Uniform::new(-params.cost_noise, params.cost_noise)
                .map_err(|e| Error::Config(format!("cost noise: {e}")))?,
        )
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut impressions = Vec::with_capacity(params.n_impressions);
    for id in 0..params.n_impressions {
        // A Beta draw can underflow to exactly zero, which would make the cost zero.
        let ctr: f64 = ctr_dist.sample(&mut rng).max(f64::MIN_POSITIVE);
        let cvr: f64 = cvr_dist.sample(&mut rng);
        let price: f64 = price_dist.sample(&mut rng);
        let noise = noise_dist.map_or(0.0, |d| d.sample(&mut rng));
        let cost = params.cost_base * ctr * (1.0 + noise);
        impressions.push(Impression::new(id, ctr, cvr, price, cost)?);
    }
    BidLog::from_impressions(impressions, seed, params.clone())
}

/// Draws a log whose seed is itself drawn from `rng`; used for per-unit logs.
pub fn generate_log_from_rng<R: Rng + ?Sized>(params: &LogGenParams, rng: &mut R) -> Result<BidLog> {
    generate_log(params, rng.random())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogMetadata {
    schema_version: u32,
    seed: u64,
    n_impressions: usize,
    params: LogGenParams,
}

#[derive(Debug, Serialize, Deserialize)]
struct LogRow {
    id: usize,
    ctr: f64,
    cvr: f64,
    price: f64,
    cost: f64,
}

/// Sidecar metadata path for a log CSV: `foo.csv` becomes `foo.meta.json`.
pub fn metadata_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn save_log(log: &BidLog, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    for imp in &log.impressions {
        writer
            .serialize(LogRow {
                id: imp.id,
                ctr: imp.ctr,
                cvr: imp.cvr,
                price: imp.price,
                cost: imp.cost,
            })
            .map_err(|e| csv_write_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;

    let meta_path = metadata_path(path);
    let meta = LogMetadata {
        schema_version: LOG_SCHEMA_VERSION,
        seed: log.seed,
        n_impressions: log.len(),
        params: log.params.clone(),
    };
    let file = File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &meta).map_err(|e| Error::Malformed {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    out.write_all(b"\n").map_err(|e| Error::io(&meta_path, e))?;
    out.flush().map_err(|e| Error::io(&meta_path, e))
}

pub fn load_log(path: &Path) -> Result<BidLog> {
    let csv_file = File::open(path).map_err(|e| Error::io(path, e))?;
    let meta_path = metadata_path(path);
    let meta_file = File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let raw: serde_json::Value =
        serde_json::from_reader(BufReader::new(meta_file)).map_err(|e| Error::Malformed {
            path: meta_path.clone(),
            message: e.to_string(),
        })?;
    // Check the version before the full parse so a future layout reports a version error.
    let found = raw
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Malformed {
            path: meta_path.clone(),
            message: "missing schema_version".into(),
        })?;
    if found != u64::from(LOG_SCHEMA_VERSION) {
        return Err(Error::SchemaVersion {
            path: meta_path,
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: LOG_SCHEMA_VERSION,
        });
    }
    let meta: LogMetadata = serde_json::from_value(raw).map_err(|e| Error::Malformed {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;

    let mut reader = csv::Reader::from_reader(BufReader::new(csv_file));
    let headers = reader.headers().map_err(|e| csv_read_error(path, e))?.clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            message: format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut impressions = Vec::with_capacity(meta.n_impressions);
    for row in reader.deserialize::<LogRow>() {
        let row = row.map_err(|e| csv_read_error(path, e))?;
        impressions.push(Impression::new(row.id, row.ctr, row.cvr, row.price, row.cost)?);
    }
    if impressions.len() != meta.n_impressions {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            message: format!(
                "metadata declares {} impressions, file holds {}",
                meta.n_impressions,
                impressions.len()
            ),
        });
    }
    BidLog::from_impressions(impressions, meta.seed, meta.params)
}

fn csv_read_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io(path, io);
        }
        unreachable!("is_io_error implies an Io kind");
    }
    Error::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn csv_write_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Malformed {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn default_log_respects_invariants() {
        let log = generate_log(&LogGenParams::default(), 7).unwrap();
        assert_eq!(log.len(), 10_000);
        for (i, imp) in log.impressions().iter().enumerate() {
            assert_eq!(imp.id, i);
            assert_eq!(imp.kpi_values[0], 1.0);
            assert!((0.0..=1.0).contains(&imp.kpi_values[1]));
            assert!(imp.kpi_values[2] >= 0.0);
            assert!(imp.cost > 0.0);
        }
        let mean_ctr = log.impressions().iter().map(|i| i.ctr).sum::<f64>() / log.len() as f64;
        // Beta(2, 50) has mean 2/52.
        assert!((0.02..=0.06).contains(&mean_ctr), "mean ctr {mean_ctr}");
        assert!((mean_ctr - 2.0 / 52.0).abs() < 0.002);
    }

    #[test]
    fn single_impression_log() {
        let log = generate_log(&LogGenParams::with_impressions(1), 0).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.impressions()[0].kpi_values[0], 1.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let p = LogGenParams::with_impressions(500);
        assert_eq!(generate_log(&p, 11).unwrap(), generate_log(&p, 11).unwrap());
        assert_ne!(generate_log(&p, 11).unwrap(), generate_log(&p, 12).unwrap());
    }

    #[test]
    fn clicks_and_value_per_click_are_not_collinear() {
        let log = generate_log(&LogGenParams::default(), 3).unwrap();
        let ctr: Vec<f64> = log.impressions().iter().map(|i| i.kpi_values[1]).collect();
        let gmv_per_click: Vec<f64> = log
            .impressions()
            .iter()
            .map(|i| i.kpi_values[2] / i.kpi_values[1])
            .collect();
        assert!(pearson(&ctr, &gmv_per_click) < 1.0 - 1e-6);
    }

    #[test]
    fn rejects_bad_parameters() {
        for p in [
            LogGenParams {
                ctr_alpha: 0.0,
                ..Default::default()
            },
            LogGenParams {
                cvr_beta: -1.0,
                ..Default::default()
            },
            LogGenParams {
                n_impressions: 0,
                ..Default::default()
            },
            LogGenParams {
                cost_noise: 1.0,
                ..Default::default()
            },
            LogGenParams {
                price_sigma: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(matches!(generate_log(&p, 1), Err(Error::Config(_))), "{p:?}");
        }
    }

    #[test]
    fn impression_invariants_are_enforced() {
        assert!(Impression::new(0, 0.1, 0.1, 10.0, 0.0).is_err());
        assert!(Impression::new(0, 1.5, 0.1, 10.0, 1.0).is_err());
        assert!(Impression::new(0, 0.1, 0.1, -1.0, 1.0).is_err());
        let imp = Impression::new(4, 0.5, 0.2, 10.0, 1.0).unwrap();
        assert_eq!(imp.kpi_values, [1.0, 0.5, 1.0]);
    }

    #[test]
    fn ids_must_be_contiguous() {
        let a = Impression::new(0, 0.1, 0.1, 1.0, 1.0).unwrap();
        let b = Impression::new(2, 0.1, 0.1, 1.0, 1.0).unwrap();
        assert!(matches!(
            BidLog::from_impressions(vec![a, b], 0, LogGenParams::default()),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn kpi_per_cost_matches_manual_ratio() {
        let log = generate_log(&LogGenParams::with_impressions(200), 5).unwrap();
        let total: f64 = log.impressions().iter().map(|i| i.cost).sum();
        let clicks: f64 = log.impressions().iter().map(|i| i.ctr).sum();
        let scale = log.kpi_per_cost();
        assert!((scale[0] - 200.0 / total).abs() < 1e-12);
        assert!((scale[1] - clicks / total).abs() < 1e-12);
    }
}
