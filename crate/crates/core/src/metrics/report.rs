//! Evaluation reports: per-image rows plus exactly recomputable aggregates.

use serde::{Deserialize, Serialize};

/// PSNR can be the +inf sentinel, which JSON numbers cannot carry; it is
/// serialized as the string "inf" in that case.
mod psnr_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            v.serialize(s)
        } else {
            "inf".serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum NumOrStr {
            Num(f64),
            Str(String),
        }
        match NumOrStr::deserialize(d)? {
            NumOrStr::Num(v) => Ok(v),
            NumOrStr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            NumOrStr::Str(s) => Err(serde::de::Error::custom(format!("bad psnr value {s}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerImageMetrics {
    pub id: String,
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub perceptual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    #[serde(with = "psnr_serde")]
    pub psnr_mean: f64,
    #[serde(with = "psnr_serde")]
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
    pub perceptual_mean: f64,
    pub perceptual_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_image: Vec<PerImageMetrics>,
    pub aggregates: Aggregates,
    pub config_hash: String,
    pub seed: u64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if !mean.is_finite() {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl MetricsReport {
    pub fn from_rows(per_image: Vec<PerImageMetrics>, config_hash: String, seed: u64) -> Self {
        let aggregates = Self::compute_aggregates(&per_image);
        MetricsReport { per_image, aggregates, config_hash, seed }
    }

    pub fn compute_aggregates(rows: &[PerImageMetrics]) -> Aggregates {
        let psnr: Vec<f64> = rows.iter().map(|r| r.psnr_db).collect();
        let ssim: Vec<f64> = rows.iter().map(|r| r.ssim).collect();
        let lp: Vec<f64> = rows.iter().map(|r| r.perceptual).collect();
        let (psnr_mean, psnr_std) = mean_std(&psnr);
        let (ssim_mean, ssim_std) = mean_std(&ssim);
        let (perceptual_mean, perceptual_std) = mean_std(&lp);
        Aggregates { psnr_mean, psnr_std, ssim_mean, ssim_std, perceptual_mean, perceptual_std }
    }

    /// One CSV line with a fixed column order, for table building.
    pub fn csv_row(&self, label: &str) -> String {
        let a = &self.aggregates;
        format!(
            "{label},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            a.psnr_mean, a.psnr_std, a.ssim_mean, a.ssim_std, a.perceptual_mean, a.perceptual_std
        )
    }

    pub fn csv_header() -> &'static str {
        "label,psnr_mean,psnr_std,ssim_mean,ssim_std,perceptual_mean,perceptual_std"
    }
}
