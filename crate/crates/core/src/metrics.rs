//! Evaluation metrics for intervals and point predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::k_hard;

fn check(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("lengths {a} and {b} differ")));
    }
    if a == 0 {
        return Err(Error::Shape("metric over zero samples".into()));
    }
    Ok(())
}

/// Fraction of targets inside their closed interval.
pub fn picp(y: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64> {
    check(y.len(), lower.len())?;
    let k = k_hard(y, lower, upper)?;
    Ok(k.iter().filter(|&&hit| hit).count() as f64 / y.len() as f64)
}

/// Mean interval width.
pub fn mpiw(lower: &[f64], upper: &[f64]) -> Result<f64> {
    check(lower.len(), upper.len())?;
    Ok(upper.iter().zip(lower).map(|(u, l)| u - l).sum::<f64>() / upper.len() as f64)
}

pub fn rmse(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    check(y_hat.len(), y.len())?;
    let sq: f64 = y_hat.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sq / y.len() as f64).sqrt())
}

pub fn mae(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    check(y_hat.len(), y.len())?;
    Ok(y_hat.iter().zip(y).map(|(p, t)| (p - t).abs()).sum::<f64>() / y.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub picp: f64,
    pub mpiw: f64,
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
}

impl MetricsRecord {
    pub fn compute(y: &[f64], lower: &[f64], upper: &[f64], value: &[f64]) -> Result<Self> {
        check(y.len(), upper.len())?;
        Ok(Self {
            picp: picp(y, lower, upper)?,
            mpiw: mpiw(lower, upper)?,
            rmse: rmse(value, y)?,
            mae: mae(value, y)?,
            n: y.len(),
        })
    }
}

/// Mean and standard error of the mean across splits.
///
/// `stderr` is `None` for a single split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("cannot summarize zero values".into()));
        }
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            Some((var / m).sqrt())
        } else {
            None
        };
        Ok(Self { mean, stderr })
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.stderr {
            Some(se) => write!(f, "{:.4} ± {:.4}", self.mean, se),
            None => write!(f, "{:.4} ± NA", self.mean),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub picp: Summary,
    pub mpiw: Summary,
    pub rmse: Summary,
    pub mae: Summary,
    pub splits: usize,
}

pub fn aggregate_splits(records: &[MetricsRecord]) -> Result<AggregateMetrics> {
    let column = |f: fn(&MetricsRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
    Ok(AggregateMetrics {
        picp: Summary::of(&column(|r| r.picp))?,
        mpiw: Summary::of(&column(|r| r.mpiw))?,
        rmse: Summary::of(&column(|r| r.rmse))?,
        mae: Summary::of(&column(|r| r.mae))?,
        splits: records.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picp_cases() {
        assert_eq!(picp(&[0.0, 0.5], &[-1.0, -1.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(picp(&[0.0, 5.0], &[-1.0, -1.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert!(picp(&[], &[], &[]).is_err());
    }

    #[test]
    fn mpiw_cases() {
        assert_eq!(mpiw(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mpiw(&[0.0, 1.0], &[1.0, 3.0]).unwrap(), 1.5);
        assert_eq!(mpiw(&[0.0, 1.0], &[1.5, 3.5]).unwrap(), 2.0);
    }

    #[test]
    fn error_metrics() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let r = rmse(&[3.0, -4.0], &[0.0, 0.0]).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&[3.0, -4.0], &[0.0, 0.0]).unwrap(), 3.5);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn aggregate_cases() {
        let rec = |picp: f64| MetricsRecord {
            picp,
            mpiw: 1.0,
            rmse: 2.0,
            mae: 1.5,
            n: 10,
        };
        let agg = aggregate_splits(&[rec(1.0), rec(3.0)]).unwrap();
        assert_eq!(agg.picp.mean, 2.0);
        assert_eq!(agg.picp.stderr, Some(1.0));
        assert_eq!(agg.mpiw.stderr, Some(0.0));
        let single = aggregate_splits(&[rec(0.9)]).unwrap();
        assert_eq!(single.picp.stderr, None);
        assert!(aggregate_splits(&[]).is_err());
    }

    #[test]
    fn twenty_value_summary() {
        // Computed by hand: values 1..=20 have mean 10.5, sample variance 35,
        // stderr sqrt(35 / 20).
        let values: Vec<f64> = (1..=20).map(f64::from).collect();
        let s = Summary::of(&values).unwrap();
        assert_eq!(s.mean, 10.5);
        assert!((s.stderr.unwrap() - (35.0f64 / 20.0).sqrt()).abs() < 1e-14);
    }
}
