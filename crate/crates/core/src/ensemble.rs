//! Combining independently trained members into one interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::PIOutput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOutput {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub value: Vec<f64>,
    pub sigma_upper: Vec<f64>,
    pub sigma_lower: Vec<f64>,
}

impl EnsembleOutput {
    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }
}

/// Standard normal quantile, Wichura's AS 241 (PPND16).
///
/// Relative accuracy is about 1e-16 over the open unit interval.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2509.080_928_730_122_7 * r + 33_430.575_583_588_13) * r
            + 67265.770_927_008_7)
            * r
            + 45_921.953_931_549_87)
            * r
            + 13_731.693_765_509_46)
            * r
            + 1971.590_950_306_551_3)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5_226.495_278_852_545 * r + 28729.085_735_721_943) * r
            + 39307.895_800_092_71)
            * r
            + 21213.794_301_586_595)
            * r
            + 5394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return Ok(num / den);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let z = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_344e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_07)
            * r
            + 0.689_767_334_985_100_5)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_887_9)
            * r
            + 1.0;
        num / den
    };
    Ok(if q < 0.0 { -z } else { z })
}

/// Two-sided critical value `z_{alpha/2}`: the standard normal quantile at
/// `1 - alpha/2`.
pub fn z_score(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    inverse_normal_cdf(1.0 - alpha / 2.0)
}

/// Mean shifted by the first value, so identical inputs return that value exactly.
fn shifted_mean(mut values: impl Iterator<Item = f64>, m: usize) -> f64 {
    let Some(first) = values.next() else {
        return f64::NAN;
    };
    first + values.map(|x| x - first).sum::<f64>() / m as f64
}

fn mean_and_std(values: impl Iterator<Item = f64> + Clone, m: usize) -> (f64, f64) {
    let mean = shifted_mean(values.clone(), m);
    if m < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    (mean, var.sqrt())
}

/// Widens the mean member interval by `z_{alpha/2}` across-member standard
/// deviations per bound; the value prediction is the mean member value.
pub fn aggregate_pi(members: &[PIOutput], alpha: f64) -> Result<EnsembleOutput> {
    let first = members
        .first()
        .ok_or_else(|| Error::Data("ensemble has no members".into()))?;
    let n = first.len();
    if let Some((j, bad)) = members.iter().enumerate().find(|(_, o)| o.len() != n) {
        return Err(Error::Shape(format!(
            "member {j} has {} samples, member 0 has {n}",
            bad.len()
        )));
    }
    let z = z_score(alpha)?;
    let m = members.len();
    let mut out = EnsembleOutput {
        upper: Vec::with_capacity(n),
        lower: Vec::with_capacity(n),
        value: Vec::with_capacity(n),
        sigma_upper: Vec::with_capacity(n),
        sigma_lower: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (u_mean, u_sigma) = mean_and_std(members.iter().map(|o| o.upper[i]), m);
        let (l_mean, l_sigma) = mean_and_std(members.iter().map(|o| o.lower[i]), m);
        let value = shifted_mean(members.iter().map(|o| o.value[i]), m);
        out.upper.push(u_mean + z * u_sigma);
        out.lower.push(l_mean - z * l_sigma);
        out.value.push(value);
        out.sigma_upper.push(u_sigma);
        out.sigma_lower.push(l_sigma);
    }
    Ok(out)
}

/// Moment-matches the equally weighted Gaussian mixture of the members and
/// returns `mu ± z_{alpha/2} sigma` with `mu` as the value prediction.
///
/// `sigma_upper` and `sigma_lower` both hold the mixture standard deviation.
pub fn aggregate_gaussian(
    means: &[Vec<f64>],
    variances: &[Vec<f64>],
    alpha: f64,
) -> Result<EnsembleOutput> {
    if means.is_empty() || means.len() != variances.len() {
        return Err(Error::Shape(format!(
            "{} mean vectors against {} variance vectors",
            means.len(),
            variances.len()
        )));
    }
    let n = means[0].len();
    for (j, (mu, var)) in means.iter().zip(variances).enumerate() {
        if mu.len() != n || var.len() != n {
            return Err(Error::Shape(format!("member {j} has mismatched length")));
        }
        if let Some(v) = var.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::Data(format!(
                "member {j} has non-positive variance {v}"
            )));
        }
    }
    let z = z_score(alpha)?;
    let m = means.len() as f64;
    let mut out = EnsembleOutput {
        upper: Vec::with_capacity(n),
        lower: Vec::with_capacity(n),
        value: Vec::with_capacity(n),
        sigma_upper: Vec::with_capacity(n),
        sigma_lower: Vec::with_capacity(n),
    };
    for i in 0..n {
        let mu = means.iter().map(|v| v[i]).sum::<f64>() / m;
        let second = means
            .iter()
            .zip(variances)
            .map(|(mu_j, var_j)| var_j[i] + mu_j[i] * mu_j[i])
            .sum::<f64>()
            / m;
        let sigma = (second - mu * mu).max(0.0).sqrt();
        out.upper.push(mu + z * sigma);
        out.lower.push(mu - z * sigma);
        out.value.push(mu);
        out.sigma_upper.push(sigma);
        out.sigma_lower.push(sigma);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(u: &[f64], l: &[f64], v: &[f64]) -> PIOutput {
        PIOutput::new(u.to_vec(), l.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn quantile_symmetry_and_center() {
        assert_eq!(inverse_normal_cdf(0.5).unwrap(), 0.0);
        for p in [2f64.powi(-30), 0.01, 0.2, 0.4] {
            let a = inverse_normal_cdf(p).unwrap();
            let b = inverse_normal_cdf(1.0 - p).unwrap();
            assert!((a + b).abs() < 1e-9 * b.abs().max(1.0));
        }
        assert!(inverse_normal_cdf(0.0).is_err());
        assert!(inverse_normal_cdf(1.0).is_err());
    }

    #[test]
    fn z_near_one_is_near_zero() {
        assert!(z_score(1.0 - 1e-9).unwrap().abs() < 1e-8);
        assert!(z_score(1.0).is_err());
        assert!(z_score(0.0).is_err());
    }

    #[test]
    fn identical_members_pass_through() {
        let a = member(&[1.0, 2.0], &[-1.0, 0.0], &[0.3, 0.8]);
        let agg = aggregate_pi(&[a.clone(), a.clone(), a.clone()], 0.05).unwrap();
        assert_eq!(agg.upper, a.upper);
        assert_eq!(agg.lower, a.lower);
        for (x, y) in agg.value.iter().zip(&a.value) {
            assert!((x - y).abs() < 1e-15);
        }
        let single = aggregate_pi(std::slice::from_ref(&a), 0.05).unwrap();
        assert_eq!(single.upper, a.upper);
        assert_eq!(single.value, a.value);
    }

    #[test]
    fn two_member_widening() {
        let a = member(&[1.0], &[-1.0], &[0.5]);
        let b = member(&[3.0], &[-1.0], &[0.5]);
        let agg = aggregate_pi(&[a, b], 0.05).unwrap();
        let z = z_score(0.05).unwrap();
        assert!((agg.sigma_upper[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((agg.upper[0] - (2.0 + z * 2f64.sqrt())).abs() < 1e-12);
        assert!((agg.upper[0] - 4.7719).abs() < 1e-4);
        assert_eq!(agg.lower[0], -1.0);
    }

    #[test]
    fn mismatched_members_rejected() {
        let a = member(&[1.0], &[-1.0], &[0.5]);
        let b = member(&[1.0, 2.0], &[-1.0, 0.0], &[0.5, 0.5]);
        assert!(aggregate_pi(&[a, b], 0.05).is_err());
        assert!(aggregate_pi(&[], 0.05).is_err());
    }

    #[test]
    fn gaussian_mixture_moments() {
        let agg =
            aggregate_gaussian(&[vec![0.0], vec![2.0]], &[vec![1.0], vec![1.0]], 0.05).unwrap();
        assert_eq!(agg.value[0], 1.0);
        assert!((agg.sigma_upper[0] - 2f64.sqrt()).abs() < 1e-15);
        let single = aggregate_gaussian(&[vec![1.0]], &[vec![4.0]], 0.05).unwrap();
        let z = z_score(0.05).unwrap();
        assert!((single.upper[0] - (1.0 + 2.0 * z)).abs() < 1e-15);
        assert!(aggregate_gaussian(&[vec![0.0]], &[vec![0.0]], 0.05).is_err());
    }
}
