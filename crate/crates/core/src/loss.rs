//! Training objectives for interval-producing networks.
//!
//! Every network in this crate emits raw head values per sample. The interval
//! variants read three heads in the fixed order (upper, lower, auxiliary
//! logit); the Gaussian baseline reads two (mean, raw variance). The scalar
//! losses below operate on already-decoded [`PIOutput`]s, while
//! [`objective`] works on raw heads and also returns the gradient with
//! respect to them, which is what the network's reverse pass consumes.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominator floor for the captured-width term when nothing is captured.
pub const CAPTURE_EPSILON: f64 = 1e-7;

/// Variance floor applied after the softplus link of the Gaussian head.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Interval loss mixed with a value loss on `v*U + (1-v)*L`.
    Piven,
    /// Interval loss only; the value prediction is the interval midpoint.
    Qd,
    /// Interval loss plus a value loss on the raw auxiliary head.
    Poo,
    /// Like `Piven` but with `v` pinned to one half.
    Moi,
    /// Mean/variance head trained by Gaussian negative log-likelihood.
    GaussNll,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Piven,
        Variant::Qd,
        Variant::Poo,
        Variant::Moi,
        Variant::GaussNll,
    ];

    /// Number of raw output units the network needs for this variant.
    pub fn head_count(self) -> usize {
        match self {
            Variant::GaussNll => 2,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Piven => "piven",
            Variant::Qd => "qd",
            Variant::Poo => "poo",
            Variant::Moi => "moi",
            Variant::GaussNll => "gauss_nll",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "piven" => Ok(Variant::Piven),
            "qd" => Ok(Variant::Qd),
            "poo" => Ok(Variant::Poo),
            "moi" => Ok(Variant::Moi),
            "gauss_nll" | "gauss" | "de" => Ok(Variant::GaussNll),
            other => Err(Error::Config(format!("unknown loss variant `{other}`"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-sample regression objective used for the value term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointLoss {
    #[default]
    SquaredError,
    AbsoluteError,
}

impl PointLoss {
    pub fn value(self, prediction: f64, target: f64) -> f64 {
        let r = prediction - target;
        match self {
            PointLoss::SquaredError => r * r,
            PointLoss::AbsoluteError => r.abs(),
        }
    }

    /// Derivative with respect to the prediction.
    pub fn derivative(self, prediction: f64, target: f64) -> f64 {
        let r = prediction - target;
        match self {
            PointLoss::SquaredError => 2.0 * r,
            PointLoss::AbsoluteError => {
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Miscoverage target; the interval aims for coverage `1 - alpha`.
    pub alpha: f64,
    /// Weight of the coverage penalty against interval width.
    pub lambda: f64,
    /// Sigmoid sharpness of the soft capture indicator.
    pub s: f64,
    /// Mixing weight between the interval loss and the value loss.
    pub beta: f64,
    pub variant: Variant,
    pub point_loss: PointLoss,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            lambda: 15.0,
            s: 160.0,
            beta: 0.5,
            variant: Variant::Piven,
            point_loss: PointLoss::SquaredError,
        }
    }
}

impl LossConfig {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::Config(format!(
                "softening factor s must be positive, got {}",
                self.s
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Decoded per-sample network output.
///
/// `value` is derived from the other fields and depends on the variant that
/// produced the output: `v*U + (1-v)*L` for the coupled head, the midpoint
/// when `v` is pinned, or the raw auxiliary head for the decoupled variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PIOutput {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub v: Vec<f64>,
    pub value: Vec<f64>,
}

impl PIOutput {
    /// Builds an output whose value prediction is the convex combination.
    pub fn new(upper: Vec<f64>, lower: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let value = value_prediction(&v, &upper, &lower)?;
        Ok(Self {
            upper,
            lower,
            v,
            value,
        })
    }

    /// Output with `v` pinned to one half, i.e. midpoint value prediction.
    pub fn midpoint(upper: Vec<f64>, lower: Vec<f64>) -> Result<Self> {
        let v = vec![0.5; upper.len()];
        Self::new(upper, lower, v)
    }

    /// Decodes raw network heads according to `variant`.
    ///
    /// The Gaussian variant has no interval heads; use
    /// [`crate::ensemble::aggregate_gaussian`] for it instead.
    pub fn from_heads(raw: ArrayView2<f64>, variant: Variant) -> Result<Self> {
        if raw.ncols() != 3 || variant == Variant::GaussNll {
            return Err(Error::Shape(format!(
                "variant {variant} cannot be decoded from {} heads",
                raw.ncols()
            )));
        }
        let upper = raw.column(0).to_vec();
        let lower = raw.column(1).to_vec();
        match variant {
            Variant::Piven => {
                let v = raw.column(2).iter().map(|&z| sigmoid(z)).collect();
                Self::new(upper, lower, v)
            }
            Variant::Qd | Variant::Moi => Self::midpoint(upper, lower),
            Variant::Poo => {
                let v = raw.column(2).iter().map(|&z| sigmoid(z)).collect();
                Ok(Self {
                    upper,
                    lower,
                    v,
                    value: raw.column(2).to_vec(),
                })
            }
            Variant::GaussNll => unreachable!(),
        }
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.lower.len() != n || self.v.len() != n || self.value.len() != n || self.len() != n {
            return Err(Error::Shape(format!(
                "output of length {} (lower {}, v {}, value {}) against {n} targets",
                self.len(),
                self.lower.len(),
                self.v.len(),
                self.value.len()
            )));
        }
        Ok(())
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn same_len(a: usize, b: usize, c: usize) -> Result<()> {
    if a != b || b != c {
        return Err(Error::Shape(format!("lengths {a}, {b}, {c} differ")));
    }
    Ok(())
}

fn non_empty(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    Ok(())
}

/// Hard capture indicator; the interval is closed on both ends.
pub fn k_hard(y: &[f64], lower: &[f64], upper: &[f64]) -> Result<Vec<bool>> {
    same_len(y.len(), lower.len(), upper.len())?;
    Ok(y.iter()
        .zip(lower)
        .zip(upper)
        .map(|((&y, &l), &u)| l <= y && y <= u)
        .collect())
}

/// Soft capture indicator `sigmoid(s (y - L)) * sigmoid(s (U - y))`.
pub fn k_soft(y: &[f64], lower: &[f64], upper: &[f64], s: f64) -> Result<Vec<f64>> {
    if !(s > 0.0) {
        return Err(Error::Config(format!(
            "softening factor must be positive, got {s}"
        )));
    }
    same_len(y.len(), lower.len(), upper.len())?;
    Ok(y.iter()
        .zip(lower)
        .zip(upper)
        .map(|((&y, &l), &u)| sigmoid(s * (y - l)) * sigmoid(s * (u - y)))
        .collect())
}

/// Mean width over captured samples only; zero when nothing is captured.
pub fn mpiw_capt(upper: &[f64], lower: &[f64], k: &[bool]) -> Result<f64> {
    same_len(upper.len(), lower.len(), k.len())?;
    let mut width = 0.0;
    let mut captured = 0.0;
    for ((&u, &l), &hit) in upper.iter().zip(lower).zip(k) {
        if hit {
            width += u - l;
            captured += 1.0;
        }
    }
    Ok(width / f64::max(captured, CAPTURE_EPSILON))
}

fn penalty(alpha: f64, lambda: f64, n: usize, picp_soft: f64) -> f64 {
    let gap = (1.0 - alpha) - picp_soft;
    (n as f64).sqrt() * lambda * gap.max(0.0).powi(2)
}

/// Interval loss: captured width plus the quadratic coverage penalty.
///
/// The hard indicator selects samples for the width term; the soft indicator
/// drives the coverage estimate inside the penalty.
pub fn loss_pi(output: &PIOutput, y: &[f64], config: &LossConfig) -> Result<f64> {
    non_empty(y.len())?;
    same_len(output.upper.len(), output.lower.len(), y.len())?;
    let k = k_hard(y, &output.lower, &output.upper)?;
    let width = mpiw_capt(&output.upper, &output.lower, &k)?;
    let soft = k_soft(y, &output.lower, &output.upper, config.s)?;
    let picp_soft = soft.iter().sum::<f64>() / y.len() as f64;
    Ok(width + penalty(config.alpha, config.lambda, y.len(), picp_soft))
}

/// Convex combination `v*U + (1-v)*L`, elementwise.
///
/// The result is clamped to the closed hull of the bounds so rounding can
/// never place it outside.
pub fn value_prediction(v: &[f64], upper: &[f64], lower: &[f64]) -> Result<Vec<f64>> {
    same_len(v.len(), upper.len(), lower.len())?;
    Ok(v.iter()
        .zip(upper)
        .zip(lower)
        .map(|((&v, &u), &l)| mix(v, u, l))
        .collect())
}

fn mix(v: f64, u: f64, l: f64) -> f64 {
    let p = v * u + (1.0 - v) * l;
    if u.is_nan() || l.is_nan() {
        return f64::NAN;
    }
    p.clamp(u.min(l), u.max(l))
}

fn mean_point_loss(prediction: &[f64], y: &[f64], point_loss: PointLoss) -> f64 {
    prediction
        .iter()
        .zip(y)
        .map(|(&p, &t)| point_loss.value(p, t))
        .sum::<f64>()
        / y.len() as f64
}

/// Mean point loss of the output's value prediction.
pub fn loss_v(output: &PIOutput, y: &[f64], config: &LossConfig) -> Result<f64> {
    non_empty(y.len())?;
    output.check_len(y.len())?;
    Ok(mean_point_loss(&output.value, y, config.point_loss))
}

pub fn loss_piven(output: &PIOutput, y: &[f64], config: &LossConfig) -> Result<f64> {
    let pi = loss_pi(output, y, config)?;
    let v = loss_v(output, y, config)?;
    Ok(config.beta * pi + (1.0 - config.beta) * v)
}

/// Width/coverage only. Identical to [`loss_pi`].
pub fn loss_qd(output: &PIOutput, y: &[f64], config: &LossConfig) -> Result<f64> {
    loss_pi(output, y, config)
}

/// Interval loss plus the point loss of the decoupled value head.
///
/// `output.value` must hold the raw auxiliary head (see
/// [`PIOutput::from_heads`] with [`Variant::Poo`]).
pub fn loss_poo(output: &PIOutput, y: &[f64], config: &LossConfig) -> Result<f64> {
    let pi = loss_pi(output, y, config)?;
    let v = loss_v(output, y, config)?;
    Ok(pi + v)
}

/// [`loss_piven`] with `v` pinned to one half; the auxiliary head is ignored.
pub fn loss_moi(output: &PIOutput, y: &[f64], config: &LossConfig) -> Result<f64> {
    let pinned = PIOutput::midpoint(output.upper.clone(), output.lower.clone())?;
    loss_piven(&pinned, y, config)
}

/// Gaussian negative log-likelihood with the additive constant dropped.
pub fn loss_gauss_nll(mean: &[f64], variance: &[f64], y: &[f64]) -> Result<f64> {
    same_len(mean.len(), variance.len(), y.len())?;
    non_empty(y.len())?;
    let mut total = 0.0;
    for ((&mu, &var), &t) in mean.iter().zip(variance).zip(y) {
        if !(var > 0.0) {
            return Err(Error::Data(format!("non-positive variance {var}")));
        }
        total += 0.5 * var.ln() + (t - mu).powi(2) / (2.0 * var);
    }
    Ok(total / y.len() as f64)
}

/// Dispatches to the scalar loss for `config.variant` on decoded outputs.
pub fn loss_for(output: &PIOutput, y: &[f64], config: &LossConfig) -> Result<f64> {
    match config.variant {
        Variant::Piven => loss_piven(output, y, config),
        Variant::Qd => loss_qd(output, y, config),
        Variant::Poo => loss_poo(output, y, config),
        Variant::Moi => loss_moi(output, y, config),
        Variant::GaussNll => Err(Error::Config(
            "the Gaussian variant has no interval heads".into(),
        )),
    }
}

/// Loss value and its gradient with respect to the raw heads.
///
/// `raw` is `n x head_count`; the returned gradient has the same shape.
pub fn objective(
    raw: ArrayView2<f64>,
    y: ArrayView1<f64>,
    config: &LossConfig,
) -> Result<(f64, Array2<f64>)> {
    let n = raw.nrows();
    non_empty(n)?;
    if y.len() != n {
        return Err(Error::Shape(format!(
            "{n} outputs against {} targets",
            y.len()
        )));
    }
    let heads = config.variant.head_count();
    if raw.ncols() != heads {
        return Err(Error::Shape(format!(
            "variant {} expects {heads} heads, got {}",
            config.variant,
            raw.ncols()
        )));
    }
    let mut grad = Array2::zeros(raw.raw_dim());
    let loss = match config.variant {
        Variant::GaussNll => gauss_term(raw, y, &mut grad),
        Variant::Qd => pi_term(raw, y, config, 1.0, &mut grad),
        Variant::Piven => {
            let pi = pi_term(raw, y, config, config.beta, &mut grad);
            let v = value_term(
                raw,
                y,
                config,
                ValueHead::Coupled,
                1.0 - config.beta,
                &mut grad,
            );
            config.beta * pi + (1.0 - config.beta) * v
        }
        Variant::Moi => {
            let pi = pi_term(raw, y, config, config.beta, &mut grad);
            let v = value_term(
                raw,
                y,
                config,
                ValueHead::Pinned,
                1.0 - config.beta,
                &mut grad,
            );
            config.beta * pi + (1.0 - config.beta) * v
        }
        Variant::Poo => {
            let pi = pi_term(raw, y, config, 1.0, &mut grad);
            let v = value_term(raw, y, config, ValueHead::Decoupled, 1.0, &mut grad);
            pi + v
        }
    };
    Ok((loss, grad))
}

/// Adds `weight * dL_PI/d(U, L)` into columns 0 and 1; returns `L_PI`.
fn pi_term(
    raw: ArrayView2<f64>,
    y: ArrayView1<f64>,
    config: &LossConfig,
    weight: f64,
    grad: &mut Array2<f64>,
) -> f64 {
    let n = raw.nrows();
    let s = config.s;

    let mut width = 0.0;
    let mut captured = 0.0;
    let mut soft_sum = 0.0;
    for i in 0..n {
        let (u, l, t) = (raw[[i, 0]], raw[[i, 1]], y[i]);
        if l <= t && t <= u {
            width += u - l;
            captured += 1.0;
        }
        soft_sum += sigmoid(s * (t - l)) * sigmoid(s * (u - t));
    }
    let denom = f64::max(captured, CAPTURE_EPSILON);
    let picp_soft = soft_sum / n as f64;
    let gap = ((1.0 - config.alpha) - picp_soft).max(0.0);
    let root_n = (n as f64).sqrt();
    let loss = width / denom + root_n * config.lambda * gap * gap;

    // dPenalty/dPICP_soft; zero once the coverage target is met.
    let d_picp = -2.0 * root_n * config.lambda * gap;
    for i in 0..n {
        let (u, l, t) = (raw[[i, 0]], raw[[i, 1]], y[i]);
        let mut du = 0.0;
        let mut dl = 0.0;
        if l <= t && t <= u {
            du += 1.0 / denom;
            dl -= 1.0 / denom;
        }
        if gap > 0.0 {
            let a = sigmoid(s * (t - l));
            let b = sigmoid(s * (u - t));
            // sigma'(z) = sigma(z) sigma(-z), written to avoid 1 - sigma cancellation.
            let da = a * sigmoid(-s * (t - l));
            let db = b * sigmoid(-s * (u - t));
            let scale = d_picp / n as f64;
            du += scale * a * db * s;
            dl -= scale * da * b * s;
        }
        grad[[i, 0]] += weight * du;
        grad[[i, 1]] += weight * dl;
    }
    loss
}

#[derive(Clone, Copy)]
enum ValueHead {
    /// `v = sigmoid(raw)`, prediction `v*U + (1-v)*L`.
    Coupled,
    /// `v = 1/2`; the raw auxiliary head receives no gradient.
    Pinned,
    /// The raw auxiliary head is the prediction.
    Decoupled,
}

fn value_term(
    raw: ArrayView2<f64>,
    y: ArrayView1<f64>,
    config: &LossConfig,
    head: ValueHead,
    weight: f64,
    grad: &mut Array2<f64>,
) -> f64 {
    let n = raw.nrows();
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let (u, l, z, t) = (raw[[i, 0]], raw[[i, 1]], raw[[i, 2]], y[i]);
        match head {
            ValueHead::Coupled => {
                let v = sigmoid(z);
                let p = v * u + (1.0 - v) * l;
                total += config.point_loss.value(p, t);
                let dp = weight * inv_n * config.point_loss.derivative(p, t);
                grad[[i, 0]] += dp * v;
                grad[[i, 1]] += dp * (1.0 - v);
                grad[[i, 2]] += dp * (u - l) * v * sigmoid(-z);
            }
            ValueHead::Pinned => {
                let p = 0.5 * u + 0.5 * l;
                total += config.point_loss.value(p, t);
                let dp = weight * inv_n * config.point_loss.derivative(p, t);
                grad[[i, 0]] += dp * 0.5;
                grad[[i, 1]] += dp * 0.5;
            }
            ValueHead::Decoupled => {
                total += config.point_loss.value(z, t);
                grad[[i, 2]] += weight * inv_n * config.point_loss.derivative(z, t);
            }
        }
    }
    total * inv_n
}

/// Variance link of the Gaussian head.
pub fn gaussian_variance(raw: f64) -> f64 {
    softplus(raw) + VARIANCE_FLOOR
}

fn gauss_term(raw: ArrayView2<f64>, y: ArrayView1<f64>, grad: &mut Array2<f64>) -> f64 {
    let n = raw.nrows();
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let (mu, z, t) = (raw[[i, 0]], raw[[i, 1]], y[i]);
        let var = gaussian_variance(z);
        let r = t - mu;
        total += 0.5 * var.ln() + r * r / (2.0 * var);
        grad[[i, 0]] = -r / var * inv_n;
        let dvar = 0.5 / var - r * r / (2.0 * var * var);
        grad[[i, 1]] = dvar * sigmoid(z) * inv_n;
    }
    total * inv_n
}
