use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element-wise non-linearities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    Sigmoid,
    Softplus,
    Tanh,
    Relu,
    /// `f(x) = alpha * x` for `x < 0`, `x` otherwise.
    LeakyRelu { alpha: f64 },
    Identity,
}

impl ActivationKind {
    pub fn leaky_relu_default() -> Self {
        ActivationKind::LeakyRelu { alpha: 0.2 }
    }

    pub fn validate(&self) -> Result<()> {
        if let ActivationKind::LeakyRelu { alpha } = self {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                return Err(Error::Config(format!(
                    "leaky-relu alpha must lie in (0,1), got {alpha}"
                )));
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            ActivationKind::Softplus => {
                // ln(1+e^x) without overflow for large |x|.
                if x > 30.0 {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu { alpha } => {
                if x < 0.0 {
                    alpha * x
                } else {
                    x
                }
            }
            ActivationKind::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation input.
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::Sigmoid => {
                let s = self.apply(x);
                s * (1.0 - s)
            }
            ActivationKind::Softplus => 1.0 / (1.0 + (-x).exp()),
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::LeakyRelu { alpha } => {
                if x < 0.0 {
                    alpha
                } else {
                    1.0
                }
            }
            ActivationKind::Identity => 1.0,
        }
    }

    pub fn apply_slice(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "softplus" => Ok(ActivationKind::Softplus),
            "tanh" => Ok(ActivationKind::Tanh),
            "relu" => Ok(ActivationKind::Relu),
            "leaky-relu" => Ok(ActivationKind::leaky_relu_default()),
            "identity" => Ok(ActivationKind::Identity),
            other => {
                if let Some(alpha) = other
                    .strip_prefix("leaky-relu(")
                    .and_then(|rest| rest.strip_suffix(')'))
                {
                    let alpha: f64 = alpha
                        .parse()
                        .map_err(|_| Error::Config(format!("bad leaky-relu alpha in '{other}'")))?;
                    let kind = ActivationKind::LeakyRelu { alpha };
                    kind.validate()?;
                    Ok(kind)
                } else {
                    Err(Error::Config(format!("unknown activation '{other}'")))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_matches_definition() {
        let act = ActivationKind::LeakyRelu { alpha: 0.2 };
        assert_eq!(act.apply_slice(&[-1.0, 0.0, 2.0]), vec![-0.2, 0.0, 2.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(ActivationKind::Relu.apply(-3.0), 0.0);
    }

    #[test]
    fn softplus_at_zero_is_ln_two() {
        assert!((ActivationKind::Softplus.apply(0.0) - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let kinds = [
            ActivationKind::Sigmoid,
            ActivationKind::Softplus,
            ActivationKind::Tanh,
            ActivationKind::LeakyRelu { alpha: 0.2 },
        ];
        for kind in kinds {
            for &x in &[-2.0, -0.5, 0.3, 1.7] {
                let h = 1e-6;
                let fd = (kind.apply(x + h) - kind.apply(x - h)) / (2.0 * h);
                assert!(
                    (kind.derivative(x) - fd).abs() < 1e-6,
                    "{kind:?} at {x}: {} vs {fd}",
                    kind.derivative(x)
                );
            }
        }
        // Relu away from the kink.
        assert_eq!(ActivationKind::Relu.derivative(1.0), 1.0);
        assert_eq!(ActivationKind::Relu.derivative(-1.0), 0.0);
    }

    #[test]
    fn parse_round_trip() {
        let parsed: ActivationKind = "leaky-relu(0.3)".parse().unwrap();
        assert_eq!(parsed, ActivationKind::LeakyRelu { alpha: 0.3 });
        assert!("leaky-relu(1.5)".parse::<ActivationKind>().is_err());
        assert!("swish".parse::<ActivationKind>().is_err());
    }
}
