use serde::{Deserialize, Serialize};

/// Elementwise nonlinearities usable inside the network and on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softplus,
    Identity,
}

impl Activation {
    #[inline]
    pub fn value(self, u: f64) -> f64 {
        match self {
            Activation::Relu => u.max(0.0),
            Activation::Softplus => u.max(0.0) + (-u.abs()).exp().ln_1p(),
            Activation::Identity => u,
        }
    }

    /// `(g(u), g'(u), g''(u), g'''(u))`.
    ///
    /// ReLU uses the convention g'(0) = 0.
    #[inline]
    pub fn derivs(self, u: f64) -> [f64; 4] {
        match self {
            Activation::Relu => {
                if u > 0.0 {
                    [u, 1.0, 0.0, 0.0]
                } else {
                    [0.0, 0.0, 0.0, 0.0]
                }
            }
            Activation::Softplus => {
                let s = sigmoid(u);
                let ds = s * (1.0 - s);
                [self.value(u), s, ds, ds * (1.0 - 2.0 * s)]
            }
            Activation::Identity => [u, 1.0, 0.0, 0.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
            Activation::Identity => "identity",
        }
    }
}

#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}
