use serde::{Deserialize, Serialize};

use crate::autodiff::Activation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDims {
    pub inp: usize,
    pub out: usize,
}

impl LayerDims {
    pub const fn new(inp: usize, out: usize) -> Self {
        LayerDims { inp, out }
    }

    pub fn num_params(&self) -> usize {
        self.inp * self.out + self.out
    }
}

/// Architecture of `f(x, y)`: an `x` branch and a `y` branch whose outputs
/// are concatenated (x features first) and fed through the joint stack.
///
/// The nonlinearity follows every layer except the final joint layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub x_branch: Vec<LayerDims>,
    pub y_branch: Vec<LayerDims>,
    pub joint: Vec<LayerDims>,
    pub activation: Activation,
}

/// Position of one layer inside the flat parameter vector. Weights are
/// stored row-major (`out` rows of `inp` columns) followed by the `out`
/// biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub inp: usize,
    pub out: usize,
    pub w: usize,
    pub b: usize,
}

impl LayerSlot {
    #[inline]
    pub fn weight(&self, o: usize, j: usize) -> usize {
        self.w + o * self.inp + j
    }
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec {
            x_branch: vec![LayerDims::new(1, 10), LayerDims::new(10, 10)],
            y_branch: vec![LayerDims::new(1, 10)],
            joint: vec![LayerDims::new(20, 10), LayerDims::new(10, 10), LayerDims::new(10, 10), LayerDims::new(10, 1)],
            activation: Activation::Relu,
        }
    }
}

impl MlpSpec {
    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(|l| l.num_params()).sum()
    }

    fn layers(&self) -> impl Iterator<Item = &LayerDims> {
        self.x_branch.iter().chain(&self.y_branch).chain(&self.joint)
    }

    pub fn x_features(&self) -> usize {
        self.x_branch.last().map_or(1, |l| l.out)
    }

    pub fn y_features(&self) -> usize {
        self.y_branch.last().map_or(1, |l| l.out)
    }

    pub fn validate(&self) -> Result<()> {
        check_chain("x_branch", &self.x_branch, 1)?;
        check_chain("y_branch", &self.y_branch, 1)?;
        if self.joint.is_empty() {
            return Err(Error::Config("joint stack must have at least one layer".into()));
        }
        check_chain("joint", &self.joint, self.x_features() + self.y_features())?;
        if self.joint.last().unwrap().out != 1 {
            return Err(Error::Config("final joint layer must output a scalar".into()));
        }
        Ok(())
    }

    /// Parameter offsets for (x branch, y branch, joint), in layout order.
    pub fn slots(&self) -> (Vec<LayerSlot>, Vec<LayerSlot>, Vec<LayerSlot>) {
        let mut off = 0;
        let mut place = |dims: &[LayerDims]| -> Vec<LayerSlot> {
            dims.iter()
                .map(|d| {
                    let s = LayerSlot { inp: d.inp, out: d.out, w: off, b: off + d.inp * d.out };
                    off += d.num_params();
                    s
                })
                .collect()
        };
        let x = place(&self.x_branch);
        let y = place(&self.y_branch);
        let j = place(&self.joint);
        (x, y, j)
    }
}

fn check_chain(name: &str, layers: &[LayerDims], input: usize) -> Result<()> {
    let mut prev = input;
    for (i, l) in layers.iter().enumerate() {
        if l.inp != prev || l.out == 0 {
            return Err(Error::Config(format!("{name}[{i}] expects input {} but receives {prev}", l.inp)));
        }
        prev = l.out;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_parameter_count() {
        let s = MlpSpec::default();
        s.validate().unwrap();
        assert_eq!(s.num_params(), 20 + 110 + 20 + 210 + 110 + 110 + 11);
        assert_eq!(s.num_params(), 591);
    }

    #[test]
    fn mismatched_joint_rejected() {
        let mut s = MlpSpec::default();
        s.joint[0].inp = 19;
        assert!(s.validate().is_err());
        let mut s = MlpSpec::default();
        s.joint.last_mut().unwrap().out = 2;
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn count_matches_layer_formula(
            xs in proptest::collection::vec(1usize..6, 0..3),
            ys in proptest::collection::vec(1usize..6, 0..3),
            js in proptest::collection::vec(1usize..6, 0..3),
        ) {
            let chain = |input: usize, widths: &[usize]| {
                let mut prev = input;
                widths.iter().map(|&w| { let l = LayerDims::new(prev, w); prev = w; l }).collect::<Vec<_>>()
            };
            let x_branch = chain(1, &xs);
            let y_branch = chain(1, &ys);
            let xf = xs.last().copied().unwrap_or(1);
            let yf = ys.last().copied().unwrap_or(1);
            let mut widths = js.clone();
            widths.push(1);
            let joint = chain(xf + yf, &widths);
            let spec = MlpSpec { x_branch, y_branch, joint, activation: Activation::Relu };
            prop_assert!(spec.validate().is_ok());
            let mut expected = 0;
            let mut prev = 1;
            for &w in &xs { expected += prev * w + w; prev = w; }
            prev = 1;
            for &w in &ys { expected += prev * w + w; prev = w; }
            prev = xf + yf;
            for &w in &widths { expected += prev * w + w; prev = w; }
            prop_assert_eq!(spec.num_params(), expected);
            let (a, b, c) = spec.slots();
            let last = c.last().unwrap();
            prop_assert_eq!(last.b + last.out, expected);
            prop_assert_eq!(a.len() + b.len() + c.len(), xs.len() + ys.len() + widths.len());
        }
    }
}
