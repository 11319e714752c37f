//! Initial laws that are mixtures of admissible Gaussian states.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;

use super::{MomentState, SigmaNPoint};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub state: MomentState,
}

/// A finitely supported mixing measure. Components are checked for
/// admissibility each time they are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    components: Vec<MixtureComponent>,
    cumulative: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        let n = components[0].state.n();
        let mut total = 0.0;
        let mut cumulative = Vec::with_capacity(components.len());
        for (i, c) in components.iter().enumerate() {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "weight of component {i} must be positive, got {}",
                    c.weight
                )));
            }
            if c.state.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.state.n(),
                });
            }
            total += c.weight;
            cumulative.push(total);
        }
        for c in &mut cumulative {
            *c /= total;
        }
        Ok(Self {
            components,
            cumulative,
        })
    }

    pub fn point_mass(point: SigmaNPoint) -> Self {
        Self {
            components: alloc::vec![MixtureComponent {
                weight: 1.0,
                state: point.into_state(),
            }],
            cumulative: alloc::vec![1.0],
        }
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    fn weight(&self, i: usize) -> f64 {
        let lo = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        self.cumulative[i] - lo
    }

    /// `int K^k d sigma` with `K = max_i C_ii`.
    pub fn k_moment(&self, k: u32) -> f64 {
        (0..self.components.len())
            .map(|i| {
                let st = &self.components[i].state;
                let big_k = (0..st.n()).map(|y| st.u(y)).fold(0.0, f64::max);
                self.weight(i) * big_k.powi(k as i32)
            })
            .sum()
    }

    /// Mixture average of `E[e_x]` at time zero.
    pub fn mean_energies(&self) -> Vec<f64> {
        let n = self.components[0].state.n();
        let mut out = alloc::vec![0.0; n];
        for (i, c) in self.components.iter().enumerate() {
            let w = self.weight(i);
            for (o, e) in out.iter_mut().zip(c.state.mean_energies()) {
                *o += w * e;
            }
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SigmaNPoint> {
        let u: f64 = rng.random();
        let i = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.components.len() - 1);
        SigmaNPoint::new(self.components[i].state.clone())
    }
}
