//! Smooth periodic fields on the unit torus and chemical-potential profiles.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::thermo::{averages_from_potentials, GibbsParams, StateAverages};
use crate::{Error, Result};

const TAU: f64 = 2.0 * PI;

/// `c + sum_n a_n cos(2 pi n q) + b_n sin(2 pi n q)`, harmonics starting at `n = 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierSeries {
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    /// Trigonometric interpolant of equally spaced samples at `j / M`.
    pub fn interpolating(samples: &[f64]) -> Result<Self> {
        let m = samples.len();
        if m == 0 {
            return Err(Error::InvalidArgument("empty table".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("table entries must be finite".into()));
        }
        let mf = m as f64;
        let constant = samples.iter().sum::<f64>() / mf;
        let top = m / 2;
        let mut cos = Vec::with_capacity(top);
        let mut sin = Vec::with_capacity(top);
        for n in 1..=top {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, v) in samples.iter().enumerate() {
                let phase = TAU * ((n * j) % m) as f64 / mf;
                a += v * phase.cos();
                b += v * phase.sin();
            }
            // The Nyquist harmonic of an even table carries only a cosine
            // part and is not doubled.
            let nyquist = 2 * n == m;
            let w = if nyquist { 1.0 / mf } else { 2.0 / mf };
            cos.push(a * w);
            sin.push(if nyquist { 0.0 } else { b * w });
        }
        Ok(Self { constant, cos, sin })
    }

    fn eval_derivatives(&self, q: f64) -> [f64; 3] {
        let mut out = [self.constant, 0.0, 0.0];
        let harmonics = self.cos.len().max(self.sin.len());
        for i in 0..harmonics {
            let k = TAU * (i + 1) as f64;
            let a = self.cos.get(i).copied().unwrap_or(0.0);
            let b = self.sin.get(i).copied().unwrap_or(0.0);
            let (s, c) = (k * q).sin_cos();
            out[0] += a * c + b * s;
            out[1] += k * (b * c - a * s);
            out[2] -= k * k * (a * c + b * s);
        }
        out
    }
}

/// A smooth positive-or-signed periodic field.
#[derive(Debug, Clone, PartialEq)]
pub enum PeriodicField {
    Series(FourierSeries),
    /// Reciprocal of a series, for profiles specified through a temperature.
    InverseSeries(FourierSeries),
}

impl PeriodicField {
    pub fn constant(c: f64) -> Self {
        Self::Series(FourierSeries::constant(c))
    }

    pub fn table(samples: &[f64]) -> Result<Self> {
        Ok(Self::Series(FourierSeries::interpolating(samples)?))
    }

    /// Value, first and second derivative at `q`.
    pub fn jet(&self, q: f64) -> [f64; 3] {
        match self {
            Self::Series(s) => s.eval_derivatives(q),
            Self::InverseSeries(s) => {
                let [f, f1, f2] = s.eval_derivatives(q);
                let g = 1.0 / f;
                [g, -f1 * g * g, (2.0 * f1 * f1 * g - f2) * g * g]
            }
        }
    }

    pub fn value(&self, q: f64) -> f64 {
        self.jet(q)[0]
    }

    pub fn derivative(&self, q: f64) -> f64 {
        self.jet(q)[1]
    }

    pub fn second_derivative(&self, q: f64) -> f64 {
        self.jet(q)[2]
    }

    /// Values at `x / n` for `x = 0..n`.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        (0..n).map(|x| self.value(x as f64 / n as f64)).collect()
    }

    /// Minimum over a grid of `n` points.
    pub fn grid_min(&self, n: usize) -> f64 {
        self.sample(n).into_iter().fold(f64::INFINITY, f64::min)
    }

    fn is_finite_on(&self, n: usize) -> bool {
        self.sample(n).iter().all(|v| v.is_finite())
    }
}

/// Smooth profiles of `(beta(q), lambda(q))` on the unit torus.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialProfile {
    pub beta: PeriodicField,
    pub lambda: PeriodicField,
}

/// Resolution used to validate positivity of a profile.
const CHECK_GRID: usize = 4096;

impl PotentialProfile {
    pub fn new(beta: PeriodicField, lambda: PeriodicField) -> Result<Self> {
        let min = beta.grid_min(CHECK_GRID);
        if !(min > 0.0) || !beta.is_finite_on(CHECK_GRID) {
            return Err(Error::NonPositiveBeta(min));
        }
        if !lambda.is_finite_on(CHECK_GRID) {
            return Err(Error::InvalidArgument("lambda profile is not finite".into()));
        }
        Ok(Self { beta, lambda })
    }

    pub fn homogeneous(params: GibbsParams) -> Result<Self> {
        params.check()?;
        Self::new(
            PeriodicField::constant(params.beta),
            PeriodicField::constant(params.lambda),
        )
    }

    /// `beta = 1 / (1 + a cos 2 pi q)`, `lambda = b sin 2 pi q`.
    pub fn cosine_temperature(a: f64, b: f64) -> Result<Self> {
        Self::new(
            PeriodicField::InverseSeries(FourierSeries {
                constant: 1.0,
                cos: alloc::vec![a],
                sin: Vec::new(),
            }),
            PeriodicField::Series(FourierSeries {
                constant: 0.0,
                cos: Vec::new(),
                sin: alloc::vec![b],
            }),
        )
    }

    pub fn params_at(&self, q: f64) -> GibbsParams {
        GibbsParams {
            beta: self.beta.value(q),
            lambda: self.lambda.value(q),
        }
    }

    pub fn averages_at(&self, q: f64) -> StateAverages {
        // Positivity of beta was checked on construction.
        averages_from_potentials(self.params_at(q)).unwrap_or(StateAverages {
            e: f64::NAN,
            r: f64::NAN,
        })
    }

    /// Site parameters `(beta(x/n), lambda(x/n))`.
    pub fn sample(&self, n: usize) -> Vec<GibbsParams> {
        (0..n).map(|x| self.params_at(x as f64 / n as f64)).collect()
    }
}
