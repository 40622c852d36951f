//! Analytic test functions on their native domains.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseFunction {
    Branin,
    Colville,
    GoldsteinPrice,
    Hartmann6,
    SixHumpCamel,
}

impl BaseFunction {
    pub const ALL: [BaseFunction; 5] = [
        BaseFunction::Branin,
        BaseFunction::Colville,
        BaseFunction::GoldsteinPrice,
        BaseFunction::Hartmann6,
        BaseFunction::SixHumpCamel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseFunction::Branin => "branin",
            BaseFunction::Colville => "colville",
            BaseFunction::GoldsteinPrice => "goldstein-price",
            BaseFunction::Hartmann6 => "hartmann6",
            BaseFunction::SixHumpCamel => "six-hump-camel",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown function '{name}'")))
    }

    pub fn d_true(self) -> usize {
        match self {
            BaseFunction::Branin | BaseFunction::GoldsteinPrice | BaseFunction::SixHumpCamel => 2,
            BaseFunction::Colville => 4,
            BaseFunction::Hartmann6 => 6,
        }
    }

    /// Native box as `(lower, upper)` per coordinate.
    pub fn native_bounds(self) -> Vec<(f64, f64)> {
        match self {
            BaseFunction::Branin => vec![(-5.0, 10.0), (0.0, 15.0)],
            BaseFunction::Colville => vec![(-10.0, 10.0); 4],
            BaseFunction::GoldsteinPrice => vec![(-2.0, 2.0); 2],
            BaseFunction::Hartmann6 => vec![(0.0, 1.0); 6],
            BaseFunction::SixHumpCamel => vec![(-3.0, 3.0), (-2.0, 2.0)],
        }
    }

    /// Published global minimum value.
    pub fn global_min(self) -> f64 {
        match self {
            BaseFunction::Branin => 0.397_887_357_729_738_2,
            BaseFunction::Colville => 0.0,
            BaseFunction::GoldsteinPrice => 3.0,
            BaseFunction::Hartmann6 => -3.322_368_011_391_339,
            BaseFunction::SixHumpCamel => -1.031_628_453_489_877,
        }
    }

    /// Evaluates on native coordinates.
    pub fn eval_native(self, x: &[f64]) -> f64 {
        match self {
            BaseFunction::Branin => branin(x),
            BaseFunction::Colville => colville(x),
            BaseFunction::GoldsteinPrice => goldstein_price(x),
            BaseFunction::Hartmann6 => hartmann6(x),
            BaseFunction::SixHumpCamel => six_hump_camel(x),
        }
    }

    /// Maps `[-1, 1]^d` affinely onto the native box.
    pub fn to_native(self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.native_bounds())
            .map(|(v, (lo, hi))| lo + 0.5 * (v + 1.0) * (hi - lo))
            .collect()
    }

    /// Evaluates on normalized coordinates `[-1, 1]^d`.
    pub fn eval_normalized(self, z: &[f64]) -> f64 {
        self.eval_native(&self.to_native(z))
    }
}

fn branin(x: &[f64]) -> f64 {
    let (a, b, c) = (1.0, 5.1 / (4.0 * PI * PI), 5.0 / PI);
    let (r, s, t) = (6.0, 10.0, 1.0 / (8.0 * PI));
    a * (x[1] - b * x[0] * x[0] + c * x[0] - r).powi(2) + s * (1.0 - t) * x[0].cos() + s
}

fn colville(x: &[f64]) -> f64 {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    100.0 * (x1 * x1 - x2).powi(2)
        + (x1 - 1.0).powi(2)
        + (x3 - 1.0).powi(2)
        + 90.0 * (x3 * x3 - x4).powi(2)
        + 10.1 * ((x2 - 1.0).powi(2) + (x4 - 1.0).powi(2))
        + 19.8 * (x2 - 1.0) * (x4 - 1.0)
}

fn goldstein_price(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    let f1 = 1.0
        + (a + b + 1.0).powi(2)
            * (19.0 - 14.0 * a + 3.0 * a * a - 14.0 * b + 6.0 * a * b + 3.0 * b * b);
    let f2 = 30.0
        + (2.0 * a - 3.0 * b).powi(2)
            * (18.0 - 32.0 * a + 12.0 * a * a + 48.0 * b - 36.0 * a * b + 27.0 * b * b);
    f1 * f2
}

const H6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const H6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const H6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

fn hartmann6(x: &[f64]) -> f64 {
    -(0..4)
        .map(|i| {
            let inner: f64 = (0..6).map(|j| H6_A[i][j] * (x[j] - H6_P[i][j]).powi(2)).sum();
            H6_ALPHA[i] * (-inner).exp()
        })
        .sum::<f64>()
}

fn six_hump_camel(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    (4.0 - 2.1 * a * a + a.powi(4) / 3.0) * a * a + a * b + (-4.0 + 4.0 * b * b) * b * b
}
