//! Closed-form reference measures and energies.

use std::f64::consts::PI;

use crate::discretize::{Grid, MeasureTuple};
use crate::error::OracleError;

const ENDPOINT_SLACK: f64 = 1e-12;

/// A measure with a closed-form distribution function.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedFormMeasure {
    /// `mass` times the arcsine law of `[a, b]`.
    Arcsine { a: f64, b: f64, mass: f64 },
    Mixture(Vec<ClosedFormMeasure>),
}

impl ClosedFormMeasure {
    pub fn arcsine(a: f64, b: f64, mass: f64) -> Result<Self, OracleError> {
        if !(b > a) {
            return Err(OracleError::Interval(a, b));
        }
        Ok(Self::Arcsine { a, b, mass })
    }

    pub fn mass(&self) -> f64 {
        match self {
            Self::Arcsine { mass, .. } => *mass,
            Self::Mixture(parts) => parts.iter().map(Self::mass).sum(),
        }
    }

    /// Measure of `(-inf, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Arcsine { a, b, mass } => {
                let mut s = ((2.0 * x - a - b) / (b - a)).clamp(-1.0, 1.0);
                // rounding in cell edges near the endpoints would be amplified
                // by the square-root singularity
                if 1.0 - s.abs() < ENDPOINT_SLACK {
                    s = s.signum();
                }
                mass * (0.5 + s.asin() / PI)
            }
            Self::Mixture(ref parts) => parts.iter().map(|p| p.cdf(x)).sum(),
        }
    }

    /// Exact masses of the cells of `grid`; adjacent cells share their edge
    /// so the masses telescope.
    pub fn cell_masses(&self, grid: &Grid) -> Vec<f64> {
        let n = grid.len();
        (0..n)
            .map(|k| {
                let lo = grid.cell(k).0;
                let hi = if k + 1 < n && grid.parent[k + 1] == grid.parent[k] {
                    grid.cell(k + 1).0
                } else {
                    grid.cell(k).1
                };
                self.cdf(hi) - self.cdf(lo)
            })
            .collect()
    }
}

/// Cell masses of the unit arcsine law of `[a, b]`; every cell must lie in `[a, b]`.
pub fn arcsine_weights(a: f64, b: f64, grid: &Grid) -> Result<Vec<f64>, OracleError> {
    let law = ClosedFormMeasure::arcsine(a, b, 1.0)?;
    let slack = ENDPOINT_SLACK * (b - a);
    for k in 0..grid.len() {
        let (lo, hi) = grid.cell(k);
        if lo < a - slack || hi > b + slack {
            return Err(OracleError::GridOutside(lo, hi));
        }
    }
    Ok(law.cell_masses(grid))
}

/// `log(4 / (b - a))`, the energy of the equilibrium measure of `[a, b]`.
pub fn interval_energy(a: f64, b: f64) -> Result<f64, OracleError> {
    if !(b > a) {
        return Err(OracleError::Interval(a, b));
    }
    Ok((4.0 / (b - a)).ln())
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        let (na, nb) = (0.5 * (a + b), (a * b).sqrt());
        if na == a && nb == b || (na - nb).abs() <= f64::EPSILON * na {
            return na;
        }
        a = na;
        b = nb;
    }
    a
}

/// Complete elliptic integral of the first kind, modulus convention.
pub fn elliptic_k(k: f64) -> Result<f64, OracleError> {
    if !(0.0..1.0).contains(&k) {
        return Err(OracleError::Modulus(k));
    }
    Ok(PI / (2.0 * agm(1.0, (1.0 - k * k).sqrt())))
}

/// `K'(k) = K(sqrt(1 - k^2))`.
pub fn elliptic_k_prime(k: f64) -> Result<f64, OracleError> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(OracleError::Modulus(k));
    }
    Ok(PI / (2.0 * agm(1.0, k)))
}

/// Minimal energy `2π K(2/n) / K'(2/n)` of the condenser with plates
/// `[-1/2, -1/n]` and `[1/n, 1/2]` carrying unit charges of opposite sign.
pub fn condenser_energy(n: f64) -> Result<f64, OracleError> {
    if !(n > 2.0) {
        return Err(OracleError::CondenserParameter(n));
    }
    let k = 2.0 / n;
    Ok(2.0 * PI * elliptic_k(k)? / elliptic_k_prime(k)?)
}

/// Potential `min(level, log 1/|x|)` of the equilibrium measure of the circle
/// of radius `exp(-level)`.
pub fn circle_potential(level: f64, abs_x: f64) -> Result<f64, OracleError> {
    if !level.is_finite() {
        return Err(OracleError::Level);
    }
    if abs_x == 0.0 {
        return Ok(level);
    }
    Ok(level.min(-abs_x.abs().ln()))
}

/// Minimizer of the two-component Nikishin problem with `Δ_2 ⊂ Δ_1`,
/// `C = [[2, -1], [-1, 2]]` and masses `(a1, a2)`:
/// `μ_1 = (a1 - a2/2) ω_{Δ_1} + (a2/2) ω_{Δ_2}`, `μ_2 = a2 ω_{Δ_2}`.
pub fn condenser2_measures(
    a1: f64,
    a2: f64,
    d1: (f64, f64),
    d2: (f64, f64),
) -> Result<[ClosedFormMeasure; 2], OracleError> {
    if a2 > 2.0 * a1 {
        return Err(OracleError::Masses(a1, a2));
    }
    let mu1 = ClosedFormMeasure::Mixture(vec![
        ClosedFormMeasure::arcsine(d1.0, d1.1, a1 - 0.5 * a2)?,
        ClosedFormMeasure::arcsine(d2.0, d2.1, 0.5 * a2)?,
    ]);
    let mu2 = ClosedFormMeasure::arcsine(d2.0, d2.1, a2)?;
    Ok([mu1, mu2])
}

/// [`condenser2_measures`] integrated over the cells of the given grids.
pub fn condenser2_solution(
    a1: f64,
    a2: f64,
    d1: (f64, f64),
    d2: (f64, f64),
    grids: [&Grid; 2],
) -> Result<MeasureTuple, OracleError> {
    let [mu1, mu2] = condenser2_measures(a1, a2, d1, d2)?;
    let blocks = vec![mu1.cell_masses(grids[0]), mu2.cell_masses(grids[1])];
    Ok(MeasureTuple::from_blocks(vec![grids[0].clone(), grids[1].clone()], blocks)
        .expect("blocks match grids"))
}
