use super::{newton_solve, Seed, SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::mesh::{inner_product, ScalarField};
use crate::problem::{laplace_beltrami, residual_b, CurvatureProblem};
use crate::scalar::Real;

/// `⟨Δ_hζ, ζ⟩ = ⟨-2K(e^{σa} - e^{σb}), ζ⟩` for `ζ = σa - σb`, which holds up
/// to `2⟨b_a - b_b, ζ⟩` for approximate solutions. The left side is `≤ 0`
/// and the right side `≥ 0`, so both vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyIdentity<T> {
    pub lhs: T,
    pub rhs: T,
    /// `|lhs - rhs|`.
    pub residual: T,
    /// `2 (‖b_a‖ + ‖b_b‖) ‖ζ‖`, the largest discrepancy the solver residuals allow.
    pub allowance: T,
}

impl<T: Real> EnergyIdentity<T> {
    pub fn holds(&self) -> bool {
        self.residual <= self.allowance * T::lit(1.0 + 1e-6) + T::epsilon() * (self.lhs.abs() + self.rhs.abs())
    }
}

#[derive(Debug, Clone)]
pub struct UniquenessReport<T> {
    /// Largest `‖σ_a - σ_b‖_∞` over all seed pairs.
    pub max_distance: T,
    /// Indices of the most distant pair.
    pub pair: (usize, usize),
    pub energy: EnergyIdentity<T>,
    pub solutions: Vec<SolveResult<T>>,
}

/// Runs Newton from every seed and compares the converged solutions.
pub fn uniqueness_check<T: Real>(
    p: &CurvatureProblem<T>,
    seeds: &[Seed<T>],
    cfg: &SolverConfig<T>,
) -> Result<UniquenessReport<T>> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    let mut solutions = Vec::with_capacity(seeds.len());
    for (i, seed) in seeds.iter().enumerate() {
        let sigma0 = seed.field(p.grid())?;
        let res = newton_solve(p, &sigma0, cfg)?;
        if !res.converged {
            return Err(Error::SeedNotConverged {
                seed: i,
                b_l2: res.final_record().b_l2.as_f64(),
            });
        }
        solutions.push(res);
    }
    let mut max_distance = T::zero();
    let mut pair = (0, 0);
    for a in 0..solutions.len() {
        for b in a + 1..solutions.len() {
            let d = solutions[a].sigma.max_abs_diff(&solutions[b].sigma);
            if d > max_distance {
                max_distance = d;
                pair = (a, b);
            }
        }
    }
    let energy = energy_identity(p, &solutions[pair.0].sigma, &solutions[pair.1].sigma)?;
    Ok(UniquenessReport {
        max_distance,
        pair,
        energy,
        solutions,
    })
}

pub(crate) fn energy_identity<T: Real>(
    p: &CurvatureProblem<T>,
    sa: &ScalarField<T>,
    sb: &ScalarField<T>,
) -> Result<EnergyIdentity<T>> {
    let w = p.metric().area_weights();
    let zeta = sa.axpy(-T::one(), sb);
    let lap = laplace_beltrami(&zeta, p.metric())?.interior_only();
    let lhs = inner_product(&lap, &zeta, w)?;
    let two = T::lit(2.0);
    let forcing: Vec<T> = (0..zeta.len())
        .map(|k| -two * p.target().get(k) * (sa.get(k).exp() - sb.get(k).exp()))
        .collect();
    let forcing = ScalarField::new(zeta.grid().clone(), forcing)?.interior_only();
    let rhs = inner_product(&forcing, &zeta, w)?;
    let ba = residual_b(sa, p)?.b_l2;
    let bb = residual_b(sb, p)?.b_l2;
    let zeta_norm = inner_product(&zeta, &zeta, w)?.max(T::zero()).sqrt();
    Ok(EnergyIdentity {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        allowance: two * (ba + bb) * zeta_norm,
    })
}
