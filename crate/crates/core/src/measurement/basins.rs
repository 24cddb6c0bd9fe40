use std::f64::consts::PI;

use rayon::prelude::*;

use super::{classify_outcome, DipolarSetup, OutcomeLabel};
use crate::dynamics::SimConfig;
use crate::spin::UnitVector3;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub i_theta: usize,
    pub i_phi: usize,
    pub theta: f64,
    pub phi: f64,
    pub n: UnitVector3,
}

/// Cell-centred θ×φ lattice: `θ_i = (i + ½)π/n_θ`, `φ_j = 2πj/n_φ`. Points are
/// stored row-major (θ outer, φ inner). No lattice point sits on a pole.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub points: Vec<GridPoint>,
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        let points = (0..n_theta)
            .flat_map(|i| {
                (0..n_phi).map(move |j| {
                    let theta = PI * (i as f64 + 0.5) / n_theta as f64;
                    let phi = 2.0 * PI * j as f64 / n_phi as f64;
                    GridPoint { i_theta: i, i_phi: j, theta, phi, n: UnitVector3::from_angles(theta, phi) }
                })
            })
            .collect();
        Ok(Self { n_theta, n_phi, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct BasinMap {
    pub grid: SphereGrid,
    pub labels: Vec<OutcomeLabel>,
    /// Grid points whose integration failed; they are labelled unresolved.
    pub failures: usize,
    pub setup: DipolarSetup,
    pub sim: SimConfig,
    pub eps: f64,
}

impl BasinMap {
    pub fn count(&self, label: OutcomeLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Integrates one trajectory per grid point and labels its outcome. Points
/// are independent and evaluated in parallel; results keep grid order.
pub fn basin_map(grid: &SphereGrid, setup: &DipolarSetup, sim: &SimConfig, eps: f64) -> Result<BasinMap> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid(format!("eps must lie in (0, 0.5), got {eps}")));
    }
    sim.validate()?;
    // record only the endpoints
    let sim_run = SimConfig { sample_stride: usize::MAX, ..*sim };
    let results: Vec<Option<OutcomeLabel>> = grid
        .points
        .par_iter()
        .map(|p| setup.run(&p.n, &sim_run).ok().map(|tr| classify_outcome(&tr, &setup.u_d, eps)))
        .collect();
    let failures = results.iter().filter(|r| r.is_none()).count();
    let labels = results.into_iter().map(|r| r.unwrap_or(OutcomeLabel::Unresolved)).collect();
    Ok(BasinMap { grid: grid.clone(), labels, failures, setup: setup.clone(), sim: *sim, eps })
}
