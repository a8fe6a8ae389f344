//! Continuum limits of capacity propagation: Gaussian heat kernels, the
//! Duhamel integral for sources, leaky diffusion and an explicit solver.
//!
//! A discrete run with rate `c`, generator second moment `m₂` and
//! `ε = c/(L − 1)` corresponds to the diffusivity `D = c·m₂/2`
//! (see [`diffusivity_for`]).

mod duhamel;
mod kernel;
mod leak;
mod limit;
mod model;
mod pde;

pub use duhamel::duhamel_solution;
pub use kernel::{heat_kernel_solution, v_integral, DilationGrowth};
pub use leak::leak_split_analytic;
pub use limit::lattice_diffusion_limit;
pub use model::{DiffusionModel, Diffusivity};
pub use pde::{cfl_ratio, solve_pde};

use crate::{second_moment, StencilGenerator};

/// `D_ij = c · M_ij / 2` for a generator with second-moment matrix `M`.
/// In 1D this is the scalar `c·m₂/2`.
pub fn diffusivity_for(gen: &StencilGenerator, capacity_rate: f64) -> Diffusivity {
    let m = second_moment(gen);
    if gen.dim() == 1 {
        Diffusivity::constant(0.5 * capacity_rate * m.get(0, 0))
    } else {
        let d = |i: usize, j: usize| 0.5 * capacity_rate * m.get(i, j);
        Diffusivity::Tensor {
            d: [[d(0, 0), d(0, 1)], [d(1, 0), d(1, 1)]],
        }
    }
}
