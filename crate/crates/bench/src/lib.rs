//! Fixtures shared by the criterion benches.

use topopeps_core::group::{FiniteGroup, Representation};
use topopeps_core::peps::double_model_tensor;
use topopeps_core::peps::lattice::Torus;

/// Group, regular representation and uniform double-model torus of side `l`.
pub fn double_torus(group: &str, l: usize) -> (FiniteGroup, Representation, Torus) {
    let g = FiniteGroup::builtin(group).expect("builtin group");
    let rep = Representation::regular(&g);
    let k = double_model_tensor(&g).expect("double model tensor");
    let torus = Torus::uniform(&k, l).expect("torus");
    (g, rep, torus)
}
