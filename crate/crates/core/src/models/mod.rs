//! Built-in desk-scale models. Each ships a black-box nonlinearity; most also
//! carry explicit tensors used as an intrusive reference.

mod beam;
mod chain;
mod duffing;
mod pipe;
mod quadrature;
mod registry;
mod tensors;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::model::{lift_to_first_order, FirstOrderSystem, SecondOrderModel};

pub use beam::{make_vonkarman_beam, midspan_w_dof, BeamParams};
pub use chain::{chain_from_params, internally_resonant_chain, make_spring_chain, random_chain, ChainParams};
pub use duffing::make_duffing;
pub use pipe::{cantilever_roots, make_pipe_conveying_fluid, pipe_distributed_load, PipeParams};
pub use quadrature::gauss_legendre;
pub use registry::{builtin, builtin_names, describe_builtin};
pub use tensors::PolynomialForce;

#[derive(Clone)]
pub struct BuiltinModel {
    pub id: String,
    pub params: BTreeMap<String, f64>,
    pub model: SecondOrderModel,
    pub tensors: Option<Arc<PolynomialForce>>,
    /// Consistent nodal load of a uniform distributed force, where defined.
    pub distributed_load: Option<Vec<f64>>,
}

impl BuiltinModel {
    pub fn first_order(&self) -> FirstOrderSystem {
        lift_to_first_order(&self.model)
    }

    pub fn dofs(&self) -> usize {
        self.model.dofs()
    }
}

impl std::fmt::Debug for BuiltinModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuiltinModel")
            .field("id", &self.id)
            .field("params", &self.params)
            .field("dofs", &self.dofs())
            .field("tensors", &self.tensors.is_some())
            .finish()
    }
}

fn params(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
