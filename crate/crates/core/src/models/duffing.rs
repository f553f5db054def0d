use std::sync::Arc;

use nalgebra::dmatrix;

use crate::error::Result;
use crate::model::{FnNonlinearity, SecondOrderModel};

use super::{params, BuiltinModel, PolynomialForce};

/// `ẍ + 2ζω₀ẋ + ω₀²x + γx³ = 0`.
pub fn make_duffing(omega0: f64, zeta: f64, gamma: f64) -> Result<BuiltinModel> {
    let nl = Arc::new(FnNonlinearity::new(1, "duffing", move |x: &[f64], _: &[f64]| {
        vec![gamma * x[0] * x[0] * x[0]]
    }));
    let model = SecondOrderModel::from_dense(
        &dmatrix![1.0],
        &dmatrix![2.0 * zeta * omega0],
        &dmatrix![omega0 * omega0],
        nl,
    )?;
    let mut tensors = PolynomialForce::new(1, "duffing-tensors");
    tensors.add_cubic(0, 0, 0, 0, gamma);
    Ok(BuiltinModel {
        id: "duffing".into(),
        params: params(&[("omega0", omega0), ("zeta", zeta), ("gamma", gamma)]),
        model,
        tensors: Some(Arc::new(tensors)),
        distributed_load: None,
    })
}
