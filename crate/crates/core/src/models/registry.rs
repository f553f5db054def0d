use std::collections::BTreeMap;

use crate::error::{Result, SsmError};

use super::{
    internally_resonant_chain, make_duffing, make_pipe_conveying_fluid, make_spring_chain, make_vonkarman_beam,
    random_chain, BeamParams, BuiltinModel, PipeParams,
};

const NAMES: &[(&str, &str)] = &[
    ("duffing", "1-DOF Duffing oscillator, f = γx³ (omega0, zeta, gamma)"),
    ("chain", "uniform fixed-fixed spring chain (n, k_lin, k2, k3, alpha, beta)"),
    ("chain-1to2", "2-mass chain with frequencies 1 and 2 and quadratic coupling (k2, k3, alpha, beta)"),
    ("random-chain", "randomized chain with velocity-dependent springs (n, seed)"),
    ("beam", "clamped-clamped von Kármán beam, black box only (n_elem, length, ea, ei, rho_a, alpha, beta)"),
    ("pipe", "cantilevered pipe conveying fluid (n_modes, flow_velocity, mass_ratio, viscoelastic, quad_order)"),
];

pub fn builtin_names() -> Vec<&'static str> {
    NAMES.iter().map(|(n, _)| *n).collect()
}

pub fn describe_builtin(name: &str) -> Option<&'static str> {
    NAMES.iter().find(|(n, _)| *n == name).map(|(_, d)| *d)
}

struct Params<'a> {
    model: &'a str,
    values: &'a BTreeMap<String, f64>,
    used: Vec<&'static str>,
}

impl Params<'_> {
    fn get(&mut self, key: &'static str, default: f64) -> f64 {
        self.used.push(key);
        self.values.get(key).copied().unwrap_or(default)
    }

    fn count(&mut self, key: &'static str, default: usize) -> Result<usize> {
        let v = self.get(key, default as f64);
        if v < 0.0 || v.fract() != 0.0 {
            return Err(SsmError::Config {
                field: format!("model.params.{key}"),
                message: format!("expected a non-negative integer, got {v}"),
            });
        }
        Ok(v as usize)
    }

    fn finish(self) -> Result<()> {
        for k in self.values.keys() {
            if !self.used.contains(&k.as_str()) {
                return Err(SsmError::Config {
                    field: format!("model.params.{k}"),
                    message: format!("unknown parameter for model `{}`", self.model),
                });
            }
        }
        Ok(())
    }
}

/// Instantiate a built-in model by name with parameter overrides.
pub fn builtin(name: &str, overrides: &BTreeMap<String, f64>) -> Result<BuiltinModel> {
    let mut p = Params {
        model: name,
        values: overrides,
        used: Vec::new(),
    };
    let model = match name {
        "duffing" => make_duffing(p.get("omega0", 1.0), p.get("zeta", 0.005), p.get("gamma", 1.0))?,
        "chain" => make_spring_chain(
            p.count("n", 3)?,
            p.get("k_lin", 1.0),
            p.get("k2", 0.5),
            p.get("k3", 0.5),
            (p.get("alpha", 0.01), p.get("beta", 0.0)),
        )?,
        "chain-1to2" => internally_resonant_chain(
            p.get("k2", 0.5),
            p.get("k3", 0.0),
            (p.get("alpha", 0.01), p.get("beta", 0.0)),
        )?,
        "random-chain" => random_chain(p.count("n", 4)?, p.count("seed", 1)? as u64)?,
        "beam" => {
            let d = BeamParams::default();
            make_vonkarman_beam(&BeamParams {
                n_elem: p.count("n_elem", d.n_elem)?,
                length: p.get("length", d.length),
                ea: p.get("ea", d.ea),
                ei: p.get("ei", d.ei),
                rho_a: p.get("rho_a", d.rho_a),
                rayleigh: (p.get("alpha", d.rayleigh.0), p.get("beta", d.rayleigh.1)),
            })?
        }
        "pipe" => {
            let d = PipeParams::default();
            make_pipe_conveying_fluid(&PipeParams {
                n_modes: p.count("n_modes", d.n_modes)?,
                flow_velocity: p.get("flow_velocity", d.flow_velocity),
                mass_ratio: p.get("mass_ratio", d.mass_ratio),
                viscoelastic: p.get("viscoelastic", d.viscoelastic),
                quad_order: p.count("quad_order", d.quad_order)?,
            })?
        }
        other => {
            return Err(SsmError::Config {
                field: "model.name".into(),
                message: format!("unknown model `{other}`; available: {}", builtin_names().join(", ")),
            })
        }
    };
    p.finish()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_constructs_and_validates() {
        for name in builtin_names() {
            let b = builtin(name, &BTreeMap::new()).unwrap();
            let r = b.model.validation();
            assert!(r.zero_at_origin && !r.linear_part_flag && !r.closure_flag, "{name}: {r:?}");
        }
    }

    #[test]
    fn unknown_names_and_parameters_are_config_errors() {
        assert_eq!(builtin("plate", &BTreeMap::new()).unwrap_err().exit_code(), 2);
        let bad: BTreeMap<String, f64> = [("gama".to_string(), 1.0)].into();
        assert!(matches!(builtin("duffing", &bad), Err(SsmError::Config { .. })));
    }
}
