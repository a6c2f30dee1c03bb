//! Named built-in functionals selectable from a config file.

use nalgebra::{DMatrix, DVector};

use bkcalc_core::bk::{doleans_dade, ito_process_functional, levy_area, make_bk_functional, make_qv_functional};
use bkcalc_core::functional::{constant, jump_indicator, running_integral, state, terminal_value, time};
use bkcalc_core::{BkConfig, CausalFunctional};

use crate::config::FunctionalConfig;
use crate::error::CliError;

pub const NAMES: &[&str] = &[
    "time",
    "constant",
    "coordinate",
    "square",
    "sin",
    "running_integral",
    "jump_indicator",
    "terminal_value",
    "bk_self",
    "qv",
    "doleans_dade",
    "levy_area",
    "ito_process",
];

/// `f(ω(t)ᵢ)` with derivatives `df`, `d2f` in coordinate `i` only.
fn coordinate_map(
    i: usize,
    f: fn(f64) -> f64,
    df: fn(f64) -> f64,
    d2f: fn(f64) -> f64,
) -> CausalFunctional {
    state(
        move |_, x| f(x[i]),
        |_, _| 0.0,
        move |_, x| {
            let mut g = DVector::zeros(x.len());
            g[i] = df(x[i]);
            g
        },
        move |_, x| {
            let mut h = DMatrix::zeros(x.len(), x.len());
            h[(i, i)] = d2f(x[i]);
            h
        },
    )
}

/// The functional named `cfg.name` (or `name` when given) for paths of dimension `dim`.
pub fn build(cfg: &FunctionalConfig, name: Option<&str>, dim: usize, bk: &BkConfig) -> Result<CausalFunctional, CliError> {
    let name = name.unwrap_or(&cfg.name);
    let i = cfg.i;
    for k in [cfg.i, cfg.j] {
        if k >= dim {
            return Err(CliError::Config(format!("coordinate {k} out of range for dimension {dim}")));
        }
    }
    let f = match name {
        "time" => time(),
        "constant" => constant(cfg.value),
        "coordinate" => coordinate_map(i, |x| x, |_| 1.0, |_| 0.0),
        "square" => coordinate_map(i, |x| x * x, |x| 2.0 * x, |_| 2.0),
        "sin" => coordinate_map(i, f64::sin, f64::cos, |x| -x.sin()),
        "running_integral" => running_integral(move |_, x| x[i] * x[i]),
        "jump_indicator" => jump_indicator(),
        "terminal_value" => terminal_value(i),
        "bk_self" => make_bk_functional(coordinate_map(i, |x| x, |_| 1.0, |_| 0.0), i, bk)?,
        "qv" => make_qv_functional(cfg.i, cfg.j, bk)?,
        "doleans_dade" => doleans_dade(bk)?,
        "levy_area" => levy_area(bk)?,
        "ito_process" => ito_process_functional(
            constant(cfg.value),
            (0..dim).map(|_| constant(cfg.sigma)).collect(),
            bk,
        )?,
        other => {
            return Err(CliError::Config(format!(
                "unknown functional `{other}`; expected one of {}",
                NAMES.join(", ")
            )))
        }
    };
    if f.min_dim() > dim {
        return Err(CliError::Config(format!("`{name}` needs dimension at least {}", f.min_dim())));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bkcalc_core::CadlagPath;

    #[test]
    fn every_name_builds() {
        let bk = BkConfig::default().with_max_level(6);
        let cfg = FunctionalConfig { j: 1, ..Default::default() };
        for name in NAMES {
            let f = build(&cfg, Some(name), 2, &bk).unwrap();
            let path = CadlagPath::constant(vec![0.5, -0.5], 1.0).unwrap();
            assert!(f.eval(0.5, &path).unwrap().is_finite(), "{name}");
        }
    }

    #[test]
    fn rejects_unknown_names_and_coordinates() {
        let bk = BkConfig::default();
        let cfg = FunctionalConfig::default();
        assert!(matches!(build(&cfg, Some("nope"), 1, &bk), Err(CliError::Config(_))));
        assert!(build(&cfg, Some("levy_area"), 1, &bk).is_err());
        let far = FunctionalConfig { i: 3, ..Default::default() };
        assert!(build(&far, None, 2, &bk).is_err());
    }

    #[test]
    fn coordinate_maps_carry_bundles() {
        let bk = BkConfig::default();
        let cfg = FunctionalConfig { i: 1, ..Default::default() };
        let f = build(&cfg, Some("square"), 2, &bk).unwrap();
        let path = CadlagPath::constant(vec![4.0, 3.0], 1.0).unwrap();
        let b = f.require_bundle(0.5, &path).unwrap();
        assert_eq!(f.eval(0.5, &path).unwrap(), 9.0);
        assert_eq!(b.grad.as_slice(), &[0.0, 6.0]);
        assert_eq!(b.hess[(1, 1)], 2.0);
        assert_eq!(b.hess[(0, 0)], 0.0);
    }
}
