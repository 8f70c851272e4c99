//! Named parameter sets for the published STM experiments.

use serde::Serialize;

use super::config::PipelineConfig;

const MU_SCALE: f64 = 255.0 * 255.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PresetParams {
    /// Cartoon segmentation. `dt_global` is the step of the plain multiphase
    /// model (`beta = 0`), `dt_local` that of the local model.
    Cartoon {
        lambda: f64,
        mu: f64,
        beta: f64,
        dt_global: f64,
        dt_local: f64,
    },
    /// Texture clustering; `dt` is the graph-MBO step.
    Texture { percentile: f64, k: usize, dt: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub params: PresetParams,
}

/// `mu = 10^mu_exp * 255^2`.
fn cartoon(
    name: &'static str,
    lambda: f64,
    mu_exp: i32,
    beta: f64,
    dt_global: f64,
    dt_local: f64,
) -> Preset {
    Preset {
        name,
        params: PresetParams::Cartoon {
            lambda,
            mu: 10f64.powi(mu_exp) * MU_SCALE,
            beta,
            dt_global,
            dt_local,
        },
    }
}

fn texture(name: &'static str, percentile: f64, k: usize, dt: f64) -> Preset {
    Preset {
        name,
        params: PresetParams::Texture { percentile, k, dt },
    }
}

fn table() -> [Preset; 16] {
    [
        cartoon("fig8a", 10.0, -3, 10.0, 0.75, 3.2),
        cartoon("fig8b", 10.0, -3, 300.0, 4.0, 4.0),
        cartoon("fig8c", 10.0, -3, 60.0, 2.0, 2.0),
        cartoon("fig8d", 10.0, -3, 10.0, 2.5, 2.0),
        cartoon("fig9a", 5.0, -1, 70.0, 0.35, 0.10),
        cartoon("fig9b", 10.0, -2, 30.0, 0.1, 6.5),
        cartoon("fig9c", 7.0, -4, 65.0, 5.0, 18.0),
        cartoon("fig9d", 5.0, -4, 50.0, 12.0, 0.6),
        texture("fig10a", 0.92, 5, 0.03),
        texture("fig10b", 0.995, 2, 0.10),
        texture("fig10c", 0.988, 2, 0.05),
        texture("fig10d", 0.85, 3, 0.05),
        texture("fig11a", 0.9515, 5, 0.10),
        texture("fig11b", 0.45, 4, 0.10),
        texture("fig11c", 0.85, 2, 0.05),
        texture("fig11d", 0.725, 4, 0.05),
    ]
}

pub fn preset_names() -> Vec<&'static str> {
    table().iter().map(|p| p.name).collect()
}

pub fn preset(name: &str) -> Option<Preset> {
    table().into_iter().find(|p| p.name == name)
}

impl Preset {
    /// Overwrites the matching fields of `cfg`.
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        match self.params {
            PresetParams::Cartoon {
                lambda,
                mu,
                beta,
                dt_global,
                dt_local,
            } => {
                cfg.cartoon.lambda = lambda;
                cfg.cartoon.mu = mu;
                cfg.cartoon.beta = beta;
                cfg.cartoon.dt = if beta > 0.0 { dt_local } else { dt_global };
            }
            PresetParams::Texture { percentile, k, dt } => {
                cfg.detection.percentile = percentile;
                cfg.clustering.k = k;
                cfg.clustering.mbo.dt = dt;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig10a() {
        let p = preset("fig10a").unwrap();
        assert_eq!(
            p.params,
            PresetParams::Texture {
                percentile: 0.92,
                k: 5,
                dt: 0.03
            }
        );
        let mut cfg = PipelineConfig::default();
        p.apply(&mut cfg);
        assert_eq!(cfg.detection.percentile, 0.92);
        assert_eq!(cfg.clustering.k, 5);
        assert_eq!(cfg.clustering.mbo.dt, 0.03);
    }

    #[test]
    fn fig8a_resolves_mu() {
        let PresetParams::Cartoon {
            lambda,
            mu,
            beta,
            dt_global,
            dt_local,
        } = preset("fig8a").unwrap().params
        else {
            panic!("cartoon preset expected");
        };
        assert_eq!((lambda, beta, dt_global, dt_local), (10.0, 10.0, 0.75, 3.2));
        assert!((mu - 65.025).abs() < 1e-12);
        let mut cfg = PipelineConfig::default();
        preset("fig9c").unwrap().apply(&mut cfg);
        assert_eq!(cfg.cartoon.dt, 18.0);
        assert!((cfg.cartoon.mu - 6.5025).abs() < 1e-12);
    }

    #[test]
    fn every_preset_yields_a_valid_config() {
        assert_eq!(preset_names().len(), 16);
        for name in preset_names() {
            let mut cfg = PipelineConfig::default();
            preset(name).unwrap().apply(&mut cfg);
            cfg.validate().unwrap();
        }
        assert!(preset("fig12a").is_none());
    }
}
