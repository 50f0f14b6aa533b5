//! Browser bindings. Each export takes and returns a JSON string; the plain
//! Rust functions underneath are what the native tests exercise.

use bdris_core::channel::ChannelModel;
use bdris_core::experiment::{aggregate, run_sweep_with, Execution, ExperimentConfig, SweepKind};
use bdris_core::metrics::{effective_gain, sinr, spectral_efficiency, GainMode, LinkBudget, RisArchitecture};
use bdris_core::power::{allocate, PowerRule};
use bdris_core::solver::{solve_architecture, SolverOptions};
use bdris_core::units::{dbm_to_watts, watts_to_dbm};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Keeps a click responsive on a single browser thread.
pub const MAX_TRIALS: usize = 200;
pub const MAX_ELEMENTS: usize = 64;

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct LinkRequest {
    pub mx: usize,
    pub my: usize,
    pub k_factor: f64,
    pub p_max_dbm: f64,
    pub q_p_dbm: f64,
    pub i_th_w: f64,
    pub sigma2_w: f64,
    pub seed: u64,
    pub trial: u64,
}

impl Default for LinkRequest {
    fn default() -> Self {
        Self {
            mx: 4,
            my: 8,
            k_factor: 10.0,
            p_max_dbm: 30.0,
            q_p_dbm: 40.0,
            i_th_w: 0.1,
            sigma2_w: 1e-9,
            seed: 1,
            trial: 0,
        }
    }
}

impl LinkRequest {
    fn check(&self) -> Result<(), String> {
        let m = self.mx * self.my;
        if m == 0 || m > MAX_ELEMENTS {
            return Err(format!("element count must be in 1..={MAX_ELEMENTS}, got {m}"));
        }
        Ok(())
    }

    fn budget(&self) -> LinkBudget {
        LinkBudget {
            p_max: dbm_to_watts(self.p_max_dbm),
            q_p: dbm_to_watts(self.q_p_dbm),
            sigma2: self.sigma2_w,
            i_th: self.i_th_w,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArchResult {
    pub architecture: RisArchitecture,
    pub se_bits: f64,
    pub p_s_w: f64,
    pub p_s_dbm: f64,
    pub interference_w: f64,
    pub se_trace: Vec<f64>,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkResponse {
    pub elements: usize,
    pub results: Vec<ArchResult>,
}

/// Solve one channel draw with both architectures.
pub fn solve_link(req: &LinkRequest) -> Result<LinkResponse, String> {
    req.check()?;
    let budget = req.budget();
    budget.validate().map_err(|e| e.to_string())?;
    let chan = ChannelModel::normalized(req.mx, req.my, req.k_factor)
        .draw(req.seed, req.trial)
        .map_err(|e| e.to_string())?;
    let opts = SolverOptions::default();
    let results = [RisArchitecture::Bd, RisArchitecture::D]
        .into_iter()
        .map(|arch| {
            let r = solve_architecture(arch, &chan, &budget, &opts).map_err(|e| e.to_string())?;
            Ok(ArchResult {
                architecture: arch,
                se_bits: r.spectral_efficiency(),
                p_s_w: r.p_s_star,
                p_s_dbm: watts_to_dbm(r.p_s_star),
                interference_w: r.interference_final,
                inner_iterations: r.phase_traces.iter().map(|t| t.iterates.len()).sum(),
                se_trace: r.se_trace,
            })
        })
        .collect::<Result<_, String>>()?;
    Ok(LinkResponse {
        elements: req.mx * req.my,
        results,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct SweepRequest {
    pub link: LinkRequest,
    /// Interference thresholds in watts, increasing.
    pub i_th_w: Vec<f64>,
    pub trials: usize,
}

impl Default for SweepRequest {
    fn default() -> Self {
        Self {
            link: LinkRequest::default(),
            i_th_w: vec![1e-3, 1e-2, 1e-1, 1.0],
            trials: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub i_th_w: f64,
    pub architecture: RisArchitecture,
    pub mean_se: f64,
    pub stderr_se: f64,
}

/// Mean SE versus interference threshold over `trials` channel draws.
pub fn ith_sweep(req: &SweepRequest) -> Result<Vec<SweepPoint>, String> {
    req.link.check()?;
    if req.trials == 0 || req.trials > MAX_TRIALS {
        return Err(format!("trials must be in 1..={MAX_TRIALS}"));
    }
    let mut cfg = ExperimentConfig::defaults_for(SweepKind::IthSweep);
    cfg.sweep_values = req.i_th_w.clone();
    cfg.trials = req.trials;
    cfg.master_seed = req.link.seed;
    let fx = &mut cfg.fixed;
    fx.p_s_dbm_list = vec![req.link.p_max_dbm];
    fx.q_p_dbm = req.link.q_p_dbm;
    (fx.mx, fx.my, fx.m) = (req.link.mx, req.link.my, req.link.mx * req.link.my);
    fx.k_factor = req.link.k_factor;
    fx.sigma2_w = req.link.sigma2_w;
    let rows = run_sweep_with(&cfg, Execution::Serial).map_err(|e| e.to_string())?;
    Ok(aggregate(&rows)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|s| SweepPoint {
            i_th_w: s.sweep_value,
            architecture: s.architecture,
            mean_se: s.mean_se,
            stderr_se: s.stderr_se,
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerCurve {
    /// Powers in dBm and the rate at each, ignoring the interference cap.
    pub p_dbm: Vec<f64>,
    pub se_bits: Vec<f64>,
    /// Largest power the interference cap allows, in dBm.
    pub interference_cap_dbm: f64,
    pub kkt_p_dbm: f64,
    pub kkt_se: f64,
    pub boundary_p_dbm: f64,
    pub boundary_se: f64,
}

/// Rate versus power for the co-phased surface of one draw, with the two
/// power rules marked.
pub fn power_curve(req: &LinkRequest) -> Result<PowerCurve, String> {
    req.check()?;
    let budget = req.budget();
    budget.validate().map_err(|e| e.to_string())?;
    let chan = ChannelModel::normalized(req.mx, req.my, req.k_factor)
        .draw(req.seed, req.trial)
        .map_err(|e| e.to_string())?;
    let ris = bdris_core::phase::dris_baseline(&chan.h, &bdris_core::metrics::uniform_feed(req.mx * req.my))
        .map_err(|e| e.to_string())?;
    let h = effective_gain(&chan.h, &ris, GainMode::FeedVector).map_err(|e| e.to_string())?;
    let g = effective_gain(&chan.g, &ris, GainMode::FeedVector).map_err(|e| e.to_string())?;
    let se = |p: f64| spectral_efficiency(sinr(h, p, chan.f, &budget));
    let p_dbm: Vec<f64> = (0..=80).map(|i| req.p_max_dbm - 40.0 + 0.5 * i as f64).collect();
    let kkt = allocate(PowerRule::KktWaterFilling, h, g, chan.f, &budget).p_s;
    let boundary = allocate(PowerRule::BoundaryOptimal, h, g, chan.f, &budget).p_s;
    Ok(PowerCurve {
        se_bits: p_dbm.iter().map(|&p| se(dbm_to_watts(p))).collect(),
        p_dbm,
        interference_cap_dbm: if g > 0.0 {
            watts_to_dbm(req.i_th_w / g)
        } else {
            f64::INFINITY
        },
        kkt_p_dbm: watts_to_dbm(kkt),
        kkt_se: se(kkt),
        boundary_p_dbm: watts_to_dbm(boundary),
        boundary_se: se(boundary),
    })
}

fn call<Req, Resp>(json: &str, f: impl FnOnce(&Req) -> Result<Resp, String>) -> Result<String, String>
where
    Req: for<'de> Deserialize<'de>,
    Resp: Serialize,
{
    let req: Req = serde_json::from_str(json).map_err(|e| format!("bad request: {e}"))?;
    let resp = f(&req)?;
    serde_json::to_string(&resp).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = solveLink)]
pub fn solve_link_js(json: &str) -> Result<String, JsError> {
    call(json, solve_link).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = ithSweep)]
pub fn ith_sweep_js(json: &str) -> Result<String, JsError> {
    call(json, ith_sweep).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = powerCurve)]
pub fn power_curve_js(json: &str) -> Result<String, JsError> {
    call(json, power_curve).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_defaults_solve() {
        let resp = solve_link(&LinkRequest::default()).unwrap();
        assert_eq!(resp.elements, 32);
        assert_eq!(resp.results.len(), 2);
        for r in &resp.results {
            assert!(r.interference_w <= 0.1 * (1.0 + 1e-9));
            assert_eq!(*r.se_trace.last().unwrap(), r.se_bits);
        }
    }

    #[test]
    fn json_round_trip_and_errors() {
        let out = call(r#"{"mx": 2, "my": 2, "trial": 3}"#, solve_link).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["results"][0]["architecture"], "BD");
        assert!(call("{not json", solve_link).unwrap_err().starts_with("bad request"));
        assert!(call(r#"{"mx": 16, "my": 16}"#, solve_link).is_err());
        assert!(call(r#"{"i_th_w": -1}"#, solve_link).is_err());
    }

    #[test]
    fn sweep_is_non_decreasing_in_threshold() {
        let req = SweepRequest {
            trials: 10,
            ..Default::default()
        };
        let points = ith_sweep(&req).unwrap();
        assert_eq!(points.len(), 8);
        for arch in [RisArchitecture::Bd, RisArchitecture::D] {
            let means: Vec<f64> = points
                .iter()
                .filter(|p| p.architecture == arch)
                .map(|p| p.mean_se)
                .collect();
            assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
        }
        let too_many = SweepRequest {
            trials: MAX_TRIALS + 1,
            ..Default::default()
        };
        assert!(ith_sweep(&too_many).is_err());
    }

    #[test]
    fn boundary_rule_dominates_on_the_curve() {
        let curve = power_curve(&LinkRequest::default()).unwrap();
        assert_eq!(curve.p_dbm.len(), curve.se_bits.len());
        assert!(curve.se_bits.windows(2).all(|w| w[1] >= w[0]));
        assert!(curve.boundary_se >= curve.kkt_se);
        assert!(curve.boundary_p_dbm <= curve.interference_cap_dbm + 1e-9);
    }
}
