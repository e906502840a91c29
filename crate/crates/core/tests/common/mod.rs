#![allow(dead_code)]

use std::path::PathBuf;

use hardy_variational::assembly::{assemble, GridFunction, Potentials};
use hardy_variational::functional::ProblemContext;
use hardy_variational::geometry::{build_grid, k_mask, DomainSpec, RegionK};
use hardy_variational::nonlinearity::NonlinearitySpec;

pub fn ball_ctx(m: usize, spec: NonlinearitySpec, potentials: Potentials, region: RegionK) -> ProblemContext {
    let grid = build_grid(&DomainSpec::ball(1.0, 3).unwrap(), m).unwrap();
    let mask = k_mask(&grid, &region).unwrap();
    ProblemContext::new(assemble(&grid), spec, potentials, mask).unwrap()
}

pub fn box_ctx(m: usize, spec: NonlinearitySpec, potentials: Potentials, region: RegionK) -> ProblemContext {
    let grid = build_grid(&DomainSpec::cube(1.0).unwrap(), m).unwrap();
    let mask = k_mask(&grid, &region).unwrap();
    ProblemContext::new(assemble(&grid), spec, potentials, mask).unwrap()
}

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// `‖u - v‖_M / ‖v‖_M` after aligning the sign of `u` with `v`.
pub fn relative_l2(ctx: &ProblemContext, u: &GridFunction, v: &GridFunction) -> f64 {
    let s = if u.component_mul(ctx.mass()).dot(v) < 0.0 { -1.0 } else { 1.0 };
    (ctx.mass_of(&(u * s - v)) / ctx.mass_of(v)).sqrt()
}

/// Radial profile of `w'' + 2w'/s + w³ = 0`, `w(0) = 1`, `w'(0) = 0`,
/// integrated by classical RK4 on a uniform grid in `s`.
pub struct LaneEmden {
    pub h: f64,
    pub w: Vec<f64>,
}

impl LaneEmden {
    pub fn integrate(s_max: f64, h: f64) -> Self {
        // start off the coordinate singularity with the series
        // w = 1 - s²/6 + s⁴/40
        let s0 = h;
        let mut y = [1.0 - s0 * s0 / 6.0 + s0.powi(4) / 40.0, -s0 / 3.0 + s0.powi(3) / 10.0];
        let rhs = |s: f64, y: [f64; 2]| [y[1], -2.0 * y[1] / s - y[0].powi(3)];
        let n = (s_max / h).ceil() as usize;
        let mut w = vec![1.0, y[0]];
        let mut s = s0;
        for _ in 1..n {
            let k1 = rhs(s, y);
            let k2 = rhs(s + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = rhs(s + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = rhs(s + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            s += h;
            w.push(y[0]);
        }
        LaneEmden { h, w }
    }

    pub fn at(&self, s: f64) -> f64 {
        let x = s / self.h;
        let i = (x.floor() as usize).min(self.w.len() - 2);
        let t = x - i as f64;
        self.w[i] * (1.0 - t) + self.w[i + 1] * t
    }

    /// Zeros of `w`, by linear interpolation between samples.
    pub fn zeros(&self) -> Vec<f64> {
        self.w
            .windows(2)
            .enumerate()
            .filter(|(_, p)| p[0] * p[1] < 0.0)
            .map(|(i, p)| self.h * (i as f64 + p[0] / (p[0] - p[1])))
            .collect()
    }
}
