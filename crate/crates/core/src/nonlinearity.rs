//! The mixed nonlinearity `f(x, u)`: power type on `K`, asymptotically
//! linear off `K`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NodeMask;

/// A coefficient field over grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    /// One value per grid node, indexed by grid node.
    Table(Vec<f64>),
}

impl Coefficient {
    pub fn at(&self, node: usize) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Table(t) => t[node],
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            Coefficient::Constant(v) => Box::new(std::iter::once(*v)),
            Coefficient::Table(t) => Box::new(t.iter().copied()),
        }
    }

    fn check_len(&self, name: &str, grid_len: usize) -> Result<()> {
        match self {
            Coefficient::Table(t) if t.len() != grid_len => Err(Error::Config(format!(
                "{name} table has {} values for {grid_len} grid nodes",
                t.len()
            ))),
            _ => Ok(()),
        }
    }

    fn is_zero(&self) -> bool {
        self.values().all(|v| v == 0.0)
    }
}

/// `Γ(x) |u|^{p-2} u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPart {
    pub gamma: Coefficient,
    pub exponent: f64,
}

fn default_threshold() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Nonlinearity on `Ω∖K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OffKPart {
    /// `s u³/(1+u²)` for `|u| <= u₀` and `Θ(x) u` beyond, with the slope
    /// `s = Θ (1+u₀²)/u₀²` making the two branches meet.
    Saturating {
        theta: Coefficient,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    Power(PowerPart),
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub on_k: PowerPart,
    pub off_k: OffKPart,
    /// Declares `f(x, -u) = -f(x, u)`; required by the multiplicity solvers.
    #[serde(default = "default_true")]
    pub odd: bool,
}

/// The nonlinearity at a single node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeLaw {
    Power { gamma: f64, p: f64 },
    Saturating { theta: f64, slope: f64, threshold: f64 },
    Zero,
}

impl NodeLaw {
    pub fn f(&self, u: f64) -> f64 {
        match *self {
            NodeLaw::Power { gamma, p } => gamma * u.abs().powf(p - 2.0) * u,
            NodeLaw::Saturating { theta, slope, threshold } => {
                if u.abs() <= threshold {
                    slope * u * u * u / (1.0 + u * u)
                } else {
                    theta * u
                }
            }
            NodeLaw::Zero => 0.0,
        }
    }

    /// `F(u) = ∫₀ᵘ f`.
    pub fn antiderivative(&self, u: f64) -> f64 {
        match *self {
            NodeLaw::Power { gamma, p } => gamma * u.abs().powf(p) / p,
            NodeLaw::Saturating { theta, slope, threshold } => {
                let inner = |v: f64| slope * 0.5 * (v * v - (v * v).ln_1p());
                if u.abs() <= threshold {
                    inner(u)
                } else {
                    inner(threshold) + 0.5 * theta * (u * u - threshold * threshold)
                }
            }
            NodeLaw::Zero => 0.0,
        }
    }

    /// `∂f/∂u`.
    pub fn df(&self, u: f64) -> f64 {
        match *self {
            NodeLaw::Power { gamma, p } => {
                if u == 0.0 {
                    0.0
                } else {
                    gamma * (p - 1.0) * u.abs().powf(p - 2.0)
                }
            }
            NodeLaw::Saturating { theta, slope, threshold } => {
                if u.abs() <= threshold {
                    let u2 = u * u;
                    slope * (u2 * u2 + 3.0 * u2) / ((1.0 + u2) * (1.0 + u2))
                } else {
                    theta
                }
            }
            NodeLaw::Zero => 0.0,
        }
    }
}

impl NonlinearitySpec {
    /// `Γ|u|^{p-2}u` on `K`, saturating with `Θ = ½`,
    /// `u₀ = 1` off `K`.
    pub fn saturating(gamma: f64, p: f64) -> Self {
        NonlinearitySpec {
            on_k: PowerPart {
                gamma: Coefficient::Constant(gamma),
                exponent: p,
            },
            off_k: OffKPart::Saturating {
                theta: Coefficient::Constant(0.5),
                threshold: 1.0,
            },
            odd: true,
        }
    }

    /// `Γ|u|^{p-2}u` at every node, regardless of `K`.
    pub fn pure_power(gamma: f64, p: f64) -> Self {
        let part = PowerPart {
            gamma: Coefficient::Constant(gamma),
            exponent: p,
        };
        NonlinearitySpec {
            on_k: part.clone(),
            off_k: OffKPart::Power(part),
            odd: true,
        }
    }

    /// `f ≡ 0`.
    pub fn zero() -> Self {
        NonlinearitySpec {
            on_k: PowerPart {
                gamma: Coefficient::Constant(0.0),
                exponent: 3.0,
            },
            off_k: OffKPart::Zero,
            odd: true,
        }
    }

    /// Structural checks: `2 < p < 2N/(N-2)`, `Γ >= 0`, finite tables of
    /// the right length, positive threshold.
    pub fn validate(&self, dim: usize, grid_len: usize) -> Result<()> {
        let critical = 2.0 * dim as f64 / (dim as f64 - 2.0);
        let mut powers = vec![("on_k", &self.on_k)];
        if let OffKPart::Power(part) = &self.off_k {
            powers.push(("off_k", part));
        }
        for (name, part) in powers {
            let p = part.exponent;
            if !(p > 2.0 && p < critical) {
                return Err(Error::violated(
                    "F1",
                    format!("{name} exponent p = {p} is outside (2, {critical})"),
                ));
            }
            part.gamma.check_len(&format!("{name} gamma"), grid_len)?;
            if part.gamma.values().any(|g| !(g >= 0.0) || !g.is_finite()) {
                return Err(Error::Config(format!("{name} gamma must be finite and nonnegative")));
            }
        }
        if let OffKPart::Saturating { theta, threshold } = &self.off_k {
            theta.check_len("theta", grid_len)?;
            if theta.values().any(|t| !t.is_finite()) {
                return Err(Error::Config("theta must be finite".into()));
            }
            if !(*threshold > 0.0) || !threshold.is_finite() {
                return Err(Error::Config(format!("threshold must be positive, got {threshold}")));
            }
        }
        Ok(())
    }

    /// The law at grid node `node`.
    pub fn law(&self, node: usize, in_k: bool) -> NodeLaw {
        let power = |part: &PowerPart| NodeLaw::Power {
            gamma: part.gamma.at(node),
            p: part.exponent,
        };
        if in_k {
            return power(&self.on_k);
        }
        match &self.off_k {
            OffKPart::Saturating { theta, threshold } => {
                let theta = theta.at(node);
                let t2 = threshold * threshold;
                NodeLaw::Saturating {
                    theta,
                    slope: theta * (1.0 + t2) / t2,
                    threshold: *threshold,
                }
            }
            OffKPart::Power(part) => power(part),
            OffKPart::Zero => NodeLaw::Zero,
        }
    }

    pub fn eval_f(&self, node: usize, in_k: bool, u: f64) -> f64 {
        self.law(node, in_k).f(u)
    }

    pub fn eval_big_f(&self, node: usize, in_k: bool, u: f64) -> f64 {
        self.law(node, in_k).antiderivative(u)
    }

    pub fn eval_df(&self, node: usize, in_k: bool, u: f64) -> f64 {
        self.law(node, in_k).df(u)
    }

    /// Laws at the grid nodes `nodes`, with `k` the grid-wide mask of `K`.
    pub fn field(&self, nodes: &[usize], k: &NodeMask) -> Vec<NodeLaw> {
        nodes.iter().map(|&i| self.law(i, k.get(i))).collect()
    }

    /// `Θ` at the grid nodes `nodes` (assumed off `K`).
    ///
    /// A power law off `K` has no asymptotic slope; that is a failure of
    /// (F5).
    pub fn theta_table(&self, nodes: &[usize]) -> Result<Vec<f64>> {
        match &self.off_k {
            OffKPart::Saturating { theta, .. } => Ok(nodes.iter().map(|&i| theta.at(i)).collect()),
            OffKPart::Zero => Ok(vec![0.0; nodes.len()]),
            OffKPart::Power(_) if nodes.is_empty() => Ok(vec![]),
            OffKPart::Power(_) => Err(Error::violated("F5", "the nonlinearity off K is not asymptotically linear")),
        }
    }

    /// `max |Θ|` over the nodes off `K`; infinite if the law off `K` is
    /// superlinear.
    pub fn theta_sup(&self, k: &NodeMask) -> f64 {
        let off: Vec<usize> = k.complement().indices();
        match self.theta_table(&off) {
            Ok(t) => t.iter().fold(0.0f64, |acc, v| acc.max(v.abs())),
            Err(_) => f64::INFINITY,
        }
    }

    /// Nodes where the law is a power with positive coefficient.
    pub fn superlinear_mask(&self, k: &NodeMask) -> NodeMask {
        NodeMask(
            (0..k.len())
                .map(|i| matches!(self.law(i, k.get(i)), NodeLaw::Power { gamma, .. } if gamma > 0.0))
                .collect(),
        )
    }

    /// Largest exponent of a nonvanishing power part, `None` when `f` grows
    /// at most linearly.
    pub fn growth_exponent(&self) -> Option<f64> {
        let mut parts = vec![&self.on_k];
        if let OffKPart::Power(part) = &self.off_k {
            parts.push(part);
        }
        parts
            .into_iter()
            .filter(|p| !p.gamma.is_zero())
            .map(|p| p.exponent)
            .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))))
    }

    /// Checks (F1)-(F5), and oddness when declared, on samples.
    pub fn verify_conditions(&self, k: &NodeMask, plan: &SamplePlan) -> ConditionsReport {
        let on: Vec<usize> = subsample(&k.indices(), plan.max_nodes);
        let off: Vec<usize> = subsample(&k.complement().indices(), plan.max_nodes);
        let laws: Vec<(usize, bool)> = on.iter().map(|&i| (i, true)).chain(off.iter().map(|&i| (i, false))).collect();
        let positive = plan.magnitudes();
        let p = self.on_k.exponent;

        let mut checks = Vec::new();

        // (F1): fitted constant and log-log growth at the top of the range
        let mut constant = 0.0f64;
        let mut slope_excess = f64::NEG_INFINITY;
        for &(i, in_k) in &laws {
            let law = self.law(i, in_k);
            for &u in &positive {
                for s in [u, -u] {
                    constant = constant.max(law.f(s).abs() / (1.0 + s.abs().powf(p - 1.0)));
                }
            }
            let (a, b) = (plan.u_max / 10.0, plan.u_max);
            let (fa, fb) = (law.f(a).abs(), law.f(b).abs());
            if fa > 0.0 && fb > 0.0 {
                slope_excess = slope_excess.max((fb / fa).log10() - (p - 1.0));
            }
        }
        checks.push(ConditionCheck::new(
            "F1",
            slope_excess <= 1e-9 && constant.is_finite(),
            slope_excess.max(0.0),
            format!("fitted constant {constant:.6e} with exponent p = {p}"),
        ));

        // (F2): |f|/|u| decreasing to zero as u -> 0
        let small: Vec<f64> = (0..=8).map(|j| 10f64.powf(-2.0 - j as f64 * 0.5)).collect();
        let mut f2_ok = true;
        let mut f2_worst = 0.0f64;
        for &(i, in_k) in &laws {
            let law = self.law(i, in_k);
            for sign in [1.0, -1.0] {
                let ratios: Vec<f64> = small.iter().map(|&u| law.f(sign * u).abs() / u).collect();
                let last = *ratios.last().unwrap();
                let monotone = ratios.windows(2).all(|w| w[1] <= w[0]);
                f2_ok &= monotone && (last == 0.0 || last < ratios[0]);
                f2_worst = f2_worst.max(last);
            }
        }
        checks.push(ConditionCheck::new(
            "F2",
            f2_ok,
            f2_worst,
            format!("largest |f(u)|/|u| at |u| = {:.0e}", plan.u_min),
        ));

        // (F3): F/u² strictly increasing for large |u| on K
        let large: Vec<f64> = positive.iter().copied().filter(|&u| u >= 10.0).collect();
        let mut f3_ok = true;
        let mut f3_worst = f64::INFINITY;
        for &i in &on {
            let law = self.law(i, true);
            for sign in [1.0, -1.0] {
                let q: Vec<f64> = large.iter().map(|&u| law.antiderivative(sign * u) / (u * u)).collect();
                f3_ok &= q.windows(2).all(|w| w[1] > w[0]);
                f3_worst = f3_worst.min(*q.last().unwrap_or(&f64::INFINITY));
            }
        }
        let f3_detail = if on.is_empty() {
            "vacuous: K has no nodes".to_string()
        } else {
            format!("smallest F(u)/u² at |u| = {:.0e}", plan.u_max)
        };
        checks.push(ConditionCheck::new("F3", f3_ok, f3_worst.min(f64::MAX), f3_detail));

        // (F4): f(u)/|u| nondecreasing in u on each half-line
        let mut f4_worst = 0.0f64;
        for &(i, in_k) in &laws {
            let law = self.law(i, in_k);
            let right: Vec<f64> = positive.iter().map(|&u| law.f(u) / u).collect();
            let left: Vec<f64> = positive.iter().rev().map(|&u| law.f(-u) / u).collect();
            for seq in [right, left] {
                for w in seq.windows(2) {
                    let drop = (w[0] - w[1]) / (1.0 + w[0].abs());
                    f4_worst = f4_worst.max(drop);
                }
            }
        }
        checks.push(ConditionCheck::new(
            "F4",
            f4_worst <= 1e-12,
            f4_worst,
            "largest relative decrease of f(u)/|u|".into(),
        ));

        // (F5): f = Θ u exactly beyond the threshold off K
        let (f5_ok, f5_worst, f5_detail) = match (&self.off_k, off.is_empty()) {
            (_, true) => (true, 0.0, "vacuous: every node lies in K".to_string()),
            (OffKPart::Power(_), false) => (false, f64::INFINITY, "power law off K is not asymptotically linear".into()),
            (OffKPart::Zero, false) => (true, 0.0, "f vanishes off K".into()),
            (OffKPart::Saturating { theta, threshold }, false) => {
                let mut worst = 0.0f64;
                for &i in &off {
                    let law = self.law(i, false);
                    for &u in positive.iter().filter(|&&u| u > *threshold) {
                        for s in [u, -u] {
                            worst = worst.max((law.f(s) - theta.at(i) * s).abs());
                        }
                    }
                }
                (worst == 0.0, worst, format!("|f - Θu| beyond u₀ = {threshold}"))
            }
        };
        checks.push(ConditionCheck::new("F5", f5_ok, f5_worst, f5_detail));

        if self.odd {
            let mut worst = 0.0f64;
            for &(i, in_k) in &laws {
                let law = self.law(i, in_k);
                for &u in &positive {
                    worst = worst.max((law.f(-u) + law.f(u)).abs() / (1.0 + law.f(u).abs()));
                }
            }
            checks.push(ConditionCheck::new("odd", worst == 0.0, worst, "|f(-u) + f(u)|".into()));
        }

        ConditionsReport { checks }
    }
}

fn subsample(nodes: &[usize], max: usize) -> Vec<usize> {
    if nodes.len() <= max || max == 0 {
        return nodes.to_vec();
    }
    (0..max).map(|j| nodes[j * (nodes.len() - 1) / (max - 1).max(1)]).collect()
}

/// Where the conditions are sampled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePlan {
    pub u_min: f64,
    pub u_max: f64,
    pub per_decade: usize,
    /// Cap on sampled nodes inside and outside `K` each.
    pub max_nodes: usize,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            u_min: 1e-6,
            u_max: 1e4,
            per_decade: 10,
            max_nodes: 64,
        }
    }
}

impl SamplePlan {
    /// Log-spaced magnitudes from `u_min` to `u_max`, ascending.
    pub fn magnitudes(&self) -> Vec<f64> {
        let (a, b) = (self.u_min.log10(), self.u_max.log10());
        let n = ((b - a) * self.per_decade as f64).ceil() as usize;
        (0..=n).map(|j| 10f64.powf(a + (b - a) * j as f64 / n as f64)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub detail: String,
}

impl ConditionCheck {
    fn new(name: &'static str, passed: bool, worst: f64, detail: String) -> Self {
        ConditionCheck {
            name,
            passed,
            worst,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionsReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionsReport {
    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Error for the first failing condition among `names`.
    pub fn require(&self, names: &[&'static str]) -> Result<()> {
        for &name in names {
            if let Some(c) = self.get(name) {
                if !c.passed {
                    return Err(Error::violated(name, format!("{} (worst {:.3e})", c.detail, c.worst)));
                }
            }
        }
        Ok(())
    }
}

/// Read a node table from CSV rows `node,value`; a header row is allowed.
/// Nodes not listed get 0.
pub fn read_node_table(path: &Path, grid_len: usize) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut table = vec![0.0; grid_len];
    let mut seen = vec![false; grid_len];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Config(format!("{}: row {row} needs two fields", path.display())));
        }
        let parsed = (record[0].parse::<usize>(), record[1].parse::<f64>());
        let (node, value) = match parsed {
            (Ok(n), Ok(v)) => (n, v),
            _ if row == 0 => continue,
            _ => return Err(Error::Config(format!("{}: cannot parse row {row}", path.display()))),
        };
        if node >= grid_len {
            return Err(Error::Config(format!("{}: node {node} out of range", path.display())));
        }
        if std::mem::replace(&mut seen[node], true) {
            return Err(Error::Config(format!("{}: node {node} listed twice", path.display())));
        }
        table[node] = value;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::io::Write;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for j in 1..n {
            s += f(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn eval_examples() {
        let spec = NonlinearitySpec::saturating(1.0, 4.0);
        assert_relative_eq!(spec.eval_f(0, true, 2.0), 8.0);
        assert_relative_eq!(spec.eval_f(0, false, 2.0), 1.0);
        let below = spec.eval_f(0, false, 1.0);
        let above = spec.eval_f(0, false, 1.0 + 1e-15);
        assert_relative_eq!(below, 0.5, epsilon = 1e-15);
        assert_relative_eq!(above, 0.5, epsilon = 1e-14);
        assert_relative_eq!(spec.eval_big_f(0, true, 2.0), 4.0);
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        let spec = NonlinearitySpec::saturating(1.0, 4.0);
        let f1 = simpson(|s| s * s * s / (1.0 + s * s), 0.0, 1.0, 2000);
        assert_relative_eq!(spec.eval_big_f(0, false, 1.0), f1, epsilon = 1e-12);
        assert_relative_eq!(spec.eval_big_f(0, false, 1.0), 0.153426409720027, epsilon = 1e-12);
        let f2 = f1 + simpson(|s| 0.5 * s, 1.0, 2.0, 10);
        assert_relative_eq!(spec.eval_big_f(0, false, 2.0), f2, epsilon = 1e-12);
    }

    #[test]
    fn theta_sup_examples() {
        let k = NodeMask(vec![false, false]);
        assert_eq!(NonlinearitySpec::saturating(1.0, 4.0).theta_sup(&k), 0.5);
        let mut spec = NonlinearitySpec::saturating(1.0, 4.0);
        spec.off_k = OffKPart::Saturating {
            theta: Coefficient::Table(vec![0.2, -0.4]),
            threshold: 1.0,
        };
        assert_eq!(spec.theta_sup(&k), 0.4);
        assert_eq!(spec.theta_sup(&NodeMask(vec![true, true])), 0.0);
    }

    #[test]
    fn default_spec_passes_everything() {
        let k = NodeMask((0..40).map(|i| (10..20).contains(&i)).collect());
        let rep = NonlinearitySpec::saturating(1.0, 4.0).verify_conditions(&k, &SamplePlan::default());
        assert!(rep.all_passed(), "{rep:?}");
        assert_eq!(rep.checks.len(), 6);
    }

    #[test]
    fn cubic_off_k_fails_f5() {
        let k = NodeMask((0..10).map(|i| i < 5).collect());
        let mut spec = NonlinearitySpec::saturating(1.0, 4.0);
        spec.off_k = OffKPart::Power(PowerPart {
            gamma: Coefficient::Constant(1.0),
            exponent: 4.0,
        });
        let rep = spec.verify_conditions(&k, &SamplePlan::default());
        assert!(!rep.get("F5").unwrap().passed);
        assert!(rep.get("F4").unwrap().passed);
        assert!(matches!(rep.require(&["F5"]), Err(Error::ConditionViolated { condition: "F5", .. })));
    }

    #[test]
    fn low_power_passes_f4() {
        let k = NodeMask(vec![true; 4]);
        let rep = NonlinearitySpec::pure_power(1.0, 2.5).verify_conditions(&k, &SamplePlan::default());
        assert!(rep.get("F4").unwrap().passed);
        assert!(rep.all_passed(), "{rep:?}");
    }

    #[test]
    fn negative_theta_breaks_f4() {
        let k = NodeMask(vec![false; 3]);
        let mut spec = NonlinearitySpec::saturating(1.0, 4.0);
        spec.off_k = OffKPart::Saturating {
            theta: Coefficient::Constant(-0.3),
            threshold: 1.0,
        };
        assert!(!spec.verify_conditions(&k, &SamplePlan::default()).get("F4").unwrap().passed);
    }

    #[test]
    fn zero_gamma_on_k_breaks_f3() {
        let k = NodeMask(vec![true; 3]);
        let rep = NonlinearitySpec::zero().verify_conditions(&k, &SamplePlan::default());
        assert!(!rep.get("F3").unwrap().passed);
        let rep = NonlinearitySpec::zero().verify_conditions(&NodeMask(vec![false; 3]), &SamplePlan::default());
        assert!(rep.all_passed(), "{rep:?}");
    }

    #[test]
    fn validation() {
        let spec = NonlinearitySpec::saturating(1.0, 4.0);
        assert!(spec.validate(3, 10).is_ok());
        assert!(matches!(
            NonlinearitySpec::saturating(1.0, 6.0).validate(3, 10),
            Err(Error::ConditionViolated { condition: "F1", .. })
        ));
        assert!(NonlinearitySpec::saturating(-1.0, 4.0).validate(3, 10).is_err());
        let mut bad = spec.clone();
        bad.on_k.gamma = Coefficient::Table(vec![1.0; 3]);
        assert!(matches!(bad.validate(3, 10), Err(Error::Config(_))));
    }

    #[test]
    fn growth_exponent() {
        assert_eq!(NonlinearitySpec::zero().growth_exponent(), None);
        assert_eq!(NonlinearitySpec::saturating(1.0, 3.0).growth_exponent(), Some(3.0));
    }

    #[test]
    fn node_tables_from_csv() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "node,value\n0,0.5\n2,-1.25").unwrap();
        let t = read_node_table(file.path(), 3).unwrap();
        assert_eq!(t, vec![0.5, 0.0, -1.25]);
        assert!(read_node_table(file.path(), 2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = NonlinearitySpec::saturating(2.0, 3.5);
        let text = serde_json::to_string(&spec).unwrap();
        let back: NonlinearitySpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let parsed: NonlinearitySpec = serde_json::from_str(
            r#"{"on_k":{"gamma":[1,2],"exponent":3},"off_k":{"kind":"saturating","theta":0.5}}"#,
        )
        .unwrap();
        assert!(parsed.odd);
        assert_eq!(parsed.on_k.gamma, Coefficient::Table(vec![1.0, 2.0]));
    }

    fn any_law() -> impl Strategy<Value = NodeLaw> {
        prop_oneof![
            (0.0f64..3.0, 2.1f64..5.9).prop_map(|(gamma, p)| NodeLaw::Power { gamma, p }),
            (-1.0f64..1.0, 0.2f64..3.0).prop_map(|(theta, threshold)| NodeLaw::Saturating {
                theta,
                slope: theta * (1.0 + threshold * threshold) / (threshold * threshold),
                threshold
            }),
        ]
    }

    proptest! {
        #[test]
        fn antiderivative_consistent(law in any_law(), u in -4.0f64..4.0) {
            // split at the branch joints so Simpson sees smooth pieces
            let mut cuts = vec![0.0, u];
            if let NodeLaw::Saturating { threshold, .. } = law {
                if threshold < u.abs() {
                    cuts.insert(1, threshold * u.signum());
                }
            }
            let quad: f64 = cuts.windows(2).map(|w| simpson(|s| law.f(s), w[0], w[1], 2000)).sum();
            prop_assert!((law.antiderivative(u) - quad).abs() <= 1e-8 * (1.0 + quad.abs()));
        }

        #[test]
        fn odd_and_even(law in any_law(), u in -50.0f64..50.0) {
            prop_assert_eq!(law.f(-u), -law.f(u));
            prop_assert_eq!(law.antiderivative(-u), law.antiderivative(u));
            prop_assert_eq!(law.antiderivative(0.0), 0.0);
        }

        #[test]
        fn derivative_consistent(law in any_law(), u in 0.05f64..5.0) {
            let h = 1e-6;
            let fd = (law.f(u + h) - law.f(u - h)) / (2.0 * h);
            if let NodeLaw::Saturating { threshold, .. } = law {
                prop_assume!((u - threshold).abs() > 1e-3);
            }
            prop_assert!((law.df(u) - fd).abs() <= 1e-5 * (1.0 + fd.abs()));
        }
    }
}
