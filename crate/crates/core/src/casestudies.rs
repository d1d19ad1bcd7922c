//! Power-system case studies as problem instances: a demand-response
//! problem with cubic gradients for the private-key protocol and an optimal
//! power flow problem with affine gradients for the public-key protocol.
//! Network data is synthetic; see [`synth_network`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::{dec, ScaledDecimal};
use crate::problem::{
    FeasibleSet, Participant, PolynomialFunction, ProblemBuilder, ProblemError, ProblemInstance, Rounding, StepSchedule,
};

#[derive(Debug, Error)]
pub enum CaseStudyError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("a network needs at least 2 buses, got {0}")]
    SizeTooSmall(usize),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn invalid(msg: impl Into<String>) -> CaseStudyError {
    CaseStudyError::ConfigInvalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Ring,
    Star,
    Path,
}

impl std::str::FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ring" => Ok(Topology::Ring),
            "star" => Ok(Topology::Star),
            "path" => Ok(Topology::Path),
            other => Err(format!("unknown topology {other:?}; expected ring, star or path")),
        }
    }
}

/// Undirected network on buses `0..size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    pub topology: Topology,
    pub size: usize,
    /// Lines as `(from, to)` with `from < to`.
    pub lines: Vec<(usize, usize)>,
}

impl Network {
    pub fn neighbors(&self, bus: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .lines
            .iter()
            .filter_map(|&(a, b)| match bus {
                x if x == a => Some(b),
                x if x == b => Some(a),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn degree(&self, bus: usize) -> usize {
        self.neighbors(bus).len()
    }
}

/// Deterministic ring, star (hub 0) or path network.
pub fn synth_network(topology: Topology, size: usize) -> Result<Network, CaseStudyError> {
    if size < 2 {
        return Err(CaseStudyError::SizeTooSmall(size));
    }
    let lines = match topology {
        Topology::Path => (0..size - 1).map(|i| (i, i + 1)).collect(),
        Topology::Star => (1..size).map(|i| (0, i)).collect(),
        Topology::Ring if size == 2 => vec![(0, 1)],
        Topology::Ring => {
            let mut l: Vec<(usize, usize)> = (0..size - 1).map(|i| (i, i + 1)).collect();
            l.push((0, size - 1));
            l
        }
    };
    Ok(Network { topology, size, lines })
}

/// Synthetic shift factor of `bus` on line `e`: one half with the flow
/// direction at the endpoints, a small deterministic value elsewhere.
fn shift_factor(network: &Network, e: usize, bus: usize) -> ScaledDecimal {
    let (from, to) = network.lines[e];
    if bus == from {
        dec("0.5")
    } else if bus == to {
        dec("-0.5")
    } else {
        ScaledDecimal::new(((e + 2 * bus) % 5) as i64 - 2, 1)
    }
}

/// Parameters of the demand-response problem. Field names follow the usual
/// notation: supply `s`, intended load `l`, line capacities `f_max`, shift
/// factors `h_s` and `h_l` (lines by buses), disutility `c`, benefit `a`,
/// `b`, price `lambda`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandResponseConfig {
    pub s: Vec<ScaledDecimal>,
    pub l: Vec<ScaledDecimal>,
    pub f_max: Vec<ScaledDecimal>,
    pub h_s: Vec<Vec<ScaledDecimal>>,
    pub h_l: Vec<Vec<ScaledDecimal>>,
    pub c: Vec<ScaledDecimal>,
    pub a: Vec<ScaledDecimal>,
    pub b: Vec<ScaledDecimal>,
    pub lambda: ScaledDecimal,
    pub gamma: ScaledDecimal,
    #[serde(default = "default_sigma")]
    pub sigma: u32,
    /// Initial load reductions; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<Vec<ScaledDecimal>>,
}

fn default_sigma() -> u32 {
    4
}

impl DemandResponseConfig {
    /// The first `supply_buses` buses supply, the rest are customers. Total
    /// supply covers 80% of the intended load, so customers must curtail.
    pub fn synthetic(network: &Network, supply_buses: usize) -> Result<Self, CaseStudyError> {
        if supply_buses == 0 || supply_buses >= network.size {
            return Err(invalid(format!(
                "need between 1 and {} supply buses, got {supply_buses}",
                network.size - 1
            )));
        }
        let customers: Vec<usize> = (supply_buses..network.size).collect();
        let l: Vec<ScaledDecimal> = customers
            .iter()
            .map(|&i| ScaledDecimal::from_integer(10 + (i % 3) as i64))
            .collect();
        let total: ScaledDecimal = l.iter().cloned().sum();
        let per_supply = ((&total * &dec("0.8")).to_rational()
            / num_rational::BigRational::from_integer(supply_buses.into()))
        .floor()
        .to_integer();
        let factors = |buses: &[usize]| -> Vec<Vec<ScaledDecimal>> {
            (0..network.lines.len())
                .map(|e| buses.iter().map(|&bus| shift_factor(network, e, bus)).collect())
                .collect()
        };
        let supply: Vec<usize> = (0..supply_buses).collect();
        Ok(DemandResponseConfig {
            s: vec![ScaledDecimal::from_integer(per_supply); supply_buses],
            f_max: vec![ScaledDecimal::from_integer(30); network.lines.len()],
            h_s: factors(&supply),
            h_l: factors(&customers),
            c: customers
                .iter()
                .map(|&i| ScaledDecimal::new(5 + (i % 4) as i64, 1))
                .collect(),
            a: vec![dec("0.1"); customers.len()],
            b: customers
                .iter()
                .map(|&i| ScaledDecimal::from_integer(2 + (i % 2) as i64))
                .collect(),
            l,
            lambda: dec("0.01"),
            gamma: dec("0.01"),
            sigma: 4,
            r0: None,
        })
    }

    pub fn customers(&self) -> usize {
        self.l.len()
    }

    pub fn lines(&self) -> usize {
        self.f_max.len()
    }

    fn validate(&self) -> Result<(), CaseStudyError> {
        let n = self.customers();
        let e = self.lines();
        if n == 0 {
            return Err(invalid("no customers"));
        }
        for (what, len) in [("c", self.c.len()), ("a", self.a.len()), ("b", self.b.len())] {
            if len != n {
                return Err(invalid(format!("{what} has {len} entries for {n} customers")));
            }
        }
        if let Some(r0) = &self.r0 {
            if r0.len() != n {
                return Err(invalid(format!("r0 has {} entries for {n} customers", r0.len())));
            }
            if let Some(i) = (0..n).find(|&i| r0[i].is_negative() || r0[i] > self.l[i]) {
                return Err(invalid(format!("r0 of customer {} lies outside [0, L]", i + 1)));
            }
        }
        if self.h_s.len() != e || self.h_l.len() != e {
            return Err(invalid("shift factor matrices need one row per line"));
        }
        if self.h_s.iter().any(|r| r.len() != self.s.len()) || self.h_l.iter().any(|r| r.len() != n) {
            return Err(invalid("shift factor matrices need one column per bus"));
        }
        let one = ScaledDecimal::one();
        if self.h_s.iter().chain(&self.h_l).flatten().any(|h| h.abs() > one) {
            return Err(invalid("shift factors must lie in [-1, 1]"));
        }
        if self.a.iter().any(|a| a <= &ScaledDecimal::zero()) {
            return Err(invalid("benefit parameters a must be positive"));
        }
        if self.lambda <= ScaledDecimal::zero() {
            return Err(invalid("price lambda must be positive"));
        }
        if self
            .s
            .iter()
            .chain(&self.l)
            .chain(&self.f_max)
            .any(ScaledDecimal::is_negative)
        {
            return Err(invalid("supplies, loads and capacities must be nonnegative"));
        }
        Ok(())
    }
}

/// Where each variable of the demand-response problem lives, as
/// `(agent, coordinate)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DemandResponseLayout {
    pub r: Vec<(usize, usize)>,
    pub mu0: (usize, usize),
    pub mu_plus: Vec<(usize, usize)>,
    pub mu_minus: Vec<(usize, usize)>,
}

impl DemandResponseLayout {
    /// Dual `d` (ordered `mu0`, `mu_plus`, `mu_minus`) goes to customer
    /// `d mod N`, after its load reduction.
    pub fn new(customers: usize, lines: usize) -> Self {
        let mut next = vec![1usize; customers];
        let mut place = |d: usize| {
            let i = d % customers;
            next[i] += 1;
            (i, next[i] - 1)
        };
        let mu0 = place(0);
        let mu_plus = (0..lines).map(|e| place(1 + e)).collect();
        let mu_minus = (0..lines).map(|e| place(1 + lines + e)).collect();
        DemandResponseLayout {
            r: (0..customers).map(|i| (i, 0)).collect(),
            mu0,
            mu_plus,
            mu_minus,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![0usize; self.r.len()];
        for &(i, l) in self
            .r
            .iter()
            .chain([&self.mu0])
            .chain(&self.mu_plus)
            .chain(&self.mu_minus)
        {
            dims[i] = dims[i].max(l + 1);
        }
        dims
    }
}

/// Customer `i` holds `R_i` and its share of the duals `(mu0, mu+, mu-)`.
/// Price, supplies, capacities and shift factors belong to the operator;
/// `a_i, b_i, c_i, L_i` to customer `i`.
pub fn build_demand_response(cfg: &DemandResponseConfig) -> Result<ProblemInstance, CaseStudyError> {
    cfg.validate()?;
    let n = cfg.customers();
    let e_count = cfg.lines();
    let layout = DemandResponseLayout::new(n, e_count);
    let dims = layout.dims();
    let mut b = ProblemBuilder::new(cfg.sigma);
    for (i, &dim) in dims.iter().enumerate() {
        let lo = vec![Some(ScaledDecimal::zero()); dim];
        let mut hi = vec![None; dim];
        hi[0] = Some(cfg.l[i].clone());
        let mut x0 = vec![ScaledDecimal::zero(); dim];
        if let Some(r0) = &cfg.r0 {
            x0[0] = r0[i].clone();
        }
        b.add_agent(FeasibleSet::Box { lo, hi }, x0);
    }

    let so = [Participant::OPERATOR];
    let lambda = b.add_coefficient("lambda", cfg.lambda.clone(), &so);
    let s: Vec<usize> = cfg
        .s
        .iter()
        .enumerate()
        .map(|(k, v)| b.add_coefficient(format!("S{}", k + 1), v.clone(), &so))
        .collect();
    let f: Vec<usize> = cfg
        .f_max
        .iter()
        .enumerate()
        .map(|(e, v)| b.add_coefficient(format!("fmax{}", e + 1), v.clone(), &so))
        .collect();
    let hs: Vec<Vec<usize>> = cfg
        .h_s
        .iter()
        .enumerate()
        .map(|(e, row)| {
            row.iter()
                .enumerate()
                .map(|(k, v)| b.add_coefficient(format!("Hs{}_{}", e + 1, k + 1), v.clone(), &so))
                .collect()
        })
        .collect();
    let hl: Vec<Vec<usize>> = cfg
        .h_l
        .iter()
        .enumerate()
        .map(|(e, row)| {
            row.iter()
                .enumerate()
                .map(|(i, v)| b.add_coefficient(format!("Hl{}_{}", e + 1, i + 1), v.clone(), &so))
                .collect()
        })
        .collect();
    let own = |b: &mut ProblemBuilder, name: &str, values: &[ScaledDecimal]| -> Vec<usize> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| b.add_coefficient(format!("{name}{}", i + 1), v.clone(), &[Participant::agent(i)]))
            .collect()
    };
    let a = own(&mut b, "a", &cfg.a);
    let bb = own(&mut b, "b", &cfg.b);
    let c = own(&mut b, "c", &cfg.c);
    let l = own(&mut b, "L", &cfg.l);

    let x = |b: &ProblemBuilder, (i, k): (usize, usize)| b.x(i, k);
    let two = b.lit(dec("2"));
    // actual load L_i - R_i and total actual load T
    let actual: Vec<PolynomialFunction> = (0..n).map(|i| &b.y(l[i]) - &x(&b, layout.r[i])).collect();
    let total = actual
        .iter()
        .fold(PolynomialFunction::zero(b.n(), b.m()), |acc, t| &acc + t);
    let price = b.y(lambda);

    for i in 0..n {
        let mut phi = &(&b.y(c[i]) - &(&b.y(a[i]) * &actual[i])) + &b.y(bb[i]);
        phi = &phi - &(&(&(&two * &price) * &total) * &actual[i]);
        phi = &phi - &(&(&price * &total) * &total);
        phi = &phi - &x(&b, layout.mu0);
        for (e, weights) in hl.iter().enumerate() {
            let weight = b.y(weights[i]);
            phi = &phi + &(&weight * &(&x(&b, layout.mu_plus[e]) - &x(&b, layout.mu_minus[e])));
        }
        let (agent, coord) = layout.r[i];
        b.set_gradient(agent, coord, phi);
    }

    let supply_total = s
        .iter()
        .fold(PolynomialFunction::zero(b.n(), b.m()), |acc, &k| &acc + &b.y(k));
    let (agent, coord) = layout.mu0;
    b.set_gradient(agent, coord, -&(&total - &supply_total));
    for e in 0..e_count {
        let mut flow = PolynomialFunction::zero(b.n(), b.m());
        for (k, &sk) in s.iter().enumerate() {
            flow = &flow + &(&b.y(hs[e][k]) * &b.y(sk));
        }
        for (i, t) in actual.iter().enumerate() {
            flow = &flow - &(&b.y(hl[e][i]) * t);
        }
        let cap = b.y(f[e]);
        let (agent, coord) = layout.mu_plus[e];
        b.set_gradient(agent, coord, -&(&flow - &cap));
        let (agent, coord) = layout.mu_minus[e];
        b.set_gradient(agent, coord, -&(&(-&flow) - &cap));
    }
    b.step(StepSchedule::Constant(cfg.gamma.clone()));
    b.rounding(Rounding::Quantize);
    Ok(b.build()?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub a: ScaledDecimal,
    pub b: ScaledDecimal,
    pub p_min: ScaledDecimal,
    pub p_max: ScaledDecimal,
    pub load: ScaledDecimal,
    pub damping: ScaledDecimal,
    /// Initial power; `p_min` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<ScaledDecimal>,
}

/// A line between generators `from` and `to` (one-based).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Tie-line stiffness.
    pub t: ScaledDecimal,
    pub capacity: ScaledDecimal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpfConfig {
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
    #[serde(default = "default_omega")]
    pub omega: ScaledDecimal,
    pub gamma: ScaledDecimal,
    #[serde(default = "default_sigma")]
    pub sigma: u32,
}

fn default_omega() -> ScaledDecimal {
    ScaledDecimal::from_integer(60)
}

impl OpfConfig {
    /// Uniform parameters on `network`: `D = 1`, `t = 1.5`, `a = 0.1`,
    /// `b = 10`, power limits `[10, 100]`, load 10 and line capacity 80.
    pub fn uniform(network: &Network) -> Self {
        let generator = Generator {
            a: dec("0.1"),
            b: dec("10"),
            p_min: dec("10"),
            p_max: dec("100"),
            load: dec("10"),
            damping: dec("1"),
            p0: None,
        };
        OpfConfig {
            generators: vec![generator; network.size],
            lines: network
                .lines
                .iter()
                .map(|&(from, to)| Line {
                    from: from + 1,
                    to: to + 1,
                    t: dec("1.5"),
                    capacity: dec("80"),
                })
                .collect(),
            omega: default_omega(),
            gamma: dec("0.01"),
            sigma: 4,
        }
    }

    /// Sorted neighbours of each generator (zero-based).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.generators.len()];
        for line in &self.lines {
            out[line.from - 1].push(line.to - 1);
            out[line.to - 1].push(line.from - 1);
        }
        for list in &mut out {
            list.sort_unstable();
        }
        out
    }

    fn validate(&self) -> Result<(), CaseStudyError> {
        let n = self.generators.len();
        if n == 0 {
            return Err(invalid("no generators"));
        }
        for (i, g) in self.generators.iter().enumerate() {
            if g.a <= ScaledDecimal::zero() {
                return Err(invalid(format!(
                    "generator {}: cost parameter a must be positive",
                    i + 1
                )));
            }
            if g.p_min > g.p_max {
                return Err(invalid(format!("generator {}: p_min exceeds p_max", i + 1)));
            }
            if let Some(p0) = &g.p0 {
                if p0 < &g.p_min || p0 > &g.p_max {
                    return Err(invalid(format!("generator {}: p0 outside [p_min, p_max]", i + 1)));
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for line in &self.lines {
            let ok = (1..=n).contains(&line.from) && (1..=n).contains(&line.to) && line.from != line.to;
            if !ok {
                return Err(invalid(format!(
                    "line {}-{} does not join two generators",
                    line.from, line.to
                )));
            }
            if !seen.insert((line.from.min(line.to), line.from.max(line.to))) {
                return Err(invalid(format!("line {}-{} listed twice", line.from, line.to)));
            }
        }
        Ok(())
    }
}

/// Where each variable of the OPF problem lives, as `(agent, coordinate)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpfLayout {
    pub neighbors: Vec<Vec<usize>>,
}

impl OpfLayout {
    pub fn p(&self, i: usize) -> (usize, usize) {
        (i, 0)
    }

    pub fn theta(&self, i: usize) -> (usize, usize) {
        (i, 1)
    }

    pub fn lambda(&self, i: usize) -> (usize, usize) {
        (i, 2)
    }

    /// `mu_ij`, held by generator `i`.
    pub fn mu(&self, i: usize, j: usize) -> (usize, usize) {
        let pos = self.neighbors[i].iter().position(|&v| v == j).expect("j neighbours i");
        (i, 3 + pos)
    }
}

/// Generator `i` holds `(P_i, theta_i, lambda_i, mu_ij)` for its neighbours
/// `j`. Cost, limits and load belong to the generator; damping, stiffness
/// and line capacities to the operator. Every gradient is affine.
pub fn build_opf(cfg: &OpfConfig) -> Result<ProblemInstance, CaseStudyError> {
    cfg.validate()?;
    let n = cfg.generators.len();
    let layout = OpfLayout {
        neighbors: cfg.neighbors(),
    };
    let mut b = ProblemBuilder::new(cfg.sigma);
    for (i, g) in cfg.generators.iter().enumerate() {
        let dim = 3 + layout.neighbors[i].len();
        let mut lo = vec![None; dim];
        let mut hi = vec![None; dim];
        lo[0] = Some(g.p_min.clone());
        hi[0] = Some(g.p_max.clone());
        for slot in lo.iter_mut().skip(3) {
            *slot = Some(ScaledDecimal::zero());
        }
        let mut x0 = vec![ScaledDecimal::zero(); dim];
        x0[0] = g.p0.clone().unwrap_or_else(|| g.p_min.clone());
        b.add_agent(FeasibleSet::Box { lo, hi }, x0);
    }

    let so = [Participant::OPERATOR];
    let mut stiffness = std::collections::BTreeMap::new();
    let mut capacity = std::collections::BTreeMap::new();
    for line in &cfg.lines {
        let (u, v) = (line.from.min(line.to) - 1, line.from.max(line.to) - 1);
        let t = b.add_coefficient(format!("t{}_{}", u + 1, v + 1), line.t.clone(), &so);
        let cap = b.add_coefficient(format!("Pmax{}_{}", u + 1, v + 1), line.capacity.clone(), &so);
        stiffness.insert((u, v), t);
        capacity.insert((u, v), cap);
    }
    let key = |i: usize, j: usize| (i.min(j), i.max(j));
    let damping: Vec<usize> = (0..n)
        .map(|i| b.add_coefficient(format!("D{}", i + 1), cfg.generators[i].damping.clone(), &so))
        .collect();
    let mut own = Vec::new();
    for (i, g) in cfg.generators.iter().enumerate() {
        let owner = [Participant::agent(i)];
        let a = b.add_coefficient(format!("a{}", i + 1), g.a.clone(), &owner);
        let bb = b.add_coefficient(format!("b{}", i + 1), g.b.clone(), &owner);
        let l = b.add_coefficient(format!("L{}", i + 1), g.load.clone(), &owner);
        own.push((a, bb, l));
    }

    let x = |b: &ProblemBuilder, (i, k): (usize, usize)| b.x(i, k);
    let two = b.lit(dec("2"));
    let omega = b.lit(cfg.omega.clone());
    for i in 0..n {
        let (a, bb, l) = own[i];
        let phi_p = &(&(&(&two * &b.y(a)) * &x(&b, layout.p(i))) + &b.y(bb)) - &x(&b, layout.lambda(i));
        b.set_gradient(i, 0, phi_p);

        let mut phi_theta = PolynomialFunction::zero(b.n(), b.m());
        let mut flows = PolynomialFunction::zero(b.n(), b.m());
        for &j in &layout.neighbors[i] {
            let t = b.y(stiffness[&key(i, j)]);
            let own_side = &x(&b, layout.lambda(i)) + &x(&b, layout.mu(i, j));
            let other_side = &x(&b, layout.lambda(j)) + &x(&b, layout.mu(j, i));
            phi_theta = &phi_theta + &(&t * &(&own_side - &other_side));
            flows = &flows + &(&t * &(&x(&b, layout.theta(i)) - &x(&b, layout.theta(j))));
        }
        b.set_gradient(i, 1, phi_theta);

        let balance = &(&(&b.y(l) - &x(&b, layout.p(i))) + &(&b.y(damping[i]) * &omega)) + &flows;
        b.set_gradient(i, 2, -&balance);

        for &j in &layout.neighbors[i] {
            let t = b.y(stiffness[&key(i, j)]);
            let flow = &t * &(&x(&b, layout.theta(i)) - &x(&b, layout.theta(j)));
            let (agent, coord) = layout.mu(i, j);
            b.set_gradient(agent, coord, -&(&flow - &b.y(capacity[&key(i, j)])));
        }
    }
    b.step(StepSchedule::Constant(cfg.gamma.clone()));
    b.rounding(Rounding::Quantize);
    Ok(b.build()?)
}

pub fn demand_response_from_json(text: &str) -> Result<DemandResponseConfig, CaseStudyError> {
    Ok(serde_json::from_str(text)?)
}

pub fn opf_from_json(text: &str) -> Result<OpfConfig, CaseStudyError> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::eval_plain;
    use crate::synth::random_decimal;
    use num_rational::BigRational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    type Q = BigRational;

    fn r(v: &ScaledDecimal) -> Q {
        v.to_rational()
    }

    fn toy_dr() -> DemandResponseConfig {
        DemandResponseConfig {
            s: vec![dec("15")],
            l: vec![dec("10"), dec("8")],
            f_max: vec![dec("12"), dec("9")],
            h_s: vec![vec![dec("0.6")], vec![dec("-0.4")]],
            h_l: vec![vec![dec("0.3"), dec("-0.7")], vec![dec("0.2"), dec("0.5")]],
            c: vec![dec("0.5"), dec("0.8")],
            a: vec![dec("0.1"), dec("0.2")],
            b: vec![dec("2"), dec("3")],
            lambda: dec("0.01"),
            gamma: dec("0.01"),
            sigma: 4,
            r0: None,
        }
    }

    fn state_at(problem: &ProblemInstance, values: &[((usize, usize), ScaledDecimal)]) -> Vec<ScaledDecimal> {
        let mut x = vec![ScaledDecimal::zero(); problem.n()];
        for ((i, l), v) in values {
            x[problem.state_var(*i, *l)] = v.clone();
        }
        x
    }

    fn gradient(problem: &ProblemInstance, x: &[ScaledDecimal], (i, l): (usize, usize)) -> Q {
        eval_plain(problem.gradient(i, l), x, &problem.coefficient_values())
            .unwrap()
            .to_rational()
    }

    #[test]
    fn networks() {
        let path = synth_network(Topology::Path, 3).unwrap();
        assert_eq!(path.lines.len(), 2);
        assert_eq!(path.neighbors(1), vec![0, 2]);
        assert_eq!(path.neighbors(0), vec![1]);
        assert_eq!(synth_network(Topology::Ring, 4).unwrap().lines.len(), 4);
        assert_eq!(synth_network(Topology::Star, 5).unwrap().degree(0), 4);
        assert!(matches!(
            synth_network(Topology::Ring, 1),
            Err(CaseStudyError::SizeTooSmall(1))
        ));
        for topo in [Topology::Ring, Topology::Star, Topology::Path] {
            let net = synth_network(topo, 7).unwrap();
            for i in 0..7 {
                for j in net.neighbors(i) {
                    assert!(net.neighbors(j).contains(&i));
                }
            }
            let cfg = DemandResponseConfig::synthetic(&net, 2).unwrap();
            assert!(cfg.validate().is_ok());
        }
    }

    #[test]
    fn dual_layout_is_round_robin() {
        let layout = DemandResponseLayout::new(2, 2);
        assert_eq!(layout.mu0, (0, 1));
        assert_eq!(layout.mu_plus, vec![(1, 1), (0, 2)]);
        assert_eq!(layout.mu_minus, vec![(1, 2), (0, 3)]);
        assert_eq!(layout.dims(), vec![4, 3]);
    }

    #[test]
    fn demand_response_gradient_matches_hand_expansion() {
        let cfg = toy_dr();
        let p = build_demand_response(&cfg).unwrap();
        let layout = DemandResponseLayout::new(2, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for _ in 0..20 {
            let r1 = random_decimal(&mut rng, 10, 4).abs();
            let r2 = random_decimal(&mut rng, 8, 4).abs();
            let m0 = random_decimal(&mut rng, 5, 4).abs();
            let mp: Vec<ScaledDecimal> = (0..2).map(|_| random_decimal(&mut rng, 5, 4).abs()).collect();
            let mm: Vec<ScaledDecimal> = (0..2).map(|_| random_decimal(&mut rng, 5, 4).abs()).collect();
            let mut vals = vec![
                (layout.r[0], r1.clone()),
                (layout.r[1], r2.clone()),
                (layout.mu0, m0.clone()),
            ];
            for e in 0..2 {
                vals.push((layout.mu_plus[e], mp[e].clone()));
                vals.push((layout.mu_minus[e], mm[e].clone()));
            }
            let x = state_at(&p, &vals);

            // c1 - a1 (L1 - R1) + b1 - 2 lam T (L1 - R1) - lam T^2 - mu0 + sum_e Hl[e][0] (mu+_e - mu-_e)
            let d1 = r(&cfg.l[0]) - r(&r1);
            let d2 = r(&cfg.l[1]) - r(&r2);
            let t = &d1 + &d2;
            let lam = r(&cfg.lambda);
            let two = Q::from_integer(2.into());
            let mut expected =
                r(&cfg.c[0]) - r(&cfg.a[0]) * &d1 + r(&cfg.b[0]) - &two * &lam * &t * &d1 - &lam * &t * &t - r(&m0);
            for e in 0..2 {
                expected += r(&cfg.h_l[e][0]) * (r(&mp[e]) - r(&mm[e]));
            }
            assert_eq!(gradient(&p, &x, layout.r[0]), expected);

            // mu+_e: -(Hs S - Hl (L - R) - fmax)
            for e in 0..2 {
                let flow = r(&cfg.h_s[e][0]) * r(&cfg.s[0]) - r(&cfg.h_l[e][0]) * &d1 - r(&cfg.h_l[e][1]) * &d2;
                assert_eq!(gradient(&p, &x, layout.mu_plus[e]), -(&flow - r(&cfg.f_max[e])));
                assert_eq!(gradient(&p, &x, layout.mu_minus[e]), -(-&flow - r(&cfg.f_max[e])));
            }
            assert_eq!(gradient(&p, &x, layout.mu0), -(&t - r(&cfg.s[0])));
        }
    }

    #[test]
    fn full_curtailment_leaves_only_local_terms() {
        let cfg = toy_dr();
        let p = build_demand_response(&cfg).unwrap();
        let layout = DemandResponseLayout::new(2, 2);
        let x = state_at(&p, &[(layout.r[0], cfg.l[0].clone()), (layout.r[1], cfg.l[1].clone())]);
        assert_eq!(gradient(&p, &x, layout.r[0]), r(&cfg.c[0]) + r(&cfg.b[0]));
        assert_eq!(gradient(&p, &x, layout.r[1]), r(&cfg.c[1]) + r(&cfg.b[1]));
    }

    #[test]
    fn demand_response_degrees_and_gate() {
        let p = build_demand_response(&toy_dr()).unwrap();
        let layout = DemandResponseLayout::new(2, 2);
        for &(i, l) in &layout.r {
            assert_eq!(p.gradient(i, l).degree(), 3);
        }
        for &(i, l) in layout.mu_plus.iter().chain(&layout.mu_minus).chain([&layout.mu0]) {
            assert!(p.gradient(i, l).state_degree() <= 1);
        }
        assert!(!p.is_affine());
        let so = p.partition().owner(0);
        assert!(so.is_operator());
    }

    #[test]
    fn demand_response_rejects_bad_configs() {
        let mut cfg = toy_dr();
        cfg.a[0] = dec("0");
        assert!(matches!(
            build_demand_response(&cfg),
            Err(CaseStudyError::ConfigInvalid(_))
        ));
        let mut cfg = toy_dr();
        cfg.h_l[0][0] = dec("1.5");
        assert!(build_demand_response(&cfg).is_err());
        let mut cfg = toy_dr();
        cfg.lambda = dec("-1");
        assert!(build_demand_response(&cfg).is_err());
        let mut cfg = toy_dr();
        cfg.c.pop();
        assert!(build_demand_response(&cfg).is_err());
        let mut cfg = toy_dr();
        cfg.lambda = dec("0.00001");
        assert!(matches!(build_demand_response(&cfg), Err(CaseStudyError::Problem(_))));
    }

    fn two_generators() -> OpfConfig {
        OpfConfig::uniform(&synth_network(Topology::Path, 2).unwrap())
    }

    #[test]
    fn opf_is_affine_with_uniform_parameters() {
        let p = build_opf(&two_generators()).unwrap();
        assert!(p.is_affine());
        let rows = p.affine_rows().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(p.dims(), vec![4, 4]);
        let ring = build_opf(&OpfConfig::uniform(&synth_network(Topology::Ring, 6).unwrap())).unwrap();
        assert!(ring.affine_rows().is_ok());
    }

    #[test]
    fn opf_symmetric_duals_cancel_the_angle_drift() {
        let cfg = two_generators();
        let p = build_opf(&cfg).unwrap();
        let layout = OpfLayout {
            neighbors: cfg.neighbors(),
        };
        let x = state_at(
            &p,
            &[
                (layout.p(0), dec("20")),
                (layout.p(1), dec("30")),
                (layout.lambda(0), dec("4.5")),
                (layout.lambda(1), dec("4.5")),
                (layout.mu(0, 1), dec("1.25")),
                (layout.mu(1, 0), dec("1.25")),
            ],
        );
        assert_eq!(gradient(&p, &x, layout.theta(0)), Q::from_integer(0.into()));
        assert_eq!(gradient(&p, &x, layout.theta(1)), Q::from_integer(0.into()));
    }

    #[test]
    fn opf_balanced_injection_keeps_lambda_stationary() {
        let cfg = two_generators();
        let p = build_opf(&cfg).unwrap();
        let layout = OpfLayout {
            neighbors: cfg.neighbors(),
        };
        // P = L + D * 60 = 70 with flat angles
        let x = state_at(&p, &[(layout.p(0), dec("70")), (layout.p(1), dec("70"))]);
        assert_eq!(gradient(&p, &x, layout.lambda(0)), Q::from_integer(0.into()));
        // P gradient 2 a P + b - lambda = 14 + 10
        assert_eq!(gradient(&p, &x, layout.p(0)), Q::from_integer(24.into()));
        // mu gradient -(t (theta_i - theta_j) - 80)
        assert_eq!(gradient(&p, &x, layout.mu(0, 1)), Q::from_integer(80.into()));
    }

    #[test]
    fn opf_ownership() {
        let p = build_opf(&two_generators()).unwrap();
        for c in p.coefficients() {
            let owner = p
                .partition()
                .owner(p.coefficients().iter().position(|d| d.name == c.name).unwrap());
            let private = c.name.starts_with('a') || c.name.starts_with('b') || c.name.starts_with('L');
            assert_eq!(!owner.is_operator(), private, "{}", c.name);
        }
    }

    #[test]
    fn opf_rejects_bad_configs() {
        let mut cfg = two_generators();
        cfg.generators[0].a = dec("0");
        assert!(build_opf(&cfg).is_err());
        let mut cfg = two_generators();
        cfg.generators[1].p_min = dec("200");
        assert!(build_opf(&cfg).is_err());
        let mut cfg = two_generators();
        cfg.lines[0].to = 9;
        assert!(build_opf(&cfg).is_err());
        let mut cfg = two_generators();
        cfg.lines.push(cfg.lines[0].clone());
        assert!(build_opf(&cfg).is_err());
    }

    #[test]
    fn configs_roundtrip_through_json() {
        let dr = toy_dr();
        let text = serde_json::to_string(&dr).unwrap();
        assert_eq!(demand_response_from_json(&text).unwrap(), dr);
        let opf = two_generators();
        let text = serde_json::to_string(&opf).unwrap();
        assert!(text.contains("\"capacity\":\"80\""));
        assert_eq!(opf_from_json(&text).unwrap(), opf);
        assert!(opf_from_json(r#"{"generators":[],"lines":[],"gamma":"1","bogus":1}"#).is_err());
    }
}
