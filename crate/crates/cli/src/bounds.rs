//! `verify-bounds`: randomized sandwich and composition suites.

use std::path::PathBuf;

use clap::Args;
use equiproj::defect::{composition_bound_check, network_bound_constant, worst_case_defect, Activation, LayerChain};
use equiproj::group::{regular_representation, Representation};
use equiproj::linalg::NormKind;
use equiproj::random::{random_matrix, rng, SeededRng};
use equiproj::reynolds::{project_finite, LinearLayerSpec};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::resolve;
use crate::error::{CliError, CliResult};
use crate::groups::GroupSpec;
use crate::ops::parse_norm;

const SLACK: f64 = 1e-9;
/// Below this projection distance the ratio `E/‖T−P(T)‖` is not recorded.
const RATIO_FLOOR: f64 = 1e-12;

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Layers in the sandwich suite.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Chains in the composition and network suites.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<String>,
}

#[derive(Debug)]
struct Suite {
    name: &'static str,
    passed: usize,
    total: usize,
    lo: f64,
    hi: f64,
    failed_seed: Option<u64>,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: 0,
            total: 0,
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
            failed_seed: None,
        }
    }

    fn record(&mut self, seed: u64, holds: bool, ratio: Option<f64>) {
        self.total += 1;
        if holds {
            self.passed += 1;
        } else if self.failed_seed.is_none() {
            self.failed_seed = Some(seed);
        }
        if let Some(q) = ratio {
            self.lo = self.lo.min(q);
            self.hi = self.hi.max(q);
        }
    }

    fn line(&self) -> String {
        let (lo, hi) = if self.lo <= self.hi {
            (self.lo.to_string(), self.hi.to_string())
        } else {
            (String::new(), String::new())
        };
        format!("{},{},{},{},{}", self.name, self.passed, self.total, lo, hi)
    }
}

fn random_layer(
    group: &GroupSpec,
    rin: &Representation,
    rout: &Representation,
    r: &mut SeededRng,
) -> CliResult<LinearLayerSpec> {
    let w = random_matrix(rout.dim(), rin.dim(), r);
    let layer = LinearLayerSpec::new(w, rin.clone(), rout.clone())?;
    if group.order() > 1 && r.gen_bool(0.25) {
        // nearly equivariant: the interesting end of the ratio range
        let p = project_finite(&layer)?;
        let noise = random_matrix(rout.dim(), rin.dim(), r).scale_real(1e-3);
        return Ok(layer.with_weight(p.add(&noise)?)?);
    }
    Ok(layer)
}

fn random_chain(group: &GroupSpec, r: &mut SeededRng) -> CliResult<LayerChain> {
    let relu_friendly = r.gen_bool(0.4);
    let mut reps = Vec::with_capacity(4);
    for i in 0..4 {
        reps.push(if relu_friendly && (i == 1 || i == 2) {
            regular_representation(group.group.clone())?
        } else {
            group.random_representation(r)?
        });
    }
    let mut layers = Vec::with_capacity(3);
    for i in 0..3 {
        layers.push(random_layer(group, &reps[i], &reps[i + 1], r)?);
    }
    let acts = (0..2)
        .map(|_| match r.gen_range(0..3) {
            0 if relu_friendly => Activation::Relu,
            1 => Activation::Scaling(r.gen_range(0.2..2.0)),
            _ => Activation::Identity,
        })
        .collect();
    Ok(LayerChain::new(layers, acts)?)
}

fn sandwich(group: &GroupSpec, kind: NormKind, trials: usize, seed: u64) -> CliResult<Suite> {
    let mut suite = Suite::new("sandwich");
    for i in 0..trials as u64 {
        let s = seed.wrapping_add(i);
        let mut r = rng(s);
        let rin = group.random_representation(&mut r)?;
        let rout = group.random_representation(&mut r)?;
        let layer = random_layer(group, &rin, &rout, &mut r)?;
        let rep = worst_case_defect(&layer, kind)?;
        let (e, d) = (rep.worst_case, rep.projection_distance);
        let holds = d <= e + SLACK && e <= 2.0 * d + SLACK;
        suite.record(s, holds, (d > RATIO_FLOOR).then(|| e / d));
    }
    Ok(suite)
}

fn chains(group: &GroupSpec, trials: usize, seed: u64) -> CliResult<(Suite, Suite)> {
    let mut comp = Suite::new("composition");
    let mut net = Suite::new("network");
    for i in 0..trials as u64 {
        let s = seed.wrapping_add(i);
        let chain = random_chain(group, &mut rng(s))?;
        let c = composition_bound_check(&chain, NormKind::Spectral)?;
        comp.record(s, c.holds, (c.rhs > RATIO_FLOOR).then(|| c.lhs / c.rhs));
        let n = network_bound_constant(&chain)?;
        net.record(s, n.holds, (n.rhs > RATIO_FLOOR).then(|| n.lhs / n.rhs));
    }
    Ok((comp, net))
}

pub fn run_verify_bounds(flags: &BoundsArgs) -> CliResult<()> {
    let a: BoundsArgs = resolve(flags, flags.config.as_deref())?;
    let group = GroupSpec::parse(a.group.as_deref().unwrap_or("cyclic:4"))?;
    let kind = parse_norm(a.norm.as_deref())?;
    let trials = a.trials.unwrap_or(1000);
    let chain_trials = a.chain_trials.unwrap_or(200);
    let seed = a.seed.unwrap_or(0);
    println!("suite,passed,total,min_ratio,max_ratio");
    if group.order() == 1 {
        // every defect and distance is zero, so no ratio is defined
        for name in ["sandwich", "composition", "network"] {
            println!("{name},skipped");
        }
        return Ok(());
    }
    let s = sandwich(&group, kind, trials, seed)?;
    let (c, n) = chains(&group, chain_trials, seed)?;
    let mut failures = Vec::new();
    for suite in [&s, &c, &n] {
        println!("{}", suite.line());
        if let Some(bad) = suite.failed_seed {
            failures.push(format!("{} failed {} of {} (first at seed {bad})", suite.name, suite.total - suite.passed, suite.total));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(failures.join("; ")))
    }
}
