//! Batch runs: build the structures named by a subcommand from a JSON
//! config, check their invariants, and write JSON/CSV artifacts plus a
//! manifest into the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::adjacent::{build_adjacent_family, find_host, verify_host, Ball, FamilyMode, HostOutcome};
use crate::cubes::{build_dyadic_system, DyadicSystem};
use crate::error::{invalid, Error, Result};
use crate::haar::{
    build_haar_system, expand, gram_deviation, haar_envelope_check, level_expectation, reconstruct, HaarCoefficients,
    HaarIndex, NormedSpace, VectorFunction,
};
use crate::io::read_cloud;
use crate::metric::{build_nested_nets, default_level_range, scale, Measure, PointCloud, Topology};
use crate::norms::{kahane_check, stein_check, SignEnsemble};
use crate::shift::{canonical_tau_1d, haar_random_ratio, norm_growth_experiment, random_tau, ExperimentConfig};
use crate::sparse::{build_sparse_decomposition, compute_t, verify_decomposition, TauMap};

/// Where the points come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InputSource {
    /// The uniform grid of `2^g` points on the unit torus.
    TorusGrid { g: u32 },
    /// `n` uniform points in `[0, 1]^dim` with the Euclidean metric.
    RandomDoubling { n: usize, dim: usize, seed: u64 },
    /// Coordinate CSV (`id,x1,...,xd`) or distance-matrix JSON (`{"dist": ...}`).
    File {
        path: PathBuf,
        #[serde(default = "default_topology")]
        topology: Topology,
    },
}

fn default_topology() -> Topology {
    Topology::General
}

/// The normed space `ℓ^q_d`; type and cotype default to `min(q, 2)` and
/// `max(q, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub d: usize,
    pub q: f64,
    #[serde(default)]
    pub t_e: Option<f64>,
    #[serde(default)]
    pub q_e: Option<f64>,
}

impl Default for SpaceSpec {
    fn default() -> Self {
        Self { d: 1, q: 2.0, t_e: None, q_e: None }
    }
}

impl SpaceSpec {
    pub fn build(&self) -> Result<NormedSpace> {
        let base = NormedSpace::lq(self.d, self.q)?;
        NormedSpace::new(self.d, self.q, self.t_e.unwrap_or(base.type_t), self.q_e.unwrap_or(base.cotype_q))
    }
}

/// Run settings; every field except `input` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSource,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    /// `[k_min, k_max]`; derived from the data when absent.
    #[serde(default)]
    pub levels: Option<(i32, i32)>,
    /// Number of systems in an adjacent family.
    #[serde(default = "defaults::k")]
    pub k: usize,
    #[serde(default = "defaults::m_list")]
    pub m_list: Vec<usize>,
    #[serde(default = "defaults::p_list")]
    pub p_list: Vec<f64>,
    #[serde(default)]
    pub space: SpaceSpec,
    /// Random instances per check (and samples per shift experiment cell).
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::out")]
    pub out: PathBuf,
    /// Balls sampled for the hosting check.
    #[serde(default = "defaults::balls")]
    pub balls: usize,
    #[serde(default = "defaults::slack")]
    pub slack: f64,
    /// Ancestor depth `p` required of hosting cubes.
    #[serde(default = "defaults::host_depth")]
    pub host_depth: u32,
    /// Measure comparability allowed for random cube maps.
    #[serde(default = "defaults::c_tau")]
    pub c_tau: f64,
    #[serde(default = "defaults::envelope_budget")]
    pub envelope_budget: f64,
    /// Grid exponent of the shift experiment; the torus input's `g` (or 8).
    #[serde(default)]
    pub experiment_g: Option<u32>,
    /// `1/δ` of the shift experiment.
    #[serde(default = "defaults::experiment_base")]
    pub experiment_base: usize,
}

mod defaults {
    use std::path::PathBuf;

    pub fn delta() -> f64 {
        0.5
    }
    pub fn k() -> usize {
        3
    }
    pub fn m_list() -> Vec<usize> {
        vec![1, 2, 4]
    }
    pub fn p_list() -> Vec<f64> {
        vec![1.5, 2.0, 4.0]
    }
    pub fn trials() -> usize {
        50
    }
    pub fn out() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn balls() -> usize {
        200
    }
    pub fn slack() -> f64 {
        4.0
    }
    pub fn host_depth() -> u32 {
        1
    }
    pub fn c_tau() -> f64 {
        2.0
    }
    pub fn envelope_budget() -> f64 {
        8.0
    }
    pub fn experiment_base() -> usize {
        2
    }
}

impl RunConfig {
    /// Defaults on the torus grid of `2^g` points.
    pub fn torus(g: u32) -> Self {
        serde_json::from_value(json!({ "input": { "kind": "torus_grid", "g": g } })).expect("default config")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if let Some((a, b)) = self.levels {
            if a > b {
                return Err(invalid(format!("level range [{a}, {b}] is empty")));
            }
        }
        match &self.input {
            InputSource::TorusGrid { g } if *g == 0 || *g > 16 => return Err(invalid(format!("torus grid exponent {g} outside 1..=16"))),
            InputSource::RandomDoubling { n, dim, .. } if *n == 0 || *dim == 0 => {
                return Err(invalid("random_doubling needs n >= 1 and dim >= 1"))
            }
            InputSource::File { path, .. } if !path.is_file() => {
                return Err(Error::Io { path: path.clone(), source: std::io::Error::from(std::io::ErrorKind::NotFound) })
            }
            _ => {}
        }
        if self.k == 0 || self.m_list.is_empty() || self.m_list.contains(&0) {
            return Err(invalid("need k >= 1 and a nonempty m list of positive shifts"));
        }
        if self.p_list.is_empty() || self.p_list.iter().any(|&p| !(p > 1.0 && p.is_finite())) {
            return Err(invalid("p values must lie in (1, ∞)"));
        }
        if !(self.slack > 0.0) || !(self.c_tau >= 1.0) || !(self.envelope_budget >= 1.0) {
            return Err(invalid("slack must be positive, c_tau and envelope_budget at least 1"));
        }
        self.space.build()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, output directory left out.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value.as_object_mut().expect("config is an object").remove("out");
        hex::encode(Sha256::digest(serde_json::to_vec(&value).expect("config serializes")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BuildNets,
    BuildCubes,
    Adjacent,
    Decompose,
    Haar,
    ShiftExperiment,
    VerifyAll,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::BuildNets,
        Command::BuildCubes,
        Command::Adjacent,
        Command::Decompose,
        Command::Haar,
        Command::ShiftExperiment,
        Command::VerifyAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::BuildNets => "build-nets",
            Command::BuildCubes => "build-cubes",
            Command::Adjacent => "adjacent",
            Command::Decompose => "decompose",
            Command::Haar => "haar",
            Command::ShiftExperiment => "shift-experiment",
            Command::VerifyAll => "verify-all",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| invalid(format!("unknown subcommand `{s}`")))
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub passed: bool,
    pub failures: Vec<String>,
    /// Artifact file names inside the output directory.
    pub artifacts: Vec<String>,
}

/// Loaded input plus the base dyadic system.
struct Context<'a> {
    cfg: &'a RunConfig,
    cloud: PointCloud,
    mu: Measure,
    /// `1/δ` when the input is a torus grid compatible with `δ`.
    canonical: Option<usize>,
    k_min: i32,
    k_max: i32,
}

impl Context<'_> {
    fn system(&self) -> Result<DyadicSystem> {
        match self.canonical {
            Some(b) => DyadicSystem::canonical_torus(self.cloud.len(), b, self.k_min, self.k_max, 0, 1),
            None => build_dyadic_system(&self.cloud, &build_nested_nets(&self.cloud, self.cfg.delta, self.k_min, self.k_max, None)?),
        }
    }

    fn family(&self, k_min: i32) -> Result<crate::adjacent::AdjacentFamily> {
        let mode = if self.canonical.is_some() { FamilyMode::Canonical1d } else { FamilyMode::Random { seed: self.cfg.seed } };
        build_adjacent_family(&self.cloud, self.cfg.delta, self.cfg.k, mode, k_min, self.k_max)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stream);
        rng
    }
}

fn load_context(cfg: &RunConfig) -> Result<Context<'_>> {
    cfg.validate()?;
    let cloud = match &cfg.input {
        InputSource::TorusGrid { g } => PointCloud::torus_grid(1usize << g),
        InputSource::RandomDoubling { n, dim, seed } => PointCloud::random_uniform(*n, *dim, *seed),
        InputSource::File { path, topology } => read_cloud(path, *topology)?,
    };
    if cloud.is_empty() {
        return Err(invalid("input has no points"));
    }
    let canonical = match cfg.input {
        InputSource::TorusGrid { .. } => {
            let b = (1.0 / cfg.delta).round();
            ((b * cfg.delta - 1.0).abs() < 1e-12 && b >= 2.0).then_some(b as usize)
        }
        _ => None,
    };
    let (k_min, k_max) = match (cfg.levels, canonical) {
        (Some(r), _) => r,
        (None, Some(b)) => {
            let mut k = 0;
            while cloud.len() % b.pow(k + 1) == 0 {
                k += 1;
            }
            (0, k as i32)
        }
        (None, None) => default_level_range(&cloud, cfg.delta)?,
    };
    let mu = Measure::uniform(cloud.len());
    Ok(Context { cfg, cloud, mu, canonical, k_min, k_max })
}

/// Collects artifacts and failures for one run.
struct Writer {
    dir: PathBuf,
    artifacts: Vec<(String, String)>,
    failures: Vec<String>,
}

impl Writer {
    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| Error::Io { path, source })?;
        self.artifacts.push((name.to_string(), hex::encode(Sha256::digest(contents))));
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

/// Runs `cmd`; configuration and input errors are returned before anything
/// is written. Invariant failures end up in `RunOutcome::failures` and in
/// `diagnostics.json`.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<RunOutcome> {
    let ctx = load_context(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(|source| Error::Io { path: cfg.out.clone(), source })?;
    let stale = cfg.out.join("diagnostics.json");
    if stale.is_file() {
        fs::remove_file(&stale).map_err(|source| Error::Io { path: stale, source })?;
    }
    let mut w = Writer { dir: cfg.out.clone(), artifacts: Vec::new(), failures: Vec::new() };
    let stages: &[fn(&Context, &mut Writer) -> Result<()>] = match cmd {
        Command::BuildNets => &[nets_stage],
        Command::BuildCubes => &[cubes_stage],
        Command::Adjacent => &[adjacent_stage],
        Command::Decompose => &[decompose_stage],
        Command::Haar => &[haar_stage],
        Command::ShiftExperiment => &[shift_stage],
        Command::VerifyAll => &[nets_stage, cubes_stage, adjacent_stage, decompose_stage, haar_stage, norms_stage, shift_stage],
    };
    for stage in stages {
        if let Err(e) = stage(&ctx, &mut w) {
            w.failures.push(e.to_string());
        }
    }
    let passed = w.failures.is_empty();
    if !passed {
        let failures = w.failures.clone();
        w.json("diagnostics.json", &json!({ "command": cmd.name(), "failures": failures }))?;
    }
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd.name(),
        "config": cfg,
        "config_sha256": cfg.hash(),
        "seed": cfg.seed,
        "levels": [ctx.k_min, ctx.k_max],
        "passed": passed,
        "artifacts": w.artifacts.iter().map(|(f, h)| json!({ "file": f, "sha256": h })).collect::<Vec<_>>(),
    });
    w.json("manifest.json", &manifest)?;
    Ok(RunOutcome { passed, failures: w.failures, artifacts: w.artifacts.into_iter().map(|a| a.0).collect() })
}

fn nets_stage(ctx: &Context, w: &mut Writer) -> Result<()> {
    let nets = build_nested_nets(&ctx.cloud, ctx.cfg.delta, ctx.k_min, ctx.k_max, None)?;
    let report = nets.verify(&ctx.cloud);
    w.require(report.passed(), || format!("nets: {report:?}"));
    let mut csv = String::from("level,point\n");
    for (k, set) in nets.levels() {
        for p in &set.members {
            writeln!(csv, "{k},{p}").unwrap();
        }
    }
    w.write("nets.csv", csv.as_bytes())?;
    w.json("nets.json", &json!({ "nets": nets.to_json(), "report": report }))
}

fn cubes_stage(ctx: &Context, w: &mut Writer) -> Result<()> {
    let system = ctx.system()?;
    let axioms = system.verify_axioms();
    let sandwich = system.verify_sandwich(&ctx.cloud);
    w.require(axioms.partition && axioms.nested && axioms.descendants && axioms.center_chain, || format!("cube axioms: {axioms:?}"));
    let mut csv = String::from("level,index,center,parent,size\n");
    for c in system.cubes() {
        let parent = c.parent.map(|p| p.to_string()).unwrap_or_default();
        writeln!(csv, "{},{},{},{},{}", c.level, c.index, c.center, parent, c.members.len()).unwrap();
    }
    w.write("cubes.csv", csv.as_bytes())?;
    w.json("cubes.json", &system.to_export())?;
    w.json("cube_report.json", &json!({ "axioms": axioms, "sandwich": sandwich }))
}

/// Balls `B(x, d(x, y))` for random point pairs, skipping radii below the
/// finest realizable scale.
fn sample_balls(ctx: &Context, count: usize, finest: f64) -> Vec<Ball> {
    let mut rng = ctx.rng(101);
    let n = ctx.cloud.len();
    let mut balls = Vec::with_capacity(count);
    let mut attempts = 0;
    while balls.len() < count && attempts < 100 * count && n > 1 {
        attempts += 1;
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let r = ctx.cloud.dist(x, y);
        if x != y && r >= finest {
            balls.push(Ball::new(x, r));
        }
    }
    balls
}

fn adjacent_stage(ctx: &Context, w: &mut Writer) -> Result<()> {
    let cfg = ctx.cfg;
    let p = cfg.host_depth;
    let family = ctx.family(ctx.k_min - p as i32)?;
    let finest = scale(cfg.delta, ctx.k_max + 2) / cfg.slack;
    let balls = sample_balls(ctx, cfg.balls, finest);
    let mut csv = String::from("ball,center,radius,omega,level,index,ancestor_level,ancestor_index,verified\n");
    let (mut hosted, mut verified) = (0, 0);
    for (i, b) in balls.iter().enumerate() {
        match find_host(&family, &ctx.cloud, std::slice::from_ref(b), p, cfg.slack)? {
            HostOutcome::Found(m) => {
                hosted += 1;
                let ok = verify_host(&family, &ctx.cloud, std::slice::from_ref(b), p, cfg.slack, &m)?.passed();
                verified += ok as usize;
                let (q, a) = (m.cubes[0], m.ancestors[0]);
                writeln!(csv, "{i},{},{:e},{},{},{},{},{},{ok}", b.center, b.radius, m.omega, q.level, q.index, a.level, a.index).unwrap();
            }
            HostOutcome::NotFound { .. } => writeln!(csv, "{i},{},{:e},,,,,,false", b.center, b.radius).unwrap(),
        }
    }
    w.require(hosted == balls.len(), || format!("hosting: {} of {} balls have no host", balls.len() - hosted, balls.len()));
    w.require(verified == hosted, || format!("hosting: {} hosts failed re-verification", hosted - verified));
    w.write("hosting.csv", csv.as_bytes())?;
    w.json(
        "adjacent.json",
        &json!({
            "systems": family.len(),
            "mode": family.mode(),
            "levels": [family.k_min(), family.k_max()],
            "ancestor_depth": p,
            "slack": cfg.slack,
            "balls": balls.len(),
            "hosted": hosted,
            "verified": verified,
        }),
    )?;
    w.json("family.json", &family.to_export())
}

fn tau_for(ctx: &Context, system: &DyadicSystem, m: usize) -> Result<(TauMap, Vec<i32>)> {
    if ctx.canonical.is_some() {
        Ok((canonical_tau_1d(system, m)?, Vec::new()))
    } else {
        let r = random_tau(system, &ctx.cloud, &ctx.mu, m as f64, ctx.cfg.c_tau, ctx.cfg.seed)?;
        Ok((r.tau, r.identity_levels))
    }
}

fn decompose_stage(ctx: &Context, w: &mut Writer) -> Result<()> {
    let system = ctx.system()?;
    let mut csv = String::from("m,level,index,collection,class,omega,status\n");
    let mut summary = Vec::new();
    for &m in &ctx.cfg.m_list {
        let (tau, identity_levels) = tau_for(ctx, &system, m)?;
        let admissible = tau.verify_admissible(&system, &ctx.cloud, &ctx.mu);
        w.require(admissible.passed(), || format!("decompose m={m}: cube map not admissible: {admissible:?}"));
        let t = compute_t(tau.dilation(), ctx.cfg.delta)?;
        let family = ctx.family(ctx.k_min - 3 - t as i32)?;
        let dec = build_sparse_decomposition(&system, &family, &ctx.cloud, &tau)?;
        let report = verify_decomposition(&system, &family, &ctx.cloud, &tau, &dec)?;
        w.require(report.passed(), || format!("decompose m={m}: {report:?}"));
        let mut rows: Vec<(i32, usize, String)> = Vec::new();
        for f in &dec.families {
            for h in &f.cubes {
                rows.push((h.cube.level, h.cube.index, format!("{},{},{},labeled", f.label.i, f.label.j, f.label.omega)));
            }
        }
        for e in &dec.exclusions {
            let reason = serde_json::to_value(e.reason)?.as_str().unwrap_or("excluded").to_string();
            rows.push((e.cube.level, e.cube.index, format!(",,,{reason}")));
        }
        rows.sort();
        for (level, index, rest) in rows {
            writeln!(csv, "{m},{level},{index},{rest}").unwrap();
        }
        let excluded = dec.excluded_mass_by_level(&system, &ctx.mu)?;
        summary.push(json!({
            "m": m,
            "t": t,
            "tau": admissible,
            "identity_levels": identity_levels,
            "report": report,
            "collections": dec.collections,
            "excluded_mass_by_level": excluded,
        }));
        w.json(&format!("decomposition_m{m}.json"), &dec)?;
    }
    w.write("decomposition.csv", csv.as_bytes())?;
    w.json("decomposition_report.json", &summary)
}

fn random_function(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> VectorFunction {
    VectorFunction::from_fn(n, dim, |_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
}

fn haar_stage(ctx: &Context, w: &mut Writer) -> Result<()> {
    let system = ctx.system()?;
    let space = ctx.cfg.space.build()?;
    let haar = build_haar_system(&system, &ctx.mu)?;
    let gram = gram_deviation(&haar, &system, &ctx.mu)?;
    let envelope = haar_envelope_check(&haar, &system, &ctx.mu, ctx.cfg.envelope_budget)?;
    let mut rng = ctx.rng(202);
    let n = ctx.cloud.len();
    let mut round_trip = 0.0f64;
    let mut tower = 0.0f64;
    let mut first = None;
    for _ in 0..ctx.cfg.trials.max(1) {
        let f = random_function(&mut rng, n, space.dim);
        let e = expand(&f, &system, &haar, &ctx.mu)?;
        let g = reconstruct(&e.coefficients, Some(&e.averages), &system, &haar)?;
        round_trip = round_trip.max(f.max_abs_diff(&g));
        first.get_or_insert((f, g, e));
    }
    let f = first.as_ref().map(|t| &t.0).expect("at least one trial");
    for j in system.k_min()..=system.k_max() {
        let ej = level_expectation(f, &system, j, &ctx.mu)?;
        for k in system.k_min()..=system.k_max() {
            let ejk = level_expectation(&ej, &system, k, &ctx.mu)?;
            let direct = level_expectation(f, &system, j.min(k), &ctx.mu)?;
            tower = tower.max(ejk.max_abs_diff(&direct));
        }
    }
    w.require(gram <= 1e-10, || format!("haar: Gram deviation {gram:e}"));
    w.require(round_trip <= 1e-10, || format!("haar: round trip error {round_trip:e}"));
    w.require(tower <= 1e-12, || format!("haar: tower property error {tower:e}"));
    w.require(envelope.pass, || format!("haar: envelope outside budget: {envelope:?}"));
    let (f, g, e) = first.expect("at least one trial");
    w.write("haar_sample.csv", f.to_csv().as_bytes())?;
    w.write("haar_reconstructed.csv", g.to_csv().as_bytes())?;
    w.write("haar_coefficients.csv", coefficients_csv(&e.coefficients).as_bytes())?;
    w.json(
        "haar_report.json",
        &json!({
            "functions": haar.len(),
            "gram_deviation": gram,
            "round_trip_error": round_trip,
            "tower_error": tower,
            "envelope": envelope,
            "trials": ctx.cfg.trials.max(1),
        }),
    )
}

fn coefficients_csv(c: &HaarCoefficients) -> String {
    let mut out = String::from("level,index,branch");
    for i in 1..=c.dim {
        write!(out, ",e{i}").unwrap();
    }
    out.push('\n');
    for (idx, x) in &c.coeffs {
        write!(out, "{},{},{}", idx.cube.level, idx.cube.index, idx.branch).unwrap();
        for v in x {
            write!(out, ",{v:e}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn is_scalar(space: &NormedSpace) -> bool {
    space.dim == 1
}

fn norms_stage(ctx: &Context, w: &mut Writer) -> Result<()> {
    let cfg = ctx.cfg;
    let space = cfg.space.build()?;
    let mut rng = ctx.rng(303);
    let mut csv = String::from("check,instance,p,lhs,rhs,ratio,pass\n");
    let mut kahane_failures = 0;
    for i in 0..cfg.trials {
        let n = rng.gen_range(1..=10);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..space.dim).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let cs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = cfg.p_list[i % cfg.p_list.len()];
        let c = kahane_check(&xs, &cs, p, SignEnsemble::Exact, &space)?;
        kahane_failures += !c.pass as usize;
        writeln!(csv, "contraction,{i},{p},{:e},{:e},{:e},{}", c.lhs, c.rhs, c.lhs / c.rhs, c.pass).unwrap();
    }
    w.require(kahane_failures == 0, || format!("contraction principle failed on {kahane_failures} instances"));

    // Stein: summands already measurable at their level, and single summands
    let system = ctx.system()?;
    let levels: Vec<i32> = (system.k_min()..=system.k_max()).collect();
    let mut stein_worst_exact = 0.0f64;
    let mut stein_worst_single = 0.0f64;
    for i in 0..cfg.trials.min(20) {
        let p = cfg.p_list[i % cfg.p_list.len()];
        let count = levels.len().min(8);
        let chosen: Vec<i32> = levels[..count].to_vec();
        let fs: Vec<VectorFunction> = chosen
            .iter()
            .map(|&k| level_expectation(&random_function(&mut rng, ctx.cloud.len(), space.dim), &system, k, &ctx.mu))
            .collect::<Result<_>>()?;
        let r = stein_check(&fs, &system, &chosen, p, SignEnsemble::Exact, &ctx.mu, &space)?;
        stein_worst_exact = stein_worst_exact.max((r.ratio - 1.0).abs());
        writeln!(csv, "stein_measurable,{i},{p},{:e},{:e},{:e},{}", r.numerator.value, r.denominator.value, r.ratio, r.ratio == 1.0).unwrap();
        let k = levels[rng.gen_range(0..levels.len())];
        let single = [random_function(&mut rng, ctx.cloud.len(), space.dim)];
        let r = stein_check(&single, &system, &[k], p, SignEnsemble::Exact, &ctx.mu, &space)?;
        stein_worst_single = stein_worst_single.max(r.ratio);
        writeln!(csv, "stein_single,{i},{p},{:e},{:e},{:e},{}", r.numerator.value, r.denominator.value, r.ratio, r.ratio <= 1.0 + 1e-12).unwrap();
    }
    w.require(stein_worst_exact == 0.0, || format!("stein: measurable inputs deviate from ratio 1 by {stein_worst_exact:e}"));
    w.require(stein_worst_single <= 1.0 + 1e-12, || format!("stein: single-summand ratio {stein_worst_single}"));

    // Haar sums against randomized indicator sums
    let haar = build_haar_system(&system, &ctx.mu)?;
    let all: Vec<HaarIndex> = haar.functions().map(|h| HaarIndex::new(h.cube, h.branch)).collect();
    let mut bands = Vec::new();
    for &p in &cfg.p_list {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..cfg.trials {
            let mut c = HaarCoefficients::new(space.dim);
            let count = rng.gen_range(1..=12).min(all.len());
            for _ in 0..count {
                let idx = all[rng.gen_range(0..all.len())];
                c.coeffs.insert(idx, (0..space.dim).map(|_| rng.sample(StandardNormal)).collect());
            }
            let r = haar_random_ratio(&c, &system, &haar, p, SignEnsemble::Exact, &ctx.mu, &space)?;
            lo = lo.min(r.ratio);
            hi = hi.max(r.ratio);
            writeln!(csv, "haar_vs_random,{i},{p},{:e},{:e},{:e},true", r.haar_side, r.random_side.value, r.ratio).unwrap();
        }
        if p == 2.0 && is_scalar(&space) {
            w.require((lo - 1.0).abs() <= 1e-10 && (hi - 1.0).abs() <= 1e-10, || format!("p = 2 scalar Haar/random band [{lo}, {hi}]"));
        }
        bands.push(json!({ "p": p, "min_ratio": lo, "max_ratio": hi, "band": hi.max(1.0 / lo) }));
    }
    w.write("norms.csv", csv.as_bytes())?;
    w.json(
        "norms_report.json",
        &json!({
            "contraction_failures": kahane_failures,
            "stein_measurable_max_deviation": stein_worst_exact,
            "stein_single_max_ratio": stein_worst_single,
            "haar_vs_random": bands,
        }),
    )
}

fn shift_stage(ctx: &Context, w: &mut Writer) -> Result<()> {
    let cfg = ctx.cfg;
    let g = cfg.experiment_g.unwrap_or(match cfg.input {
        InputSource::TorusGrid { g } => g.min(12),
        _ => 8,
    });
    let exp = ExperimentConfig {
        g,
        base: cfg.experiment_base,
        p_list: cfg.p_list.clone(),
        m_list: cfg.m_list.clone(),
        space: cfg.space.build()?,
        samples: cfg.trials.max(1),
        seed: cfg.seed,
        fit_m_max: None,
    };
    let report = norm_growth_experiment(&exp)?;
    for r in &report.rows {
        w.require(r.ratio.is_finite() && r.ratio >= 1.0 - 1e-12, || format!("shift: m={} p={} ratio {}", r.m, r.p, r.ratio));
        if r.p == 2.0 && exp.space.dim == 1 {
            w.require((r.ratio - 1.0).abs() <= 1e-10, || format!("shift: p = 2 scalar ratio {} at m={}", r.ratio, r.m));
        }
    }
    w.write("shift_experiment.csv", report.to_csv().as_bytes())?;
    w.json("shift_experiment.json", &report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("nope".parse::<Command>().is_err());
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = RunConfig::torus(6);
        assert_eq!(cfg.delta, 0.5);
        assert_eq!(cfg.k, 3);
        cfg.validate().unwrap();
        let bad = RunConfig { delta: 1.5, ..cfg.clone() };
        assert!(bad.validate().is_err());
        assert!(RunConfig::from_json(r#"{"input": {"kind": "torus_grid", "g": 4}, "bogus": 1}"#).is_err());
        assert_eq!(cfg.hash(), RunConfig::torus(6).hash());
        assert_ne!(cfg.hash(), RunConfig::torus(7).hash());
    }

    #[test]
    fn canonical_levels_follow_the_grid() {
        let cfg = RunConfig { delta: 0.25, ..RunConfig::torus(6) };
        let ctx = load_context(&cfg).unwrap();
        assert_eq!(ctx.canonical, Some(4));
        assert_eq!((ctx.k_min, ctx.k_max), (0, 3));
    }
}
