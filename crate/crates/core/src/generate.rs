//! Autoregressive generation conditioned on a labeled point cloud.
//!
//! Tokens and geometry bins are drawn by temperature sampling. Each atom's
//! lattice point is drawn from the tolerance-bounded feasible set around
//! its sampled geometry, scored by the coordinate heads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{write_smiles, Molecule};
use crate::density::LabeledPointCloud;
use crate::encoding::{anchor_positions, cloud_lattice, encode_cloud, EncodedSequence, ABSENT};
use crate::fsmiles::{detokenize, token_string, trace_ancestors, GrammarState, TokenEvent, TokenKind, Vocab, END, START};
use crate::geom::{
    effective_target, feasible_lattice_points, residuals, DiscretizationParams, GeomBins, GeomResiduals, Lattice,
    LatticePoint, ToleranceConfig, Vec3,
};
use crate::model::{log_softmax, InferenceState, ModelError, ModelParams};

/// Temperatures at or below this select the argmax.
pub const ARGMAX_TEMPERATURE: f64 = 1e-6;

/// Extra angular slack, in degrees, allowed on top of the tolerances when
/// judging a finished molecule.
pub const ANGLE_SLACK: f64 = 5.0;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("non-finite logit at index {0}")]
    NonFinite(usize),
    #[error("no candidate left to sample")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub temperature: f64,
    /// Token budget per rollout, `start_0` included. `None` uses the context
    /// left after the point cloud.
    pub max_tokens: Option<usize>,
    pub n_samples: usize,
    pub seed: u64,
    pub tolerances: ToleranceConfig,
    /// Rejected token draws allowed per step before the rollout is abandoned.
    pub max_retries: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            temperature: 0.7,
            max_tokens: None,
            n_samples: 10,
            seed: 0,
            tolerances: ToleranceConfig::default(),
            max_retries: 10,
        }
    }
}

impl GenerationConfig {
    /// Token budget for a cloud of `n_cloud` points under context `n_ctx`.
    pub fn token_budget(&self, n_cloud: usize, n_ctx: usize) -> Result<usize, GenerateError> {
        let room = n_ctx.checked_sub(n_cloud).filter(|&r| r >= 2).ok_or_else(|| {
            GenerateError::Config(format!("{n_cloud} cloud points leave no room in a context of {n_ctx}"))
        })?;
        match self.max_tokens {
            None => Ok(room),
            Some(m) if (2..=room).contains(&m) => Ok(m),
            Some(m) => Err(GenerateError::Config(format!("max_tokens {m} outside 2..={room}"))),
        }
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(GenerateError::Config(format!("temperature {} must be positive", self.temperature)));
        }
        let t = &self.tolerances;
        if [t.delta_l, t.delta_theta, t.delta_phi].iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(GenerateError::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Truncated,
    Invalid,
}

#[derive(Debug, Clone)]
pub struct GenerationResult {
    pub status: Status,
    /// Heavy-atom molecule in Å; present for complete rollouts.
    pub molecule: Option<Molecule>,
    /// Tokens with their lattice points and sampled geometry bins.
    pub trace: EncodedSequence,
    /// One entry per generated atom.
    pub residuals: Vec<GeomResiduals>,
    /// Why a rollout was marked invalid.
    pub message: Option<String>,
}

/// Draws an index from softmax(logits / T). `T <= 1e-6` returns the first
/// maximum.
pub fn sample_categorical<R: Rng + ?Sized>(logits: &[f64], temperature: f64, rng: &mut R) -> Result<usize, GenerateError> {
    sample_masked(logits, None, temperature, rng)
}

/// [`sample_categorical`] restricted to indices where `allowed` is true.
fn sample_masked<R: Rng + ?Sized>(
    logits: &[f64],
    allowed: Option<&[bool]>,
    temperature: f64,
    rng: &mut R,
) -> Result<usize, GenerateError> {
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(GenerateError::NonFinite(i));
    }
    let ok = |i: usize| allowed.is_none_or(|a| a[i]);
    let mut best: Option<usize> = None;
    for i in (0..logits.len()).filter(|&i| ok(i)) {
        if best.is_none_or(|b| logits[i] > logits[b]) {
            best = Some(i);
        }
    }
    let best = best.ok_or(GenerateError::Empty)?;
    if temperature <= ARGMAX_TEMPERATURE {
        return Ok(best);
    }
    let max = logits[best];
    let weights: Vec<f64> = (0..logits.len())
        .map(|i| if ok(i) { ((logits[i] - max) / temperature).exp() } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = best;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if u < *w {
                return Ok(i);
            }
            u -= w;
            last = i;
        }
    }
    Ok(last)
}

/// Whether residuals stay within the tolerances plus one lattice step for
/// length and [`ANGLE_SLACK`] for angles.
pub fn within_slack(r: &GeomResiduals, tol: &ToleranceConfig, sigma: f64) -> bool {
    let ok = |d: Option<f64>, bound: f64| d.is_none_or(|d| d <= bound + 1e-9);
    ok(r.dl, tol.delta_l + sigma) && ok(r.dtheta, tol.delta_theta + ANGLE_SLACK) && ok(r.dphi, tol.delta_phi + ANGLE_SLACK)
}

/// Runs `cfg.n_samples` rollouts; rollout `i` uses seed `cfg.seed + i`.
pub fn generate(
    cloud: &LabeledPointCloud,
    disc: &DiscretizationParams,
    params: &ModelParams,
    cfg: &GenerationConfig,
) -> Result<Vec<GenerationResult>, GenerateError> {
    cfg.validate()?;
    let lattice = cloud_lattice(cloud, *disc);
    let points = encode_cloud(cloud, &lattice);
    let budget = cfg.token_budget(points.len(), params.config.n_ctx)?;
    (0..cfg.n_samples as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i));
            let mut r = Rollout::new(params, &lattice, cfg, points.len());
            let outcome = r.run(&points, budget, &mut rng);
            let mut result = r.finish(outcome)?;
            if let Some(m) = result.molecule.as_mut() {
                m.name = format!("sample_{i}");
            }
            Ok(result)
        })
        .collect()
}

enum Outcome {
    Ended,
    Truncated,
    Invalid(String),
}

struct Rollout<'a> {
    state: InferenceState<'a>,
    lattice: &'a Lattice,
    cfg: &'a GenerationConfig,
    grammar: GrammarState,
    events: Vec<TokenEvent>,
    trace: EncodedSequence,
    placed: Vec<Vec3>,
    residuals: Vec<GeomResiduals>,
}

impl<'a> Rollout<'a> {
    fn new(params: &'a ModelParams, lattice: &'a Lattice, cfg: &'a GenerationConfig, n_cloud: usize) -> Self {
        Rollout {
            state: InferenceState::new(params, n_cloud),
            lattice,
            cfg,
            grammar: GrammarState::new(),
            events: Vec::new(),
            trace: EncodedSequence::default(),
            placed: Vec::new(),
            residuals: Vec::new(),
        }
    }

    fn push_token(&mut self, id: u16, q: Option<LatticePoint>, bins: [i32; 3]) -> Result<(), GenerateError> {
        let coords = q.unwrap_or([ABSENT; 3]);
        self.state.push(id as usize, coords.map(|c| c.max(0) as usize))?;
        self.trace.tokens.push(id);
        self.trace.coords.push(coords);
        self.trace.geom.push(bins);
        Ok(())
    }

    fn run(&mut self, points: &[(usize, LatticePoint)], budget: usize, rng: &mut ChaCha8Rng) -> Outcome {
        match self.steps(points, budget, rng) {
            Ok(o) => o,
            Err(e) => Outcome::Invalid(e.to_string()),
        }
    }

    fn steps(&mut self, points: &[(usize, LatticePoint)], budget: usize, rng: &mut ChaCha8Rng) -> Result<Outcome, GenerateError> {
        for &(class, q) in points {
            self.state.push(class, q.map(|c| c as usize))?;
        }
        self.grammar.advance(START);
        self.events.push(TokenEvent { id: START, kind: TokenKind::Control, atom: None });
        self.push_token(START, None, [ABSENT; 3])?;
        let vocab = Vocab::get();
        while self.trace.len() < budget {
            let logits = self.state.logits();
            let mut allowed: Vec<bool> = (0..logits[0].len()).map(|i| i < vocab.len()).collect();
            let mut id = None;
            for _ in 0..=self.cfg.max_retries {
                let draw = sample_masked(&logits[0], Some(&allowed), self.cfg.temperature, rng)? as u16;
                if self.grammar.advance(draw) {
                    id = Some(draw);
                    break;
                }
                allowed[draw as usize] = false;
            }
            let Some(id) = id else {
                return Ok(Outcome::Invalid(format!(
                    "no acceptable token after {} retries at position {}",
                    self.cfg.max_retries,
                    self.trace.len()
                )));
            };
            let kind = vocab.kind(id);
            if kind != TokenKind::Atom {
                self.events.push(TokenEvent { id, kind, atom: None });
                self.push_token(id, None, [ABSENT; 3])?;
                if id == END {
                    return Ok(Outcome::Ended);
                }
                continue;
            }
            let k = self.placed.len();
            self.events.push(TokenEvent { id, kind, atom: Some(k) });
            let (q, bins, res) = match self.place_atom(&logits, rng)? {
                Ok(placement) => placement,
                Err(msg) => return Ok(Outcome::Invalid(msg)),
            };
            self.placed.push(self.lattice.dequantize(q));
            self.residuals.push(res);
            self.push_token(id, Some(q), bins)?;
        }
        Ok(Outcome::Truncated)
    }

    /// Chooses the lattice point of the atom whose event was just appended.
    #[allow(clippy::type_complexity)]
    fn place_atom(
        &self,
        logits: &[Vec<f64>; 7],
        rng: &mut ChaCha8Rng,
    ) -> Result<Result<(LatticePoint, [i32; 3], GeomResiduals), String>, GenerateError> {
        let p = &self.lattice.params;
        let t = self.cfg.temperature;
        let logp: Vec<Vec<f64>> = logits[1..4].iter().map(|l| log_softmax(l)).collect();
        let in_range: Vec<bool> =
            (0..logp[0].len()).map(|c| (p.coord_min as usize..=p.coord_max as usize).contains(&c)).collect();
        if self.placed.is_empty() {
            let mut q = [0; 3];
            for (k, lp) in logp.iter().enumerate() {
                q[k] = sample_masked(lp, Some(&in_range), t, rng)? as i32;
            }
            return Ok(Ok((q, [ABSENT; 3], GeomResiduals::default())));
        }
        let refs = match trace_ancestors(&self.events, self.events.len() - 1) {
            Ok(r) => r.as_array().map(|r| r.and_then(|pos| self.events[pos].atom)),
            Err(e) => return Ok(Err(format!("ancestor tracing failed: {e}"))),
        };
        let anchors = anchor_positions(&refs, &self.placed);
        if anchors.is_empty() {
            return Ok(Err("atom has no reference atom".into()));
        }
        let bins_allowed: Vec<bool> = (0..logits[4].len()).map(|b| b < p.geom_bins as usize).collect();
        let mut draw = |head: usize| -> Result<u16, GenerateError> {
            Ok(sample_masked(&logits[head], Some(&bins_allowed), t, rng)? as u16)
        };
        let l = draw(4)?;
        let theta = if anchors.len() >= 2 { Some(draw(5)?) } else { None };
        let phi = if anchors.len() == 3 { Some(draw(6)?) } else { None };
        let bins = GeomBins { l: Some(l), theta, phi };
        let candidates = feasible_lattice_points(&anchors, &bins, &self.cfg.tolerances, self.lattice);
        let scores: Vec<f64> = candidates
            .iter()
            .map(|q| (0..3).map(|k| logp[k].get(q[k] as usize).copied().unwrap_or(f64::MIN)).sum())
            .collect();
        let q = candidates[sample_categorical(&scores, t, rng)?];
        let target = effective_target(&anchors, &bins, self.lattice);
        let Some(res) = residuals(&anchors, self.lattice.dequantize(q), &target) else {
            return Ok(Err("atom placed on a reference atom".into()));
        };
        Ok(Ok((q, bins.into(), res)))
    }

    fn finish(self, outcome: Outcome) -> Result<GenerationResult, GenerateError> {
        let mut result = GenerationResult {
            status: Status::Invalid,
            molecule: None,
            trace: self.trace,
            residuals: self.residuals,
            message: None,
        };
        match outcome {
            Outcome::Truncated => result.status = Status::Truncated,
            Outcome::Invalid(msg) => result.message = Some(msg),
            Outcome::Ended => {
                let sigma = self.lattice.params.sigma;
                if let Some(k) = result.residuals.iter().position(|r| !within_slack(r, &self.cfg.tolerances, sigma)) {
                    result.message = Some(format!("atom {k} violates its geometry tolerances"));
                    return Ok(result);
                }
                match detokenize(&self.events) {
                    Ok(mut mol) => {
                        mol.set_positions(&self.placed);
                        result.molecule = Some(mol);
                        result.status = Status::Complete;
                    }
                    Err(e) => result.message = Some(format!("detokenization failed: {e}")),
                }
            }
        }
        Ok(result)
    }
}

#[derive(Serialize)]
struct SidecarEntry<'a> {
    index: usize,
    status: Status,
    smiles: Option<String>,
    tokens: String,
    sequence: &'a EncodedSequence,
    residuals: &'a [GeomResiduals],
    message: Option<&'a str>,
}

/// JSON record of every rollout: status, token trace and residuals.
pub fn sidecar_json(results: &[GenerationResult]) -> String {
    let entries: Vec<SidecarEntry> = results
        .iter()
        .enumerate()
        .map(|(index, r)| SidecarEntry {
            index,
            status: r.status,
            smiles: r.molecule.as_ref().map(write_smiles),
            tokens: trace_text(&r.trace),
            sequence: &r.trace,
            residuals: &r.residuals,
            message: r.message.as_deref(),
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("sidecar serializes")
}

/// Space-separated token text of a trace.
pub fn trace_text(trace: &EncodedSequence) -> String {
    let vocab = Vocab::get();
    let events: Vec<TokenEvent> = trace
        .tokens
        .iter()
        .map(|&id| TokenEvent { id, kind: vocab.kind(id), atom: None })
        .collect();
    token_string(&events)
}

/// Complete molecules of a rollout set, in rollout order.
pub fn complete_molecules(results: &[GenerationResult]) -> Vec<Molecule> {
    results.iter().filter_map(|r| r.molecule.clone()).collect()
}
