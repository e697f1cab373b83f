//! Metropolis-within-Gibbs sampler with reversible-jump birth and death
//! moves for the number of atoms.
//!
//! Every iteration proposes one update of the measure (atom, potential,
//! birth or death), then one rotation step and one concentration step.
//! Feasibility and conditional intervals are always evaluated on a frozen
//! [`ReferenceCloud`], so the invariant distribution is the posterior under
//! the cloud-truncated prior drawn by [`crate::model::sample_prior_dual`].

mod init;
mod smooth;
mod sampler;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelState, PriorConfig, Transport};
use crate::ot::TargetMeasure;
use crate::rotation::RotationMatrix;
use crate::scalar::{lit, Real};
use crate::sphere::UnitVector;

pub use init::{initialize_from_data, initialize_rotation_only, InitConfig};
pub use sampler::{run_chain, MoveOutcome, Sampler};

/// Data-driven start followed by one chain. With `auto_scale` the proposal
/// scales are first matched to the start (see [`SamplerConfig::scaled_for`]).
/// Returns the trace and the configuration actually sampled with.
pub fn fit_chain<T: Real, R: rand::Rng + ?Sized>(
    data: &crate::model::Dataset<T>,
    cloud: &crate::ot::ReferenceCloud<T>,
    config: &SamplerConfig<T>,
    auto_scale: bool,
    rng: &mut R,
) -> Result<(ChainTrace<T>, SamplerConfig<T>)> {
    config.validate()?;
    let init = match config.mode {
        SamplerMode::Fmsos => initialize_from_data(data, cloud, &config.prior, &InitConfig::default(), rng)?,
        SamplerMode::RotationOnly => initialize_rotation_only(data, config.prior.p, rng)?,
    };
    let config = if auto_scale { config.scaled_for(&init, data.len()) } else { config.clone() };
    Ok((run_chain(init, &config, cloud, data, rng)?, config))
}

/// Probabilities of the four measure updates. Entries are renormalized per
/// state by [`MoveProbabilities::effective`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveProbabilities<T> {
    pub q_atom: T,
    pub q_psi: T,
    pub q_add: T,
    pub q_remove: T,
}

impl<T: Real> Default for MoveProbabilities<T> {
    fn default() -> Self {
        let q = lit(0.25);
        Self { q_atom: q, q_psi: q, q_add: q, q_remove: q }
    }
}

impl<T: Real> MoveProbabilities<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.q_atom, self.q_psi, self.q_add, self.q_remove];
        if all.iter().any(|q| !(*q >= T::zero()) || !q.is_finite()) {
            return Err(Error::Config("move probabilities must be nonnegative".into()));
        }
        let s: T = all.iter().copied().sum();
        if (s - T::one()).abs() > lit(1e-9) {
            return Err(Error::Config(format!("move probabilities sum to {s}, not 1")));
        }
        Ok(())
    }

    /// Probabilities in force at `k` atoms: no removal at `k = 1`, addition
    /// folded into atom perturbation at `k = k_max`, then renormalized.
    /// All zeros if nothing remains to propose.
    pub fn effective(&self, k: usize, k_max: usize) -> Self {
        let mut q = *self;
        if k >= k_max {
            q.q_atom = q.q_atom + q.q_add;
            q.q_add = T::zero();
        }
        if k <= 1 {
            q.q_remove = T::zero();
        }
        let s = q.q_atom + q.q_psi + q.q_add + q.q_remove;
        if s > T::zero() {
            q.q_atom = q.q_atom / s;
            q.q_psi = q.q_psi / s;
            q.q_add = q.q_add / s;
            q.q_remove = q.q_remove / s;
        }
        q
    }

    /// Move type for a uniform draw `u ∈ [0, 1)`.
    pub fn choose(&self, u: T) -> Option<MoveType> {
        let mut acc = T::zero();
        for (q, m) in [
            (self.q_atom, MoveType::AtomPerturb),
            (self.q_psi, MoveType::PsiPerturb),
            (self.q_add, MoveType::Birth),
            (self.q_remove, MoveType::Death),
        ] {
            acc = acc + q;
            if q > T::zero() && u < acc {
                return Some(m);
            }
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveType {
    AtomPerturb,
    PsiPerturb,
    Birth,
    Death,
    /// No measure update this iteration (rotation-only mode).
    None,
}

/// Form of the acceptance ratios for the moves that change atoms or their
/// number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceRule {
    /// Ratios that leave the cloud-truncated prior invariant: interval
    /// lengths enter as proposal densities and the potential prior is the
    /// uniform box.
    #[default]
    Corrected,
    /// Interval lengths and the `1/(k+1)` factor placed as in the original
    /// description of the sampler. Kept for comparison; it is biased.
    AsPublished,
}

/// Which parameters are sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    /// Rotation, concentration and the transport measure.
    #[default]
    Fmsos,
    /// Rotation and concentration only, `f(x) = R x`.
    RotationOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig<T> {
    pub move_probs: MoveProbabilities<T>,
    /// Scale of the skew-symmetric rotation increments.
    pub sigma_eps: T,
    /// Scale of the Gaussian random walk on the concentration.
    pub sigma_kappa: T,
    /// Concentration of the vMF atom perturbation.
    pub kappa_vmf_atom: T,
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub prior: PriorConfig<T>,
    pub rule: AcceptanceRule,
    pub mode: SamplerMode,
}

impl<T: Real> Default for SamplerConfig<T> {
    fn default() -> Self {
        Self {
            move_probs: MoveProbabilities::default(),
            sigma_eps: lit(0.05),
            sigma_kappa: lit(5.0),
            kappa_vmf_atom: lit(200.0),
            iters: 20_000,
            burn_in: 5_000,
            thin: 5,
            seed: 0,
            prior: PriorConfig::default(),
            rule: AcceptanceRule::Corrected,
            mode: SamplerMode::Fmsos,
        }
    }
}

impl<T: Real> SamplerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.move_probs.validate()?;
        self.prior.validate()?;
        for (name, v) in [("sigma_eps", self.sigma_eps), ("sigma_kappa", self.sigma_kappa), ("kappa_vmf_atom", self.kappa_vmf_atom)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.iters <= self.burn_in {
            return Err(Error::Config("iters must exceed burn_in".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        Ok(())
    }

    /// Copy with proposal scales matched to the posterior width implied by
    /// a starting state and `n` observations: rotation and atom steps shrink
    /// like `1/√(κ n)` and the concentration step like `κ/√n`. The scales are
    /// fixed for the whole run. With no data the configuration is returned
    /// unchanged.
    pub fn scaled_for(&self, start: &ModelState<T>, n: usize) -> Self {
        if n == 0 {
            return self.clone();
        }
        let kappa = start.kappa.to_f64().unwrap().max(1e-3);
        let info = kappa * n as f64;
        let k = start.k().max(1) as f64;
        Self {
            sigma_eps: lit((1.5 / info.sqrt()).clamp(1e-4, 0.5)),
            kappa_vmf_atom: lit((0.3 * info / k).clamp(50.0, 1e8)),
            sigma_kappa: lit((2.0 * kappa / (n as f64).sqrt()).max(1e-3)),
            ..self.clone()
        }
    }

    /// Number of records a chain keeps.
    pub fn kept(&self) -> usize {
        (self.iters - self.burn_in) / self.thin
    }
}

/// One kept iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct TraceRecord<T> {
    pub iteration: usize,
    pub k: usize,
    pub kappa: T,
    pub log_likelihood: T,
    /// Row-major rotation entries.
    pub rotation: Vec<T>,
    pub atoms: Vec<Vec<T>>,
    pub psi: Vec<T>,
    pub move_type: MoveType,
    pub accepted: bool,
    /// Interval the proposed potential was drawn from (or, for a death, the
    /// victim's interval).
    pub interval: Option<[T; 2]>,
    /// Interval of the current atom's potential for an atom perturbation.
    pub reverse_interval: Option<[T; 2]>,
}

impl<T: Real> TraceRecord<T> {
    /// Rebuilds the recorded state. Records without atoms come from the
    /// rotation-only mode.
    pub fn state(&self) -> Result<ModelState<T>> {
        let dim = (self.rotation.len() as f64).sqrt().round() as usize;
        let rotation = RotationMatrix::from_row_major(dim, self.rotation.clone())?;
        if self.atoms.is_empty() {
            return ModelState::rotation_only(rotation, self.kappa);
        }
        let atoms = self.atoms.iter().map(|a| UnitVector::new(a.clone())).collect::<Result<Vec<_>>>()?;
        ModelState::new(TargetMeasure::new(atoms, self.psi.clone())?, rotation, self.kappa)
    }

    pub(crate) fn from_state(
        iteration: usize,
        state: &ModelState<T>,
        log_likelihood: T,
        outcome: &MoveOutcome<T>,
    ) -> Self {
        let (atoms, psi) = match &state.transport {
            Transport::Laguerre(m) => (m.atoms().iter().map(|a| a.as_slice().to_vec()).collect(), m.psi().to_vec()),
            Transport::Identity => (Vec::new(), Vec::new()),
        };
        Self {
            iteration,
            k: state.k(),
            kappa: state.kappa,
            log_likelihood,
            rotation: state.rotation.entries().to_vec(),
            atoms,
            psi,
            move_type: outcome.move_type,
            accepted: outcome.accepted,
            interval: outcome.interval,
            reverse_interval: outcome.reverse_interval,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCounts {
    pub proposed: usize,
    pub accepted: usize,
}

impl MoveCounts {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub(crate) fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as usize;
    }
}

/// Proposal and acceptance counts over the whole chain, burn-in included.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub atom: MoveCounts,
    pub psi: MoveCounts,
    pub birth: MoveCounts,
    pub death: MoveCounts,
    pub rotation: MoveCounts,
    pub kappa: MoveCounts,
}

impl AcceptanceStats {
    pub fn for_move(&mut self, m: MoveType) -> Option<&mut MoveCounts> {
        match m {
            MoveType::AtomPerturb => Some(&mut self.atom),
            MoveType::PsiPerturb => Some(&mut self.psi),
            MoveType::Birth => Some(&mut self.birth),
            MoveType::Death => Some(&mut self.death),
            MoveType::None => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ChainTrace<T> {
    pub records: Vec<TraceRecord<T>>,
    pub stats: AcceptanceStats,
}

impl<T: Real> ChainTrace<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn states(&self) -> Result<Vec<ModelState<T>>> {
        self.records.iter().map(TraceRecord::state).collect()
    }
}

/// `ln` of the birth acceptance ratio for `k → k + 1`, without the
/// likelihood term. `interval_len` is the length of the interval the new
/// potential was drawn from.
pub fn log_birth_prior_ratio<T: Real>(
    config: &SamplerConfig<T>,
    k: usize,
    interval_len: T,
) -> T {
    let k_max = config.prior.k_max;
    let q_add = config.move_probs.effective(k, k_max).q_add;
    let q_remove = config.move_probs.effective(k + 1, k_max).q_remove;
    let lp = config.prior.log_prior_k(k + 1) - config.prior.log_prior_k(k);
    let base = lp + q_remove.ln() - q_add.ln();
    match config.rule {
        AcceptanceRule::Corrected => base + interval_len.ln() - (lit::<T>(2.0) * crate::scalar::half_pi_sq::<T>()).ln(),
        AcceptanceRule::AsPublished => base - lit::<T>((k + 1) as f64).ln() - interval_len.ln(),
    }
}

/// `ln` of the death acceptance ratio for `k → k − 1`, without the
/// likelihood term; the exact reciprocal of [`log_birth_prior_ratio`] at
/// `k − 1` with the same interval.
pub fn log_death_prior_ratio<T: Real>(
    config: &SamplerConfig<T>,
    k: usize,
    interval_len: T,
) -> T {
    -log_birth_prior_ratio(config, k - 1, interval_len)
}

/// `ln` of the interval factor of an atom perturbation.
pub fn log_atom_interval_ratio<T: Real>(rule: AcceptanceRule, current_len: T, proposed_len: T) -> T {
    match rule {
        AcceptanceRule::Corrected => proposed_len.ln() - current_len.ln(),
        AcceptanceRule::AsPublished => current_len.ln() - proposed_len.ln(),
    }
}
