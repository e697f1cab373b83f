use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    log_atom_interval_ratio, log_birth_prior_ratio, log_death_prior_ratio, AcceptanceStats, ChainTrace, MoveType,
    SamplerConfig, SamplerMode, TraceRecord,
};
use crate::error::{Error, Result};
use crate::model::{Dataset, ModelState, Transport};
use crate::ot::{CostTable, FeasibleInterval, ReferenceCloud, TargetMeasure};
use crate::rotation::{skew_exponential_step, skew_param_count, RotationMatrix};
use crate::scalar::{lit, Real};
use crate::sphere::{sample_uniform_sphere, UnitVector};
use crate::vmf::{vmf_log_normalizer, vmf_sample, VmfParams};

/// Result of one measure update.
#[derive(Clone, Debug, PartialEq)]
pub struct MoveOutcome<T> {
    pub move_type: MoveType,
    pub accepted: bool,
    /// Atom the move acted on (insertion position for a birth).
    pub index: Option<usize>,
    /// `ln` of the acceptance ratio, when a complete proposal was formed.
    pub log_ratio: Option<T>,
    pub interval: Option<[T; 2]>,
    pub reverse_interval: Option<[T; 2]>,
}

impl<T> MoveOutcome<T> {
    fn none() -> Self {
        Self { move_type: MoveType::None, accepted: false, index: None, log_ratio: None, interval: None, reverse_interval: None }
    }

    fn rejected(move_type: MoveType, index: usize) -> Self {
        Self { move_type, accepted: false, index: Some(index), log_ratio: None, interval: None, reverse_interval: None }
    }
}

/// A chain positioned at one state, with cost tables against the frozen
/// cloud and the covariates cached per atom, and the likelihood reduced to
/// the sufficient statistic `M = Σ_i y_i f̃(x_i)ᵀ` with `f̃` the pre-rotation
/// map, so that `Σ_i y_iᵀ R f̃(x_i) = ⟨R, M⟩`.
pub struct Sampler<'a, T: Real> {
    config: &'a SamplerConfig<T>,
    cloud: CostTable<T>,
    data: CostTable<T>,
    responses: Vec<Vec<T>>,
    n: usize,
    dim: usize,
    atoms: Vec<UnitVector<T>>,
    psi: Vec<T>,
    rotation: RotationMatrix<T>,
    kappa: T,
    stat: Vec<T>,
    log_c: T,
    loglik: T,
    stats: AcceptanceStats,
}

struct Proposal<T> {
    stat: Vec<T>,
    loglik: T,
}

impl<'a, T: Real> Sampler<'a, T> {
    pub fn new(init: ModelState<T>, config: &'a SamplerConfig<T>, cloud: &ReferenceCloud<T>, data: &Dataset<T>) -> Result<Self> {
        config.validate()?;
        init.validate()?;
        let dim = init.dim();
        if config.prior.p + 1 != dim {
            return Err(Error::DimensionMismatch { expected: config.prior.p + 1, got: dim });
        }
        if cloud.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: cloud.dim() });
        }
        if let Some(d) = data.dim() {
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: d });
            }
        }
        let (atoms, psi) = match (&init.transport, config.mode) {
            (Transport::Laguerre(m), SamplerMode::Fmsos) => {
                if m.k() > config.prior.k_max {
                    return Err(Error::Config(format!("initial k = {} exceeds k_max", m.k())));
                }
                (m.atoms().to_vec(), m.psi().to_vec())
            }
            (Transport::Identity, SamplerMode::RotationOnly) => (Vec::new(), Vec::new()),
            _ => return Err(Error::Config("initial state does not match the sampler mode".into())),
        };
        let cloud_table = CostTable::new(cloud.points(), &atoms);
        if !atoms.is_empty() && !cloud_table.is_feasible(&psi) {
            return Err(Error::InvalidMeasure("initial measure is infeasible on the reference cloud".into()));
        }
        let data_table = CostTable::new(&data.covariates(), &atoms);
        let responses = data.pairs().iter().map(|(_, y)| y.as_slice().to_vec()).collect();
        let mut s = Self {
            config,
            cloud: cloud_table,
            data: data_table,
            responses,
            n: data.len(),
            dim,
            atoms,
            psi,
            rotation: init.rotation,
            kappa: init.kappa,
            stat: Vec::new(),
            log_c: T::zero(),
            loglik: T::zero(),
            stats: AcceptanceStats::default(),
        };
        s.stat = match config.mode {
            SamplerMode::Fmsos => {
                let a = assign_skip(&s.data, &s.psi, None);
                s.stat_for(&s.atoms, &a)
            }
            SamplerMode::RotationOnly => s.identity_stat(data),
        };
        s.log_c = s.log_normalizer(s.kappa);
        s.loglik = s.loglik_for(s.rotation.entries(), s.kappa, s.log_c, &s.stat);
        Ok(s)
    }

    pub fn state(&self) -> ModelState<T> {
        let transport = match self.config.mode {
            SamplerMode::Fmsos => Transport::Laguerre(TargetMeasure::from_parts_unchecked(self.atoms.clone(), self.psi.clone())),
            SamplerMode::RotationOnly => Transport::Identity,
        };
        ModelState { transport, rotation: self.rotation.clone(), kappa: self.kappa }
    }

    pub fn k(&self) -> usize {
        self.atoms.len()
    }

    pub fn log_likelihood(&self) -> T {
        self.loglik
    }

    pub fn stats(&self) -> &AcceptanceStats {
        &self.stats
    }

    /// One iteration: a measure update (skipped in rotation-only mode), then
    /// a rotation step and a concentration step.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> MoveOutcome<T> {
        let outcome = match self.config.mode {
            SamplerMode::Fmsos => self.step_measure(rng),
            SamplerMode::RotationOnly => MoveOutcome::none(),
        };
        self.step_rotation(rng);
        self.step_kappa(rng);
        outcome
    }

    /// Picks one of the four measure updates by the effective move
    /// probabilities and applies it.
    pub fn step_measure<R: Rng + ?Sized>(&mut self, rng: &mut R) -> MoveOutcome<T> {
        let q = self.config.move_probs.effective(self.k(), self.config.prior.k_max);
        let u: T = lit(rng.random::<f64>());
        match q.choose(u) {
            Some(MoveType::AtomPerturb) => self.step_atom_perturb(rng),
            Some(MoveType::PsiPerturb) => self.step_psi_perturb(rng),
            Some(MoveType::Birth) => self.step_birth(rng),
            Some(MoveType::Death) => self.step_death(rng),
            _ => MoveOutcome::none(),
        }
    }

    /// `R' = exp(Ω(ε)) R` with Gaussian `ε`; Metropolis on the likelihood.
    pub fn step_rotation<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let eps: Vec<T> = (0..skew_param_count(self.dim))
            .map(|_| self.config.sigma_eps * lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let proposal = skew_exponential_step(&self.rotation, &eps).orthonormalized();
        let ll = self.loglik_for(proposal.entries(), self.kappa, self.log_c, &self.stat);
        let accepted = metropolis(ll - self.loglik, rng);
        if accepted {
            self.rotation = proposal;
            self.loglik = ll;
        }
        self.stats.rotation.record(accepted);
        accepted
    }

    /// Gaussian random walk on `κ`; nonpositive proposals are rejected.
    pub fn step_kappa<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let z: f64 = rng.sample(StandardNormal);
        let proposal = self.kappa + self.config.sigma_kappa * lit(z);
        let mut accepted = false;
        if proposal > T::zero() && proposal.is_finite() {
            let log_c = self.log_normalizer(proposal);
            let ll = self.loglik_for(self.rotation.entries(), proposal, log_c, &self.stat);
            if metropolis(ll - self.loglik, rng) {
                self.kappa = proposal;
                self.log_c = log_c;
                self.loglik = ll;
                accepted = true;
            }
        }
        self.stats.kappa.record(accepted);
        accepted
    }

    /// Moves atom `j` by a vMF step and redraws `ψ_j` on its new conditional
    /// interval.
    pub fn step_atom_perturb<R: Rng + ?Sized>(&mut self, rng: &mut R) -> MoveOutcome<T> {
        let k = self.k();
        let j = rng.random_range(0..k);
        let current = match self.interval(j) {
            Some(i) => i,
            None => return self.finish(MoveOutcome::rejected(MoveType::AtomPerturb, j)),
        };
        let params = VmfParams::new(self.atoms[j].clone(), self.config.kappa_vmf_atom).expect("positive concentration");
        let z = vmf_sample(&params, rng);
        let old_cloud = self.cloud.replace_column(j, self.cloud.column_for(&z));
        let proposed = match self.interval(j) {
            Some(i) => i,
            None => {
                self.cloud.replace_column(j, old_cloud);
                let mut out = MoveOutcome::rejected(MoveType::AtomPerturb, j);
                out.reverse_interval = Some([current.lower, current.upper]);
                return self.finish(out);
            }
        };
        let value = proposed.sample(rng);
        let old_data = self.data.replace_column(j, self.data.column_for(&z));
        let mut psi = self.psi.clone();
        psi[j] = value;
        let mut atoms = self.atoms.clone();
        atoms[j] = z;
        let prop = self.propose(&atoms, &psi, None);
        let log_ratio = prop.loglik - self.loglik
            + log_atom_interval_ratio(self.config.rule, current.length(), proposed.length());
        let accepted = metropolis(log_ratio, rng);
        if accepted {
            debug_assert!(self.cloud.is_feasible(&psi));
            self.atoms = atoms;
            self.psi = psi;
            self.commit(prop);
        } else {
            self.cloud.replace_column(j, old_cloud);
            self.data.replace_column(j, old_data);
        }
        self.finish(MoveOutcome {
            move_type: MoveType::AtomPerturb,
            accepted,
            index: Some(j),
            log_ratio: Some(log_ratio),
            interval: Some([proposed.lower, proposed.upper]),
            reverse_interval: Some([current.lower, current.upper]),
        })
    }

    /// Redraws `ψ_j` uniformly on its conditional interval.
    pub fn step_psi_perturb<R: Rng + ?Sized>(&mut self, rng: &mut R) -> MoveOutcome<T> {
        let j = rng.random_range(0..self.k());
        let current = match self.interval(j) {
            Some(i) => i,
            None => return self.finish(MoveOutcome::rejected(MoveType::PsiPerturb, j)),
        };
        let mut psi = self.psi.clone();
        psi[j] = current.sample(rng);
        let prop = self.propose(&self.atoms, &psi, None);
        let log_ratio = prop.loglik - self.loglik;
        let accepted = metropolis(log_ratio, rng);
        if accepted {
            self.psi = psi;
            self.commit(prop);
        }
        self.finish(MoveOutcome {
            move_type: MoveType::PsiPerturb,
            accepted,
            index: Some(j),
            log_ratio: Some(log_ratio),
            interval: Some([current.lower, current.upper]),
            reverse_interval: None,
        })
    }

    /// Inserts a uniform atom at a uniform position with its potential drawn
    /// on the conditional interval.
    pub fn step_birth<R: Rng + ?Sized>(&mut self, rng: &mut R) -> MoveOutcome<T> {
        let k = self.k();
        debug_assert!(k < self.config.prior.k_max);
        let z: UnitVector<T> = sample_uniform_sphere(self.dim - 1, rng);
        let j = rng.random_range(0..=k);
        self.cloud.insert_column(j, self.cloud.column_for(&z));
        let mut psi = self.psi.clone();
        psi.insert(j, T::zero());
        let interval = match FeasibleInterval::clamp_to_box_pair(self.cloud.conditional_bounds(&psi, j)) {
            Some(i) => i,
            None => {
                self.cloud.remove_column(j);
                return self.finish(MoveOutcome::rejected(MoveType::Birth, j));
            }
        };
        psi[j] = interval.sample(rng);
        self.data.insert_column(j, self.data.column_for(&z));
        let mut atoms = self.atoms.clone();
        atoms.insert(j, z);
        let prop = self.propose(&atoms, &psi, None);
        let log_ratio = prop.loglik - self.loglik + log_birth_prior_ratio(self.config, k, interval.length());
        let accepted = metropolis(log_ratio, rng);
        if accepted {
            debug_assert!(self.cloud.is_feasible(&psi));
            self.atoms = atoms;
            self.psi = psi;
            self.commit(prop);
        } else {
            self.cloud.remove_column(j);
            self.data.remove_column(j);
        }
        self.finish(MoveOutcome {
            move_type: MoveType::Birth,
            accepted,
            index: Some(j),
            log_ratio: Some(log_ratio),
            interval: Some([interval.lower, interval.upper]),
            reverse_interval: None,
        })
    }

    /// Removes a uniformly chosen atom.
    pub fn step_death<R: Rng + ?Sized>(&mut self, rng: &mut R) -> MoveOutcome<T> {
        let k = self.k();
        debug_assert!(k >= 2);
        let j = rng.random_range(0..k);
        let (log_ratio, interval, prop) = match self.evaluate_death(j) {
            Some(v) => v,
            None => return self.finish(MoveOutcome::rejected(MoveType::Death, j)),
        };
        let accepted = metropolis(log_ratio, rng);
        if accepted {
            self.cloud.remove_column(j);
            self.data.remove_column(j);
            self.atoms.remove(j);
            self.psi.remove(j);
            assert!(self.cloud.is_feasible(&self.psi), "removing an atom emptied a cell");
            self.commit(prop);
        }
        self.finish(MoveOutcome {
            move_type: MoveType::Death,
            accepted,
            index: Some(j),
            log_ratio: Some(log_ratio),
            interval: Some([interval.lower, interval.upper]),
            reverse_interval: None,
        })
    }

    /// `ln` of the acceptance ratio for removing atom `j` from the current
    /// state, without applying it.
    pub fn log_death_ratio(&self, j: usize) -> Option<T> {
        self.evaluate_death(j).map(|(r, _, _)| r)
    }

    fn evaluate_death(&self, j: usize) -> Option<(T, FeasibleInterval<T>, Proposal<T>)> {
        let k = self.k();
        if k < 2 || j >= k {
            return None;
        }
        let interval = self.interval(j)?;
        let prop = self.propose(&self.atoms, &self.psi, Some(j));
        let log_ratio = prop.loglik - self.loglik + log_death_prior_ratio(self.config, k, interval.length());
        Some((log_ratio, interval, prop))
    }

    fn interval(&self, j: usize) -> Option<FeasibleInterval<T>> {
        FeasibleInterval::clamp_to_box_pair(self.cloud.conditional_bounds(&self.psi, j))
    }

    /// Likelihood of the state with the given measure (atom `skip` removed)
    /// at the current rotation and concentration. Requires the data table to
    /// hold columns for `atoms`.
    fn propose(&self, atoms: &[UnitVector<T>], psi: &[T], skip: Option<usize>) -> Proposal<T> {
        let a = assign_skip(&self.data, psi, skip);
        let stat = self.stat_for(atoms, &a);
        let loglik = self.loglik_for(self.rotation.entries(), self.kappa, self.log_c, &stat);
        Proposal { stat, loglik }
    }

    fn commit(&mut self, prop: Proposal<T>) {
        self.stat = prop.stat;
        self.loglik = prop.loglik;
    }

    fn finish(&mut self, outcome: MoveOutcome<T>) -> MoveOutcome<T> {
        if let Some(c) = self.stats.for_move(outcome.move_type) {
            c.record(outcome.accepted);
        }
        outcome
    }

    fn stat_for(&self, atoms: &[UnitVector<T>], assign: &[usize]) -> Vec<T> {
        let d = self.dim;
        let mut sums = vec![T::zero(); atoms.len() * d];
        for (y, &a) in self.responses.iter().zip(assign) {
            for (s, &v) in sums[a * d..(a + 1) * d].iter_mut().zip(y) {
                *s = *s + v;
            }
        }
        let mut stat = vec![T::zero(); d * d];
        for (j, z) in atoms.iter().enumerate() {
            let s = &sums[j * d..(j + 1) * d];
            for (a, &sa) in s.iter().enumerate() {
                for (b, &zb) in z.as_slice().iter().enumerate() {
                    stat[a * d + b] = stat[a * d + b] + sa * zb;
                }
            }
        }
        stat
    }

    fn identity_stat(&self, data: &Dataset<T>) -> Vec<T> {
        let d = self.dim;
        let mut stat = vec![T::zero(); d * d];
        for (x, y) in data.pairs() {
            for (a, &ya) in y.as_slice().iter().enumerate() {
                for (b, &xb) in x.as_slice().iter().enumerate() {
                    stat[a * d + b] = stat[a * d + b] + ya * xb;
                }
            }
        }
        stat
    }

    fn log_normalizer(&self, kappa: T) -> T {
        if self.n == 0 {
            return T::zero();
        }
        vmf_log_normalizer(self.dim, kappa).expect("positive concentration")
    }

    fn loglik_for(&self, rotation: &[T], kappa: T, log_c: T, stat: &[T]) -> T {
        if self.n == 0 {
            return T::zero();
        }
        let align = rotation.iter().zip(stat).fold(T::zero(), |s, (&r, &m)| s + r * m);
        lit::<T>(self.n as f64) * log_c + kappa * align
    }
}

/// Laguerre assignment over the table's columns, ignoring column `skip`.
fn assign_skip<T: Real>(table: &CostTable<T>, psi: &[T], skip: Option<usize>) -> Vec<usize> {
    let n = table.n_points();
    let mut best = vec![usize::MAX; n];
    let mut best_v = vec![T::infinity(); n];
    for j in 0..table.k() {
        if Some(j) == skip {
            continue;
        }
        let pj = psi[j];
        for ((b, bv), &c) in best.iter_mut().zip(best_v.iter_mut()).zip(table.column(j)) {
            let v = c - pj;
            if v < *bv || *b == usize::MAX {
                *bv = v;
                *b = j;
            }
        }
    }
    best
}

fn metropolis<T: Real, R: Rng + ?Sized>(log_ratio: T, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u.ln() < log_ratio.to_f64().unwrap_or(f64::NAN)
}

/// Runs a chain from `init` and keeps every `thin`-th state after burn-in.
pub fn run_chain<T: Real, R: Rng + ?Sized>(
    init: ModelState<T>,
    config: &SamplerConfig<T>,
    cloud: &ReferenceCloud<T>,
    data: &Dataset<T>,
    rng: &mut R,
) -> Result<ChainTrace<T>> {
    let mut sampler = Sampler::new(init, config, cloud, data)?;
    let mut records = Vec::with_capacity(config.kept());
    for t in 0..config.iters {
        let outcome = sampler.sweep(rng);
        if t >= config.burn_in && (t - config.burn_in + 1) % config.thin == 0 {
            records.push(TraceRecord::from_state(t, &sampler.state(), sampler.log_likelihood(), &outcome));
        }
    }
    Ok(ChainTrace { records, stats: *sampler.stats() })
}
