//! Synthetic ground-truth generator: a stochastic 2-D advection-diffusion
//! system on a periodic parent grid, cropped to the LAM frame so the
//! boundary forcing seen by the model is physically consistent with the
//! interior.
//!
//! Each substep applies upwind advection in a fixed solenoidal velocity
//! field, explicit diffusion, weak linear damping and inter-variable
//! coupling, a diurnally modulated source tied to the orography, and
//! spatially correlated Gaussian forcing. All integration runs in f64;
//! stored states are f32.

use crate::domain::{DomainSpec, NormStats, Trajectory};
use crate::error::{Error, Result};
use crate::tensor::rng::purpose;
use crate::tensor::{FieldTensor, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDynamicsConfig {
    /// Periodic parent grid edge length (>= 2x the LAM frame).
    pub parent_size: usize,
    /// Peak advection speed (cells per time unit).
    pub velocity_amplitude: f64,
    /// Diffusion coefficient.
    pub diffusion: f64,
    /// Linear relaxation rate toward zero; keeps long-run variance bounded.
    pub damping: f64,
    /// Std of the large-scale stochastic forcing per unit time.
    pub forcing_amplitude: f64,
    /// Gaussian correlation length of the large-scale forcing, in cells.
    pub forcing_correlation: f64,
    /// Std of the fine-scale forcing component. Keeps high wavenumbers
    /// populated against diffusion.
    pub forcing_fine_amplitude: f64,
    /// Correlation length of the fine-scale component, in cells.
    pub forcing_fine_correlation: f64,
    /// Weak relaxation between consecutive variables.
    pub coupling: f64,
    /// Amplitude of the diurnal source term (modulated by orography).
    pub diurnal_amplitude: f64,
    /// Output steps per diurnal cycle.
    pub diurnal_period_steps: usize,
    /// Correlation length of the initial condition, in cells.
    pub ic_correlation: f64,
    /// Output steps per trajectory (states run X^0..X^T).
    pub num_steps: usize,
    /// Integration substeps per output step.
    pub substeps: usize,
    /// Substep length in time units.
    pub dt_substep: f64,
}

impl Default for ToyDynamicsConfig {
    fn default() -> Self {
        ToyDynamicsConfig {
            parent_size: 48,
            velocity_amplitude: 0.8,
            diffusion: 0.06,
            damping: 0.02,
            forcing_amplitude: 0.25,
            forcing_correlation: 2.0,
            forcing_fine_amplitude: 0.1,
            forcing_fine_correlation: 0.6,
            coupling: 0.03,
            diurnal_amplitude: 0.3,
            diurnal_period_steps: 8,
            ic_correlation: 2.5,
            num_steps: 24,
            substeps: 2,
            dt_substep: 0.5,
        }
    }
}

impl ToyDynamicsConfig {
    /// CFL stability checks, evaluated before any integration.
    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        if self.parent_size < 2 * domain.height.max(domain.width) {
            return Err(Error::Config(format!(
                "parent grid {} must be >= 2x the LAM frame {}",
                self.parent_size,
                domain.height.max(domain.width)
            )));
        }
        let advective_cfl = self.velocity_amplitude * self.dt_substep;
        if advective_cfl > 0.5 {
            return Err(Error::Config(format!(
                "advective CFL {advective_cfl:.3} exceeds 0.5"
            )));
        }
        let diffusive_cfl = self.diffusion * self.dt_substep;
        if diffusive_cfl > 0.25 {
            return Err(Error::Config(format!(
                "diffusive CFL {diffusive_cfl:.3} exceeds 0.25"
            )));
        }
        if self.num_steps < 2 || self.substeps == 0 || self.dt_substep <= 0.0 {
            return Err(Error::Config("degenerate integration settings".into()));
        }
        if self.diurnal_period_steps == 0 {
            return Err(Error::Config("diurnal period must be positive".into()));
        }
        Ok(())
    }
}

/// Periodic separable Gaussian smoothing; `sigma` in cells. Output is
/// rescaled so white-noise input keeps unit variance.
fn smooth_periodic(field: &mut [f64], p: usize, sigma: f64) {
    if sigma <= 0.0 {
        return;
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let wsum: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / wsum).collect();
    let wsq: f64 = weights.iter().map(|w| w * w).sum();
    let mut tmp = vec![0.0; p * p];
    // rows
    for y in 0..p {
        for x in 0..p {
            let mut acc = 0.0;
            for (k, w) in weights.iter().enumerate() {
                let dx = k as isize - radius;
                let xx = (x as isize + dx).rem_euclid(p as isize) as usize;
                acc += w * field[y * p + xx];
            }
            tmp[y * p + x] = acc;
        }
    }
    // columns, with variance restored
    let norm = 1.0 / wsq;
    for y in 0..p {
        for x in 0..p {
            let mut acc = 0.0;
            for (k, w) in weights.iter().enumerate() {
                let dy = k as isize - radius;
                let yy = (y as isize + dy).rem_euclid(p as isize) as usize;
                acc += w * tmp[yy * p + x];
            }
            field[y * p + x] = acc * norm;
        }
    }
}

fn correlated_noise(p: usize, sigma: f64, rng: &mut Rng) -> Vec<f64> {
    let mut field: Vec<f64> = (0..p * p).map(|_| rng.next_gaussian()).collect();
    smooth_periodic(&mut field, p, sigma);
    field
}

/// Dataset-level fields shared by every trajectory: the steady solenoidal
/// velocity field and the orography.
#[derive(Debug, Clone)]
pub struct ToyWorld {
    pub config: ToyDynamicsConfig,
    pub velocity_u: Vec<f64>,
    pub velocity_v: Vec<f64>,
    /// Standardized orography on the parent grid.
    pub orography: Vec<f64>,
}

impl ToyWorld {
    /// Build the shared fields from the dataset seed. The velocity comes
    /// from a low-wavenumber random streamfunction, so it is divergence
    /// free by construction and periodic.
    pub fn generate(config: ToyDynamicsConfig, domain: &DomainSpec, seed: u64) -> Result<ToyWorld> {
        config.validate(domain)?;
        let p = config.parent_size;
        let mut rng = Rng::stream(seed, purpose::DOMAIN_FIELDS, 0);
        let tau = 2.0 * std::f64::consts::PI;
        // streamfunction: a handful of random low-k modes
        let modes: Vec<(f64, f64, f64, f64)> = (0..6)
            .map(|_| {
                let kx = (rng.next_below(3) as f64) + 1.0;
                let ky = (rng.next_below(3) as f64) + 1.0;
                let amp = 0.5 + rng.next_f64();
                let phase = tau * rng.next_f64();
                (kx, ky, amp, phase)
            })
            .collect();
        let mut u = vec![0.0; p * p];
        let mut v = vec![0.0; p * p];
        for y in 0..p {
            for x in 0..p {
                let (mut uy, mut vx) = (0.0, 0.0);
                for &(kx, ky, amp, phase) in &modes {
                    let arg = tau * (kx * x as f64 + ky * y as f64) / p as f64 + phase;
                    // u = d(psi)/dy, v = -d(psi)/dx for psi = amp sin(arg)
                    uy += amp * (tau * ky / p as f64) * arg.cos();
                    vx -= amp * (tau * kx / p as f64) * arg.cos();
                }
                u[y * p + x] = uy;
                v[y * p + x] = vx;
            }
        }
        let peak = u
            .iter()
            .chain(v.iter())
            .fold(0.0f64, |m, &s| m.max(s.abs()))
            .max(1e-12);
        let scale = config.velocity_amplitude / peak;
        for s in u.iter_mut().chain(v.iter_mut()) {
            *s *= scale;
        }
        let mut orography = correlated_noise(p, 3.0, &mut rng);
        let mean = orography.iter().sum::<f64>() / (p * p) as f64;
        let var =
            orography.iter().map(|o| (o - mean) * (o - mean)).sum::<f64>() / (p * p) as f64;
        let istd = 1.0 / var.sqrt().max(1e-12);
        for o in &mut orography {
            *o = (*o - mean) * istd;
        }
        Ok(ToyWorld { config, velocity_u: u, velocity_v: v, orography })
    }

    /// LAM-frame crop offset inside the parent grid (centered).
    fn crop_offset(&self, domain: &DomainSpec) -> (usize, usize) {
        (
            (self.config.parent_size - domain.height) / 2,
            (self.config.parent_size - domain.width) / 2,
        )
    }

    fn crop_to_frame(&self, field: &[f64], domain: &DomainSpec) -> Vec<f32> {
        let p = self.config.parent_size;
        let (oy, ox) = self.crop_offset(domain);
        let mut out = Vec::with_capacity(domain.height * domain.width);
        for y in 0..domain.height {
            for x in 0..domain.width {
                out.push(field[(oy + y) * p + (ox + x)] as f32);
            }
        }
        out
    }

    /// Static fields for the LAM frame (the orography channel).
    pub fn statics(&self, domain: &DomainSpec) -> FieldTensor {
        FieldTensor::new(
            vec![1, domain.height, domain.width],
            self.crop_to_frame(&self.orography, domain),
        )
        .expect("statics shape")
    }

    /// Diurnal forcing channels (sin, cos of phase) at output step t,
    /// constant over the frame.
    pub fn forcing_at(&self, domain: &DomainSpec, t: usize) -> FieldTensor {
        let phase = self.phase_at(t as f64);
        let mut data = vec![0.0f32; 2 * domain.height * domain.width];
        let cells = domain.height * domain.width;
        data[..cells].fill(phase.sin() as f32);
        data[cells..].fill(phase.cos() as f32);
        FieldTensor::new(vec![2, domain.height, domain.width], data).expect("forcing shape")
    }

    fn phase_at(&self, step: f64) -> f64 {
        2.0 * std::f64::consts::PI * step / self.config.diurnal_period_steps as f64
    }

    /// Integrate one trajectory. Separate seeds for the initial condition
    /// and the stochastic forcing keep the two sources independently
    /// reproducible.
    pub fn simulate_trajectory(
        &self,
        domain: &DomainSpec,
        ic_seed: u64,
        forcing_seed: u64,
    ) -> Result<Trajectory> {
        let cfg = &self.config;
        let p = cfg.parent_size;
        let cells = p * p;
        let mut ic_rng = Rng::seeded(ic_seed);
        let mut forcing_rng = Rng::seeded(forcing_seed);
        let nv = domain.num_vars;
        let mut fields: Vec<Vec<f64>> = (0..nv)
            .map(|_| correlated_noise(p, cfg.ic_correlation, &mut ic_rng))
            .collect();
        let dt = cfg.dt_substep;
        let sqrt_dt = dt.sqrt();
        let mut states = Vec::with_capacity(cfg.num_steps + 1);
        let mut forcings = Vec::with_capacity(cfg.num_steps + 1);
        let mut scratch = vec![0.0f64; cells];
        states.push(self.snapshot(domain, &fields)?);
        forcings.push(self.forcing_at(domain, 0));
        for step in 0..cfg.num_steps {
            for sub in 0..cfg.substeps {
                let t_cont = step as f64 + sub as f64 / cfg.substeps as f64;
                let diurnal = cfg.diurnal_amplitude * self.phase_at(t_cont).sin();
                let coupled: Vec<Vec<f64>> = if cfg.coupling != 0.0 && nv > 1 {
                    fields.clone()
                } else {
                    Vec::new()
                };
                for v in 0..nv {
                    {
                        let field = &fields[v];
                        for y in 0..p {
                            let yn = (y + p - 1) % p;
                            let ys = (y + 1) % p;
                            for x in 0..p {
                                let xw = (x + p - 1) % p;
                                let xe = (x + 1) % p;
                                let idx = y * p + x;
                                let c = field[idx];
                                let (uu, vv) = (self.velocity_u[idx], self.velocity_v[idx]);
                                // first-order upwind advection
                                let ddx = if uu >= 0.0 {
                                    c - field[y * p + xw]
                                } else {
                                    field[y * p + xe] - c
                                };
                                let ddy = if vv >= 0.0 {
                                    c - field[yn * p + x]
                                } else {
                                    field[ys * p + x] - c
                                };
                                let lap = field[y * p + xw]
                                    + field[y * p + xe]
                                    + field[yn * p + x]
                                    + field[ys * p + x]
                                    - 4.0 * c;
                                let mut tend = -(uu * ddx + vv * ddy)
                                    + cfg.diffusion * lap
                                    - cfg.damping * c
                                    + diurnal * self.orography[idx];
                                if !coupled.is_empty() {
                                    let other = &coupled[(v + 1) % nv];
                                    tend += cfg.coupling * (other[idx] - c);
                                }
                                scratch[idx] = c + dt * tend;
                            }
                        }
                    }
                    fields[v].copy_from_slice(&scratch);
                    if cfg.forcing_amplitude > 0.0 {
                        let noise = correlated_noise(p, cfg.forcing_correlation, &mut forcing_rng);
                        let amp = cfg.forcing_amplitude * sqrt_dt;
                        for (f, n) in fields[v].iter_mut().zip(&noise) {
                            *f += amp * n;
                        }
                    }
                    if cfg.forcing_fine_amplitude > 0.0 {
                        let noise =
                            correlated_noise(p, cfg.forcing_fine_correlation, &mut forcing_rng);
                        let amp = cfg.forcing_fine_amplitude * sqrt_dt;
                        for (f, n) in fields[v].iter_mut().zip(&noise) {
                            *f += amp * n;
                        }
                    }
                }
            }
            states.push(self.snapshot(domain, &fields)?);
            forcings.push(self.forcing_at(domain, step + 1));
        }
        let traj = Trajectory { states, forcings, statics: self.statics(domain) };
        traj.validate(domain)?;
        Ok(traj)
    }

    fn snapshot(&self, domain: &DomainSpec, fields: &[Vec<f64>]) -> Result<FieldTensor> {
        let mut data = Vec::with_capacity(fields.len() * domain.height * domain.width);
        for f in fields {
            data.extend_from_slice(&self.crop_to_frame(f, domain));
        }
        FieldTensor::new(vec![fields.len(), domain.height, domain.width], data)
    }

    /// Full-parent sum of a variable; used by the conservation check.
    pub fn parent_field_sum(&self, domain: &DomainSpec, ic_seed: u64, steps: usize) -> Result<Vec<f64>> {
        // integrates like simulate_trajectory but reports parent-grid sums
        let cfg = &self.config;
        let p = cfg.parent_size;
        let mut ic_rng = Rng::seeded(ic_seed);
        let _ = &mut ic_rng;
        let mut field = vec![0.0f64; p * p];
        field[(p / 2) * p + p / 2] = 100.0; // single hot spot
        let mut sums = vec![field.iter().sum::<f64>()];
        let mut scratch = vec![0.0f64; p * p];
        let dt = cfg.dt_substep;
        for _ in 0..steps * cfg.substeps {
            for y in 0..p {
                let yn = (y + p - 1) % p;
                let ys = (y + 1) % p;
                for x in 0..p {
                    let xw = (x + p - 1) % p;
                    let xe = (x + 1) % p;
                    let idx = y * p + x;
                    let lap = field[y * p + xw] + field[y * p + xe] + field[yn * p + x]
                        + field[ys * p + x]
                        - 4.0 * field[idx];
                    scratch[idx] = field[idx] + dt * cfg.diffusion * lap;
                }
            }
            field.copy_from_slice(&scratch);
            sums.push(field.iter().sum::<f64>());
        }
        let _ = domain;
        Ok(sums)
    }
}

/// Ground-truth trajectories with normalization stats from the train split.
#[derive(Debug, Clone)]
pub struct EpisodeDataset {
    pub domain: DomainSpec,
    pub config: ToyDynamicsConfig,
    pub train: Vec<Trajectory>,
    pub val: Vec<Trajectory>,
    pub test: Vec<Trajectory>,
    pub stats: NormStats,
    pub seed: u64,
}

impl EpisodeDataset {
    pub fn split(&self, name: &str) -> Result<&[Trajectory]> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => Err(Error::Data(format!("unknown split '{other}'"))),
        }
    }
}

/// Generate the full dataset: disjoint seed streams per split, stats from
/// the train split only.
pub fn make_dataset(
    config: ToyDynamicsConfig,
    domain: DomainSpec,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    seed: u64,
) -> Result<EpisodeDataset> {
    domain.validate()?;
    if n_train == 0 {
        return Err(Error::Config("need at least one training trajectory".into()));
    }
    let world = ToyWorld::generate(config.clone(), &domain, seed)?;
    let gen_split = |tag: u64, count: usize| -> Result<Vec<Trajectory>> {
        (0..count)
            .map(|i| {
                let mut key = Rng::stream(seed, tag, i as u64);
                let ic_seed = key.next_u64();
                let forcing_seed = key.next_u64();
                world.simulate_trajectory(&domain, ic_seed, forcing_seed)
            })
            .collect()
    };
    let train = gen_split(purpose::DATA_TRAIN, n_train)?;
    let val = gen_split(purpose::DATA_VAL, n_val)?;
    let test = gen_split(purpose::DATA_TEST, n_test)?;
    let stats = NormStats::compute(&train, domain.num_vars)?;
    Ok(EpisodeDataset { domain, config, train, val, test, stats, seed })
}

/// Climatology baseline: N interior states drawn from the train split at
/// matching diurnal phase. Raw (unnormalized) space.
pub fn climatology_members(
    train: &[Trajectory],
    domain: &DomainSpec,
    diurnal_period: usize,
    valid_step: usize,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<FieldTensor>> {
    if train.is_empty() {
        return Err(Error::Data("climatology needs a nonempty train split".into()));
    }
    // candidate (trajectory, step) pairs at the same phase
    let mut candidates = Vec::new();
    for (ti, traj) in train.iter().enumerate() {
        for t in 0..=traj.num_steps() {
            if t % diurnal_period == valid_step % diurnal_period {
                candidates.push((ti, t));
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::Data("no climatology candidates at this phase".into()));
    }
    (0..n)
        .map(|_| {
            let (ti, t) = candidates[rng.next_below(candidates.len() as u64) as usize];
            domain.crop_interior(&train[ti].states[t])
        })
        .collect()
}
