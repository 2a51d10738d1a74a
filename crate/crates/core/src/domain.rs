//! Grid geometry, interior/boundary partition, and assembly of model input
//! windows from stored trajectories. The interior is the full grid minus a
//! uniform boundary frame; the model predicts the interior while the
//! boundary is prescribed, including one step ahead.

use crate::error::{Error, Result};
use crate::tensor::{FieldTensor, Scalar};

/// Grid geometry and channel counts of the limited-area domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub height: usize,
    pub width: usize,
    /// Uniform boundary frame width in cells.
    pub boundary_width: usize,
    /// Number of prognostic variables d_x.
    pub num_vars: usize,
    /// Number of forcing variables d_f.
    pub num_forcings: usize,
    /// Number of static fields d_s (the interior mask channel is appended
    /// on top of these when stacking model inputs).
    pub num_statics: usize,
    /// Abstract step length in hours.
    pub step_hours: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            height: 24,
            width: 24,
            boundary_width: 4,
            num_vars: 2,
            num_forcings: 2,
            num_statics: 1,
            step_hours: 3.0,
        }
    }
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.boundary_width < 1 {
            return Err(Error::Config("boundary width must be >= 1".into()));
        }
        if self.height <= 2 * self.boundary_width || self.width <= 2 * self.boundary_width {
            return Err(Error::Config(format!(
                "grid {}x{} too small for boundary width {}",
                self.height, self.width, self.boundary_width
            )));
        }
        if self.interior_height() < 8 || self.interior_width() < 8 {
            return Err(Error::Config(format!(
                "interior {}x{} must be at least 8x8",
                self.interior_height(),
                self.interior_width()
            )));
        }
        if self.num_vars == 0 {
            return Err(Error::Config("need at least one prognostic variable".into()));
        }
        Ok(())
    }

    pub fn interior_height(&self) -> usize {
        self.height - 2 * self.boundary_width
    }

    pub fn interior_width(&self) -> usize {
        self.width - 2 * self.boundary_width
    }

    pub fn interior_cells(&self) -> usize {
        self.interior_height() * self.interior_width()
    }

    fn is_interior(&self, y: usize, x: usize) -> bool {
        let b = self.boundary_width;
        y >= b && y < self.height - b && x >= b && x < self.width - b
    }

    /// One-channel indicator of the interior region.
    pub fn interior_mask<F: Scalar>(&self) -> FieldTensor<F> {
        let mut m = FieldTensor::zeros(vec![1, self.height, self.width]);
        let w = self.width;
        for y in 0..self.height {
            for x in 0..w {
                if self.is_interior(y, x) {
                    m.data_mut()[y * w + x] = F::one();
                }
            }
        }
        m
    }

    /// One-channel indicator of the boundary frame (complement of interior).
    pub fn boundary_mask<F: Scalar>(&self) -> FieldTensor<F> {
        let mut m = self.interior_mask::<F>();
        for v in m.data_mut() {
            *v = F::one() - *v;
        }
        m
    }

    /// Zero out boundary cells of every channel.
    pub fn mask_to_interior<F: Scalar>(&self, t: &FieldTensor<F>) -> Result<FieldTensor<F>> {
        self.apply_mask(t, true)
    }

    /// Zero out interior cells of every channel.
    pub fn mask_to_boundary<F: Scalar>(&self, t: &FieldTensor<F>) -> Result<FieldTensor<F>> {
        self.apply_mask(t, false)
    }

    fn apply_mask<F: Scalar>(&self, t: &FieldTensor<F>, keep_interior: bool) -> Result<FieldTensor<F>> {
        let (c, h, w) = t.dims3()?;
        if h != self.height || w != self.width {
            return Err(Error::Dim(format!(
                "mask: field {h}x{w} vs domain {}x{}",
                self.height, self.width
            )));
        }
        let mut out = t.clone();
        let d = out.data_mut();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    if self.is_interior(y, x) != keep_interior {
                        d[(ch * h + y) * w + x] = F::zero();
                    }
                }
            }
        }
        Ok(out)
    }

    /// Crop the interior region of a full-frame [C, H, W] tensor.
    pub fn crop_interior<F: Scalar>(&self, t: &FieldTensor<F>) -> Result<FieldTensor<F>> {
        crate::tensor::ops::crop_hw(
            t,
            self.boundary_width,
            self.boundary_width,
            self.interior_height(),
            self.interior_width(),
        )
    }

    /// Embed an interior [C, hI, wI] tensor into a zero full frame.
    pub fn embed_interior<F: Scalar>(&self, t: &FieldTensor<F>) -> Result<FieldTensor<F>> {
        crate::tensor::ops::pad_hw(
            t,
            self.boundary_width,
            self.boundary_width,
            self.height,
            self.width,
        )
    }
}

/// One stored episode: states X^0..X^T, forcings F^0..F^T, and the static
/// fields shared by every step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<FieldTensor>,
    pub forcings: Vec<FieldTensor>,
    pub statics: FieldTensor,
}

impl Trajectory {
    /// Number of steps T (states run X^0..X^T).
    pub fn num_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn validate(&self, spec: &DomainSpec) -> Result<()> {
        if self.states.len() < 3 {
            return Err(Error::Data("trajectory needs at least 3 states".into()));
        }
        if self.forcings.len() != self.states.len() {
            return Err(Error::Data("forcing/state length mismatch".into()));
        }
        for s in &self.states {
            let (c, h, w) = s.dims3()?;
            if c != spec.num_vars || h != spec.height || w != spec.width {
                return Err(Error::Dim(format!(
                    "state shape {:?} vs domain ({}, {}, {})",
                    s.shape(),
                    spec.num_vars,
                    spec.height,
                    spec.width
                )));
            }
            s.check_finite("trajectory state")?;
        }
        for f in &self.forcings {
            let (c, _, _) = f.dims3()?;
            if c != spec.num_forcings {
                return Err(Error::Dim("forcing channel mismatch".into()));
            }
        }
        let (c, _, _) = self.statics.dims3()?;
        if c != spec.num_statics {
            return Err(Error::Dim("statics channel mismatch".into()));
        }
        Ok(())
    }

    pub fn normalize(&self, stats: &NormStats) -> Result<Trajectory> {
        Ok(Trajectory {
            states: self
                .states
                .iter()
                .map(|s| stats.normalize_state(s))
                .collect::<Result<Vec<_>>>()?,
            forcings: self.forcings.clone(),
            statics: self.statics.clone(),
        })
    }
}

/// Per-variable normalization statistics, computed from the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population mean/std per variable over all states, cells, and
    /// trajectories. Errors on a constant (zero-variance) variable.
    pub fn compute(trajectories: &[Trajectory], num_vars: usize) -> Result<NormStats> {
        if trajectories.is_empty() {
            return Err(Error::Data("cannot compute stats from an empty split".into()));
        }
        let mut sum = vec![0.0f64; num_vars];
        let mut sumsq = vec![0.0f64; num_vars];
        let mut count = vec![0.0f64; num_vars];
        for traj in trajectories {
            for state in &traj.states {
                let (c, h, w) = state.dims3()?;
                if c != num_vars {
                    return Err(Error::Dim("stats: variable count mismatch".into()));
                }
                for v in 0..c {
                    let plane = &state.data()[v * h * w..(v + 1) * h * w];
                    for &x in plane {
                        sum[v] += x as f64;
                        sumsq[v] += (x as f64) * (x as f64);
                    }
                    count[v] += (h * w) as f64;
                }
            }
        }
        let mut mean = vec![0.0; num_vars];
        let mut std = vec![0.0; num_vars];
        for v in 0..num_vars {
            mean[v] = sum[v] / count[v];
            let var = sumsq[v] / count[v] - mean[v] * mean[v];
            if var <= 0.0 {
                return Err(Error::Data(format!(
                    "variable {v} is constant; cannot normalize"
                )));
            }
            std[v] = var.sqrt();
        }
        Ok(NormStats { mean, std })
    }

    pub fn normalize_state(&self, state: &FieldTensor) -> Result<FieldTensor> {
        self.apply(state, false)
    }

    pub fn denormalize_state(&self, state: &FieldTensor) -> Result<FieldTensor> {
        self.apply(state, true)
    }

    fn apply(&self, state: &FieldTensor, invert: bool) -> Result<FieldTensor> {
        let (c, h, w) = state.dims3()?;
        if c != self.mean.len() {
            return Err(Error::Dim(format!(
                "stats cover {} variables, state has {c}",
                self.mean.len()
            )));
        }
        let mut out = state.clone();
        for v in 0..c {
            let (mu, sd) = (self.mean[v] as f32, self.std[v] as f32);
            for x in &mut out.data_mut()[v * h * w..(v + 1) * h * w] {
                *x = if invert { *x * sd + mu } else { (*x - mu) / sd };
            }
        }
        Ok(out)
    }
}

/// Inputs and target for one training step: the interior part carries two
/// past/current states, the boundary part three states including the future
/// one, both as masked full-frame tensors.
#[derive(Debug, Clone)]
pub struct ModelInputWindow {
    /// X_I^{t-1}, X_I^t with boundary cells zeroed.
    pub interior_states: [FieldTensor; 2],
    /// X_B^{t-1}, X_B^t, X_B^{t+1} with interior cells zeroed.
    pub boundary_states: [FieldTensor; 3],
    /// F^{t-1}, F^t, F^{t+1}, full frame.
    pub forcings: [FieldTensor; 3],
    /// Static fields, full frame.
    pub statics: FieldTensor,
    /// One-channel interior indicator.
    pub interior_mask: FieldTensor,
    /// X_I^{t+1} cropped to the interior region; boundary cells of the
    /// target never enter any loss.
    pub target_interior: FieldTensor,
}

/// Build the partitioned window at step t. Requires 1 <= t <= T-1.
pub fn build_window(spec: &DomainSpec, traj: &Trajectory, t: usize) -> Result<ModelInputWindow> {
    let steps = traj.num_steps();
    if t < 1 || t + 1 > steps {
        return Err(Error::Contract(format!(
            "window step {t} out of range 1..={}",
            steps.saturating_sub(1).max(1)
        )));
    }
    let interior_states = [
        spec.mask_to_interior(&traj.states[t - 1])?,
        spec.mask_to_interior(&traj.states[t])?,
    ];
    let boundary_states = [
        spec.mask_to_boundary(&traj.states[t - 1])?,
        spec.mask_to_boundary(&traj.states[t])?,
        spec.mask_to_boundary(&traj.states[t + 1])?,
    ];
    let forcings = [
        traj.forcings[t - 1].clone(),
        traj.forcings[t].clone(),
        traj.forcings[t + 1].clone(),
    ];
    Ok(ModelInputWindow {
        interior_states,
        boundary_states,
        forcings,
        statics: traj.statics.clone(),
        interior_mask: spec.interior_mask(),
        target_interior: spec.crop_interior(&traj.states[t + 1])?,
    })
}

/// Full next state: interior cells from the prediction, boundary frame from
/// the true state.
pub fn reassemble_full_state(
    spec: &DomainSpec,
    predicted_interior: &FieldTensor,
    true_full: &FieldTensor,
) -> Result<FieldTensor> {
    let (c, h, w) = predicted_interior.dims3()?;
    if c != spec.num_vars || h != spec.interior_height() || w != spec.interior_width() {
        return Err(Error::Dim(format!(
            "predicted interior shape {:?} vs ({}, {}, {})",
            predicted_interior.shape(),
            spec.num_vars,
            spec.interior_height(),
            spec.interior_width()
        )));
    }
    let embedded = spec.embed_interior(predicted_interior)?;
    let boundary = spec.mask_to_boundary(true_full)?;
    crate::tensor::ops::add(&embedded, &boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    fn toy_spec() -> DomainSpec {
        DomainSpec { height: 16, width: 16, boundary_width: 2, ..DomainSpec::default() }
    }

    fn toy_trajectory(spec: &DomainSpec, steps: usize, seed: u64) -> Trajectory {
        let mut rng = Rng::seeded(seed);
        Trajectory {
            states: (0..=steps)
                .map(|_| FieldTensor::gaussian(vec![spec.num_vars, spec.height, spec.width], &mut rng))
                .collect(),
            forcings: (0..=steps)
                .map(|_| {
                    FieldTensor::gaussian(vec![spec.num_forcings, spec.height, spec.width], &mut rng)
                })
                .collect(),
            statics: FieldTensor::gaussian(vec![spec.num_statics, spec.height, spec.width], &mut rng),
        }
    }

    #[test]
    fn interior_dimensions_and_mask_count() {
        let spec = toy_spec();
        assert_eq!(spec.interior_height(), 12);
        assert_eq!(spec.interior_width(), 12);
        let mask = spec.interior_mask::<f32>();
        let ones = mask.data().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(ones, 144);
    }

    #[test]
    fn masks_partition_the_grid() {
        let spec = DomainSpec::default();
        let im = spec.interior_mask::<f32>();
        let bm = spec.boundary_mask::<f32>();
        for (a, b) in im.data().iter().zip(bm.data()) {
            assert_eq!(a + b, 1.0);
            assert_eq!(a * b, 0.0);
        }
    }

    #[test]
    fn window_index_arithmetic() {
        let spec = toy_spec();
        let traj = toy_trajectory(&spec, 2, 7);
        let w = build_window(&spec, &traj, 1).unwrap();
        // interior states are t-1, t
        assert_eq!(
            w.interior_states[1].data(),
            spec.mask_to_interior(&traj.states[1]).unwrap().data()
        );
        // boundary includes the future state
        assert_eq!(
            w.boundary_states[2].data(),
            spec.mask_to_boundary(&traj.states[2]).unwrap().data()
        );
        // target is the interior crop of X^{t+1}
        assert_eq!(
            w.target_interior.data(),
            spec.crop_interior(&traj.states[2]).unwrap().data()
        );
        assert!(build_window(&spec, &traj, 0).is_err());
        assert!(build_window(&spec, &traj, 2).is_err());
    }

    #[test]
    fn masked_tensors_zero_in_complement() {
        let spec = toy_spec();
        let traj = toy_trajectory(&spec, 2, 8);
        let w = build_window(&spec, &traj, 1).unwrap();
        let b = spec.boundary_width;
        for st in &w.interior_states {
            for y in 0..spec.height {
                for x in 0..spec.width {
                    let boundary =
                        y < b || y >= spec.height - b || x < b || x >= spec.width - b;
                    if boundary {
                        for c in 0..spec.num_vars {
                            assert_eq!(st.at3(c, y, x), 0.0);
                        }
                    }
                }
            }
        }
        for st in &w.boundary_states {
            assert_eq!(st.at3(0, spec.height / 2, spec.width / 2), 0.0);
        }
    }

    #[test]
    fn window_is_deterministic() {
        let spec = toy_spec();
        let traj = toy_trajectory(&spec, 4, 9);
        let a = build_window(&spec, &traj, 2).unwrap();
        let b = build_window(&spec, &traj, 2).unwrap();
        assert_eq!(a.interior_states[0].data(), b.interior_states[0].data());
        assert_eq!(a.target_interior.data(), b.target_interior.data());
    }

    #[test]
    fn stats_hand_computation_and_roundtrip() {
        let spec = DomainSpec {
            height: 16,
            width: 16,
            boundary_width: 2,
            num_vars: 1,
            ..DomainSpec::default()
        };
        // one state, variable takes values 1 and 3 on half the grid each:
        // mean 2, population std 1
        let mut data = vec![1.0f32; 256];
        data[128..].fill(3.0);
        let traj = Trajectory {
            states: vec![FieldTensor::new(vec![1, 16, 16], data).unwrap()],
            forcings: vec![FieldTensor::zeros(vec![2, 16, 16])],
            statics: FieldTensor::zeros(vec![1, 16, 16]),
        };
        let stats = NormStats::compute(&[traj.clone()], 1).unwrap();
        assert!((stats.mean[0] - 2.0).abs() < 1e-12);
        assert!((stats.std[0] - 1.0).abs() < 1e-12);

        let normalized = stats.normalize_state(&traj.states[0]).unwrap();
        let back = stats.denormalize_state(&normalized).unwrap();
        for (a, b) in back.data().iter().zip(traj.states[0].data()) {
            assert!((a - b).abs() < 1e-5);
        }
        let _ = spec;
    }

    #[test]
    fn constant_variable_detected() {
        let traj = Trajectory {
            states: vec![FieldTensor::full(vec![1, 16, 16], 5.0f32)],
            forcings: vec![FieldTensor::zeros(vec![2, 16, 16])],
            statics: FieldTensor::zeros(vec![1, 16, 16]),
        };
        assert!(NormStats::compute(&[traj], 1).is_err());
    }

    #[test]
    fn reassembly_examples() {
        let spec = toy_spec();
        let mut rng = Rng::seeded(10);
        let truth = FieldTensor::gaussian(vec![spec.num_vars, 16, 16], &mut rng);
        // zero prediction -> boundary-only field
        let zero = FieldTensor::zeros(vec![spec.num_vars, 12, 12]);
        let out = reassemble_full_state(&spec, &zero, &truth).unwrap();
        assert_eq!(out.data(), spec.mask_to_boundary(&truth).unwrap().data());
        // prediction == truth interior -> truth
        let pred = spec.crop_interior(&truth).unwrap();
        let out = reassemble_full_state(&spec, &pred, &truth).unwrap();
        for (a, b) in out.data().iter().zip(truth.data()) {
            assert_eq!(a, b);
        }
        // checksum: interior sum + boundary sum
        let ones_interior = FieldTensor::full(vec![spec.num_vars, 12, 12], 1.0f32);
        let out = reassemble_full_state(&spec, &ones_interior, &truth).unwrap();
        let total: f32 = out.data().iter().sum();
        let boundary_sum: f32 = spec.mask_to_boundary(&truth).unwrap().data().iter().sum();
        assert!((total - (boundary_sum + (12 * 12 * spec.num_vars) as f32)).abs() < 1e-3);
    }

    #[test]
    fn spec_validation() {
        assert!(DomainSpec::default().validate().is_ok());
        assert!(DomainSpec { boundary_width: 0, ..DomainSpec::default() }.validate().is_err());
        assert!(DomainSpec { height: 10, width: 10, boundary_width: 4, ..DomainSpec::default() }
            .validate()
            .is_err());
        // interior below 8x8
        assert!(DomainSpec { height: 14, width: 14, boundary_width: 4, ..DomainSpec::default() }
            .validate()
            .is_err());
    }
}
