//! Radially averaged energy spectra of 2-D fields. Fields are mean-removed,
//! transformed with a plain DFT (radix-2 FFT when the dimensions are powers
//! of two), and binned by integer-rounded wavenumber radius.

use crate::error::{Error, Result};
use crate::tensor::FieldTensor;

/// Radially averaged spectrum. `energy[i]` is the mean spectral energy of
/// bin `wavenumbers[i]`; `counts[i]` is how many Fourier coefficients the
/// bin absorbed, so `sum(count * energy)` recovers the field variance.
#[derive(Debug, Clone)]
pub struct EnergySpectrum {
    pub wavenumbers: Vec<f64>,
    pub energy: Vec<f64>,
    pub counts: Vec<usize>,
}

impl EnergySpectrum {
    /// Total energy across bins, i.e. the variance the spectrum accounts for.
    pub fn total_energy(&self) -> f64 {
        self.energy
            .iter()
            .zip(&self.counts)
            .map(|(e, &c)| e * c as f64)
            .sum()
    }

    /// Summed energy over bins with wavenumber > kmax/2 (the fine scales).
    pub fn upper_half_energy(&self) -> f64 {
        let kmax = self.wavenumbers.last().copied().unwrap_or(0.0);
        self.energy
            .iter()
            .zip(&self.counts)
            .zip(&self.wavenumbers)
            .filter(|((_, _), &k)| k > kmax / 2.0)
            .map(|((e, &c), _)| e * c as f64)
            .sum()
    }
}

fn is_pow2(n: usize) -> bool {
    n.is_power_of_two()
}

/// In-place radix-2 Cooley-Tukey FFT. `sign` is -1 for the forward
/// transform.
fn fft_pow2(re: &mut [f64], im: &mut [f64], sign: f64) {
    let n = re.len();
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let (mut cr, mut ci) = (1.0, 0.0);
            for k in 0..len / 2 {
                let (ur, ui) = (re[i + k], im[i + k]);
                let (vr, vi) = (
                    re[i + k + len / 2] * cr - im[i + k + len / 2] * ci,
                    re[i + k + len / 2] * ci + im[i + k + len / 2] * cr,
                );
                re[i + k] = ur + vr;
                im[i + k] = ui + vi;
                re[i + k + len / 2] = ur - vr;
                im[i + k + len / 2] = ui - vi;
                let ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
            i += len;
        }
        len <<= 1;
    }
}

/// O(n^2) DFT for non-power-of-two lengths.
fn dft_direct(re: &[f64], im: &[f64], sign: f64) -> (Vec<f64>, Vec<f64>) {
    let n = re.len();
    let mut or_ = vec![0.0; n];
    let mut oi = vec![0.0; n];
    for k in 0..n {
        let mut ar = 0.0;
        let mut ai = 0.0;
        for (x, (&xr, &xi)) in re.iter().zip(im).enumerate() {
            let ang = sign * 2.0 * std::f64::consts::PI * (k * x) as f64 / n as f64;
            let (c, s) = (ang.cos(), ang.sin());
            ar += xr * c - xi * s;
            ai += xr * s + xi * c;
        }
        or_[k] = ar;
        oi[k] = ai;
    }
    (or_, oi)
}

fn dft_1d(re: &mut Vec<f64>, im: &mut Vec<f64>, sign: f64) {
    if is_pow2(re.len()) {
        fft_pow2(re, im, sign);
    } else {
        let (r, i) = dft_direct(re, im, sign);
        *re = r;
        *im = i;
    }
}

/// Forward 2-D DFT of a real field, returned as (re, im) in row-major [H, W].
fn dft_2d(field: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut re = field.to_vec();
    let mut im = vec![0.0; h * w];
    // rows
    for y in 0..h {
        let mut row_r = re[y * w..(y + 1) * w].to_vec();
        let mut row_i = im[y * w..(y + 1) * w].to_vec();
        dft_1d(&mut row_r, &mut row_i, -1.0);
        re[y * w..(y + 1) * w].copy_from_slice(&row_r);
        im[y * w..(y + 1) * w].copy_from_slice(&row_i);
    }
    // columns
    for x in 0..w {
        let mut col_r: Vec<f64> = (0..h).map(|y| re[y * w + x]).collect();
        let mut col_i: Vec<f64> = (0..h).map(|y| im[y * w + x]).collect();
        dft_1d(&mut col_r, &mut col_i, -1.0);
        for y in 0..h {
            re[y * w + x] = col_r[y];
            im[y * w + x] = col_i[y];
        }
    }
    (re, im)
}

/// Radially averaged energy spectrum of a [H, W] field.
///
/// The field mean is removed first, so a constant field yields an all-zero
/// spectrum. Energies are normalized so that `sum(count * energy)` equals
/// the field variance. Coefficients whose rounded radius exceeds
/// floor(min(H,W)/2) are folded into the top bin, keeping that identity
/// exact over the whole square spectral plane.
pub fn radial_spectrum(field: &FieldTensor) -> Result<EnergySpectrum> {
    let (h, w) = field.dims2()?;
    if h < 8 || w < 8 {
        return Err(Error::Dim(format!("radial_spectrum needs H,W >= 8, got {h}x{w}")));
    }
    field.check_finite("radial_spectrum input")?;
    let n = (h * w) as f64;
    let mut vals: Vec<f64> = field.data().iter().map(|&v| v as f64).collect();
    let mean = vals.iter().sum::<f64>() / n;
    for v in &mut vals {
        *v -= mean;
    }
    let (re, im) = dft_2d(&vals, h, w);
    let kmax = h.min(w) / 2;
    let mut sums = vec![0.0; kmax + 1];
    let mut counts = vec![0usize; kmax + 1];
    for y in 0..h {
        // signed frequency index
        let ky = if y <= h / 2 { y as f64 } else { y as f64 - h as f64 };
        for x in 0..w {
            if x == 0 && y == 0 {
                continue; // DC is the removed mean
            }
            let kx = if x <= w / 2 { x as f64 } else { x as f64 - w as f64 };
            let r = (kx * kx + ky * ky).sqrt();
            let bin = (r.round() as usize).min(kmax).max(1);
            let c = re[y * w + x];
            let s = im[y * w + x];
            sums[bin] += (c * c + s * s) / (n * n);
            counts[bin] += 1;
        }
    }
    let mut wavenumbers = Vec::with_capacity(kmax);
    let mut energy = Vec::with_capacity(kmax);
    let mut bin_counts = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        wavenumbers.push(k as f64);
        energy.push(if counts[k] > 0 { sums[k] / counts[k] as f64 } else { 0.0 });
        bin_counts.push(counts[k]);
    }
    Ok(EnergySpectrum { wavenumbers, energy, counts: bin_counts })
}

/// Arithmetic mean of per-member spectra.
pub fn ensemble_mean_spectrum(members: &[&FieldTensor]) -> Result<EnergySpectrum> {
    if members.is_empty() {
        return Err(Error::Contract("ensemble_mean_spectrum of zero members".into()));
    }
    let mut acc = radial_spectrum(members[0])?;
    for m in &members[1..] {
        let s = radial_spectrum(m)?;
        if s.wavenumbers.len() != acc.wavenumbers.len() {
            return Err(Error::Dim("ensemble members with mismatched spectra".into()));
        }
        for (a, e) in acc.energy.iter_mut().zip(&s.energy) {
            *a += e;
        }
    }
    let nf = members.len() as f64;
    for e in &mut acc.energy {
        *e /= nf;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    fn field_from_fn(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> FieldTensor {
        let data: Vec<f32> = (0..h * w).map(|i| f(i / w, i % w) as f32).collect();
        FieldTensor::new(vec![h, w], data).unwrap()
    }

    #[test]
    fn constant_field_zero_spectrum() {
        let f = FieldTensor::full(vec![16, 16], 3.25f32);
        let s = radial_spectrum(&f).unwrap();
        assert_eq!(s.wavenumbers.len(), 8);
        assert!(s.energy.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn pure_sinusoid_concentrates_in_its_bin() {
        let f = field_from_fn(64, 64, |_, x| {
            (2.0 * std::f64::consts::PI * 5.0 * x as f64 / 64.0).cos()
        });
        let s = radial_spectrum(&f).unwrap();
        let total = s.total_energy();
        let bin5 = s.energy[4] * s.counts[4] as f64;
        assert!(bin5 / total >= 0.99, "bin5 fraction {}", bin5 / total);
        // total energy equals the variance of cos = 1/2
        assert!((total - 0.5).abs() < 1e-3, "total {total}");
    }

    #[test]
    fn white_noise_parseval_and_flatness() {
        let mut rng = Rng::seeded(11);
        let mut total_ratio = 0.0;
        let trials = 100;
        let mut per_bin = vec![0.0; 16];
        for _ in 0..trials {
            let f = FieldTensor::gaussian(vec![32, 32], &mut rng);
            let n = f.numel() as f64;
            let mean = f.data().iter().map(|&v| v as f64).sum::<f64>() / n;
            let var = f.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
            let s = radial_spectrum(&f).unwrap();
            total_ratio += s.total_energy() / var;
            for (i, e) in s.energy.iter().enumerate() {
                per_bin[i] += e;
            }
        }
        // Parseval: binned energy equals variance (within MC/rounding noise)
        assert!((total_ratio / trials as f64 - 1.0).abs() < 0.02);
        // flat spectrum: every bin's mean energy is the same
        let expect = 1.0 / (32.0 * 32.0);
        for (i, &e) in per_bin.iter().enumerate() {
            let mean_e = e / trials as f64;
            assert!(
                (mean_e / expect - 1.0).abs() < 0.15,
                "bin {} mean {mean_e} vs {expect}",
                i + 1
            );
        }
    }

    #[test]
    fn circular_shift_invariance() {
        let mut rng = Rng::seeded(77);
        let f = FieldTensor::gaussian(vec![16, 16], &mut rng);
        let shifted = field_from_fn(16, 16, |y, x| f.data()[((y + 5) % 16) * 16 + (x + 11) % 16] as f64);
        let a = radial_spectrum(&f).unwrap();
        let b = radial_spectrum(&shifted).unwrap();
        for (x, y) in a.energy.iter().zip(&b.energy) {
            assert!((x - y).abs() < 1e-5, "{x} vs {y}");
        }
    }

    #[test]
    fn non_pow2_direct_transform_agrees_on_parseval() {
        let mut rng = Rng::seeded(5);
        let f = FieldTensor::gaussian(vec![12, 20], &mut rng);
        let n = f.numel() as f64;
        let mean = f.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = f.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let s = radial_spectrum(&f).unwrap();
        assert!((s.total_energy() / var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ensemble_mean_examples() {
        let mut rng = Rng::seeded(21);
        let a = FieldTensor::gaussian(vec![16, 16], &mut rng);
        // single member: identical to radial_spectrum
        let single = ensemble_mean_spectrum(&[&a]).unwrap();
        let direct = radial_spectrum(&a).unwrap();
        assert_eq!(single.energy, direct.energy);
        // identical members: unchanged
        let same = ensemble_mean_spectrum(&[&a, &a, &a]).unwrap();
        for (x, y) in same.energy.iter().zip(&direct.energy) {
            assert!((x - y).abs() < 1e-12);
        }
        // two members with disjoint single-mode spectra: half energy each
        let m3 = field_from_fn(16, 16, |_, x| {
            (2.0 * std::f64::consts::PI * 3.0 * x as f64 / 16.0).cos()
        });
        let m6 = field_from_fn(16, 16, |y, _| {
            (2.0 * std::f64::consts::PI * 6.0 * y as f64 / 16.0).cos()
        });
        let s3 = radial_spectrum(&m3).unwrap();
        let mix = ensemble_mean_spectrum(&[&m3, &m6]).unwrap();
        assert!((mix.energy[2] - s3.energy[2] / 2.0).abs() < 1e-9);
        let s6 = radial_spectrum(&m6).unwrap();
        assert!((mix.energy[5] - s6.energy[5] / 2.0).abs() < 1e-9);
    }

    #[test]
    fn too_small_field_rejected() {
        let f = FieldTensor::full(vec![4, 16], 0.0f32);
        assert!(radial_spectrum(&f).is_err());
    }

    #[test]
    fn upper_half_energy_splits_bins() {
        let low = field_from_fn(16, 16, |_, x| {
            (2.0 * std::f64::consts::PI * 2.0 * x as f64 / 16.0).cos()
        });
        let s = radial_spectrum(&low).unwrap();
        assert!(s.upper_half_energy() / s.total_energy() < 0.01);
        let high = field_from_fn(16, 16, |_, x| {
            (2.0 * std::f64::consts::PI * 7.0 * x as f64 / 16.0).cos()
        });
        let s = radial_spectrum(&high).unwrap();
        assert!(s.upper_half_energy() / s.total_energy() > 0.99);
    }
}
