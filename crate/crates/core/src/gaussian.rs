//! Closed-form model of the output state with Gaussian factors and phase
//! mismatch linearized around the centre frequencies.
//!
//! In coordinates x = (delta omega_s, delta omega_i, delta omega_FC) the
//! product f_JSA f_JCA is exp(-x^T A x / 2). Integrating out the idler leaves
//! f_eff = exp(-y^T M y / 2) with y = (delta omega_s, delta omega_FC). Purity,
//! indistinguishability and marginal widths follow from A and M. Every
//! quantity is invariant under a common rescaling of the four bandwidths
//! except the absolute widths, which scale linearly.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::spectra::BandwidthSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// d(Delta k_SPDC)/d(omega_s, omega_i), fs/µm.
    pub spdc_gradient: [f64; 2],
    /// d(Delta k_SFC)/d(omega_i, omega_FC), fs/µm.
    pub sfc_gradient: [f64; 2],
}

/// Amplitude standard deviations of the marginals of one amplitude (rad/fs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub axis1: f64,
    pub axis2: f64,
}

fn rank_one(v: Vector3<f64>, sigma: f64) -> Matrix3<f64> {
    v * v.transpose() / (sigma * sigma)
}

impl LinearModel {
    fn unit(g: [f64; 2]) -> (f64, f64) {
        let n = g[0].hypot(g[1]);
        (g[0] / n, g[1] / n)
    }

    pub fn spdc_gradient_norm(&self) -> f64 {
        self.spdc_gradient[0].hypot(self.spdc_gradient[1])
    }

    pub fn sfc_gradient_norm(&self) -> f64 {
        self.sfc_gradient[0].hypot(self.sfc_gradient[1])
    }

    fn jsa_terms(&self, bw: &BandwidthSet) -> Matrix3<f64> {
        let (a, b) = Self::unit(self.spdc_gradient);
        rank_one(Vector3::new(1.0, 1.0, 0.0), bw.sigma_p) + rank_one(Vector3::new(a, b, 0.0), bw.sigma_phi)
    }

    fn jca_terms(&self, bw: &BandwidthSet) -> Matrix3<f64> {
        let (c, d) = Self::unit(self.sfc_gradient);
        rank_one(Vector3::new(0.0, -1.0, 1.0), bw.sigma_e) + rank_one(Vector3::new(0.0, c, d), bw.sigma_psi)
    }

    /// Quadratic form A over (s, i, FC).
    pub fn joint_form(&self, bw: &BandwidthSet) -> Matrix3<f64> {
        self.jsa_terms(bw) + self.jca_terms(bw)
    }

    /// Quadratic form M of f_eff over (s, FC).
    pub fn output_form(&self, bw: &BandwidthSet) -> Matrix2<f64> {
        let a = self.joint_form(bw);
        let aii = a[(1, 1)];
        Matrix2::new(
            a[(0, 0)] - a[(0, 1)] * a[(1, 0)] / aii,
            a[(0, 2)] - a[(0, 1)] * a[(1, 2)] / aii,
            a[(2, 0)] - a[(2, 1)] * a[(1, 0)] / aii,
            a[(2, 2)] - a[(2, 1)] * a[(1, 2)] / aii,
        )
    }

    pub fn purity(&self, bw: &BandwidthSet) -> f64 {
        let m = self.output_form(bw);
        let r2 = m[(0, 1)] * m[(1, 0)] / (m[(0, 0)] * m[(1, 1)]);
        (1.0 - r2).max(0.0).sqrt()
    }

    pub fn indistinguishability(&self, bw: &BandwidthSet) -> f64 {
        let m = self.output_form(bw);
        let swapped = Matrix2::new(m[(1, 1)], m[(1, 0)], m[(0, 1)], m[(0, 0)]);
        let s = (m + swapped) * 0.5;
        (m.determinant() / s.determinant()).sqrt()
    }

    pub fn eta(&self, bw: &BandwidthSet) -> f64 {
        let v = self.purity(bw) * self.indistinguishability(bw);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }

    /// 1/e^2 half-width of the f_eff intensity marginal along omega_s.
    pub fn output_bandwidth(&self, bw: &BandwidthSet) -> Option<f64> {
        let m = self.output_form(bw);
        let inv = (m * 2.0).try_inverse()?;
        let v = inv[(0, 0)];
        (v > 0.0 && v.is_finite()).then(|| 2.0 * v.sqrt())
    }

    /// Narrowest amplitude width of f_eff over all directions.
    pub fn output_feature_width(&self, bw: &BandwidthSet) -> Option<f64> {
        let m = self.output_form(bw);
        let top = m.symmetric_eigenvalues().max();
        (top > 0.0 && top.is_finite()).then(|| 1.0 / top.sqrt())
    }

    /// Unit normals of the two phase-matching ridges, (s, i) and (i, FC).
    pub fn ridge_normals(&self) -> ([f64; 2], [f64; 2]) {
        let (a, b) = Self::unit(self.spdc_gradient);
        let (c, d) = Self::unit(self.sfc_gradient);
        ([a, b], [c, d])
    }

    fn marginals_of(form: Matrix2<f64>) -> Option<Marginals> {
        let inv = form.try_inverse()?;
        let (a, b) = (inv[(0, 0)], inv[(1, 1)]);
        (a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()).then(|| Marginals { axis1: a.sqrt(), axis2: b.sqrt() })
    }

    /// Marginal widths of f_JSA over (s, i).
    pub fn jsa_marginals(&self, bw: &BandwidthSet) -> Option<Marginals> {
        let a = self.jsa_terms(bw);
        Self::marginals_of(Matrix2::new(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]))
    }

    /// Marginal widths of f_JCA over (i, FC).
    pub fn jca_marginals(&self, bw: &BandwidthSet) -> Option<Marginals> {
        let a = self.jca_terms(bw);
        Self::marginals_of(Matrix2::new(a[(1, 1)], a[(1, 2)], a[(2, 1)], a[(2, 2)]))
    }

    /// Marginal widths of f_eff over (s, FC).
    pub fn output_marginals(&self, bw: &BandwidthSet) -> Option<Marginals> {
        Self::marginals_of(self.output_form(bw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn bw(a: [f64; 4]) -> BandwidthSet {
        BandwidthSet::from_array(a).unwrap()
    }

    /// Sample f_eff of the model on a grid by direct integration over i.
    fn sampled_output(model: &LinearModel, b: &BandwidthSet, n: usize, half: f64) -> DMatrix<f64> {
        let a = model.joint_form(b);
        let h = 2.0 * half / (n - 1) as f64;
        let ni = 4 * n;
        let hi = 4.0 * half;
        let di = 2.0 * hi / (ni - 1) as f64;
        DMatrix::from_fn(n, n, |p, q| {
            let s = -half + p as f64 * h;
            let f = -half + q as f64 * h;
            (0..ni)
                .map(|k| {
                    let i = -hi + k as f64 * di;
                    let x = Vector3::new(s, i, f);
                    (-0.5 * (x.transpose() * a * x)[(0, 0)]).exp()
                })
                .sum::<f64>()
                * di
        })
    }

    fn purity_of(m: &DMatrix<f64>) -> f64 {
        let s = m.clone().singular_values();
        let n2: f64 = s.iter().map(|v| v * v).sum();
        s.iter().map(|v| (v * v / n2).powi(2)).sum()
    }

    fn indist_of(m: &DMatrix<f64>) -> f64 {
        let num: f64 = m.iter().zip(m.transpose().iter()).map(|(a, b)| a * b).sum();
        num / m.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn closed_forms_match_sampled_output() {
        let model = LinearModel { spdc_gradient: [0.4, -0.7], sfc_gradient: [0.3, 0.5] };
        for b in [bw([1.0, 1.2, 0.8, 1.5]), bw([0.5, 2.0, 0.9, 1.1])] {
            let half = 6.0 * model.output_marginals(&b).unwrap().axis1.max(model.output_marginals(&b).unwrap().axis2);
            let m = sampled_output(&model, &b, 96, half);
            assert_relative_eq!(model.purity(&b), purity_of(&m), max_relative = 1e-4);
            assert_relative_eq!(model.indistinguishability(&b), indist_of(&m), max_relative = 1e-4);
            // output bandwidth from the sampled marginal
            let h = 2.0 * half / 95.0;
            let marg: Vec<f64> = (0..96).map(|p| m.row(p).iter().map(|v| v * v).sum()).collect();
            let tot: f64 = marg.iter().sum();
            let var: f64 = marg.iter().enumerate().map(|(p, w)| w * (-half + p as f64 * h).powi(2)).sum::<f64>() / tot;
            assert_relative_eq!(model.output_bandwidth(&b).unwrap(), 2.0 * var.sqrt(), max_relative = 1e-3);
        }
    }

    #[test]
    fn scale_invariance() {
        let model = LinearModel { spdc_gradient: [0.4, -0.7], sfc_gradient: [0.3, 0.5] };
        let b = bw([1.0, 1.2, 0.8, 1.5]);
        let s = b.scaled(3.7);
        assert_relative_eq!(model.purity(&b), model.purity(&s), max_relative = 1e-12);
        assert_relative_eq!(model.indistinguishability(&b), model.indistinguishability(&s), max_relative = 1e-12);
        assert_relative_eq!(
            model.output_bandwidth(&s).unwrap(),
            3.7 * model.output_bandwidth(&b).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn symmetric_design_is_ideal() {
        // ridges along the diagonal in both processes with matched widths
        let model = LinearModel { spdc_gradient: [1.0, -1.0], sfc_gradient: [1.0, 1.0] };
        let b = bw([1.0, 1.0, 1.0, 1.0]);
        assert!(model.indistinguishability(&b) > 1.0 - 1e-12);
        assert!(model.eta(&b) <= 1.0 + 1e-12);
    }
}
