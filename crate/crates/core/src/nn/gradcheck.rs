//! Central-difference gradient checking.
//!
//! The checker lives permanently in-tree: it is the independent oracle for
//! every explicit adjoint in the crate. Only defined for the 64-bit path.

/// Finite-difference step, chosen so truncation (O(h^2)) and roundoff
/// (O(eps/h)) errors are both far below the pass tolerances.
pub const FD_STEP: f64 = 1e-5;

/// Pass thresholds fixed by the verification protocol.
pub const LAYER_TOLERANCE: f64 = 1e-4;
pub const MODEL_TOLERANCE: f64 = 1e-3;

/// Central differences of a scalar function at `x`, one coordinate at a time.
pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// `|a - n| / max(|a|, |n|, 1)`: relative for O(1) gradients, absolute for
/// small ones, so finite-difference noise near zero does not produce
/// spurious failures.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn new(tolerance: f64) -> Self {
        GradCheckReport {
            tolerance,
            entries: Vec::new(),
        }
    }

    pub fn record(&mut self, name: impl Into<String>, max_rel_err: f64) {
        let pass = max_rel_err < self.tolerance;
        self.entries.push(GradCheckEntry {
            name: name.into(),
            max_rel_err,
            pass,
        });
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_difference_on_quadratic() {
        // f(x) = sum x_i^2, grad = 2x
        let x = [0.5, -1.5, 2.0];
        let g = central_difference(
            &mut |t: &[f64]| t.iter().map(|v| v * v).sum(),
            &x,
            FD_STEP,
        );
        for (gi, xi) in g.iter().zip(&x) {
            assert!((gi - 2.0 * xi).abs() < 1e-9);
        }
    }

    #[test]
    fn corrupted_gradient_fails() {
        let analytic = [1.0, 2.0, 3.0];
        let corrupted = [2.0, 4.0, 6.0]; // x2 corruption
        assert!(max_relative_error(&analytic, &corrupted) > LAYER_TOLERANCE);
        let mut report = GradCheckReport::new(LAYER_TOLERANCE);
        report.record("bad", max_relative_error(&analytic, &corrupted));
        assert!(!report.passed());
    }

    #[test]
    fn report_passes_below_tolerance() {
        let mut report = GradCheckReport::new(LAYER_TOLERANCE);
        report.record("good", 1e-7);
        assert!(report.passed());
        assert_eq!(report.worst(), 1e-7);
    }
}
