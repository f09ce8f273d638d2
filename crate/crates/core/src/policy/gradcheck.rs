use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Above this many parameters only a random subset is checked.
pub const FULL_CHECK_LIMIT: usize = 4096;
pub const SUBSET_SIZE: usize = 256;
/// Floor on the relative-error denominator, so components whose true
/// gradient is ~0 are judged on absolute error.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub coordinates_checked: usize,
    pub passed: bool,
}

/// Compares the analytic gradient returned by `loss_fn` against central
/// differences, coordinate by coordinate. The error per coordinate is
/// `|analytic − numeric| / max(|analytic|, |numeric|, REL_FLOOR)`.
pub fn grad_check<F>(mut loss_fn: F, params: &[f64], tolerance: f64) -> GradCheck
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss_fn(params);
    let coords: Vec<usize> = if params.len() > FULL_CHECK_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(params.len() as u64);
        let mut idx = sample(&mut rng, params.len(), SUBSET_SIZE).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..params.len()).collect()
    };
    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for &i in &coords {
        let orig = probe[i];
        probe[i] = orig + FD_STEP;
        let (up, _) = loss_fn(&probe);
        probe[i] = orig - FD_STEP;
        let (down, _) = loss_fn(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    GradCheck { max_relative_error: worst, coordinates_checked: coords.len(), passed: worst < tolerance }
}
