//! Fixtures shared by the criterion benchmarks.

use asymfilter_core::sde::simulate_perturbed;
use asymfilter_core::{NoiseSeed, PathPair, PerturbedLinearModel, TimeGrid};

/// Cubic sensor with `eps = 0.2` on `[0, horizon]`.
pub fn cubic_fixture(horizon: f64, dt: f64) -> (PerturbedLinearModel, TimeGrid, PathPair) {
    let model = PerturbedLinearModel::cubic_sensor(0.2);
    let grid = TimeGrid::on_interval(horizon, dt).expect("valid grid");
    let path =
        simulate_perturbed(&model, &grid, NoiseSeed::new(1, 0)).expect("simulation succeeds");
    (model, grid, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_spans_grid() {
        let (_, grid, path) = cubic_fixture(1.0, 0.01);
        assert_eq!(path.y.len(), grid.len());
    }
}
