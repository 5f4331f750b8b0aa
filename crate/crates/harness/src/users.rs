use nfbeam::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::UserRegion;
use crate::error::{HarnessError, Result};

/// Generator behind every user draw: `ChaCha8Rng::seed_from_u64(seed)` from
/// rand_chacha 0.9, sampling x then y with `random_range` over the region.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/seed_from_u64";

const MAX_TRIES_PER_USER: usize = 10_000;

/// Draws `count` users uniformly in `region`, redrawing any point that falls
/// inside an obstacle.
pub fn draw_users(scenario: &Scenario, region: &UserRegion, count: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    check_region(scenario, region)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut users = Vec::with_capacity(count);
    let mut tries = 0usize;
    while users.len() < count {
        tries += 1;
        if tries > MAX_TRIES_PER_USER * count.max(1) {
            return Err(HarnessError::Config("user region is almost entirely covered by obstacles".into()));
        }
        let x = rng.random_range(region.x_min..=region.x_max);
        let y = rng.random_range(region.y_min..=region.y_max);
        if !scenario.is_blocked(x, y) {
            users.push((x, y));
        }
    }
    Ok(users)
}

/// Points of an `nx` x `ny` lattice spanning `region` (x-major), with a flag
/// for points inside an obstacle.
pub fn lattice(scenario: &Scenario, region: &UserRegion, nx: usize, ny: usize) -> Result<Vec<((f64, f64), bool)>> {
    check_region(scenario, region)?;
    let at = |lo: f64, hi: f64, i: usize, n: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let p = (at(region.x_min, region.x_max, i, nx), at(region.y_min, region.y_max, j, ny));
            out.push((p, scenario.is_blocked(p.0, p.1)));
        }
    }
    Ok(out)
}

fn check_region(scenario: &Scenario, r: &UserRegion) -> Result<()> {
    let g = scenario.grid();
    if r.x_max > g.x_max || r.y_min < -g.y_halfspan || r.y_max > g.y_halfspan {
        return Err(HarnessError::Config(format!(
            "user region {r:?} exceeds the simulated scene (x_max {}, y_halfspan {})",
            g.x_max, g.y_halfspan
        )));
    }
    Ok(())
}
