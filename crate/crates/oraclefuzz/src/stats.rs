//! Rank statistics for the evaluation harness: Vargha-Delaney A12 effect
//! size and the Mann-Whitney U test with a normal-approximation p-value.
//!
//! A12 and U are computed over integer samples and returned as exact
//! rationals, so equality assertions in tests are meaningful. Only the
//! p-value goes through floating point.

use num_rational::Ratio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("statistics need non-empty samples")]
pub struct EmptySample;

/// Probability that a value drawn from `x` exceeds one drawn from `y`,
/// counting ties as half. 0.5 means no effect; 0.71 is the conventional
/// "large" threshold.
pub fn compute_a12(x: &[u64], y: &[u64]) -> Result<Ratio<u64>, EmptySample> {
    if x.is_empty() || y.is_empty() {
        return Err(EmptySample);
    }
    let mut wins = 0u64;
    let mut ties = 0u64;
    for &a in x {
        for &b in y {
            if a > b {
                wins += 1;
            } else if a == b {
                ties += 1;
            }
        }
    }
    // (wins + ties/2) / (nx*ny), kept integral by doubling both sides.
    Ok(Ratio::new(2 * wins + ties, 2 * (x.len() as u64) * (y.len() as u64)))
}

/// Mann-Whitney U statistic for `x` (midrank treatment of ties) and the
/// two-sided p-value from the normal approximation with tie-corrected
/// variance and a 0.5 continuity correction.
pub fn compute_mwu(x: &[u64], y: &[u64]) -> Result<(Ratio<u64>, f64), EmptySample> {
    if x.is_empty() || y.is_empty() {
        return Err(EmptySample);
    }
    let nx = x.len() as u64;
    let ny = y.len() as u64;
    let n = nx + ny;

    let mut combined: Vec<(u64, bool)> = x
        .iter()
        .map(|&v| (v, true))
        .chain(y.iter().map(|&v| (v, false)))
        .collect();
    combined.sort_unstable();

    // Rank sum for x with midranks, scaled by 2 to stay integral: a tie
    // group occupying ranks i+1..=i+t contributes midrank (2i + t + 1)/2.
    let mut rank_sum_x_2 = 0u64;
    let mut tie_cubes = 0u64;
    let mut i = 0usize;
    while i < combined.len() {
        let mut j = i;
        let mut x_count = 0u64;
        while j < combined.len() && combined[j].0 == combined[i].0 {
            if combined[j].1 {
                x_count += 1;
            }
            j += 1;
        }
        let t = (j - i) as u64;
        rank_sum_x_2 += x_count * (2 * (i as u64) + t + 1);
        tie_cubes += t * t * t - t;
        i = j;
    }
    // U_x = R_x - nx(nx+1)/2.
    let u2 = rank_sum_x_2 - nx * (nx + 1);
    let u_x = Ratio::new(u2, 2);

    let mean = nx as f64 * ny as f64 / 2.0;
    let correction = if n > 1 {
        tie_cubes as f64 / ((n as f64) * (n as f64 - 1.0))
    } else {
        0.0
    };
    let var = nx as f64 * ny as f64 / 12.0 * ((n as f64 + 1.0) - correction);
    if var <= 0.0 {
        // All observations identical: U is exactly its mean, no evidence.
        return Ok((u_x, 1.0));
    }
    let u_f = u2 as f64 / 2.0;
    let z = ((u_f - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok((u_x, p))
}

/// Complementary error function, fractional error below 1.2e-7 everywhere
/// (rational Chebyshev fit on t = 1/(1 + |x|/2)).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587
                                    + t * (-0.82215223 + t * 0.17087277))))))));
    let approx = t * poly.exp();
    if x >= 0.0 {
        approx
    } else {
        2.0 - approx
    }
}
