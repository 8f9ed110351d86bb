//! Binary-coded super-arms and changed-arm identification.
//!
//! Arms carry 0-based codes `0..K`. Super-arm `k` (0-based bit index) holds
//! every arm whose code has bit `k` set, so the set of super-arms whose
//! observed mean moved spells out the code of the changed arm. Code 0 belongs
//! to no super-arm and is reported when the broadcast test fired but no
//! super-arm did.

use serde::{Deserialize, Serialize};

use super::thompson::ArmBelief;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperArm {
    /// 0-based bit index.
    pub bit: u32,
    pub members: Vec<usize>,
}

/// Builds the `log2(K)` super-arms for `K = 2^d` arms.
pub fn construct_super_arms(num_arms: usize) -> Result<Vec<SuperArm>> {
    if num_arms == 0 || !num_arms.is_power_of_two() {
        return invalid(format!("{num_arms} arms is not a power of two"));
    }
    let depth = num_arms.trailing_zeros();
    Ok((0..depth)
        .map(|bit| SuperArm {
            bit,
            members: (0..num_arms).filter(|i| (i >> bit) & 1 == 1).collect(),
        })
        .collect())
}

/// Mean of the member estimates for each super-arm.
pub fn super_arm_estimates(super_arms: &[SuperArm], beliefs: &[ArmBelief]) -> Vec<f64> {
    super_arms
        .iter()
        .map(|b| b.members.iter().map(|&i| beliefs[i].mu_hat).sum::<f64>() / b.members.len() as f64)
        .collect()
}

/// Code spelled by the super-arms whose observed mean deviates from the
/// estimate by at least `2 delta`.
pub fn ge_signature(estimates: &[f64], ge_means: &[f64], delta: f64) -> usize {
    estimates
        .iter()
        .zip(ge_means)
        .enumerate()
        .filter(|(_, (est, obs))| (*est - *obs).abs() >= 2.0 * delta)
        .fold(0, |code, (k, _)| code | (1 << k))
}

/// Identifies the changed arm from the group-exploration means.
///
/// `beliefs` must be the estimates from before the group plays.
pub fn ge_identify(super_arms: &[SuperArm], ge_means: &[f64], beliefs: &[ArmBelief], delta: f64) -> usize {
    let estimates = super_arm_estimates(super_arms, beliefs);
    ge_signature(&estimates, ge_means, delta)
}

/// Observations available when the changed arm is repaired.
#[derive(Debug, Clone, Copy)]
pub struct GeObservation<'a> {
    /// Average reward of each super-arm over its group plays.
    pub ge_means: &'a [f64],
    pub plays_per_super_arm: u64,
    /// Average broadcast reward of the probing phase that fired.
    pub bp_mean: f64,
    pub bp_plays: u64,
}

/// Re-estimates arm `j` and copies the Beta prior of its nearest neighbour.
///
/// Each super-arm containing `j` gives `|B_k| * mean(B_k) - sum of the
/// other members' estimates`; the estimates are averaged. Arm code 0 sits in
/// no super-arm and is solved from the broadcast mean instead. The prior is
/// copied from `argmin_{i != j} |mu_i - mu_j|` over the first `num_real`
/// arms, lowest index on ties. Returns the new estimate.
pub fn repair_changed_arm(
    beliefs: &mut [ArmBelief],
    num_real: usize,
    j: usize,
    super_arms: &[SuperArm],
    obs: &GeObservation<'_>,
) -> Result<f64> {
    let k = beliefs.len();
    if j >= k {
        return invalid(format!("arm {j} out of range for {k} arms"));
    }
    let others = |members: &mut dyn Iterator<Item = usize>| -> f64 {
        members.filter(|&i| i != j).map(|i| beliefs[i].mu_hat).sum()
    };

    let containing: Vec<&SuperArm> = super_arms.iter().filter(|b| (j >> b.bit) & 1 == 1).collect();
    let (estimate, weight) = if containing.is_empty() {
        let est = k as f64 * obs.bp_mean - others(&mut (0..k));
        (est, obs.bp_plays / k as u64)
    } else {
        let sum: f64 = containing
            .iter()
            .map(|b| {
                let size = b.members.len() as f64;
                size * obs.ge_means[b.bit as usize] - others(&mut b.members.iter().copied())
            })
            .sum();
        let size = containing[0].members.len() as u64;
        (
            sum / containing.len() as f64,
            containing.len() as u64 * obs.plays_per_super_arm / size,
        )
    };
    beliefs[j].reset_estimate(estimate, weight);

    let nearest = (0..num_real.min(k))
        .filter(|&i| i != j)
        .min_by(|&a, &b| {
            let da = (beliefs[a].mu_hat - estimate).abs();
            let db = (beliefs[b].mu_hat - estimate).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        });
    if let Some(n) = nearest {
        beliefs[j].alpha = beliefs[n].alpha;
        beliefs[j].beta = beliefs[n].beta;
    }
    Ok(estimate)
}
