mod common;

use common::{grid, Oracle};
use tsge::swipt::geometry::expected_best_rate;
use tsge::swipt::{b_l, b_n, nearest_los_ccdf, nearest_nlos_ccdf, prob_best_is_los, GeometryMonteCarlo, SwiptScenario};

const N: usize = 100_000;

fn within(name: &str, exact: f64, mc: f64, se: f64) {
    assert!((exact - mc).abs() <= 3.0 * se + 1e-12, "{name}: closed form {exact}, Monte Carlo {mc}, s.e. {se}");
}

#[test]
fn desk_geometry_matches_an_independent_sampler() {
    let s = SwiptScenario::default();
    let mc = Oracle::run(&s, N, 77);
    let bl = b_l(&s);
    within("B_L", bl, mc.all_los, mc.se(bl));
    let pl = prob_best_is_los(&s).unwrap();
    within("P_L", pl, mc.best_los, mc.se(pl));
    for x in grid(&s, 20) {
        let los = nearest_los_ccdf(&s, x).unwrap();
        within(&format!("LOS CCDF at {x}"), los, Oracle::ccdf(&mc.nearest_los, x), mc.se(los));
        let nlos = nearest_nlos_ccdf(&s, x).unwrap();
        within(&format!("NLOS CCDF at {x}"), nlos, Oracle::ccdf(&mc.nearest_nlos, x), mc.se(nlos));
    }
    let rate = expected_best_rate(&s).unwrap();
    assert!((rate - mc.best_rate).abs() / rate < 0.02, "rate {rate} vs {}", mc.best_rate);
}

#[test]
fn heavy_blockage_geometry() {
    let s = SwiptScenario { blockage_rate: 0.1, num_devices: 4, ..SwiptScenario::default() };
    let mc = Oracle::run(&s, N, 5);
    let bn = b_n(&s);
    let all_nlos = mc.nearest_los.iter().filter(|d| d.is_infinite()).count() as f64 / N as f64;
    within("B_N", bn, all_nlos, mc.se(bn));
    let pl = prob_best_is_los(&s).unwrap();
    within("P_L", pl, mc.best_los, mc.se(pl));
}

#[test]
fn crate_sampler_agrees_with_the_oracle() {
    let s = SwiptScenario::default();
    let ours = GeometryMonteCarlo::run(&s, N, 3).unwrap();
    let theirs = Oracle::run(&s, N, 4);
    let se = (2.0f64).sqrt() * theirs.se(theirs.best_los);
    assert!((ours.best_is_los - theirs.best_los).abs() <= 4.0 * se);
    let se = (2.0f64).sqrt() * theirs.se(theirs.all_los);
    assert!((ours.all_los - theirs.all_los).abs() <= 4.0 * se);
}
