use atomarray::hologram::*;
use atomarray::rng;
fn main() {
    let spec = SlmSpec::for_spacing(256, 8.0, 1.061, 7.2, 4);
    let t = TargetPattern::grid(20, 7.2); // 400 sites
    let res = simulate_closed_loop(&spec, &t, &FeedbackGains::default(), 30, 5, 0.512, 1.0, &mut rng::seeded(9)).unwrap();
    println!("{:?}", res.loading_rel_std);
}
