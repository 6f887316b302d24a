//! Compare every analytic Jacobian block with central finite differences over
//! random configurations, then show that an injected sign error is caught.

use plslam::verify::{check_jacobians, Fault};

fn main() {
    let trials = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    let report = check_jacobians(trials, 0, 1e-5, None);
    print!("{report}");
    println!("analytic blocks: {}", if report.passed() { "PASS" } else { "FAIL" });

    let broken = check_jacobians(50, 0, 1e-5, Some(Fault::LinePoseRotationSign));
    println!(
        "with a flipped sign in the line pose Jacobian: {}",
        if broken.passed() { "not detected" } else { "detected" }
    );
}
