//! Minimal boundary energy of maps of prescribed degree, by mesh refinement.

use flatchain::field::{homotopy_norm_estimate, Target};

fn main() {
    for (target, d) in [(Target::S1, 1), (Target::S1, 3), (Target::S2, 1), (Target::S2, -2)] {
        let e = homotopy_norm_estimate(target, d, 4, 1);
        let levels: Vec<String> = e.levels.iter().map(|v| format!("{v:.4}")).collect();
        println!("{target:?} degree {d}: {}", levels.join(" -> "));
    }
}
