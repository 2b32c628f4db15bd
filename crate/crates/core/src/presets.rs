//! Published two-class designs for `n = 100`, `g̃ = 0.5`, degrees `{2, 3, 8}`.

use crate::model::{ClassSpec, DegreeDistribution, ScenarioConfig};
use crate::optimizer::OptimizationProblem;

pub const FRAME_LENGTH: usize = 100;
pub const TARGET_LOAD: f64 = 0.5;
pub const DEGREES: [usize; 3] = [2, 3, 8];

/// One optimized design: class-1 share, PLR targets, coefficients on
/// `(x², x³, x⁸)` per class and the reported threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Design {
    pub label: &'static str,
    pub alpha1: f64,
    pub targets: (f64, f64),
    pub class1: [f64; 3],
    pub class2: [f64; 3],
    pub threshold: f64,
}

const fn row(
    label: &'static str,
    alpha1: f64,
    targets: (f64, f64),
    class1: [f64; 3],
    class2: [f64; 3],
    threshold: f64,
) -> Design {
    Design { label, alpha1, targets, class1, class2, threshold }
}

/// Rows `a1..a4` use `α_1 = 0.1`, rows `b1..b4` use `α_1 = 0.2`.
pub const TABLE1: [Design; 8] = [
    row("a1", 0.1, (1e-5, 1e-2), [0.0, 0.01, 0.99], [0.57, 0.30, 0.13], 0.94),
    row("a2", 0.1, (1e-4, 1e-3), [0.02, 0.11, 0.87], [0.25, 0.66, 0.09], 0.89),
    row("a3", 0.1, (1e-5, 1e-3), [0.0, 0.01, 0.99], [0.25, 0.67, 0.08], 0.89),
    row("a4", 0.1, (1e-5, 1e-4), [0.01, 0.0, 0.99], [0.04, 0.51, 0.45], 0.72),
    row("b1", 0.2, (1e-5, 1e-2), [0.0, 0.01, 0.99], [0.64, 0.33, 0.03], 0.94),
    row("b2", 0.2, (1e-4, 1e-3), [0.0, 0.25, 0.75], [0.26, 0.72, 0.02], 0.89),
    row("b3", 0.2, (1e-5, 1e-3), [0.0, 0.01, 0.99], [0.27, 0.73, 0.0], 0.88),
    row("b4", 0.2, (1e-5, 1e-4), [0.02, 0.02, 0.96], [0.0, 0.63, 0.37], 0.72),
];

/// Looks a row up by label (`"a1"` .. `"b4"`).
pub fn design(label: &str) -> Option<&'static Design> {
    TABLE1.iter().find(|d| d.label == label)
}

fn dist(coeffs: [f64; 3]) -> DegreeDistribution {
    let pairs: Vec<(usize, f64)> = DEGREES.iter().copied().zip(coeffs).collect();
    DegreeDistribution::from_pairs(&pairs).expect("preset coefficients sum to one")
}

impl Design {
    pub fn classes(&self) -> Vec<ClassSpec> {
        vec![
            ClassSpec::new(self.alpha1, dist(self.class1)).with_target(self.targets.0),
            ClassSpec::new(1.0 - self.alpha1, dist(self.class2)).with_target(self.targets.1),
        ]
    }

    pub fn scenario(&self, g: f64) -> ScenarioConfig {
        ScenarioConfig::new(FRAME_LENGTH, g, self.classes())
    }

    /// The design problem this row answers.
    pub fn problem(&self) -> OptimizationProblem {
        OptimizationProblem::two_class(FRAME_LENGTH, TARGET_LOAD, self.alpha1, self.targets)
    }
}
