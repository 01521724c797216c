//! Published reference values the reproduction targets are compared with.
//!
//! Noise levels are indexed LOW, MID, HIGH; populations All, B_up, D_up,
//! L_up. Juries are ordered best, average, worst.

use jury_core::clustering::Method;
use jury_core::model::AgentType;
use serde::Serialize;

/// Allowed distance between a reproduced MCS mean and its reference.
pub const MCS_TOLERANCE: f64 = 3.0;
/// Allowed distance between a reproduced misclassification mean and its
/// reference.
pub const MISCLASS_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub mean: f64,
    pub sd: f64,
}

const fn c(mean: f64, sd: f64) -> Cell {
    Cell { mean, sd }
}

const Z: Cell = c(0.0, 0.0);
const FULL: Cell = c(100.0, 0.0);

pub const NOISE_NAMES: [&str; 3] = ["LOW", "MID", "HIGH"];
pub const POPULATION_NAMES: [&str; 4] = ["All", "B_up", "D_up", "L_up"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Authentic,
    Inauthentic,
}

// [method][class][noise][population]
const TABLE2: [[[[Cell; 4]; 3]; 2]; 2] = [
    [
        [
            [c(0.04, 0.04), Z, Z, c(0.03, 0.05)],
            [c(0.11, 0.13), Z, c(0.0, 0.008), c(0.04, 0.03)],
            [c(0.5, 0.26), c(0.01, 0.02), c(0.01, 0.02), c(0.09, 0.06)],
        ],
        [
            [c(0.03, 0.03), c(0.13, 0.0), Z, Z],
            [c(0.04, 0.04), c(0.13, 0.0), Z, c(0.03, 0.12)],
            [c(0.35, 0.17), c(0.13, 0.002), Z, c(0.81, 0.11)],
        ],
    ],
    [
        [
            [c(0.2, 0.4), Z, Z, c(0.002, 0.006)],
            [c(0.07, 0.17), c(0.01, 0.03), c(0.0, 0.01), c(0.016, 0.016)],
            [c(0.31, 0.29), c(0.03, 0.004), c(0.05, 0.07), c(0.01, 0.03)],
        ],
        [
            [c(0.43, 0.28), c(0.13, 0.0), c(0.05, 0.06), c(0.0, 0.001)],
            [c(0.48, 0.12), c(0.13, 0.003), c(0.05, 0.06), c(0.06, 0.11)],
            [c(0.56, 0.16), c(0.13, 0.01), c(0.44, 0.41), c(0.97, 0.07)],
        ],
    ],
];

fn method_index(m: Method) -> usize {
    match m {
        Method::Gmm => 0,
        Method::KMeans => 1,
    }
}

/// Mean (SD) misclassification rate of a class of agents.
pub fn misclassification(method: Method, class: Class, noise: usize, population: usize) -> Cell {
    let ci = match class {
        Class::Authentic => 0,
        Class::Inauthentic => 1,
    };
    TABLE2[method_index(method)][ci][noise][population]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McsRow {
    pub base: Cell,
    pub gmm: [Cell; 3],
    pub km: [Cell; 3],
}

const fn row(base: Cell) -> McsRow {
    McsRow { base, gmm: [FULL; 3], km: [FULL; 3] }
}

// [population][filter: none, active][noise]
const TABLE3: [[[McsRow; 3]; 2]; 4] = [
    [
        [
            McsRow { base: c(66.21, 2.18), gmm: [FULL, FULL, c(92.41, 1.27)], km: [FULL, c(82.19, 1.98), c(64.21, 2.27)] },
            McsRow { base: c(75.12, 2.08), gmm: [FULL; 3], km: [c(100.0, 0.02), c(97.07, 0.77), c(92.99, 1.1)] },
            McsRow { base: c(98.37, 0.45), gmm: [FULL, FULL, c(99.90, 0.14)], km: [FULL, FULL, c(99.95, 0.1)] },
        ],
        [
            McsRow { base: c(74.83, 2.75), gmm: [FULL, FULL, c(89.84, 1.81)], km: [FULL, c(74.83, 2.75), c(74.83, 2.75)] },
            McsRow { base: c(75.41, 3.8), gmm: [FULL; 3], km: [c(99.99, 0.07), c(89.54, 2.8), c(78.43, 3.72)] },
            McsRow { base: c(94.18, 11.34), gmm: [FULL, FULL, c(91.02, 12.79)], km: [FULL, FULL, c(94.92, 10.74)] },
        ],
    ],
    [
        [row(c(81.11, 1.99)), row(c(87.50, 1.39)), row(c(97.58, 0.73))],
        [row(c(74.83, 2.75)), row(c(75.41, 3.8)), row(c(77.17, 21.54))],
    ],
    [
        [
            row(c(77.43, 2.18)),
            row(c(87.62, 1.6)),
            McsRow { base: c(97.59, 0.73), gmm: [FULL; 3], km: [FULL, c(99.89, 0.14), c(97.59, 0.73)] },
        ],
        [
            row(c(74.83, 2.75)),
            row(c(75.41, 3.8)),
            McsRow { base: c(77.17, 21.54), gmm: [FULL; 3], km: [FULL, c(99.20, 3.52), c(77.17, 21.54)] },
        ],
    ],
    [
        [row(c(74.94, 2.25)), row(c(99.98, 0.07)), row(FULL)],
        [row(c(74.93, 2.77)), row(c(99.99, 0.07)), row(FULL)],
    ],
];

/// Baseline and post-selection MCS; `active` selects the p2 = p3 = +1
/// round filter.
pub fn mcs(population: usize, active: bool, noise: usize) -> McsRow {
    TABLE3[population][active as usize][noise]
}

/// k-means false-negative rates of the booster and distorter types in the
/// mixed population at LOW noise, with 500 and with 250 evaluation rounds.
/// The Gaussian mixture misses none of them at either size.
pub const KM_FALSE_NEGATIVES: [(AgentType, f64, f64); 6] = [
    (AgentType::BoosterUp, 0.44, 0.56),
    (AgentType::BoosterDown, 0.39, 0.52),
    (AgentType::BoosterBoth, 0.37, 0.51),
    (AgentType::DistorterUp, 0.54, 0.68),
    (AgentType::DistorterDown, 0.39, 0.52),
    (AgentType::DistorterBoth, 0.24, 0.34),
];

/// Authentic-only juries of this size or more are essentially always right.
pub const CONDORCET_JURY: usize = 25;
pub const CONDORCET_MCS: f64 = 99.0;

/// One authentic agent against 100 up-boosters, judged on active rounds.
pub const HOSPITABLE_MCS: f64 = 75.0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups_follow_index_order() {
        assert_eq!(misclassification(Method::Gmm, Class::Authentic, 0, 0), c(0.04, 0.04));
        assert_eq!(misclassification(Method::KMeans, Class::Inauthentic, 2, 3), c(0.97, 0.07));
        assert_eq!(mcs(0, false, 0).gmm[2], c(92.41, 1.27));
        assert_eq!(mcs(2, true, 2).km[1], c(99.20, 3.52));
        assert_eq!(mcs(1, false, 0).base, c(81.11, 1.99));
    }
}
