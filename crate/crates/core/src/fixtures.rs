//! Small named diagrams used by tests, docs and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagram::{DiagramBuilder, InfluenceDiagram};
use crate::generate::random_distribution;

/// One weather variable, one decision, no observation.
/// `P(rain) = 0.3`; utility 1 when the umbrella matches the weather.
pub fn umbrella() -> InfluenceDiagram {
    umbrella_with(&[])
}

/// As [`umbrella`], with the weather observed before deciding.
pub fn umbrella_observed() -> InfluenceDiagram {
    umbrella_with(&["w"])
}

fn umbrella_with(decision_parents: &[&str]) -> InfluenceDiagram {
    DiagramBuilder::new()
        .random("w", &["rain", "sun"], &[], &[0.3, 0.7])
        .decision("d", &["take", "leave"], decision_parents)
        // (rain,take) (rain,leave) (sun,take) (sun,leave)
        .value("v", &["w", "d"], &[1.0, 0.0, 0.0, 1.0])
        .build()
        .expect("umbrella is well formed")
}

/// Extended oil wildcatter, unsmoothed: `seismic-structure` feeds
/// `test-result`, which `drill` observes. Probabilities and sales figures are
/// drawn from `seed`; costs are fixed.
pub fn wildcatter(seed: u64) -> InfluenceDiagram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dist = |rows: usize, card: usize| -> Vec<f64> {
        (0..rows).flat_map(|_| random_distribution(&mut rng, card)).collect()
    };
    let structure = dist(1, 3);
    let underground = dist(3, 3);
    let result = dist(2 * 3, 3);
    let mut produced = dist(3 * 2, 3);
    // nothing is produced without drilling
    for underground in 0..3 {
        produced[underground * 6..underground * 6 + 3].copy_from_slice(&[1.0, 0.0, 0.0]);
    }
    let market = dist(1, 2);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    // oil-produced × market-information × oil-sale-policy
    let mut sales = Vec::with_capacity(12);
    for produced in 0..3 {
        for market in 0..2 {
            for sell in 0..2 {
                let volume = [0.0, 60.0, 150.0][produced];
                let price = [0.8, 1.4][market] + rng.gen_range(-0.2..0.2);
                let channel = if sell == 1 { 1.0 } else { 0.75 };
                sales.push((volume * price * channel * 100.0_f64).round() / 100.0);
            }
        }
    }

    DiagramBuilder::new()
        .decision("test", &["no-test", "seismic"], &[])
        .value("test-cost", &["test"], &[0.0, -10.0])
        .random("seismic-structure", &["none", "open", "closed"], &[], &structure)
        .random(
            "oil-underground",
            &["dry", "wet", "soaking"],
            &["seismic-structure"],
            &underground,
        )
        .random(
            "test-result",
            &["none", "open", "closed"],
            &["test", "seismic-structure"],
            &result,
        )
        .decision("drill", &["no", "yes"], &["test", "test-result"])
        .value("drill-cost", &["drill"], &[0.0, -70.0])
        .random(
            "oil-produced",
            &["none", "low", "high"],
            &["oil-underground", "drill"],
            &produced,
        )
        .random("market-information", &["weak", "strong"], &[], &market)
        .decision(
            "oil-sale-policy",
            &["broker", "direct"],
            &["oil-produced", "market-information"],
        )
        .value(
            "oil-sales",
            &["oil-produced", "market-information", "oil-sale-policy"],
            &sales,
        )
        .value("sale-cost", &["oil-sale-policy"], &[-2.0, -15.0])
        .build()
        .expect("wildcatter is well formed")
}
