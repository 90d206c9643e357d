//! Benchmark fixtures shared by the criterion targets.

use coopt::model::{AgentSpec, DomainSpec, ObjectiveSpec, PairwiseSpec, ProblemFile};
use coopt::{GameModel, Mode};

/// Fully connected pairwise energy model with deterministic pseudo-random tables.
pub fn pairwise_chain(agents: usize, cardinality: usize) -> GameModel {
    let value = |i: usize, j: usize, a: usize, b: usize| (((i * 31 + j * 17 + a * 7 + b * 3) % 11) as f64 - 5.0) / 5.0;
    let spec = ProblemFile {
        hbar: Some(0.5),
        mode: Mode::Energy,
        variables: (0..agents)
            .map(|k| DomainSpec { name: format!("v{k}"), cardinality })
            .collect(),
        agents: (0..agents)
            .map(|i| AgentSpec {
                name: format!("a{i}"),
                acts_on: format!("v{i}"),
                objective: ObjectiveSpec::Pairwise(
                    (0..agents)
                        .filter(|&j| j != i)
                        .map(|j| PairwiseSpec {
                            with: format!("v{j}"),
                            table: (0..cardinality)
                                .map(|a| (0..cardinality).map(|b| value(i, j, a, b)).collect())
                                .collect(),
                        })
                        .collect(),
                ),
            })
            .collect(),
    };
    GameModel::validate(spec).expect("fixture is valid")
}
