//! Regenerates the frozen prompt snapshot used by `tests/prompt_golden.rs`:
//!
//! ```console
//! cargo run -p dualmem --example gen_golden > crates/core/tests/data/prompt_golden.txt
//! ```
//!
//! Only do this after deliberately changing the prompt layout, and review
//! the diff by hand.

use dualmem::prompt::{build_prompt, PromptBundle};
use dualmem::scene_graph::ObjectAttributes;
use dualmem::short_term::{render_unit_text, ObjectState};
use dualmem::{Position, SceneGraph};

fn main() {
    let units = vec![
        render_unit_text("Tomato", &Position::new(0.98, 1.72, -2.61), ObjectState::None),
        render_unit_text("Apple", &Position::new(1.10, 0.96, -2.41), ObjectState::Cleaned),
    ];
    let mut graph = SceneGraph::new();
    graph
        .add_area("node_1", Position::new(2.34, 0.0, 2.23), None)
        .unwrap();
    graph
        .add_area("node_2", Position::new(5.10, 0.0, 2.00), None)
        .unwrap();
    graph
        .add_area("node_8", Position::new(1.20, 0.0, 6.40), None)
        .unwrap();
    for (name, x, z) in [("bed", 2.0, 2.0), ("table", 2.5, 2.5), ("window", 2.4, 1.9)] {
        graph
            .add_object(
                "node_1",
                name,
                ObjectAttributes {
                    position: Position::new(x, 0.0, z),
                    volume: None,
                },
            )
            .unwrap();
    }
    graph
        .add_object(
            "node_2",
            "sink",
            ObjectAttributes {
                position: Position::new(5.0, 0.9, 2.1),
                volume: Some(0.04),
            },
        )
        .unwrap();
    graph.add_edge("node_1", "node_2").unwrap();
    graph.add_edge("node_1", "node_8").unwrap();
    let bundle = PromptBundle::with_defaults(
        "Bring the tomato to the sink.",
        units,
        graph.serialize_to_prompt(),
    );
    print!("{}", build_prompt(&bundle).unwrap());
}
