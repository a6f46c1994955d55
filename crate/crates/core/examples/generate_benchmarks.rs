//! One instance per grid family, with its JSON round trip.

use expalign::benchmarks::{deserialize, generate, serialize, CellKind};
use expalign::Family;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    for family in Family::ALL {
        let size = family.table1_sizes()[1];
        let inst = generate(family, size, size, 1)?;
        let layout = inst.layout.as_ref().expect("grids carry a layout");
        let mut grid = vec![vec!['.'; layout.width]; layout.height];
        for &(r, c, kind) in &layout.cells {
            grid[r][c] = match kind {
                CellKind::Wall => '#',
                CellKind::Goal => 'G',
                CellKind::Forbidden => 'X',
                CellKind::Walkway => 'w',
                CellKind::Puddle => '~',
                CellKind::Door => 'D',
                CellKind::Start => 'S',
                _ => '.',
            };
        }
        println!(
            "{} ({} states, {} expectations)",
            inst.name,
            inst.num_states(),
            inst.ground_truth.len()
        );
        for row in grid {
            println!("  {}", row.into_iter().collect::<String>());
        }
        let text = serialize(&inst);
        assert_eq!(deserialize(&text)?, inst);
        println!("  json: {} bytes", text.len());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
