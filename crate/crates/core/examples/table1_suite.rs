//! A reduced benchmark sweep with CSV reports; pass `--full` for every
//! family, size and seed.

use expalign::benchmarks::Family;
use expalign::harness::{pretty_table, run_suite, write_reports, SuiteConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let full = std::env::args().any(|a| a == "--full");
    let config = if full {
        SuiteConfig::table1()
    } else {
        SuiteConfig {
            cells: Family::ALL
                .iter()
                .map(|&f| (f, f.table1_sizes()[0], f.table1_sizes()[0]))
                .collect(),
            seeds: vec![1, 2],
            ..SuiteConfig::table1()
        }
    };
    let result = run_suite(&config)?;
    let dir = std::env::temp_dir().join("expalign-suite");
    let summary = write_reports(&result.records, &dir)?;
    print!("{}", pretty_table(&summary));
    println!("{} runs, reports in {}", result.records.len(), dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
