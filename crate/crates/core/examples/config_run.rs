//! Loads an experiment from TOML, applies command-line style overrides and
//! runs two subcommands through the same path as the binary.

use kingman::app::{execute, Command};
use kingman::config::{parse_value, ExperimentConfig, OutputFormat};

const CONFIG: &str = r#"
[model]
h = 1.0
q = { family = "beta", params = [2.0, 3.0, 0.6], grid_points = 48 }

[law]
type = "beta"
params = { alpha = 2.0, gamma = 20.0 }

[sim]
seed = 17
replicas = 16
"#;

fn main() -> kingman::Result<()> {
    let table: toml::Table = toml::from_str(CONFIG).expect("valid TOML");
    let overrides = vec![("sim.n_steps".to_string(), parse_value("12"))];
    let cfg = ExperimentConfig::from_table(table, &overrides)?;

    let forward = execute(Command::Forward, &cfg)?;
    print!("{}", String::from_utf8_lossy(&forward.render(OutputFormat::Csv)?));
    let verdict = execute(Command::Classify, &cfg)?;
    println!("verdict: {}, reason: {}", verdict.json["verdict"], verdict.json["reason"]);
    Ok(())
}
