use clap::Parser;

use snn_dlbp_cli::args::{Command, ReportFormat};
use snn_dlbp_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let text = matches!(&cli.command, Command::Classify(a) if a.report == ReportFormat::Text);
    match run(cli) {
        Ok(report) if text => {
            for (k, v) in report.results.as_object().into_iter().flatten() {
                println!("{k}: {v}");
            }
        }
        Ok(report) => match report.to_json() {
            Ok(json) => println!("{json}"),
            Err(e) => {
                eprintln!("error: {e:#}");
                std::process::exit(1);
            }
        },
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
