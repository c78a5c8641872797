use clap::Parser;
use uav_wpcn_cli::app::{run, Args};

fn main() {
    let args = Args::parse();
    if let Err(e) = run(&args) {
        eprintln!("uav-wpcn: {e}");
        std::process::exit(e.exit_code());
    }
}
