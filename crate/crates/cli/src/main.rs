use clap::Parser;

fn main() {
    let cli = sidesynth::Cli::parse();
    match sidesynth::run(&cli) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(sidesynth::exit_code(&e));
        }
    }
}
