use clap::Parser;

fn main() {
    let cli = lpplab_cli::Cli::parse();
    match lpplab_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
