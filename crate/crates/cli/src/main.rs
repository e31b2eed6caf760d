use clap::Parser;

fn main() {
    let cli = frontier_cli::Cli::parse();
    let code = frontier_cli::execute(&cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
