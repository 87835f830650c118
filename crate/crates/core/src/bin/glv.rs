use clap::Parser;

fn main() {
    let cli = gl_vortex::cli::Cli::parse();
    std::process::exit(gl_vortex::cli::main_with(cli));
}
