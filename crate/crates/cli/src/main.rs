fn main() {
    std::process::exit(covchol_cli::run(std::env::args_os()));
}
